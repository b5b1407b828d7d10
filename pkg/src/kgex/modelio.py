"""Binary model persistence with vocabulary sidecar files.

Layout: magic `KGEX1`, then kind tag, k, |E|, |R| as unsigned 64-bit
little-endian, then the entity and relation tables as row-major
little-endian float64.  Vocabularies travel in `<path>.entities.tsv` and
`<path>.relations.tsv` sidecars.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .graph import Vocabulary
from .models import EmbeddingModel, ModelKind

MAGIC = b"KGEX1"

_KIND_TAGS = {
    ModelKind.TRANSE_L1: 1,
    ModelKind.TRANSE_L2: 2,
    ModelKind.DISTMULT: 3,
    ModelKind.COMPLEX: 4,
}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


class ModelFormatError(ValueError):
    """Raised for bad magic, unknown kind tags, or truncated model files."""


def entity_sidecar(path: str | Path) -> Path:
    return Path(str(path) + ".entities.tsv")


def relation_sidecar(path: str | Path) -> Path:
    return Path(str(path) + ".relations.tsv")


def save_model(
    model: EmbeddingModel,
    path: str | Path,
    entity_vocab: Vocabulary | None = None,
    relation_vocab: Vocabulary | None = None,
) -> None:
    """Write the model file and, when vocabularies are given, the sidecars."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            struct.pack(
                "<4Q",
                _KIND_TAGS[model.kind],
                model.k,
                model.n_entities,
                model.n_relations,
            )
        )
        fh.write(np.ascontiguousarray(model.entity_table, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.relation_table, dtype="<f8").tobytes())
    if entity_vocab is not None:
        entity_vocab.dump(entity_sidecar(path))
    if relation_vocab is not None:
        relation_vocab.dump(relation_sidecar(path))


def load_model(
    path: str | Path,
) -> tuple[EmbeddingModel, Vocabulary | None, Vocabulary | None]:
    """Read a model file; sidecar vocabularies are returned when present."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic; not a model file")
    header_end = len(MAGIC) + 32
    if len(blob) < header_end:
        raise ModelFormatError(f"{path}: truncated header")
    tag, k, n_entities, n_relations = struct.unpack("<4Q", blob[len(MAGIC) : header_end])
    if tag not in _TAG_KINDS:
        raise ModelFormatError(f"{path}: unknown model kind tag {tag}")
    kind = _TAG_KINDS[tag]
    width = k * kind.row_width_factor
    ent_bytes = n_entities * width * 8
    rel_bytes = n_relations * width * 8
    expected = header_end + ent_bytes + rel_bytes
    if len(blob) != expected:
        raise ModelFormatError(
            f"{path}: expected {expected} bytes, found {len(blob)} (truncated or trailing data)"
        )
    entity = np.frombuffer(
        blob, dtype="<f8", count=n_entities * width, offset=header_end
    ).reshape(n_entities, width).astype(np.float64)
    relation = np.frombuffer(
        blob, dtype="<f8", count=n_relations * width, offset=header_end + ent_bytes
    ).reshape(n_relations, width).astype(np.float64)
    model = EmbeddingModel(kind=kind, k=int(k), entity_table=entity, relation_table=relation)

    ev_path, rv_path = entity_sidecar(path), relation_sidecar(path)
    entity_vocab = Vocabulary.load(ev_path) if ev_path.exists() else None
    relation_vocab = Vocabulary.load(rv_path) if rv_path.exists() else None
    return model, entity_vocab, relation_vocab
