"""Embedding tables, initialization, scoring functions, and their gradients."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ModelKind(str, Enum):
    TRANSE_L1 = "transe-l1"
    TRANSE_L2 = "transe-l2"
    DISTMULT = "distmult"
    COMPLEX = "complex"

    @property
    def row_width_factor(self) -> int:
        # ComplEx rows interleave k real then k imaginary components.
        return 2 if self is ModelKind.COMPLEX else 1


@dataclass
class EmbeddingModel:
    """Model kind plus dense entity/relation tables of shape (n, d).

    d equals k for the real-valued models and 2k for ComplEx, whose rows
    store the k real components followed by the k imaginary ones.
    """

    kind: ModelKind
    k: int
    entity_table: np.ndarray
    relation_table: np.ndarray

    @property
    def n_entities(self) -> int:
        return self.entity_table.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_table.shape[0]

    @property
    def width(self) -> int:
        return self.entity_table.shape[1]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            self.kind, self.k, self.entity_table.copy(), self.relation_table.copy()
        )


def init_model(
    kind: ModelKind | str,
    k: int,
    n_entities: int,
    n_relations: int,
    seed: int | np.random.SeedSequence,
) -> EmbeddingModel:
    """Initialize tables i.i.d. uniform in [-6/sqrt(k), +6/sqrt(k)], seeded."""
    kind = ModelKind(kind)
    if k < 1:
        raise ValueError("embedding dimensionality must be >= 1")
    if n_entities < 1 or n_relations < 1:
        raise ValueError("vocabularies must be nonempty")
    rng = np.random.default_rng(seed)
    width = k * kind.row_width_factor
    bound = 6.0 / np.sqrt(k)
    entity = rng.uniform(-bound, bound, size=(n_entities, width))
    relation = rng.uniform(-bound, bound, size=(n_relations, width))
    return EmbeddingModel(kind, k, entity, relation)


def _complex_parts(rows: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    return rows[..., :k], rows[..., k:]


def score_rows(kind: ModelKind, k: int, es: np.ndarray, rp: np.ndarray, eo: np.ndarray) -> np.ndarray:
    """Score triples given their embedding rows; broadcasts over leading axes.

    TransE-Ln: -||es + rp - eo||_n.  DistMult: sum(es * rp * eo).
    ComplEx:  Re(sum(es * rp * conj(eo))) on the (real, imag) split rows.
    """
    if kind is ModelKind.TRANSE_L1:
        return -np.abs(es + rp - eo).sum(axis=-1)
    if kind is ModelKind.TRANSE_L2:
        d = es + rp - eo
        return -np.sqrt((d * d).sum(axis=-1))
    if kind is ModelKind.DISTMULT:
        # grouped (es*eo)*rp so score(s,p,o) == score(o,p,s) bitwise
        return (es * eo * rp).sum(axis=-1)
    a, b = _complex_parts(es, k)
    c, d = _complex_parts(rp, k)
    e, f = _complex_parts(eo, k)
    # grouped to reduce to the DistMult product exactly when b = d = f = 0
    return (a * e * c - b * e * d + a * f * d + b * f * c).sum(axis=-1)


def score_grad_rows(
    kind: ModelKind, k: int, es: np.ndarray, rp: np.ndarray, eo: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Scores plus the gradients of each score w.r.t. its three rows.

    For TransE-L2 the gradient at an exact translation (zero residual) is the
    zero vector by convention.  TransE-L1 uses the sign subgradient.
    """
    if kind is ModelKind.TRANSE_L1:
        d = es + rp - eo
        f = -np.abs(d).sum(axis=-1)
        sg = np.sign(d)
        return f, -sg, -sg.copy(), sg.copy()
    if kind is ModelKind.TRANSE_L2:
        d = es + rp - eo
        norm = np.sqrt((d * d).sum(axis=-1))
        safe = np.where(norm == 0.0, 1.0, norm)
        unit = np.where(norm[..., None] == 0.0, 0.0, d / safe[..., None])
        return -norm, -unit, -unit.copy(), unit.copy()
    if kind is ModelKind.DISTMULT:
        f = (es * eo * rp).sum(axis=-1)
        return f, rp * eo, es * eo, es * rp
    a, b = _complex_parts(es, k)
    c, d = _complex_parts(rp, k)
    e, f_im = _complex_parts(eo, k)
    score = (a * e * c - b * e * d + a * f_im * d + b * f_im * c).sum(axis=-1)
    g_es = np.concatenate([c * e + d * f_im, -d * e + c * f_im], axis=-1)
    g_rp = np.concatenate([a * e + b * f_im, -b * e + a * f_im], axis=-1)
    g_eo = np.concatenate([a * c - b * d, a * d + b * c], axis=-1)
    return score, g_es, g_rp, g_eo


def score_many(
    model: EmbeddingModel, s: np.ndarray, p: np.ndarray, o: np.ndarray
) -> np.ndarray:
    """Vectorized scores for parallel id arrays (broadcast-compatible)."""
    s, p, o = np.broadcast_arrays(s, p, o)
    es = model.entity_table[s]
    rp = model.relation_table[p]
    eo = model.entity_table[o]
    return score_rows(model.kind, model.k, es, rp, eo)


def score(model: EmbeddingModel, t: tuple[int, int, int]) -> float:
    """Plausibility score for one triple."""
    s, p, o = t
    return float(
        score_rows(
            model.kind,
            model.k,
            model.entity_table[s],
            model.relation_table[p],
            model.entity_table[o],
        )
    )


def score_gradients(
    model: EmbeddingModel, t: tuple[int, int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of score(t) w.r.t. the subject, predicate, and object rows."""
    s, p, o = t
    _, g_es, g_rp, g_eo = score_grad_rows(
        model.kind,
        model.k,
        model.entity_table[s],
        model.relation_table[p],
        model.entity_table[o],
    )
    return g_es, g_rp, g_eo
