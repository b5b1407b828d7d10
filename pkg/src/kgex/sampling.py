"""Subgraph samplers around a target triple.

Both methods start from the 1-hop neighborhood of the target's subject and
object.  Predicate-neighborhood sampling additionally unions the 1-hop
neighborhoods of n same-predicate triples drawn with replacement; random-walk
sampling appends the triples visited by an n-step naive walk that hops from
the current triple's endpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import KnowledgeGraph, Triple, one_hop_positions

logger = logging.getLogger(__name__)


@dataclass
class SubgraphSpec:
    method: str  # "pn" or "rw"
    n: int
    seed: int | None = None  # None lets the caller derive one

    def validate(self) -> None:
        if self.method not in ("pn", "rw"):
            raise ValueError(f"unknown sampling method {self.method!r}")
        if self.n < 0:
            raise ValueError("neighbor/step count must be >= 0")


@dataclass
class Subgraph:
    """Sampled triple subset plus the provenance needed to reproduce it."""

    positions: np.ndarray  # sorted positions into the source graph
    source: KnowledgeGraph
    target: Triple
    spec: SubgraphSpec
    steps_taken: int | None = None  # random walk only;< n when the walk died
    _triples: list[Triple] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def triples(self) -> list[Triple]:
        if self._triples is None:
            self._triples = [self.source.triple_at(int(p)) for p in self.positions]
        return self._triples

    def triple_array(self) -> np.ndarray:
        return self.source.triples[self.positions]

    def entities(self) -> np.ndarray:
        """Sorted unique entity ids occurring in the sampled triples."""
        if len(self.positions) == 0:
            return np.empty(0, dtype=np.int64)
        return np.unique(self.triple_array()[:, [0, 2]])


def sample_pn(
    g: KnowledgeGraph, target: Triple, n: int, rng: np.random.Generator
) -> Subgraph:
    """Predicate-neighborhood sampling.

    Unions the target endpoints' 1-hop neighborhood with the neighborhoods of
    n triples sharing the target's predicate, drawn uniformly with
    replacement.  If the predicate has no triples the 1-hop neighborhood is
    returned with a warning.
    """
    s, p, o = target
    positions = one_hop_positions(g, s, o)
    predicate_pool = g.predicate_positions(p)
    if n > 0 and len(predicate_pool) == 0:
        logger.warning(
            "predicate %d has no triples; subgraph falls back to the 1-hop neighborhood", p
        )
    elif n > 0:
        for _ in range(n):
            pos = int(predicate_pool[rng.integers(len(predicate_pool))])
            s_hat, _, o_hat = g.triple_at(pos)
            positions = np.union1d(positions, one_hop_positions(g, s_hat, o_hat))
    return Subgraph(
        positions=positions,
        source=g,
        target=target,
        spec=SubgraphSpec(method="pn", n=n),
    )


def sample_rw(
    g: KnowledgeGraph, target: Triple, n: int, rng: np.random.Generator
) -> Subgraph:
    """Random-walk sampling.

    Starts the walk at the target triple; each step draws uniformly from the
    1-hop neighborhood of the current triple's endpoints, adds the draw, and
    makes it the new origin.  An isolated origin terminates the walk early.
    """
    s, p, o = target
    positions = one_hop_positions(g, s, o)
    origin = target
    steps = 0
    for _ in range(n):
        neighborhood = one_hop_positions(g, origin[0], origin[2])
        if len(neighborhood) == 0:
            break
        pos = int(neighborhood[rng.integers(len(neighborhood))])
        positions = np.union1d(positions, [pos])
        origin = g.triple_at(pos)
        steps += 1
    return Subgraph(
        positions=positions,
        source=g,
        target=target,
        spec=SubgraphSpec(method="rw", n=n),
        steps_taken=steps,
    )


def sample_subgraph(g: KnowledgeGraph, target: Triple, spec: SubgraphSpec) -> Subgraph:
    """Dispatch on the spec's method with a generator seeded from the spec."""
    spec.validate()
    if spec.seed is None:
        raise ValueError("subgraph spec needs a concrete seed")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    if spec.method == "pn":
        sub = sample_pn(g, target, spec.n, rng)
    else:
        sub = sample_rw(g, target, spec.n, rng)
    sub.spec = SubgraphSpec(spec.method, spec.n, spec.seed)
    return sub


def write_subgraph_tsv(sub: Subgraph, path: str | Path) -> None:
    """Dump sampled triples as labels, with `#` provenance header lines."""
    g = sub.source
    s, p, o = sub.target
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# subgraph method={sub.spec.method} n={sub.spec.n} seed={sub.spec.seed}\n"
        )
        fh.write(
            "# target\t{}\t{}\t{}\n".format(
                g.entity_vocab.label_of(s), g.relation_vocab.label_of(p), g.entity_vocab.label_of(o)
            )
        )
        fh.write(f"# triples\t{len(sub)}\n")
        for ts, tp, to in sub.triples:
            fh.write(
                f"{g.entity_vocab.label_of(ts)}\t{g.relation_vocab.label_of(tp)}\t{g.entity_vocab.label_of(to)}\n"
            )


def read_subgraph_tsv(path: str | Path, entity_vocab, relation_vocab) -> list[Triple]:
    """Read a subgraph TSV back into id triples, skipping `#` header lines."""
    from .graph import GraphFormatError

    triples: list[Triple] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise GraphFormatError(f"{path}:{lineno}: expected 3 columns")
            s_lbl, p_lbl, o_lbl = parts
            triples.append(
                (entity_vocab.id_of(s_lbl), relation_vocab.id_of(p_lbl), entity_vocab.id_of(o_lbl))
            )
    return triples
