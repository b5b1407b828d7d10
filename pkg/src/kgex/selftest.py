"""Built-in invariant checks, runnable without test infrastructure."""

from __future__ import annotations

import math

import numpy as np

from . import distill, evaluation, focuse, losses, models, sampling, training
from .graph import build_filter, graph_from_triples, one_hop_neighborhood, predicate_triples
from .optim import SparseAdam

_DEMO_TRIPLES = [(0, 0, 1), (1, 0, 2), (0, 1, 2), (3, 0, 0), (2, 1, 3)]


def _demo_graph():
    from .graph import Vocabulary

    ev, rv = Vocabulary(), Vocabulary()
    for label in "ABCD":
        ev.add(label)
    for label in ("r1", "r2"):
        rv.add(label)
    return graph_from_triples(_DEMO_TRIPLES, ev, rv)


def _check_graph_indices() -> str | None:
    g = _demo_graph()
    for e in range(4):
        from_index = one_hop_neighborhood(g, e, e)
        by_scan = {t for t in map(tuple, _DEMO_TRIPLES) if e in (t[0], t[2])}
        if from_index != by_scan:
            return f"entity {e}: index {from_index} != scan {by_scan}"
    for p in range(2):
        if predicate_triples(g, p) != {t for t in map(tuple, _DEMO_TRIPLES) if t[1] == p}:
            return f"predicate {p} index mismatch"
    return None


def _check_score_values() -> str | None:
    m = models.EmbeddingModel(
        models.ModelKind.TRANSE_L2,
        2,
        np.array([[0.0, 0.0], [0.0, 0.0]]),
        np.array([[3.0, 4.0]]),
    )
    if models.score(m, (0, 0, 1)) != -5.0:
        return "TransE-L2 3-4-5 norm failed"
    dm = models.EmbeddingModel(
        models.ModelKind.DISTMULT, 2, np.array([[1.0, 2.0], [1.0, 1.0]]), np.array([[1.0, 1.0]])
    )
    if models.score(dm, (0, 0, 1)) != 3.0:
        return "DistMult product failed"
    cx = models.EmbeddingModel(
        models.ModelKind.COMPLEX, 1, np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])
    )
    if models.score(cx, (0, 0, 0)) != 1.0:
        return "ComplEx conjugation failed"
    return None


def _check_score_gradients_fd() -> str | None:
    rng = np.random.default_rng(7)
    h = 1e-6
    for kind in models.ModelKind:
        k = 4
        width = k * kind.row_width_factor
        rows = rng.normal(size=(3, width))
        m = models.EmbeddingModel(kind, k, rows[[0, 2]].copy(), rows[[1]].copy())
        grads = models.score_gradients(m, (0, 0, 1))
        tables = [m.entity_table, m.relation_table, m.entity_table]
        rows_idx = [0, 0, 1]
        for g, table, r in zip(grads, tables, rows_idx):
            for j in range(width):
                table[r, j] += h
                up = models.score(m, (0, 0, 1))
                table[r, j] -= 2 * h
                down = models.score(m, (0, 0, 1))
                table[r, j] += h
                fd = (up - down) / (2 * h)
                if abs(fd - g[j]) > 1e-4 * (1 + abs(fd)):
                    return f"{kind.value}: fd {fd} vs analytic {g[j]}"
    return None


def _check_nll() -> str | None:
    loss, d_pos, d_neg = losses.multiclass_nll_loss(1.0, [1.0])
    if abs(loss - math.log(2)) > 1e-12:
        return f"equal-score loss {loss} != ln 2"
    if not (-1 < d_pos < 0) or abs(d_pos + 1 - d_neg.sum()) > 1e-12:
        return "softmax gradient structure violated"
    big, _, _ = losses.multiclass_nll_loss(1000.0, [0.0, 0.0])
    if not (0 <= big < 1e-300):
        return f"stabilization failed: {big}"
    return None


def _check_alpha_identity() -> str | None:
    grid = [i / 128.0 for i in range(100)] + [1.0]
    for w in grid:
        for b in grid:
            lhs = focuse.modulating_factor(w, b, True) + focuse.modulating_factor(w, b, False)
            if lhs != 1.0 + b:
                return f"alpha identity broken at w={w}, beta={b}"
    if focuse.beta_schedule(0, 10.0) != 1.0 or focuse.beta_schedule(10, 10.0) != 0.0:
        return "beta schedule endpoints wrong"
    return None


def _check_angle_invariance() -> str | None:
    rng = np.random.default_rng(11)
    for _ in range(100):
        pts = rng.normal(size=(3, 5))
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        scale = float(rng.uniform(0.1, 10.0))
        shift = rng.normal(size=5)
        before = distill.angle_potential(*pts)
        after = distill.angle_potential(*(scale * (pts @ q.T) + shift))
        if abs(before - after) > 1e-10:
            return f"angle potential drifted by {abs(before - after)}"
    return None


def _check_rkd_zero() -> str | None:
    rng = np.random.default_rng(3)
    rows = tuple(rng.normal(size=6) for _ in range(3))
    loss, _, _ = distill.rkd_kge_loss(rows, rows)
    if loss != 0.0:
        return f"identical rows give loss {loss}"
    moved = tuple(2.0 * r + 7.5 for r in rows)
    loss2, _, _ = distill.rkd_kge_loss(rows, moved)
    if abs(loss2) > 1e-12:
        return f"scaled+translated rows give loss {loss2}"
    if distill.huber(3.0, 0.0) != 2.5 or distill.huber(0.5, 0.0) != 0.125:
        return "huber branch values wrong"
    return None


def _check_samplers() -> str | None:
    g = _demo_graph()
    target = (0, 0, 1)
    hood = one_hop_neighborhood(g, 0, 1)
    for method in ("pn", "rw"):
        spec = sampling.SubgraphSpec(method, 0, seed=5)
        sub = sampling.sample_subgraph(g, target, spec)
        if set(sub.triples) != hood:
            return f"{method} n=0 is not the 1-hop neighborhood"
        spec = sampling.SubgraphSpec(method, 4, seed=5)
        a = sampling.sample_subgraph(g, target, spec)
        b = sampling.sample_subgraph(g, target, spec)
        if not np.array_equal(a.positions, b.positions):
            return f"{method} not deterministic per seed"
        if not set(a.triples) >= hood:
            return f"{method} lost the 1-hop neighborhood"
    return None


def _check_adam() -> str | None:
    params = np.array([[1.0, -2.0]])
    opt = SparseAdam(params.shape, lr=0.1)
    opt.begin_step()
    opt.apply(params, np.array([0]), np.zeros((1, 2)))
    if not np.array_equal(params, [[1.0, -2.0]]) or opt.t != 1:
        return "zero gradient moved parameters"
    opt2 = SparseAdam(params.shape, lr=0.0)
    opt2.begin_step()
    opt2.apply(params, np.array([0]), np.ones((1, 2)))
    if not np.array_equal(params, [[1.0, -2.0]]):
        return "lr=0 moved parameters"
    return None


def _check_ranking() -> str | None:
    rng = np.random.default_rng(23)
    n_ent = 12
    m = models.init_model(models.ModelKind.DISTMULT, 4, n_ent, 2, 0)
    triples = [(int(rng.integers(n_ent)), int(rng.integers(2)), int(rng.integers(n_ent))) for _ in range(20)]
    from .graph import Vocabulary

    ev, rv = Vocabulary(), Vocabulary()
    for i in range(n_ent):
        ev.add(f"e{i}")
    rv.add("p0")
    rv.add("p1")
    g = graph_from_triples(sorted(set(triples)), ev, rv)
    flt = build_filter(g)
    pool = np.arange(n_ent)
    t = g.triple_at(0)
    res = evaluation.rank_triple(m, t, pool, flt)
    # brute force object side
    pos = models.score(m, t)
    brute = 1
    for e in range(n_ent):
        cand = (t[0], t[1], int(e))
        if e == t[2] or cand in flt:
            continue
        if models.score(m, cand) >= pos:
            brute += 1
    if brute != res.object_rank:
        return f"object rank {res.object_rank} != brute force {brute}"
    metrics = evaluation.metrics_from_ranks([1, 2, 4])
    if abs(metrics.mr - 7 / 3) > 1e-12 or abs(metrics.mrr - 7 / 12) > 1e-12:
        return "metrics arithmetic wrong"
    return None


def _check_corruptions() -> str | None:
    rng = np.random.default_rng(4)
    pool = np.arange(50)
    batch = training.generate_corruptions((3, 1, 7), 30, pool, rng)
    for s, p, o in batch.negatives:
        subject_changed = s != 3
        object_changed = o != 7
        if p != 1 or subject_changed == object_changed:
            return f"invalid corruption {(s, p, o)}"
    return None


CHECKS = [
    ("graph indices match linear scan", _check_graph_indices),
    ("scoring spot values", _check_score_values),
    ("score gradients vs finite differences", _check_score_gradients_fd),
    ("multiclass NLL values and stabilization", _check_nll),
    ("modulating factor identity and beta schedule", _check_alpha_identity),
    ("angle potential invariance", _check_angle_invariance),
    ("angle-matching loss zero cases", _check_rkd_zero),
    ("sampler contracts", _check_samplers),
    ("adam fixed points", _check_adam),
    ("ranking vs brute force and metrics", _check_ranking),
    ("corruption invariants", _check_corruptions),
]


def run_selftest(out=print) -> int:
    """Run all invariant suites; returns the number of failures."""
    failures = 0
    for name, check in CHECKS:
        detail = check()
        if detail is None:
            out(f"PASS  {name}")
        else:
            failures += 1
            out(f"FAIL  {name}: {detail}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
