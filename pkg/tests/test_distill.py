"""Angle potentials, Huber matching, and distilled student training."""

import numpy as np
import pytest

from kgex.distill import (
    DegenerateGeometryError,
    angle_potential,
    huber,
    rkd_kge_loss,
    rkd_loss_batch,
    train_student,
)
from kgex.graph import graph_from_triples
from kgex.models import init_model
from kgex.training import TrainConfig, train

from oracles import fd_gradients, max_relative_error, normalized_difference_dot
from toygraphs import block_graph, random_graph


class TestHuber:
    def test_equal_inputs(self):
        assert huber(1.7, 1.7) == 0.0

    def test_quadratic_branch(self):
        assert huber(0.5, 0.0) == 0.125

    def test_linear_branch(self):
        assert huber(3.0, 0.0) == 2.5

    def test_continuous_at_switch(self):
        assert huber(1.0, 0.0) == pytest.approx(0.5, abs=1e-15)
        assert huber(1.0 + 1e-9, 0.0) == pytest.approx(0.5, abs=1e-8)


class TestAnglePotential:
    def test_collinear_same_direction(self):
        assert angle_potential([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]) == 1.0

    def test_perpendicular(self):
        assert angle_potential([1.0, 0.0], [0.0, 0.0], [0.0, 1.0]) == 0.0

    def test_random_matches_direct_vector_math(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            a, b, c = rng.normal(size=(3, 7))
            assert angle_potential(a, b, c) == pytest.approx(
                normalized_difference_dot(a, b, c), abs=1e-12
            )

    def test_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a, b, c = rng.normal(size=(3, 4))
            assert -1.0 - 1e-12 <= angle_potential(a, b, c) <= 1.0 + 1e-12

    def test_coincident_points_raise(self):
        v = np.ones(3)
        with pytest.raises(DegenerateGeometryError):
            angle_potential(v, v, np.zeros(3))

    def test_invariance_under_similarity_transforms(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            pts = rng.normal(size=(3, 6))
            q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
            scale = float(rng.uniform(0.01, 100.0))
            shift = rng.normal(size=6, scale=10)
            moved = scale * (pts @ q.T) + shift
            assert angle_potential(*moved) == pytest.approx(
                angle_potential(*pts), abs=1e-10
            )


class TestRkdLoss:
    def test_identical_rows_zero(self):
        rng = np.random.default_rng(1)
        rows = tuple(rng.normal(size=5) for _ in range(3))
        loss, grads, degenerate = rkd_kge_loss(rows, rows)
        assert loss == 0.0
        assert degenerate == 0
        for g in grads:
            assert np.allclose(g, 0.0, atol=1e-15)

    def test_scaled_translated_student_zero(self):
        rng = np.random.default_rng(2)
        rows = tuple(rng.normal(size=8) for _ in range(3))
        moved = tuple(2.0 * r + 3.25 for r in rows)
        loss, _, _ = rkd_kge_loss(rows, moved)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative_and_zero_iff_angles_match(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            teacher = tuple(rng.normal(size=4) for _ in range(3))
            student = tuple(rng.normal(size=6) for _ in range(3))
            loss, _, _ = rkd_kge_loss(teacher, student)
            assert loss >= 0.0
            if loss == 0.0:
                for perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
                    t_phi = angle_potential(*(teacher[i] for i in perm))
                    s_phi = angle_potential(*(student[i] for i in perm))
                    assert t_phi == pytest.approx(s_phi, abs=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            teacher = tuple(rng.normal(size=5) for _ in range(3))
            student = [rng.normal(size=7) for _ in range(3)]

            def loss_value():
                value, _, _ = rkd_kge_loss(teacher, tuple(student))
                return value

            _, grads, _ = rkd_kge_loss(teacher, tuple(student))
            fd = fd_gradients(loss_value, student)
            for analytic, numeric in zip(grads, fd):
                assert max_relative_error(analytic, numeric) <= 1e-5

    def test_teacher_student_dimensions_may_differ(self):
        rng = np.random.default_rng(5)
        teacher = tuple(rng.normal(size=12) for _ in range(3))
        student = tuple(rng.normal(size=3) for _ in range(3))
        loss, grads, _ = rkd_kge_loss(teacher, student)
        assert np.isfinite(loss)
        assert all(g.shape == (3,) for g in grads)

    def test_degenerate_rows_counted_and_zeroed(self):
        teacher = (np.ones(4), np.ones(4), np.zeros(4))  # s == p: all 3 terms hit it
        student = tuple(np.random.default_rng(0).normal(size=4) for _ in range(3))
        loss, grads, degenerate = rkd_kge_loss(teacher, student)
        assert degenerate == 3
        assert loss == 0.0

    def test_batch_matches_single(self):
        rng = np.random.default_rng(9)
        teacher = [tuple(rng.normal(size=4) for _ in range(3)) for _ in range(5)]
        student = [tuple(rng.normal(size=6) for _ in range(3)) for _ in range(5)]
        t_stack = tuple(np.stack([t[i] for t in teacher]) for i in range(3))
        s_stack = tuple(np.stack([s[i] for s in student]) for i in range(3))
        losses, gs, gp, go, _ = rkd_loss_batch(t_stack, s_stack)
        for i in range(5):
            single_loss, single_grads, _ = rkd_kge_loss(teacher[i], student[i])
            assert losses[i] == pytest.approx(single_loss, abs=1e-14)
            assert np.allclose(gs[i], single_grads[0], atol=1e-14)
            assert np.allclose(gp[i], single_grads[1], atol=1e-14)
            assert np.allclose(go[i], single_grads[2], atol=1e-14)


class TestTrainStudent:
    def test_lambda_zero_bitwise_equals_plain_training(self):
        g = random_graph(15, 3, 60, seed=0)
        sub_positions = np.arange(20)
        sub = graph_from_triples(g.triples[sub_positions], g.entity_vocab, g.relation_vocab)
        teacher = init_model("distmult", 8, g.n_entities, g.n_relations, seed=99)
        cfg = TrainConfig(kind="distmult", k=4, eta=2, lr=0.05, epochs=5, batch_size=16, seed=7)
        student = train_student(teacher, sub, cfg, kd_lambda=0.0)
        plain = train(sub, cfg)
        assert np.array_equal(student.entity_table, plain.entity_table)
        assert np.array_equal(student.relation_table, plain.relation_table)

    def test_untouched_rows_stay_at_initialization(self):
        g = random_graph(30, 3, 40, seed=1)
        sub = graph_from_triples(g.triples[:6], g.entity_vocab, g.relation_vocab)
        teacher = init_model("transe-l2", 6, g.n_entities, g.n_relations, seed=5)
        cfg = TrainConfig(kind="transe-l2", k=4, eta=2, lr=0.05, epochs=3, batch_size=8, seed=3)
        student = train_student(teacher, sub, cfg, kd_lambda=3.0)
        reference = init_model(cfg.kind, cfg.k, g.n_entities, g.n_relations,
                               seed=np.random.SeedSequence(cfg.seed).spawn(2)[0])
        touched_entities = set(np.unique(sub.triples[:, [0, 2]]).tolist())
        for e in range(g.n_entities):
            if e not in touched_entities:
                assert np.array_equal(student.entity_table[e], reference.entity_table[e])

    def test_combined_gradient_is_linear_in_lambda(self):
        """One-step probe: the kd term scales the update linearly."""
        g = random_graph(10, 2, 20, seed=2)
        teacher = init_model("distmult", 6, g.n_entities, g.n_relations, seed=11)
        updates = {}
        for lam in (0.0, 1.0, 3.0):
            cfg = TrainConfig(kind="distmult", k=3, eta=1, lr=1e-6, epochs=1,
                              batch_size=len(g.triples), seed=13)
            init = init_model(cfg.kind, cfg.k, g.n_entities, g.n_relations,
                              seed=np.random.SeedSequence(cfg.seed).spawn(2)[0])
            sub = graph_from_triples(g.triples, g.entity_vocab, g.relation_vocab)
            student = train_student(teacher, sub, cfg, kd_lambda=lam)
            updates[lam] = student.entity_table - init.entity_table
        base = updates[0.0]
        kd_1 = updates[1.0] - base
        kd_3 = updates[3.0] - base
        # Adam normalizes magnitudes, so compare directions where kd is active
        active = np.abs(kd_1) > 1e-12
        assert active.any()
        assert np.sign(kd_3[active]) == pytest.approx(np.sign(kd_1[active]))

    def test_combined_objective_gradient_matches_fd_at_each_lambda(self):
        """FD of mean NLL + lambda * mean angle loss vs the assembled gradient."""
        from kgex.losses import softmax_nll_batch
        from kgex.models import ModelKind, score_grad_rows, score_rows

        rng = np.random.default_rng(12)
        kind, k = ModelKind.DISTMULT, 3
        ent = rng.normal(size=(6, k))
        rel = rng.normal(size=(2, k))
        teacher_ent = rng.normal(size=(6, k))
        teacher_rel = rng.normal(size=(2, k))
        batch = np.array([[0, 0, 1], [2, 1, 3]])
        neg_s = np.array([[4], [2]])
        neg_p = np.array([[0], [1]])
        neg_o = np.array([[1], [5]])

        def objective(lam):
            pos = score_rows(kind, k, ent[batch[:, 0]], rel[batch[:, 1]], ent[batch[:, 2]])
            neg = score_rows(kind, k, ent[neg_s], rel[neg_p], ent[neg_o])
            loss, _ = softmax_nll_batch(np.concatenate([pos[:, None], neg], axis=1))
            kd_rows, _, _, _, _ = rkd_loss_batch(
                (teacher_ent[batch[:, 0]], teacher_rel[batch[:, 1]], teacher_ent[batch[:, 2]]),
                (ent[batch[:, 0]], rel[batch[:, 1]], ent[batch[:, 2]]),
            )
            return float(loss.mean() + lam * kd_rows.mean())

        for lam in (0.0, 1.0, 3.0):
            pos_f, pos_gs, pos_gp, pos_go = score_grad_rows(
                kind, k, ent[batch[:, 0]], rel[batch[:, 1]], ent[batch[:, 2]]
            )
            neg_f, neg_gs, neg_gp, neg_go = score_grad_rows(
                kind, k, ent[neg_s], rel[neg_p], ent[neg_o]
            )
            _, dscores = softmax_nll_batch(np.concatenate([pos_f[:, None], neg_f], axis=1))
            scale = 1.0 / len(batch)
            ge, gr = np.zeros_like(ent), np.zeros_like(rel)
            np.add.at(ge, batch[:, 0], scale * dscores[:, 0:1] * pos_gs)
            np.add.at(ge, batch[:, 2], scale * dscores[:, 0:1] * pos_go)
            np.add.at(gr, batch[:, 1], scale * dscores[:, 0:1] * pos_gp)
            np.add.at(ge, neg_s.ravel(), (scale * dscores[:, 1:, None] * neg_gs).reshape(-1, k))
            np.add.at(ge, neg_o.ravel(), (scale * dscores[:, 1:, None] * neg_go).reshape(-1, k))
            np.add.at(gr, neg_p.ravel(), (scale * dscores[:, 1:, None] * neg_gp).reshape(-1, k))
            _, kd_gs, kd_gp, kd_go, _ = rkd_loss_batch(
                (teacher_ent[batch[:, 0]], teacher_rel[batch[:, 1]], teacher_ent[batch[:, 2]]),
                (ent[batch[:, 0]], rel[batch[:, 1]], ent[batch[:, 2]]),
            )
            np.add.at(ge, batch[:, 0], lam * scale * kd_gs)
            np.add.at(ge, batch[:, 2], lam * scale * kd_go)
            np.add.at(gr, batch[:, 1], lam * scale * kd_gp)

            fd = fd_gradients(lambda: objective(lam), [ent, rel])
            assert max_relative_error(ge, fd[0]) <= 1e-5, f"lambda={lam}"
            assert max_relative_error(gr, fd[1]) <= 1e-5, f"lambda={lam}"

    def test_huge_lambda_pulls_student_angles_to_teacher(self):
        g, _ = block_graph(20, 10, 3, n_train=60, n_test=10, seed=21)
        teacher = train(
            g, TrainConfig(kind="transe-l2", k=8, eta=2, lr=0.1, epochs=100, batch_size=64, seed=0)
        )
        gaps = {}
        for lam in (0.0, 1e6):
            gap_total, terms = 0.0, 0
            for seed in range(3):
                cfg = TrainConfig(kind="transe-l2", k=4, eta=2, lr=0.05, epochs=60,
                                  batch_size=64, seed=seed)
                student = train_student(teacher, g, cfg, kd_lambda=lam)
                for s, p, o in g.triples[:30]:
                    t_rows = (teacher.entity_table[s], teacher.relation_table[p], teacher.entity_table[o])
                    s_rows = (student.entity_table[s], student.relation_table[p], student.entity_table[o])
                    gap_total += abs(angle_potential(*t_rows) - angle_potential(*s_rows))
                    terms += 1
            gaps[lam] = gap_total / terms
        assert gaps[1e6] < gaps[0.0]

    def test_empty_subgraph_rejected(self):
        g = random_graph(6, 2, 10, seed=3)
        teacher = init_model("distmult", 4, g.n_entities, g.n_relations, seed=1)
        empty = graph_from_triples([], g.entity_vocab, g.relation_vocab)
        with pytest.raises(ValueError):
            train_student(teacher, empty, TrainConfig(), kd_lambda=3.0)

    def test_invalid_lambda_rejected(self):
        g = random_graph(6, 2, 10, seed=3)
        teacher = init_model("distmult", 4, g.n_entities, g.n_relations, seed=1)
        with pytest.raises(ValueError):
            train_student(teacher, g, TrainConfig(), kd_lambda=-1.0)
        with pytest.raises(ValueError):
            train_student(teacher, g, TrainConfig(), kd_lambda=float("nan"))
