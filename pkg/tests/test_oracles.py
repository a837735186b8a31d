from __future__ import annotations

import numpy as np
import pytest

from rankopt import (
    EmbeddingQuadraticObjective,
    FeedbackKind,
    OptimizerConfig,
    RosenbrockObjective,
    ScriptedOracle,
    SphereObjective,
    Stage,
    StopRule,
    TrajectoryDistanceObjective,
    decode,
    evaluate,
    init_session,
    objective_from_spec,
    projection_matrix,
    run_scripted,
    transcript_lines,
)
from rankopt.optimizer import CandidateSet


def fan(points):
    return CandidateSet(np.asarray(points, dtype=np.float64), 0, Stage.STAGE1)


def test_sphere_values():
    f = SphereObjective(center=np.zeros(2))
    assert f(np.zeros(2)) == 0.0
    assert f(np.array([3.0, 4.0])) == 25.0


def test_rosenbrock_minimum():
    f = RosenbrockObjective(d=5)
    assert f(np.ones(5)) == 0.0
    assert f(np.zeros(5)) > 0.0


def test_dimension_mismatch_raises():
    f = SphereObjective(center=np.zeros(3))
    with pytest.raises(ValueError):
        f(np.zeros(4))


def test_embedding_quadratic_minimizer_is_projected_embedding():
    c = np.array([1.0, 0.0, 0.0, 0.0])
    f = EmbeddingQuadraticObjective(embedding=c, d=6, projection_seed=3, scale=2.0)
    assert f(f.target) == 0.0
    assert f(f.target + 0.1) > 0.0
    a = projection_matrix(6, 4, 3)
    assert np.allclose(f.target, 2.0 * (a @ c))


def test_projection_matrix_is_isometric_for_d_ge_e():
    a = projection_matrix(10, 6, 1)
    u = np.arange(6.0)
    v = np.ones(6)
    assert np.linalg.norm(a @ u - a @ v) == pytest.approx(np.linalg.norm(u - v), rel=1e-12)


def test_trajectory_distance_zero_at_own_decode():
    c = np.array([0.5, -0.5])
    z = np.array([1.0, 2.0, -1.0])
    target = decode(z, c, seed=4)
    f = TrajectoryDistanceObjective(target=target, condition=c, decoder_seed=4, d=3)
    assert f(z) == 0.0
    assert f(z + 1.0) > 0.0


def test_evaluate_rejects_non_finite():
    with pytest.raises(ValueError):
        evaluate(lambda z: float("nan"), np.zeros(1))


def test_rank_sorts_by_score():
    oracle = ScriptedOracle(SphereObjective(center=np.zeros(2)))
    cands = fan([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    fb = oracle.rank(cands, k=4)
    assert fb.kind is FeedbackKind.FULL_RANKING
    assert fb.ranking == (0, 1, 2, 3)
    fb1 = oracle.rank(cands, k=1)
    assert fb1.kind is FeedbackKind.BEST_ONLY
    assert fb1.ranking == (0,)


def test_rank_ties_go_to_lowest_index():
    oracle = ScriptedOracle(SphereObjective(center=np.zeros(2)))
    cands = fan([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])  # all score 1
    assert oracle.rank(cands, k=3).ranking == (0, 1, 2)


def test_rank_is_permutation_prefix_with_ascending_scores():
    f = SphereObjective(center=np.array([0.2, -0.4, 0.6]))
    rng = np.random.default_rng(0)
    oracle = ScriptedOracle(f)
    for _ in range(50):
        cands = fan(rng.standard_normal((5, 3)))
        fb = oracle.rank(cands, k=4)
        assert len(set(fb.ranking)) == len(fb.ranking) == 4
        scores = [f(z) for z in cands.points]
        ranked_scores = [scores[i] for i in fb.ranking]
        assert ranked_scores == sorted(ranked_scores)
        assert max(ranked_scores) <= min(
            scores[j] for j in range(5) if j not in fb.ranking
        )


def test_tiny_noise_preserves_well_separated_ranking():
    f = SphereObjective(center=np.zeros(1))
    cands = fan([[0.0], [1.0], [2.0], [3.0]])
    for seed in range(1000):
        noisy = ScriptedOracle(f, noise_std=1e-9, seed=seed)
        assert noisy.rank(cands, k=4).ranking == (0, 1, 2, 3)


def test_large_noise_consumes_oracle_stream_only():
    f = SphereObjective(center=np.zeros(2))
    cfg = OptimizerConfig(d=2, seed=3)
    quiet = run_scripted(cfg, ScriptedOracle(f, seed=1, noise_std=0.0), StopRule(5, 2))
    loud = run_scripted(cfg, ScriptedOracle(f, seed=1, noise_std=50.0), StopRule(5, 2))
    # Same seeds: round-0 candidates identical even though rankings differ.
    assert np.array_equal(quiet.log[0].candidates, loud.log[0].candidates)


def test_monotone_transform_gives_identical_rankings():
    f = SphereObjective(center=np.ones(3))
    phi_f = lambda z: float(np.exp(min(f(z), 500.0)))
    rng = np.random.default_rng(5)
    o1, o2 = ScriptedOracle(f), ScriptedOracle(phi_f)
    for _ in range(50):
        cands = fan(rng.standard_normal((4, 3)))
        assert o1.rank(cands, k=4) == o2.rank(cands, k=4)


def test_monotone_transform_invariance_end_to_end():
    f = SphereObjective(center=np.zeros(4))
    phi_f = lambda z: float(np.log1p(f(z)))
    cfg = OptimizerConfig(d=4, seed=12)
    res_f = run_scripted(cfg, ScriptedOracle(f, seed=0), StopRule(8, 3))
    res_phi = run_scripted(cfg, ScriptedOracle(phi_f, seed=0), StopRule(8, 3))
    assert transcript_lines(res_f.log) == transcript_lines(res_phi.log)
    assert np.array_equal(res_f.final, res_phi.final)


def test_best_objective_matches_min_score():
    f = SphereObjective(center=np.zeros(2))
    oracle = ScriptedOracle(f, noise_std=5.0, seed=0)
    cands = fan([[1.0, 1.0], [0.1, 0.1], [2.0, 0.0], [0.0, 3.0]])
    assert oracle.best_objective(cands) == pytest.approx(0.02)


def test_objective_from_spec_round_trip():
    f = objective_from_spec({"kind": "sphere", "params": {"center": [1.0, 2.0]}})
    assert f(np.array([1.0, 2.0])) == 0.0
    f = objective_from_spec({"kind": "sphere", "params": {"d": 3, "center_fill": 2.0}})
    assert f(np.full(3, 2.0)) == 0.0
    f = objective_from_spec({"kind": "rosenbrock", "params": {"d": 4}})
    assert f(np.ones(4)) == 0.0
    f = objective_from_spec(
        {"kind": "embedding_quadratic", "params": {"embedding": [1.0, 0.0], "d": 3, "projection_seed": 5}}
    )
    a = projection_matrix(3, 2, 5)
    assert f(a @ np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-18)
    target = decode(np.zeros(2), np.zeros(2), seed=0)
    f = objective_from_spec(
        {
            "kind": "trajectory_distance",
            "params": {"target": target.points.tolist(), "condition": [0.0, 0.0], "d": 2, "decoder_seed": 0},
        }
    )
    assert f(np.zeros(2)) == 0.0
    with pytest.raises(ValueError):
        objective_from_spec({"kind": "nope"})


def test_scripted_session_with_trajectory_objective_converges():
    c = np.array([0.3, 0.9, -0.2])
    z_true = np.array([0.8, -0.5, 0.2, 0.4])
    target = decode(z_true, c, seed=11)
    f = TrajectoryDistanceObjective(target=target, condition=c, decoder_seed=11, d=4)
    res = run_scripted(OptimizerConfig(d=4, seed=6), ScriptedOracle(f, seed=6), StopRule(15, 5))
    state0 = init_session(OptimizerConfig(d=4, seed=6, max_stage1_rounds=15, max_stage2_rounds=5))
    round0_best = min(f(z) for z in state0.candidates.points)
    assert f(res.final) < round0_best
