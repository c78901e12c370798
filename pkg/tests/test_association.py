import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lidartrack.association import (SENTINEL, AssocConfig, Prediction, assignment_cost, build_score_matrix,
                                    gate, gate_statistic, hungarian, pad_square, solve_assignment)
from lidartrack.errors import SingularGate

R2 = np.diag([0.05 ** 2, 0.05 ** 2])


def brute_force(cost):
    n = len(cost)
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def test_one_by_one():
    assert hungarian([[0.0]]) == [(0, 0)]


def test_two_by_two():
    pairs = hungarian([[4, 1], [2, 3]])
    assert pairs == [(0, 1), (1, 0)]
    assert assignment_cost([[4, 1], [2, 3]], pairs) == 3


def test_empty_matrix():
    assert hungarian(np.zeros((0, 0))) == []


def test_rejects_bad_matrices():
    with pytest.raises(ValueError):
        hungarian(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        hungarian([[np.inf, 0], [0, 0]])


square = st.integers(1, 6).flatmap(
    lambda n: arrays(float, (n, n), elements=st.floats(0, 100, allow_nan=False)))


@settings(max_examples=300, deadline=None)
@given(square)
def test_matches_exhaustive_search(cost):
    pairs = hungarian(cost)
    assert sorted(i for i, _ in pairs) == list(range(len(cost)))
    assert sorted(j for _, j in pairs) == list(range(len(cost)))
    assert assignment_cost(cost, pairs) == pytest.approx(brute_force(cost), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(square, st.floats(-50, 50))
def test_constant_shift_keeps_the_optimum(cost, shift):
    base = assignment_cost(cost, hungarian(cost))
    shifted = hungarian(cost + shift)
    assert assignment_cost(cost, shifted) == pytest.approx(base, abs=1e-7)


def test_gate_examples():
    x = np.array([1.0, 2.0])
    assert gate(x, np.eye(2), x, np.zeros((2, 2)), eps=9.21)
    # B = I and |r|^2 = eps sits on the boundary, which is excluded
    assert not gate(np.zeros(2), np.eye(2) * 0.5, np.array([3.0, 0.0]), np.eye(2) * 0.5, eps=9.0)
    assert gate_statistic(np.zeros(2), np.diag([4.0, 1.0]), np.array([2.0, 0.0]), np.zeros((2, 2))) == \
        pytest.approx(1.0)
    assert gate(np.zeros(2), np.diag([4.0, 1.0]), np.array([2.0, 0.0]), np.zeros((2, 2)), eps=1.5)


def test_gate_rejects_singular_covariance():
    with pytest.raises(SingularGate):
        gate(np.zeros(2), np.zeros((2, 2)), np.ones(2), np.zeros((2, 2)))


def test_gate_with_observation_matrix():
    H = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    x = np.array([1.0, 2.0, 5.0, 5.0])
    assert gate_statistic(x, np.eye(4), np.array([1.0, 2.0]), R2, H=H) == pytest.approx(0.0)


def test_no_tracks():
    S = build_score_matrix([], [((0, 0), 0.0), ((5, 5), 0.0), ((9, 1), 0.0)], R2)
    assert S.shape == (3, 3) and np.all(S == SENTINEL)
    a = solve_assignment(S[:0, :3], 0, 3)
    assert a.pairs == [] and a.unmatched_detections == [0, 1, 2]


def test_track_on_its_detection():
    S = build_score_matrix([(np.array([3.0, 4.0]), np.eye(2) * 0.1, 0.0)], [((3.0, 4.0), 0.0)], R2)
    assert S[0, 0] == 0.0
    assert solve_assignment(S, 1, 1).pairs == [(0, 0)]


def test_crossing_configuration_is_not_greedy():
    # greedy row-by-row takes (0,0)=1.0 then (1,1)=3.4; the optimum is 1.2 + 1.2
    tracks = [(np.array([0.0, 0.0]), np.eye(2) * 4.0, 0.0), (np.array([2.2, 0.0]), np.eye(2) * 4.0, 0.0)]
    dets = [((1.0, 0.0), 0.0), ((-1.2, 0.0), 0.0)]
    S = build_score_matrix(tracks, dets, R2)
    a = solve_assignment(S, 2, 2)
    got = assignment_cost(S, a.pairs)
    assert got == pytest.approx(brute_force(S))
    assert a.pairs == [(0, 1), (1, 0)]


def test_gated_pairs_never_match():
    tracks = [(np.zeros(2), np.eye(2) * 0.01, 0.0)]
    S = build_score_matrix(tracks, [((5.0, 0.0), 0.0)], R2)
    assert S[0, 0] == SENTINEL
    a = solve_assignment(S, 1, 1)
    assert a.pairs == [] and a.unmatched_tracks == [0] and a.unmatched_detections == [0]


def test_any_gate_admits():
    pred = Prediction(np.zeros(2), ((np.zeros(2), np.eye(2) * 1e-4), (np.zeros(2), np.eye(2))), 0.0)
    assert pred.admits(np.array([1.0, 0.0]), R2, 9.21)
    assert not Prediction.single(np.zeros(2), np.eye(2) * 1e-4).admits(np.array([1.0, 0.0]), R2, 9.21)


def test_heading_weight_adds_penalty():
    tracks = [(np.zeros(2), np.eye(2), 0.0)]
    S0 = build_score_matrix(tracks, [((0.3, 0.4), 0.2)], R2)
    S1 = build_score_matrix(tracks, [((0.3, 0.4), 0.2)], R2, AssocConfig(heading_weight=2.0))
    assert S0[0, 0] == pytest.approx(0.5)
    assert S1[0, 0] == pytest.approx(0.5 + 2.0 * 0.2)


def test_pad_square():
    P = pad_square(np.ones((2, 3)))
    assert P.shape == (3, 3) and np.all(P[2] == SENTINEL)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 10_000))
def test_assignment_invariants(n_t, n_d, seed):
    rng = np.random.default_rng(seed)
    tracks = [(rng.uniform(0, 10, 2), np.eye(2) * rng.uniform(0.05, 2), 0.0) for _ in range(n_t)]
    dets = [(rng.uniform(0, 10, 2), 0.0) for _ in range(n_d)]
    S = build_score_matrix(tracks, dets, R2)
    assert S.shape == (max(n_t, n_d),) * 2 and np.all(np.isfinite(S)) and np.all(S >= 0)
    a = solve_assignment(S[:n_t, :n_d], n_t, n_d)
    assert len({t for t, _ in a.pairs}) == len(a.pairs) == len({d for _, d in a.pairs})
    for t, d in a.pairs:
        assert gate(tracks[t][0], tracks[t][1], np.asarray(dets[d][0]), R2)
    assert sorted([t for t, _ in a.pairs] + a.unmatched_tracks) == list(range(n_t))
    assert sorted([d for _, d in a.pairs] + a.unmatched_detections) == list(range(n_d))

    # permuting detections permutes the answer consistently
    perm = rng.permutation(n_d)
    S2 = build_score_matrix(tracks, [dets[k] for k in perm], R2)
    a2 = solve_assignment(S2[:n_t, :n_d], n_t, n_d)
    assert assignment_cost(S2, a2.pairs) == pytest.approx(assignment_cost(S, a.pairs), abs=1e-9)
