import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lymdo.allocators import (
    AllocProblem,
    InfeasibleAllocation,
    allocate_all,
    bandwidth_objective,
    edge_cpu_objective,
    local_cpu_objective,
    solve_bandwidth,
    solve_edge_cpu,
    solve_local_cpu,
)
from lymdo.system_model import Allocation

import oracles


def single(q=50.0, d=1e8, lam=2.0, payload=0.0, d_es=0.0, gain=oracles.H_BAR):
    return AllocProblem(
        q_energy=[q], q_memory=[0.0], lam=[lam], gain=[gain], power=[0.1], kappa=[1e-28],
        d_ue=[d], d_es=[d_es], payload=[payload], v=10.0, bandwidth=5e6, noise_psd=3.981e-21,
        f_max_ue=1.5e9, f_max_es=15e9,
    )


def with_fields(prob, **kw):
    data = prob.to_dict()
    data.update(kw)
    return AllocProblem.from_dict(data)


# --- local CPU -------------------------------------------------------------------------------

def test_local_no_energy_pressure_runs_flat_out():
    assert solve_local_cpu(single(q=0.0), 0) == 1.5e9


def test_local_zero_work():
    prob = single(d=0.0)
    assert solve_local_cpu(prob, 0) == 0.0


def test_local_infeasible():
    with pytest.raises(InfeasibleAllocation):
        solve_local_cpu(single(d=1e9, lam=2.0), 0)


def test_local_grid_oracle():
    prob = single(q=50.0, d=1e8, lam=2.0)
    f = solve_local_cpu(prob, 0)
    f_grid, v_grid = oracles.local_grid_min(prob, 0)
    got = local_cpu_objective(prob, 0, f)
    assert got <= v_grid * (1 + 1e-4)
    assert abs(f - f_grid) <= 1e-3 * prob.f_max_ue


def test_local_derivative_sign_flip():
    prob = single(q=5000.0, d=2e8, lam=2.0)
    f = solve_local_cpu(prob, 0)
    assert f < prob.f_max_ue  # interior optimum for this instance
    h = 1e-3 * prob.f_max_ue
    obj = lambda x: local_cpu_objective(prob, 0, x)
    assert obj(f - h) > obj(f) and obj(f + h) > obj(f)
    assert (obj(f) - obj(f - h)) < 0 < (obj(f + h) - obj(f))


@given(st.floats(0, 1e4), st.floats(1e7, 5e8), st.floats(0.5, 2.5))
def test_local_never_worse_than_grid(q, d, lam):
    prob = single(q=q, d=d, lam=lam)
    if d * lam * (1 + 1e-6) >= prob.f_max_ue:
        return
    f = solve_local_cpu(prob, 0)
    _, ref = oracles.local_grid_min(prob, 0, points=20001)
    assert local_cpu_objective(prob, 0, f) <= ref * (1 + 1e-4)


@given(st.floats(0, 1e4), st.floats(1e7, 5e8), st.floats(0.5, 2.5), st.floats(0, 1), st.floats(0, 1))
def test_local_objective_midpoint_convex(q, d, lam, u1, u2):
    lo, hi = d * lam * 1.0001, 1.5e9
    if lo >= hi:
        return
    prob = single(q=q, d=d, lam=lam)
    x, y = lo + u1 * (hi - lo), lo + u2 * (hi - lo)
    mid = local_cpu_objective(prob, 0, (x + y) / 2)
    assert mid <= (local_cpu_objective(prob, 0, x) + local_cpu_objective(prob, 0, y)) / 2 * (1 + 1e-12)


# --- edge CPU -------------------------------------------------------------------------------------

def _edge_problem(d_es):
    n = len(d_es)
    return AllocProblem(
        q_energy=np.zeros(n), q_memory=np.zeros(n), lam=np.ones(n), gain=np.full(n, oracles.H_BAR),
        power=np.full(n, 0.1), kappa=np.full(n, 1e-28), d_ue=np.zeros(n), d_es=d_es,
        payload=np.ones(n), v=10.0, bandwidth=5e6, noise_psd=3.981e-21, f_max_ue=1.5e9, f_max_es=15e9,
    )


def test_edge_closed_form_example():
    f = solve_edge_cpu(_edge_problem([1e9, 4e9]))
    np.testing.assert_allclose(f, [5e9, 10e9], rtol=1e-15)
    f_num, obj_num = oracles.edge_numeric(np.array([1e9, 4e9]), 15e9)
    np.testing.assert_allclose(f, f_num, rtol=1e-6)


def test_edge_symmetry_and_single():
    np.testing.assert_allclose(solve_edge_cpu(_edge_problem([3e9] * 4)), [3.75e9] * 4, rtol=1e-15)
    np.testing.assert_array_equal(solve_edge_cpu(_edge_problem([0.0, 2e9, 0.0])), [0.0, 15e9, 0.0])
    np.testing.assert_array_equal(solve_edge_cpu(_edge_problem([0.0, 0.0])), [0.0, 0.0])


@given(st.lists(st.floats(1e6, 1e11), min_size=1, max_size=6), st.floats(1e-3, 1e3))
def test_edge_scale_invariance(d, c):
    d = np.array(d)
    a = solve_edge_cpu(_edge_problem(d))
    b = solve_edge_cpu(_edge_problem(d * c))
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert a.sum() <= 15e9 * (1 + 1e-15)


def test_edge_matches_numeric_minimiser(rng):
    for _ in range(20):
        d = rng.uniform(1e8, 5e9, rng.integers(2, 7))
        prob = _edge_problem(d)
        f = solve_edge_cpu(prob)
        f_num, obj_num = oracles.edge_numeric(d, 15e9)
        assert edge_cpu_objective(prob, f) <= obj_num * (1 + 1e-9)
        assert edge_cpu_objective(prob, f) == pytest.approx(obj_num, rel=1e-6)


@given(st.lists(st.floats(1e8, 5e9), min_size=2, max_size=5), st.data())
def test_edge_objective_midpoint_convex(d, data):
    prob = _edge_problem(np.array(d))
    n = len(d)
    x = np.array(data.draw(st.lists(st.floats(1e6, 3e9), min_size=n, max_size=n)))
    y = np.array(data.draw(st.lists(st.floats(1e6, 3e9), min_size=n, max_size=n)))
    mid = edge_cpu_objective(prob, (x + y) / 2)
    assert mid <= (edge_cpu_objective(prob, x) + edge_cpu_objective(prob, y)) / 2 * (1 + 1e-12)


# --- bandwidth -------------------------------------------------------------------------------------

def test_bandwidth_symmetric_pair():
    prob = AllocProblem(
        q_energy=[3.0, 3.0], q_memory=[0.0, 0.0], lam=[1.0, 1.0], gain=[oracles.H_BAR] * 2,
        power=[0.1, 0.1], kappa=[1e-28] * 2, d_ue=[0.0, 0.0], d_es=[1e9, 1e9], payload=[1e5, 1e5],
        v=10.0, bandwidth=5e6, noise_psd=3.981e-21, f_max_ue=1.5e9, f_max_es=15e9,
    )
    np.testing.assert_allclose(solve_bandwidth(prob), [0.5, 0.5], atol=1e-9)


def test_bandwidth_single_active():
    prob = oracles.random_problem(np.random.default_rng(1), n=3)
    prob = with_fields(prob, payload=[0.0, 5e5, 0.0])
    np.testing.assert_allclose(solve_bandwidth(prob), [0.0, 1.0, 0.0], atol=1e-9)


def test_bandwidth_none_active():
    prob = with_fields(oracles.random_problem(np.random.default_rng(2), n=3), payload=[0.0, 0.0, 0.0])
    np.testing.assert_array_equal(solve_bandwidth(prob), [0.0, 0.0, 0.0])


def _full_offload(rng, n=5):
    prob = oracles.random_problem(rng, n=n, offload_prob=1.0)
    return prob


def test_bandwidth_projected_gradient_oracle(rng):
    for _ in range(10):
        prob = _full_offload(rng)
        act, w, bits, snr = oracles.bandwidth_terms(prob)
        alpha = solve_bandwidth(prob)
        got = oracles.bw_objective(w, bits, snr, prob.bandwidth, alpha[act])
        _, ref = oracles.bw_projected_gradient(w, bits, snr, prob.bandwidth)
        assert got <= ref * (1 + 1e-4)
        assert abs(alpha.sum() - 1.0) <= 1e-9


def test_bandwidth_dirichlet_envelope():
    rng = np.random.default_rng(77)
    prob = _full_offload(rng)
    act, w, bits, snr = oracles.bandwidth_terms(prob)
    got = oracles.bw_objective(w, bits, snr, prob.bandwidth, solve_bandwidth(prob)[act])
    envelope = oracles.bw_dirichlet_search(w, bits, snr, prob.bandwidth, 1_000_000, rng)
    assert got <= envelope * (1 + 1e-3)


def test_bandwidth_marginals_equalised(rng):
    for _ in range(20):
        prob = _full_offload(rng)
        act, w, bits, snr = oracles.bandwidth_terms(prob)
        a = solve_bandwidth(prob)[act]
        g = oracles._bw_grad(w, bits, snr, prob.bandwidth, a)
        assert np.ptp(g) <= 1e-6 * np.abs(g).max()


@given(st.integers(0, 2**32 - 1), st.data())
def test_bandwidth_objective_midpoint_convex(seed, data):
    prob = _full_offload(np.random.default_rng(seed), n=4)
    x = np.random.default_rng(seed + 1).dirichlet(np.ones(4))
    y = np.random.default_rng(seed + 2).dirichlet(np.ones(4))
    mid = bandwidth_objective(prob, (x + y) / 2)
    assert mid <= (bandwidth_objective(prob, x) + bandwidth_objective(prob, y)) / 2 * (1 + 1e-12)


# --- allocate_all ---------------------------------------------------------------------------

def test_all_local_boundary(rng):
    prob = oracles.random_problem(rng)
    prob = with_fields(prob, d_ue=(prob.d_ue + prob.d_es).tolist(), d_es=[0.0] * 5, payload=[0.0] * 5)
    alloc, stable = allocate_all(prob)
    assert np.all(alloc.alpha == 0) and np.all(alloc.f_es == 0)
    assert np.all(alloc.f_ue > 0) and stable.all()


def test_all_edge_boundary(rng):
    prob = oracles.random_problem(rng)
    prob = with_fields(prob, d_es=(prob.d_ue + prob.d_es).tolist(), d_ue=[0.0] * 5,
                       payload=[602112.0] * 5)
    alloc, _ = allocate_all(prob)
    assert np.all(alloc.f_ue == 0)
    assert alloc.alpha.sum() == pytest.approx(1.0, abs=1e-9)
    assert alloc.f_es.sum() == pytest.approx(15e9, rel=1e-12)


def _separable_objective(prob, alloc):
    total = 0.0
    for i in range(prob.n):
        if prob.d_ue[i] > 0:
            total += local_cpu_objective(prob, i, alloc.f_ue[i])
    return total + edge_cpu_objective(prob, alloc.f_es) + bandwidth_objective(prob, alloc.alpha)


def test_allocate_all_beats_random_feasible(rng):
    for _ in range(5):
        prob = oracles.random_problem(rng)
        alloc, stable = allocate_all(prob)
        best = _separable_objective(prob, alloc)
        alloc.check(prob.f_max_ue, prob.f_max_es)
        for _ in range(1000):
            alpha = rng.dirichlet(np.ones(prob.n)) * (prob.payload > 0)
            f_es = rng.dirichlet(np.ones(prob.n)) * prob.f_max_es * rng.uniform(0.5, 1.0)
            lo = prob.d_ue * prob.lam
            f_ue = lo + rng.uniform(0, 1, prob.n) * (prob.f_max_ue - lo)
            cand = Allocation(alpha, np.where(prob.d_ue > 0, f_ue, 0.0), f_es)
            assert best <= _separable_objective(prob, cand)


@given(st.integers(0, 2**32 - 1))
def test_allocation_feasibility(seed):
    prob = oracles.random_problem(np.random.default_rng(seed), n=6, offload_prob=0.6)
    alloc, _ = allocate_all(prob)
    assert alloc.alpha.sum() <= 1 + 1e-9
    assert np.all(alloc.alpha >= 0)
    assert alloc.f_es.sum() <= prob.f_max_es * (1 + 1e-15)
    assert np.all((alloc.f_ue >= 0) & (alloc.f_ue <= prob.f_max_ue))
    assert np.all(alloc.alpha[prob.payload == 0] == 0)


def test_unstable_ue_flagged():
    prob = single(d=1e9, lam=2.0)
    alloc, stable = allocate_all(prob)
    assert not stable[0] and alloc.f_ue[0] == prob.f_max_ue


def test_problem_validation():
    with pytest.raises(ValueError):
        single(q=-1.0)
    with pytest.raises(ValueError):
        AllocProblem.from_dict({**single().to_dict(), "lam": [1.0, 2.0]})
    prob = single()
    assert AllocProblem.from_dict(prob.to_dict()).to_dict() == prob.to_dict()
    assert math.isinf(local_cpu_objective(prob, 0, 1e8))
