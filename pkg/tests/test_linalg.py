from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from vesicle_sdc.curve import ellipse
from vesicle_sdc.dynamics import BackgroundFlow, ImplicitSystem, WorkCounter
from vesicle_sdc.linalg import GMRESError, build_preconditioner, factorize_blocks, gmres, solve
from vesicle_sdc.potentials import flat


def provisional_rhs(system, dt):
    parts = []
    for v, bg in zip(system.ves, system.background()):
        parts += [flat(v.points) + dt * bg, -(v.div @ bg)]
    return np.concatenate(parts)


# --- GMRES --------------------------------------------------------------------

def test_identity_one_iteration():
    b = np.random.default_rng(0).normal(size=20)
    res = gmres(lambda v: v, b)
    assert res.iterations == 1
    assert np.max(np.abs(res.x - b)) < 1e-14


def test_random_system_matches_lu():
    rng = np.random.default_rng(1)
    a = np.eye(100) * 10 + rng.normal(size=(100, 100))
    b = rng.normal(size=100)
    res = gmres(lambda v: a @ v, b, tol=1e-12)
    ref = sla.lu_solve(sla.lu_factor(a), b)
    assert np.max(np.abs(res.x - ref)) < 1e-8
    assert res.residual < 1e-11


def test_jacobi_preconditioned_diagonal():
    d = np.arange(1.0, 101.0)
    b = np.ones(100)
    res = gmres(lambda v: d * v, b, apply_prec=lambda v: v / d)
    assert res.iterations <= 3
    assert np.max(np.abs(res.x - 1 / d)) < 1e-12


def test_zero_rhs():
    res = gmres(lambda v: 2 * v, np.zeros(5))
    assert res.iterations == 0 and np.all(res.x == 0)


def test_iteration_cap_carries_best_iterate():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(60, 60))
    b = rng.normal(size=60)
    with pytest.raises(GMRESError) as info:
        gmres(lambda v: a @ v, b, max_iter=5)
    err = info.value
    assert err.iterations == 5
    assert err.x.shape == (60,)
    assert 0 < err.residual < 1.0


def test_bad_tolerance():
    with pytest.raises(ValueError):
        gmres(lambda v: v, np.ones(3), tol=0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10000), st.integers(5, 40))
def test_gmres_residual_reported(seed, n):
    rng = np.random.default_rng(seed)
    a = np.eye(n) * (n / 2) + rng.normal(size=(n, n))
    b = rng.normal(size=n)
    res = gmres(lambda v: a @ v, b, tol=1e-10)
    true = np.linalg.norm(b - a @ res.x) / np.linalg.norm(b)
    assert abs(true - res.residual) <= 1e-14 + 1e-6 * true
    assert res.residual < 1e-8


# --- block preconditioner -------------------------------------------------------

def iterations(system, dt, prec):
    rhs = provisional_rhs(system, dt)
    return solve(system, rhs, 1.0, dt, prec, tol=1e-10, max_iter=400).iterations


def test_preconditioner_cuts_iterations():
    # circle-frozen system, previous shape a broadband perturbation of the circle
    c = ellipse(64, 1.0, 1.0)
    system = ImplicitSystem([c], BackgroundFlow("none"))
    th = c.theta()
    r = 1 + sum(0.02 / k * np.cos(k * th + k) for k in range(2, 20))
    rhs = np.concatenate([flat(c.points * r[:, None]), np.zeros(64)])
    dt = 1e-2
    with_prec = solve(system, rhs, 1.0, dt, build_preconditioner(system, dt)).iterations
    without = solve(system, rhs, 1.0, dt, None, max_iter=400).iterations
    assert with_prec <= 5
    assert without >= 30


def test_preconditioner_inverts_single_vesicle_block():
    system = ImplicitSystem([ellipse(32, 1.5, 1.0)], BackgroundFlow("none"))
    prec = build_preconditioner(system, 0.05)
    v = np.random.default_rng(4).normal(size=system.size)
    assert np.max(np.abs(system.apply(prec(v), 1.0, 0.05) - v)) < 1e-8 * np.max(np.abs(v))


def test_small_dt_limit():
    system = ImplicitSystem([ellipse(64, 1.5, 1.0)], BackgroundFlow("none"))
    dt = 1e-9
    assert iterations(system, dt, build_preconditioner(system, dt)) <= 2


def test_far_pair_close_to_single():
    flow = BackgroundFlow("none")
    single = ImplicitSystem([ellipse(64, 1.5, 1.0)], flow)
    pair = ImplicitSystem([ellipse(64, 1.5, 1.0, center=(-30, 0)),
                           ellipse(64, 1.5, 1.0, center=(30, 0))], flow)
    dt = 1e-2
    n1 = iterations(single, dt, build_preconditioner(single, dt))
    n2 = iterations(pair, dt, build_preconditioner(pair, dt))
    assert n2 <= n1 + 2


def test_mesh_independent_iterations():
    flow = BackgroundFlow("none")
    counts = []
    for n in (64, 128):
        system = ImplicitSystem([ellipse(n, 3.0, 1.0)], flow)
        dt = 2 / 125
        counts.append(iterations(system, dt, build_preconditioner(system, dt)))
    assert abs(counts[0] - counts[1]) <= 5


def test_one_factorization_per_build():
    counter = WorkCounter()
    system = ImplicitSystem([ellipse(32, 1.5, 1.0), ellipse(32, 1, 1, center=(4, 0))],
                            BackgroundFlow("none"), counter=counter)
    prec = build_preconditioner(system, 0.1, static=True)
    assert counter.factorizations == 1
    assert len(prec.factors) == 2 and prec.static is not None
    factorize_blocks(system, 0.0)
    assert counter.factorizations == 2


def test_build_rejects_nonpositive_dt():
    system = ImplicitSystem([ellipse(32, 1.5, 1.0)], BackgroundFlow("none"))
    with pytest.raises(ValueError):
        build_preconditioner(system, 0.0)
