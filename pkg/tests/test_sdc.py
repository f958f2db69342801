from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vesicle_sdc.config import initial_state, preset
from vesicle_sdc.curve import ellipse
from vesicle_sdc.dynamics import BackgroundFlow, SuspensionState, WorkCounter
from vesicle_sdc.potentials import flat
from vesicle_sdc.sdc import (
    SdcWorkspace,
    lobatto_nodes,
    picard_residual,
    sdc_run,
    sdc_step,
    sdc_sweep,
)
from vesicle_sdc.stepper import EULER, Solver, provisional_step


def solver(counter=None):
    return Solver(BackgroundFlow("none"), counter=counter)


def relaxing(n=32):
    return SuspensionState.from_curves([ellipse(n, 1.6, 1.0)])


# --- Lobatto quadrature -----------------------------------------------------------

def test_two_point_grid_is_trapezoid():
    g = lobatto_nodes(2, 2.0, -1.0)
    assert np.allclose(g.nodes, [-1, 1], atol=1e-15)
    assert np.allclose(g.weights, [1, 1], atol=1e-15)


def test_four_point_grid():
    g = lobatto_nodes(4, 2.0, -1.0)
    r = 1 / np.sqrt(5)
    assert np.max(np.abs(g.nodes - [-1, -r, r, 1])) < 1e-15
    # on [0, 1] the weights are 1/12 (1, 5, 5, 1)
    assert np.max(np.abs(g.weights - np.array([1, 5, 5, 1]) / 6)) < 1e-15


def test_four_point_exact_for_quintic():
    g = lobatto_nodes(4)
    assert abs(g.weights @ g.nodes**5 - 1 / 6) < 1e-13
    assert abs(g.weights @ g.nodes**6 - 1 / 7) > 1e-5


@pytest.mark.parametrize("p", [2, 3, 4, 5, 7])
def test_cumulative_integrals_of_polynomials(p):
    dt, a = 0.7, 0.3
    g = lobatto_nodes(p, dt, a)
    assert np.max(np.abs(g.cumulative.sum(axis=1) - (g.nodes - a))) < 1e-14
    assert np.max(np.abs(g.cumulative[-1] - g.weights)) < 1e-14
    # the basis is degree p-1, so polynomials of that degree integrate exactly
    k = p - 1
    exact = (g.nodes**(k + 1) - a**(k + 1)) / (k + 1)
    assert np.max(np.abs(g.cumulative @ g.nodes**k - exact)) < 1e-13
    assert g.integration.shape == (p - 1, p)


def test_nodes_symmetric():
    for p in range(2, 9):
        x = lobatto_nodes(p, 2.0, -1.0).nodes
        assert np.max(np.abs(x + x[::-1])) < 1e-15


def test_bad_grid_arguments():
    with pytest.raises(ValueError):
        lobatto_nodes(1)
    with pytest.raises(ValueError):
        lobatto_nodes(3, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.floats(0.01, 10), st.floats(-5, 5))
def test_weights_positive_and_sum_to_dt(p, dt, a):
    g = lobatto_nodes(p, dt, a)
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - dt) <= 1e-13 * dt
    assert np.all(np.diff(g.nodes) > 0)


def test_picard_residual_of_exact_polynomial_trajectory():
    # x' = f(t) with f of degree p-1: the exact path has a zero residual row
    p = 5
    g = lobatto_nodes(p, 0.4, 1.0)
    f = lambda t: 1 - 2 * t + 3 * t**2 - t**4
    x = lambda t: t - t**2 + t**3 - t**5 / 5
    r = x(g.nodes[0]) - x(g.nodes) + g.cumulative @ f(g.nodes)
    assert np.max(np.abs(r)) < 1e-14


# --- residual and sweeps -------------------------------------------------------------

def test_stationary_circle_residual_and_step():
    s = solver()
    state = SuspensionState.from_curves([ellipse(32, 1.0, 1.0)])
    new, diag = sdc_step(state, 0.1, 4, 2, s, keep_workspace=True)
    assert max(diag.residual_norms) < 1e-8
    assert np.max(np.abs(new.vesicles[0].points - state.vesicles[0].points)) < 1e-8


def provisional(state, dt, p, s):
    g = lobatto_nodes(p, dt, state.time)
    states = [state]
    for h in g.substeps:
        states.append(provisional_step([states[-1]], h, EULER, s))
    return SdcWorkspace(g, states)


def test_residual_of_euler_trajectory_is_second_order():
    s = solver()
    state = relaxing()
    norms = []
    for dt in (0.008, 0.004, 0.002, 0.001):
        ws = provisional(state, dt, 3, s)
        sys0 = s.system(state.vesicles)
        prec = s.precondition(sys0, dt / 2, 1.0, static=True)
        picard_residual(ws, s, prec)
        norms.append(ws.residual_norms[-1])
    rates = np.log2(np.array(norms[:-1]) / np.array(norms[1:]))
    # pre-asymptotic at the coarse end; the rate climbs towards 2
    assert np.all(np.diff(rates) > 0)
    assert rates[-1] > 1.8


def test_zero_residual_gives_zero_correction():
    s = solver()
    state = relaxing()
    ws = provisional(state, 0.02, 3, s)
    sys0 = s.system(state.vesicles)
    prec = s.precondition(sys0, 0.01, 1.0, static=True)
    # compatible node tensions leave no constraint defect to correct
    picard_residual(ws, s, prec)
    ws.residual = [[np.zeros_like(r) for r in row] for row in ws.residual]
    before = [st.vesicles[0].points.copy() for st in ws.states]
    errs = sdc_sweep(ws, s, prec)
    assert max(np.max(np.abs(e[0])) for e in errs) < 1e-9
    assert max(np.max(np.abs(a - b.vesicles[0].points)) for a, b in zip(before, ws.states)) < 1e-9


def test_no_corrections_equals_euler_substeps():
    s = solver()
    state = relaxing()
    dt, p = 0.03, 4
    got, _ = sdc_step(state, dt, p, 0, s)
    ref = state
    for h in lobatto_nodes(p, dt).substeps:
        ref = provisional_step([ref], h, EULER, s)
    assert np.max(np.abs(got.vesicles[0].points - ref.vesicles[0].points)) < 1e-9
    assert abs(got.time - dt) < 1e-15


def test_sweeps_do_not_increase_residual():
    s = solver()
    state = initial_state(preset("relaxation"))
    for _ in range(3):
        state, diag = sdc_step(state, 2 / 125, 4, 3, s)
        r = diag.residual_norms
        assert all(b <= a * (1 + 1e-12) for a, b in zip(r[:-1], r[1:]))


def test_corrections_reduce_step_error():
    # one step against a tightly resolved reference
    s = solver()
    state = relaxing()
    dt = 0.05
    ref = state
    for _ in range(200):
        ref = provisional_step([ref], dt / 200, EULER, s)
    ref2 = state
    for _ in range(400):
        ref2 = provisional_step([ref2], dt / 400, EULER, s)
    exact = 2 * ref2.vesicles[0].points - ref.vesicles[0].points
    errs = []
    for n_sdc in (0, 1):
        out, _ = sdc_step(state, dt, 4, n_sdc, s)
        errs.append(np.max(np.abs(out.vesicles[0].points - exact)))
    assert errs[1] < 0.2 * errs[0]


@pytest.mark.parametrize("variant", ["frozen-next", "frozen-current", "explicit"])
def test_variants_run(variant):
    s = solver()
    out, diag = sdc_step(relaxing(), 0.01, 3, 1, s, variant=variant)
    assert np.all(np.isfinite(out.vesicles[0].points))


def test_unknown_variant():
    with pytest.raises(ValueError):
        sdc_step(relaxing(), 0.01, 3, 1, solver(), variant="implicit")


@pytest.mark.parametrize("p,n_sdc", [(2, 1), (4, 1), (4, 3), (5, 2)])
def test_one_factorization_per_step(p, n_sdc):
    counter = WorkCounter()
    s = solver(counter)
    sdc_run(relaxing(), 0.01, 2, p, n_sdc, s)
    assert counter.factorizations == 2


def test_run_time_and_callback():
    seen = []
    out = sdc_run(relaxing(), 0.01, 3, 3, 1, solver(), callback=lambda st, d: seen.append(st.time))
    assert np.allclose(seen, [0.01, 0.02, 0.03], atol=1e-15)
    assert abs(out.time - 0.03) < 1e-15


def test_step_argument_checks():
    with pytest.raises(ValueError):
        sdc_step(relaxing(), 0.0, 3, 1, solver())
    with pytest.raises(ValueError):
        sdc_step(relaxing(), 0.1, 3, -1, solver())
    with pytest.raises(ValueError):
        SdcWorkspace(lobatto_nodes(3), [relaxing()])


def test_inextensibility_at_fixed_point():
    # many sweeps drive the node tensions to the compatible ones
    s = solver()
    state = relaxing()
    _, diag = sdc_step(state, 0.02, 3, 12, s, keep_workspace=True)
    ws = diag.workspace
    last = ws.states[-1]
    system = s.system(last.vesicles)
    u = s.total_velocity(system, last)[0]
    assert np.max(np.abs(system.ves[0].div @ u)) < 1e-6
    assert flat(last.vesicles[0].points).shape == (64,)
