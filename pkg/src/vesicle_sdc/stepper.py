"""Semi-implicit provisional integrators: IMEX Euler and BDF2.

Both solve  beta x^{n+1} - x^0 = dt V(x^e; x^{n+1}, sigma^{n+1})  together with
Div(x^e) V = 0, where the operators are frozen at the extrapolated shape x^e
and the background flow is explicit at x^e.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curve import CurveError, VesicleCurve
from .dynamics import (
    BackgroundFlow,
    ImplicitSystem,
    SuspensionState,
    WallOperator,
    WorkCounter,
    pack,
)
from .linalg import GMRESError, build_preconditioner, factorize_blocks, solve
from .potentials import DEFAULT_NEAR, CollisionError, NearSingularOptions, flat, unflat


class StepRejected(RuntimeError):
    """A step could not be completed (collision, solver failure, bad curve)."""


@dataclass(frozen=True)
class ImexScheme:
    name: str
    beta: float
    x0_coefficients: tuple
    xe_coefficients: tuple

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if len(self.x0_coefficients) != len(self.xe_coefficients):
            raise ValueError("coefficient sets must span the same history")

    @property
    def history(self) -> int:
        return len(self.x0_coefficients)


EULER = ImexScheme("euler", 1.0, (1.0,), (1.0,))
BDF2 = ImexScheme("bdf2", 1.5, (2.0, -0.5), (2.0, -1.0))


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 200
    near: NearSingularOptions = field(default_factory=lambda: DEFAULT_NEAR)
    check_curves: bool = True


class Solver:
    """Builds frozen systems and runs preconditioned GMRES, counting work."""

    def __init__(self, flow: BackgroundFlow, options: SolverOptions | None = None,
                 counter: WorkCounter | None = None):
        self.flow = flow
        self.options = options or SolverOptions()
        self.counter = counter or WorkCounter()
        self.wall_op = WallOperator(flow.wall, self.options.near) if flow.confined else None
        self.last_iterations = 0

    def system(self, curves) -> ImplicitSystem:
        try:
            return ImplicitSystem(curves, self.flow, self.options.near, self.wall_op, self.counter)
        except CollisionError as exc:
            raise StepRejected(f"collision: {exc}") from exc

    def precondition(self, system: ImplicitSystem, dt: float, beta: float = 1.0,
                     static: bool = False):
        try:
            return build_preconditioner(system, dt, beta, static=static)
        except np.linalg.LinAlgError as exc:
            raise StepRejected(str(exc)) from exc

    def solve(self, system: ImplicitSystem, rhs, beta: float, dt: float, prec) -> np.ndarray:
        try:
            res = solve(system, rhs, beta, dt, prec, self.options.tol, self.options.max_iter)
        except GMRESError as exc:
            raise StepRejected(str(exc)) from exc
        self.last_iterations = res.iterations
        return res.x

    def provisional_rhs(self, system: ImplicitSystem, x0: list, dt: float) -> np.ndarray:
        parts = []
        for v, bg, xj in zip(system.ves, system.background(), x0):
            parts += [flat(xj) + dt * bg, -(v.div @ bg)]
        if system.wall_op is not None:
            parts.append(flat(self.flow.wall.boundary_velocity))
        return np.concatenate(parts)

    def unpack(self, system: ImplicitSystem, z, time: float) -> SuspensionState:
        curves, tensions = [], []
        for v, zj in zip(system.ves, system.blocks(z)):
            pts = unflat(zj[:2 * v.n])
            try:
                curves.append(VesicleCurve(pts, check=self.options.check_curves))
            except CurveError as exc:
                raise StepRejected(f"invalid vesicle shape: {exc}") from exc
            tensions.append(zj[2 * v.n:].copy())
        eta = unflat(system.eta(z).copy()) if system.wall_op is not None else None
        state = SuspensionState(curves, tensions, eta, time)
        if self.flow.confined and self.options.check_curves:
            for c in curves:
                if not np.all(self.flow.wall.contains(c.points)):
                    raise StepRejected("vesicle left the confined domain")
        return state

    def total_velocity(self, system: ImplicitSystem, state: SuspensionState) -> list:
        """Background + induced velocity (flat) with operators of ``system``."""
        vel = system.velocities(pack(state))
        return [u + b for u, b in zip(vel, system.background())]


def consistent_state(state: SuspensionState, solver: Solver) -> SuspensionState:
    """Tension (and wall density) compatible with the given shapes.

    Solves the implicit system with dt = 0, whose position rows reduce to the
    identity, so only the inextensibility and wall rows act.
    """
    system = solver.system(state.vesicles)
    try:
        prec = factorize_blocks(system, 0.0, 1.0)
    except np.linalg.LinAlgError as exc:
        raise StepRejected(str(exc)) from exc
    rhs = solver.provisional_rhs(system, [v.points for v in state.vesicles], 0.0)
    z = solver.solve(system, rhs, 1.0, 0.0, prec)
    out = solver.unpack(system, z, state.time)
    # keep the exact input shapes
    out.vesicles = list(state.vesicles)
    return out


def _combine(coeffs, arrays):
    return sum(c * a for c, a in zip(coeffs, arrays))


def provisional_step(history, dt: float, scheme: ImexScheme, solver: Solver,
                     system: ImplicitSystem | None = None, prec=None) -> SuspensionState:
    """One IMEX step. ``history`` is [state_n, state_{n-1}, ...] (newest first)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if isinstance(history, SuspensionState):
        history = [history]
    if len(history) < scheme.history:
        raise ValueError(f"{scheme.name} needs {scheme.history} previous states")
    hist = history[:scheme.history]
    m = hist[0].m
    x0 = [_combine(scheme.x0_coefficients, [h.vesicles[j].points for h in hist]) for j in range(m)]
    if system is None:
        xe = [_combine(scheme.xe_coefficients, [h.vesicles[j].points for h in hist]) for j in range(m)]
        system = solver.system([VesicleCurve(x, check=False) for x in xe])
    if prec is None:
        prec = solver.precondition(system, dt, scheme.beta)
    rhs = solver.provisional_rhs(system, x0, dt)
    z = solver.solve(system, rhs, scheme.beta, dt, prec)
    return solver.unpack(system, z, hist[0].time + dt)


@dataclass
class StepRecord:
    time: float
    dt: float
    areas: np.ndarray
    lengths: np.ndarray
    gmres_iterations: int


@dataclass
class Trajectory:
    states: list
    records: list

    @property
    def final(self) -> SuspensionState:
        return self.states[-1]


def relative_errors(initial: SuspensionState, state: SuspensionState):
    """max_j |A_j - A_j(0)| / A_j(0) and the same for length."""
    ea = np.max(np.abs(state.areas() - initial.areas()) / initial.areas())
    el = np.max(np.abs(state.lengths() - initial.lengths()) / initial.lengths())
    return float(ea), float(el)


def fixed_step_run(initial: SuspensionState, dt: float, steps: int, scheme: ImexScheme,
                   solver: Solver, keep_states: bool = False, callback=None) -> Trajectory:
    """Fixed-step Euler or BDF2 (bootstrapped with one Euler step)."""
    if steps < 1:
        raise ValueError("need at least one step")
    history = [initial]
    states = [initial]
    records = []
    for n in range(steps):
        sch = scheme if len(history) >= scheme.history else EULER
        new = provisional_step(history, dt, sch, solver)
        new.time = initial.time + (n + 1) * dt
        history = [new] + history[:1]
        rec = StepRecord(new.time, dt, new.areas(), new.lengths(), solver.last_iterations)
        records.append(rec)
        if keep_states:
            states.append(new)
        else:
            states = [initial, new]
        if callback is not None:
            callback(new, rec)
    return Trajectory(states, records)


def bdf2_run(initial: SuspensionState, dt: float, horizon: float, solver: Solver,
             keep_states: bool = False, callback=None) -> Trajectory:
    steps = horizon / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ValueError("horizon must be an integer multiple of dt")
    return fixed_step_run(initial, dt, int(round(steps)), BDF2, solver, keep_states, callback)
