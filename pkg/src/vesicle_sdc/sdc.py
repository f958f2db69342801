"""Spectral deferred correction on Gauss-Lobatto substeps.

A step of size dt is split at the p Lobatto nodes. A first-order provisional
trajectory comes from IMEX Euler substeps; each sweep then computes the Picard
residual

    r(t_n) = x(0) - x~(t_n) + int_0^{t_n} v(x~; x~) dtau

with interpolatory quadrature and solves a linearised error equation at each
substep. The adopted correction freezes every operator at x~(t_{n+1}), whose
velocity is already needed for the residual, and carries the tension error so
that the fixed point satisfies the inextensibility constraint.

The velocity inside the residual integral is the one with the tension
eliminated, i.e. the tension is the one compatible with the node shapes. It is
recovered by a dt = 0 solve at each node, preconditioned with the dt = 0
blocks factorised alongside the step's preconditioner. Carrying the corrected tension over instead lets tension
errors from one step seed near-Nyquist growth in the next.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as leg

from .curve import VesicleCurve
from .dynamics import ImplicitSystem, SuspensionState, pack
from .potentials import flat, unflat
from .stepper import EULER, Solver, StepRejected, provisional_step

VARIANTS = ("frozen-next", "frozen-current", "explicit")


@dataclass(frozen=True)
class LobattoGrid:
    """p Gauss-Lobatto nodes on [a, b] with interpolatory integration weights.

    ``cumulative[n, m]`` integrates the m-th Lagrange basis polynomial from a to
    t_n; ``integration`` holds its consecutive differences (t_n to t_{n+1}).
    """

    p: int
    nodes: np.ndarray
    weights: np.ndarray
    cumulative: np.ndarray

    @property
    def integration(self) -> np.ndarray:
        return np.diff(self.cumulative, axis=0)

    @property
    def substeps(self) -> np.ndarray:
        return np.diff(self.nodes)


def lobatto_nodes(p: int, dt: float = 1.0, start: float = 0.0) -> LobattoGrid:
    """Gauss-Lobatto grid with p points on [start, start + dt]."""
    if p < 2:
        raise ValueError(f"need p >= 2 Lobatto points, got {p}")
    if not dt > 0:
        raise ValueError("interval length must be positive")
    # interior nodes are the roots of P'_{p-1}
    c = np.zeros(p)
    c[-1] = 1.0
    interior = np.sort(leg.legroots(leg.legder(c))) if p > 2 else np.array([])
    ref = np.concatenate([[-1.0], interior, [1.0]])
    # symmetrise against round-off
    ref = 0.5 * (ref - ref[::-1])
    pval = leg.legval(ref, c)
    wref = 2.0 / (p * (p - 1) * pval**2)

    # cumulative integrals of the Lagrange basis on [-1, 1]
    cum = np.zeros((p, p))
    for m in range(p):
        y = np.zeros(p)
        y[m] = 1.0
        coef = leg.legfit(ref, y, p - 1)
        anti = leg.legint(coef, lbnd=-1.0)
        cum[:, m] = leg.legval(ref, anti)
    half = 0.5 * dt
    return LobattoGrid(p, start + half * (ref + 1.0), half * wref, half * cum)


@dataclass
class SdcWorkspace:
    """Provisional trajectory at the Lobatto nodes with per-node caches."""

    grid: LobattoGrid
    states: list
    systems: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    residual: list | None = None
    residual_norms: list = field(default_factory=list)
    gmres_iterations: list = field(default_factory=list)

    def __post_init__(self):
        p = self.grid.p
        if len(self.states) != p:
            raise ValueError(f"expected {p} states, got {len(self.states)}")
        if not self.systems:
            self.systems = [None] * p
        if not self.velocities:
            self.velocities = [None] * p

    def invalidate(self, nodes=None):
        for n in (range(self.grid.p) if nodes is None else nodes):
            self.systems[n] = None
            self.velocities[n] = None
        self.residual = None

    def system(self, n: int, solver: Solver) -> ImplicitSystem:
        if self.systems[n] is None:
            self.systems[n] = solver.system(self.states[n].vesicles)
        return self.systems[n]

    def velocity(self, n: int, solver: Solver, prec=None) -> list:
        """Total velocity at node n with operators frozen at node n (flat per vesicle).

        With ``prec`` given, the node tension (and wall density) is first made
        compatible with the node shapes.
        """
        if self.velocities[n] is None:
            system = self.system(n, solver)
            if prec is not None:
                self.states[n] = _compatible_state(system, self.states[n], solver, prec)
            self.velocities[n] = solver.total_velocity(system, self.states[n])
        return self.velocities[n]


def _compatible_state(system: ImplicitSystem, state: SuspensionState, solver: Solver,
                      prec) -> SuspensionState:
    rhs = solver.provisional_rhs(system, [v.points for v in state.vesicles], 0.0)
    z = solver.solve(system, rhs, 1.0, 0.0, getattr(prec, "static", None) or prec)
    blocks = system.blocks(z)
    tens = [b[2 * v.n:].copy() for b, v in zip(blocks, system.ves)]
    eta = unflat(system.eta(z).copy()) if system.wall_op is not None else None
    return SuspensionState(list(state.vesicles), tens, eta, state.time)


def picard_residual(ws: SdcWorkspace, solver: Solver, prec=None) -> list:
    """Residual table r[n][j] (flat positions) at every node; r[0] = 0.

    ``prec`` enables the compatible-tension velocities (see module notes).
    """
    grid = ws.grid
    vel = [ws.velocity(n, solver, prec) for n in range(grid.p)]
    x0 = [flat(v.points) for v in ws.states[0].vesicles]
    table = []
    for n in range(grid.p):
        row = []
        for j in range(len(x0)):
            integral = sum(grid.cumulative[n, m] * vel[m][j] for m in range(grid.p))
            row.append(x0[j] - flat(ws.states[n].vesicles[j].points) + integral)
        table.append(row)
    ws.residual = table
    ws.residual_norms.append(max(np.abs(r).max() for r in table[-1]) if table else 0.0)
    return table


def _constraint_rhs(system: ImplicitSystem, total_vel: list, z, solver: Solver):
    """Inextensibility and wall defects of the state z under ``system``."""
    div = [-(v.div @ u) for v, u in zip(system.ves, total_vel)]
    wall = None
    if system.wall_op is not None:
        wall = flat(solver.flow.wall.boundary_velocity) - system.wall_rows(z)
    return div, wall


def sdc_sweep(ws: SdcWorkspace, solver: Solver, prec, variant: str = "frozen-next") -> list:
    """One correction sweep; updates ``ws.states`` in place and returns the errors."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown SDC variant {variant!r}; expected one of {VARIANTS}")
    grid = ws.grid
    if ws.residual is None:
        picard_residual(ws, solver, prec)
    r = ws.residual
    m = ws.states[0].m
    confined = solver.flow.confined
    err_x = [[np.zeros_like(r[0][j]) for j in range(m)]]
    err_s = [[np.zeros(ws.states[0].vesicles[j].n) for j in range(m)]]
    err_eta = [None]
    iters = 0
    for n in range(grid.p - 1):
        dtn = grid.substeps[n]
        base = [err_x[n][j] + r[n + 1][j] - r[n][j] for j in range(m)]
        if variant == "explicit":
            err_x.append(base)
            err_s.append([np.zeros_like(s) for s in err_s[0]])
            err_eta.append(None)
            continue
        k = n + 1 if variant == "frozen-next" else n
        system = ws.system(k, solver)
        z_next = pack(ws.states[n + 1])
        if k == n + 1:
            total = ws.velocity(n + 1, solver)
        else:
            total = solver.total_velocity(system, ws.states[n + 1])
        div, wall = _constraint_rhs(system, total, z_next, solver)
        parts = []
        for j in range(m):
            parts += [base[j], div[j]]
        if confined:
            parts.append(wall)
        z = solver.solve(system, np.concatenate(parts), 1.0, dtn, prec)
        iters += solver.last_iterations
        blocks = system.blocks(z)
        err_x.append([b[:2 * v.n] for b, v in zip(blocks, system.ves)])
        err_s.append([b[2 * v.n:] for b, v in zip(blocks, system.ves)])
        err_eta.append(system.eta(z) if confined else None)

    for n in range(1, grid.p):
        st = ws.states[n]
        curves = [VesicleCurve(v.points + unflat(e), check=False)
                  for v, e in zip(st.vesicles, err_x[n])]
        tens = [s + e for s, e in zip(st.tensions, err_s[n])]
        eta = st.wall_density
        if err_eta[n] is not None:
            eta = eta + unflat(err_eta[n])
        ws.states[n] = SuspensionState(curves, tens, eta, st.time)
    ws.invalidate(range(1, grid.p))
    ws.gmres_iterations.append(iters)
    return err_x


@dataclass
class SdcDiagnostics:
    residual_norms: list
    gmres_iterations: list
    workspace: SdcWorkspace


def sdc_step(state: SuspensionState, dt: float, p: int, n_sdc: int, solver: Solver,
             variant: str = "frozen-next", keep_workspace: bool = False):
    """Provisional Euler sweep over the Lobatto substeps plus n_sdc corrections.

    The block preconditioner is formed once, at the first node, with the mean
    substep size, and reused for every solve of the step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_sdc < 0:
        raise ValueError("n_sdc must be non-negative")
    grid = lobatto_nodes(p, dt, state.time)
    states = [state]
    systems = [solver.system(state.vesicles)]
    prec = solver.precondition(systems[0], dt / (p - 1), 1.0, static=n_sdc > 0)
    iters = 0
    for n in range(p - 1):
        if n > 0:
            systems.append(solver.system(states[n].vesicles))
        new = provisional_step([states[n]], grid.substeps[n], EULER, solver, systems[n], prec)
        new.time = grid.nodes[n + 1]
        states.append(new)
        iters += solver.last_iterations
    systems.append(None)
    ws = SdcWorkspace(grid, states, systems)
    ws.gmres_iterations.append(iters)
    for _ in range(n_sdc):
        picard_residual(ws, solver, prec)
        sdc_sweep(ws, solver, prec, variant)
    final = ws.states[-1]
    if n_sdc > 0 and solver.options.check_curves:
        # corrections bypass the shape checks done by the provisional solve
        try:
            final = SuspensionState([VesicleCurve(v.points) for v in final.vesicles],
                                    final.tensions, final.wall_density, final.time)
        except ValueError as exc:
            raise StepRejected(f"invalid vesicle shape: {exc}") from exc
    final.time = state.time + dt
    diag = SdcDiagnostics(ws.residual_norms, ws.gmres_iterations, ws if keep_workspace else None)
    return final, diag


def sdc_run(initial: SuspensionState, dt: float, steps: int, p: int, n_sdc: int,
            solver: Solver, variant: str = "frozen-next", callback=None) -> SuspensionState:
    state = initial
    for n in range(steps):
        state, diag = sdc_step(state, dt, p, n_sdc, solver, variant)
        state.time = initial.time + (n + 1) * dt
        if callback is not None:
            callback(state, diag)
    return state
