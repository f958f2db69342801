"""Membrane operators, background flows, solid walls and the coupled
position/tension system.

Operators are linearised about a frozen configuration: arclength
derivatives use the jacobian of the frozen curve, the tension operator uses
its unit tangent, and the single layer is evaluated on it. The unknowns are
laid out per vesicle as [x (2N, flat); sigma (N)], vesicles one after the
other, and the wall density (2 N_wall, flat) last.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .curve import CurveGeometry, VesicleCurve, differentiation_matrix, geometry, spectral_derivative
from .potentials import (
    DEFAULT_NEAR,
    NearSingularOptions,
    WallGeometry,
    flat,
    rotlet,
    self_single_layer_matrix,
    single_layer_matrix,
    stokeslet,
    unflat,
    wall_double_layer_matrix,
    wall_target_matrix,
)

FLOW_KINDS = ("none", "shear", "extensional", "confined")


# --- operators (FFT form) ---------------------------------------------------

def arclength_derivative(geom_ref: CurveGeometry, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    jac = geom_ref.jacobian if f.ndim == 1 else geom_ref.jacobian[:, None]
    return spectral_derivative(f, 1) / jac


def bending(geom_ref: CurveGeometry, f) -> np.ndarray:
    """Fourth arclength derivative of f with the frozen jacobian."""
    out = np.asarray(f, dtype=float)
    for _ in range(4):
        out = arclength_derivative(geom_ref, out)
    return out


def tension_op(geom_ref: CurveGeometry, curve_ref, sigma) -> np.ndarray:
    """(sigma x_s)_s with x_s taken from the frozen curve."""
    pts = curve_ref.points if isinstance(curve_ref, VesicleCurve) else np.asarray(curve_ref)
    xs = arclength_derivative(geom_ref, pts)
    return arclength_derivative(geom_ref, np.asarray(sigma, dtype=float)[:, None] * xs)


def surface_div(geom_ref: CurveGeometry, f) -> np.ndarray:
    """x_s . f_s on the frozen curve."""
    fs = arclength_derivative(geom_ref, f)
    return np.sum(geom_ref.tangent * fs, axis=1)


# --- background flow --------------------------------------------------------

@dataclass
class BackgroundFlow:
    """Far-field velocity for unbounded flows, or a wall for confined ones."""

    kind: str = "none"
    rate: float = 1.0
    wall: WallGeometry | None = None

    def __post_init__(self):
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"unknown flow kind {self.kind!r}; expected one of {FLOW_KINDS}")
        if self.kind == "confined" and self.wall is None:
            raise ValueError("confined flow requires a wall")
        if self.kind != "confined" and self.wall is not None:
            raise ValueError(f"{self.kind} flow is unbounded and cannot have a wall")

    @property
    def confined(self) -> bool:
        return self.kind == "confined"

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "shear":
            return self.rate * np.column_stack([pts[:, 1], np.zeros(len(pts))])
        if self.kind == "extensional":
            return self.rate * np.column_stack([-pts[:, 0], pts[:, 1]])
        return np.zeros_like(pts)


# --- state ------------------------------------------------------------------

@dataclass
class SuspensionState:
    vesicles: list
    tensions: list
    wall_density: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        self.vesicles = [v if isinstance(v, VesicleCurve) else VesicleCurve(v, check=False)
                         for v in self.vesicles]
        if len(self.tensions) != len(self.vesicles):
            raise ValueError("one tension array per vesicle is required")
        self.tensions = [np.asarray(s, dtype=float) for s in self.tensions]
        for v, s in zip(self.vesicles, self.tensions):
            if s.shape != (v.n,):
                raise ValueError(f"tension shape {s.shape} does not match N={v.n}")

    @classmethod
    def from_curves(cls, curves, tension: float = 0.0, time: float = 0.0) -> SuspensionState:
        curves = [c if isinstance(c, VesicleCurve) else VesicleCurve(c) for c in curves]
        return cls(curves, [np.full(c.n, tension) for c in curves], None, time)

    @property
    def m(self) -> int:
        return len(self.vesicles)

    @property
    def positions(self) -> list:
        return [v.points for v in self.vesicles]

    def areas(self) -> np.ndarray:
        return np.array([v.geometry.area for v in self.vesicles])

    def lengths(self) -> np.ndarray:
        return np.array([v.geometry.length for v in self.vesicles])

    def copy(self) -> SuspensionState:
        eta = None if self.wall_density is None else self.wall_density.copy()
        return SuspensionState(list(self.vesicles), [s.copy() for s in self.tensions], eta, self.time)


def pack(state: SuspensionState) -> np.ndarray:
    parts = []
    for v, s in zip(state.vesicles, state.tensions):
        parts += [flat(v.points), s]
    if state.wall_density is not None:
        parts.append(flat(state.wall_density))
    return np.concatenate(parts)


# --- frozen vesicle ---------------------------------------------------------

class FrozenVesicle:
    """Dense operators of one vesicle linearised about its current shape."""

    def __init__(self, curve):
        pts = curve.points if isinstance(curve, VesicleCurve) else np.asarray(curve, dtype=float)
        self.points = pts
        self.n = n = len(pts)
        self.geom = g = geometry(pts)
        ds = differentiation_matrix(n) / g.jacobian[:, None]
        d4 = np.linalg.matrix_power(ds, 4)
        tx, ty = g.tangent[:, 0], g.tangent[:, 1]
        self.bend = np.kron(np.eye(2), d4)
        self.ten = np.vstack([ds * tx[None, :], ds * ty[None, :]])
        self.div = np.hstack([tx[:, None] * ds, ty[:, None] * ds])
        self.G = self_single_layer_matrix(pts)
        # force = [-B | T] [x; sigma]
        self.force = np.hstack([-self.bend, self.ten])


# --- walls ------------------------------------------------------------------

class WallOperator:
    """Completed double-layer representation of the wall velocity.

    u = D eta + sum_k [Stokeslet(x - c_k) lambda_k + Rotlet(x - c_k) xi_k]
    with lambda_k, xi_k the force and torque moments of eta over inner curve k.
    On the wall the fluid-side limit -eta/2 + PV D eta is used, plus a rank-one
    term on the outer curve removing the null space.
    """

    def __init__(self, wall: WallGeometry, opts: NearSingularOptions = DEFAULT_NEAR):
        self.wall = wall
        self.opts = opts
        self.nw = nw = len(wall.points)
        pieces = wall.split(np.arange(nw))
        weights = np.concatenate([g.jacobian * 2.0 * np.pi / len(g.jacobian) for g in wall.geometries])
        # moment functionals (rows act on flat eta)
        self.moments = []
        for idx, c in zip(pieces[1:], wall.centers):
            lam = np.zeros((2, 2 * nw))
            lam[0, idx] = weights[idx] / (2.0 * np.pi)
            lam[1, nw + idx] = weights[idx] / (2.0 * np.pi)
            rel = wall.points[idx] - c
            xi = np.zeros((1, 2 * nw))
            xi[0, idx] = -rel[:, 1] * weights[idx] / (2.0 * np.pi)
            xi[0, nw + idx] = rel[:, 0] * weights[idx] / (2.0 * np.pi)
            self.moments.append((c, lam, xi))
        mat = wall_double_layer_matrix(wall) - 0.5 * np.eye(2 * nw)
        mat += self.completion_matrix(wall.points)
        i0 = pieces[0]
        nrm = np.zeros((2 * nw,))
        nrm[i0] = wall.geometries[0].normal[:, 0]
        nrm[nw + i0] = wall.geometries[0].normal[:, 1]
        wts = np.zeros(2 * nw)
        wts[i0] = weights[i0]
        wts[nw + i0] = weights[i0]
        mat += np.outer(nrm, nrm * wts)
        self.matrix = mat
        self._lu = None

    def completion_matrix(self, targets) -> np.ndarray:
        targets = np.atleast_2d(targets)
        out = np.zeros((2 * len(targets), 2 * self.nw))
        for c, lam, xi in self.moments:
            r = targets - c
            st = np.column_stack([flat(stokeslet(r, np.array([1.0, 0.0]))),
                                  flat(stokeslet(r, np.array([0.0, 1.0])))])
            rt = flat(rotlet(r, 1.0))[:, None]
            out += st @ lam + rt @ xi
        return out

    def target_matrix(self, targets) -> np.ndarray:
        """(2T, 2Nw) map from eta to the velocity at fluid targets."""
        return wall_target_matrix(self.wall, targets, self.opts) + self.completion_matrix(targets)

    @property
    def lu(self):
        if self._lu is None:
            self._lu = sla.lu_factor(self.matrix)
            if np.any(np.abs(np.diag(self._lu[0])) < 1e-13 * np.abs(self._lu[0]).max()):
                raise np.linalg.LinAlgError("wall system is singular")
        return self._lu

    def solve(self, rhs) -> np.ndarray:
        return sla.lu_solve(self.lu, rhs)


@dataclass
class WallSolution:
    eta: np.ndarray
    forces: list = field(default_factory=list)
    torques: list = field(default_factory=list)


def wall_solve(wall: WallGeometry, vesicle_velocity_on_wall=None,
               operator: WallOperator | None = None) -> tuple[WallSolution, WallOperator]:
    """Density whose velocity matches the wall data minus the vesicle-induced velocity."""
    op = operator or WallOperator(wall)
    rhs = wall.boundary_velocity.copy()
    if vesicle_velocity_on_wall is not None:
        rhs = rhs - np.asarray(vesicle_velocity_on_wall, dtype=float)
    eta = op.solve(flat(rhs))
    forces = [lam @ eta for _, lam, _ in op.moments]
    torques = [float((xi @ eta)[0]) for _, _, xi in op.moments]
    return WallSolution(unflat(eta), forces, torques), op


def wall_velocity(op: WallOperator, eta, targets) -> np.ndarray:
    return unflat(op.target_matrix(targets) @ flat(np.asarray(eta, dtype=float)))


# --- coupled system ---------------------------------------------------------

@dataclass
class WorkCounter:
    matvecs: int = 0
    factorizations: int = 0
    gmres_iterations: int = 0
    solves: int = 0


class ImplicitSystem:
    """Linear operators of the suspension frozen at one configuration.

    ``apply(z, beta, dt)`` evaluates, per vesicle j,
        beta x_j - dt V_j   and   Div_j V_j,
    with V_j = sum_k S_jk (-B_k x_k + T_k sigma_k) + W_j eta, followed (when
    confined) by the wall rows W eta + sum_k S(wall, x_k) f_k.
    """

    def __init__(self, frozen, flow: BackgroundFlow, opts: NearSingularOptions = DEFAULT_NEAR,
                 wall_op: WallOperator | None = None, counter: WorkCounter | None = None):
        curves = frozen.vesicles if isinstance(frozen, SuspensionState) else frozen
        self.flow = flow
        self.opts = opts
        self.counter = counter if counter is not None else WorkCounter()
        self.ves = [FrozenVesicle(c) for c in curves]
        self.m = len(self.ves)
        pts = [v.points for v in self.ves]
        self.cross = [[None] * self.m for _ in range(self.m)]
        for j in range(self.m):
            for k in range(self.m):
                if j != k:
                    self.cross[j][k] = single_layer_matrix(pts[k], pts[j], self.ves[k].G, opts)
        self.wall_op = None
        if flow.confined:
            self.wall_op = wall_op or WallOperator(flow.wall, opts)
            self.wall_to_ves = [self.wall_op.target_matrix(p) for p in pts]
            self.ves_to_wall = [single_layer_matrix(p, flow.wall.points, v.G, opts)
                                for p, v in zip(pts, self.ves)]
        sizes = [3 * v.n for v in self.ves]
        if self.wall_op is not None:
            sizes.append(2 * self.wall_op.nw)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.size = int(self.offsets[-1])

    # layout helpers
    def blocks(self, z):
        return [z[self.offsets[j]:self.offsets[j + 1]] for j in range(len(self.offsets) - 1)]

    def eta(self, z):
        return z[self.offsets[self.m]:] if self.wall_op is not None else None

    def forces(self, z) -> list:
        return [v.force @ zj for v, zj in zip(self.ves, self.blocks(z)[:self.m])]

    def velocities(self, z, forces=None) -> list:
        """Velocity on each vesicle from the linear arguments (no background flow)."""
        f = self.forces(z) if forces is None else forces
        out = []
        for j, v in enumerate(self.ves):
            u = v.G @ f[j]
            for k in range(self.m):
                if k != j:
                    u = u + self.cross[j][k] @ f[k]
            if self.wall_op is not None:
                u = u + self.wall_to_ves[j] @ self.eta(z)
            out.append(u)
        return out

    def background(self) -> list:
        """Explicit background velocity at the frozen points (flat)."""
        return [flat(self.flow(v.points)) for v in self.ves]

    def wall_rows(self, z, forces=None) -> np.ndarray:
        f = self.forces(z) if forces is None else forces
        out = self.wall_op.matrix @ self.eta(z)
        for k in range(self.m):
            out = out + self.ves_to_wall[k] @ f[k]
        return out

    def apply(self, z, beta: float, dt: float) -> np.ndarray:
        self.counter.matvecs += 1
        f = self.forces(z)
        vel = self.velocities(z, f)
        out = []
        for j, v in enumerate(self.ves):
            xj = z[self.offsets[j]:self.offsets[j] + 2 * v.n]
            out += [beta * xj - dt * vel[j], v.div @ vel[j]]
        if self.wall_op is not None:
            out.append(self.wall_rows(z, f))
        return np.concatenate(out)

    def self_block(self, j: int, beta: float, dt: float) -> np.ndarray:
        """Dense (3N, 3N) single-vesicle block of ``apply``."""
        v = self.ves[j]
        n2 = 2 * v.n
        gf = v.G @ v.force
        blk = np.vstack([-dt * gf, v.div @ gf])
        blk[:n2, :n2] += beta * np.eye(n2)
        return blk

    def dense(self, beta: float, dt: float) -> np.ndarray:
        """Full matrix by applying to basis vectors (tests and diagnostics)."""
        saved = self.counter.matvecs
        cols = [self.apply(e, beta, dt) for e in np.eye(self.size)]
        self.counter.matvecs = saved
        return np.array(cols).T


def velocity(state: SuspensionState, flow: BackgroundFlow, frozen=None,
             opts: NearSingularOptions = DEFAULT_NEAR, system: ImplicitSystem | None = None) -> list:
    """Velocity of every vesicle, operators frozen at ``frozen`` (default: state)."""
    if system is None:
        system = ImplicitSystem(frozen if frozen is not None else state, flow, opts)
    z = pack(state)
    vel = system.velocities(z)
    bg = system.background()
    return [unflat(u + b) for u, b in zip(vel, bg)]
