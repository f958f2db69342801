"""Stokes layer potentials on closed curves.

Conventions (viscosity 1):

* single layer  S[f](x) = 1/(4 pi) int (-log rho I + r r^T / rho^2) f ds,  r = x - y
* double layer  D[eta](x) = 1/pi int (r . n_y) r r^T / rho^4 eta ds

``n_y`` is the normal (t_y, -t_x), outward for a counter-clockwise curve. With
this choice a constant density gives -eta on the left of the curve, -eta/2
as the principal value on it, and 0 on the right.

Vectors of 2N unknowns are stored as (N, 2) arrays; dense operators act on the
flattened [x-components, y-components] layout (see :func:`flat`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from matplotlib.path import Path as MplPath

from .curve import (
    VesicleCurve,
    fourier_eval,
    fourier_interp_matrix,
    geometry,
    resample,
    signed_area,
    spectral_derivative,
)

FOUR_PI = 4.0 * np.pi

# Hybrid Gauss-trapezoid end correction for integrands with a log|x|
# singularity at both ends of a period, O(h^8 log h). Nodes and weights from
# B. K. Alpert, SIAM J. Sci. Comput. 20 (1999), table for the log case with
# j = 7 correction nodes and a = 5.
_ALPERT8_NODES = np.array([
    6.531815708567918e-3,
    9.086744584657729e-2,
    3.967966533375878e-1,
    1.027856640525646e+0,
    1.945288592909266e+0,
    2.980147933889640e+0,
    3.998861349951123e+0,
])
_ALPERT8_WEIGHTS = np.array([
    2.462194198995203e-2,
    1.701315866854178e-1,
    4.609256358650077e-1,
    7.947291148621895e-1,
    1.008710414337933e+0,
    1.036093649726216e+0,
    1.004787656533285e+0,
])


class CollisionError(RuntimeError):
    """A target point touches or crosses a source curve."""


def flat(v: np.ndarray) -> np.ndarray:
    """(N, 2) -> [x_1..x_N, y_1..y_N]."""
    return np.concatenate([v[:, 0], v[:, 1]])


def unflat(v: np.ndarray) -> np.ndarray:
    n = v.shape[0] // 2
    return np.column_stack([v[:n], v[n:]])


@dataclass(frozen=True, eq=False)
class AlpertRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    regular_start: int

    def offsets(self, n: int):
        """Quadrature offsets and weights (without the h factor) on [0, 2 pi).

        Returns (aux_offsets, aux_weights, regular_indices): auxiliary
        off-grid nodes at +v h and 2 pi - v h, and the grid indices
        a..n-a that carry weight 1.
        """
        if n < 2 * self.regular_start + 1:
            raise ValueError(f"N={n} too small for the order-{self.order} rule")
        h = 2.0 * np.pi / n
        aux = np.concatenate([self.nodes * h, 2.0 * np.pi - self.nodes * h])
        w = np.concatenate([self.weights, self.weights])
        regular = np.arange(self.regular_start, n - self.regular_start + 1)
        return aux, w, regular

    def integrate(self, func, n: int) -> float:
        """Apply the rule to a callable on [0, 2 pi) with log singularities at 0 and 2 pi."""
        h = 2.0 * np.pi / n
        aux, w, regular = self.offsets(n)
        return h * (np.sum(func(h * regular)) + np.sum(w * func(aux)))


ALPERT8 = AlpertRule(8, _ALPERT8_NODES, _ALPERT8_WEIGHTS, 5)


def _as_points(curve) -> np.ndarray:
    return curve.points if isinstance(curve, VesicleCurve) else np.asarray(curve, dtype=float)


def _stokeslet_blocks(r: np.ndarray):
    """Blocks of -log rho I + r r^T / rho^2 for displacement array r[..., 2]."""
    rho2 = r[..., 0] ** 2 + r[..., 1] ** 2
    lg = -0.5 * np.log(rho2)
    return lg + r[..., 0] ** 2 / rho2, r[..., 0] * r[..., 1] / rho2, lg + r[..., 1] ** 2 / rho2


@lru_cache(maxsize=16)
def _alpert_interpolants(n: int, rule: AlpertRule):
    """Circulant matrices interpolating grid data to theta_i + offset."""
    aux, _, _ = rule.offsets(n)
    shift = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    mats = []
    for off in aux:
        row0 = fourier_interp_matrix(n, off)[0]
        m = row0[shift]
        m.flags.writeable = False
        mats.append(m)
    return tuple(mats)


def self_single_layer_matrix(curve, rule: AlpertRule = ALPERT8) -> np.ndarray:
    """Dense 2N x 2N on-curve single-layer operator.

    The log part uses the Alpert rule with the density and the curve
    Fourier-interpolated to the off-grid nodes; the smooth r r^T / rho^2 part
    uses the trapezoid rule with its diagonal limit t t^T.
    """
    x = _as_points(curve)
    n = len(x)
    geom = geometry(x)
    h = 2.0 * np.pi / n
    _, w, regular = rule.offsets(n)

    logpart = np.zeros((n, n))
    rows = np.arange(n)
    for interp, wk in zip(_alpert_interpolants(n, rule), w):
        y = interp @ x
        rho = np.hypot(x[:, 0] - y[:, 0], x[:, 1] - y[:, 1])
        logpart += (-wk * np.log(rho))[:, None] * interp
    for m in regular:
        cols = (rows + m) % n
        rho = np.hypot(*(x - x[cols]).T)
        logpart[rows, cols] += -np.log(rho)
    logpart *= h * geom.jacobian[None, :]

    r = x[:, None, :] - x[None, :, :]
    rho2 = np.einsum("ijk,ijk->ij", r, r)
    np.fill_diagonal(rho2, 1.0)
    kxx = r[..., 0] ** 2 / rho2
    kxy = r[..., 0] * r[..., 1] / rho2
    kyy = r[..., 1] ** 2 / rho2
    t = geom.tangent
    kxx[rows, rows] = t[:, 0] ** 2
    kxy[rows, rows] = t[:, 0] * t[:, 1]
    kyy[rows, rows] = t[:, 1] ** 2
    ws = h * geom.jacobian[None, :]
    g = np.block([[logpart + kxx * ws, kxy * ws], [kxy * ws, logpart + kyy * ws]])
    return g / FOUR_PI


def self_single_layer(source, density, rule: AlpertRule = ALPERT8) -> np.ndarray:
    density = np.asarray(density, dtype=float)
    x = _as_points(source)
    if density.shape != x.shape:
        raise ValueError(f"density shape {density.shape} does not match curve {x.shape}")
    return unflat(self_single_layer_matrix(x, rule) @ flat(density))


def _trapezoid_single_layer(x, jac, density, targets) -> np.ndarray:
    n = len(x)
    h = 2.0 * np.pi / n
    fw = density * (jac * h)[:, None]
    out = np.empty((len(targets), 2))
    # chunk the targets to bound memory
    for lo in range(0, len(targets), 256):
        tg = targets[lo:lo + 256]
        r = tg[:, None, :] - x[None, :, :]
        kxx, kxy, kyy = _stokeslet_blocks(r)
        out[lo:lo + 256, 0] = kxx @ fw[:, 0] + kxy @ fw[:, 1]
        out[lo:lo + 256, 1] = kxy @ fw[:, 0] + kyy @ fw[:, 1]
    return out / FOUR_PI


def distance_to_points(x: np.ndarray, targets: np.ndarray):
    """Distance from each target to the nearest tracker point and its index."""
    d2 = np.sum((targets[:, None, :] - x[None, :, :]) ** 2, axis=2)
    idx = np.argmin(d2, axis=1)
    return np.sqrt(d2[np.arange(len(targets)), idx]), idx


def closest_point(x: np.ndarray, target: np.ndarray, guess: int, iters: int = 20):
    """Parameter of the closest point on the Fourier interpolant of ``x``.

    Newton on (X(theta) - target) . X'(theta) = 0 from the nearest tracker
    point. Returns (theta, point, distance).
    """
    n = len(x)
    d1 = spectral_derivative(x, 1)
    d2 = spectral_derivative(x, 2)
    theta = 2.0 * np.pi * guess / n
    h = 2.0 * np.pi / n
    for _ in range(iters):
        p = fourier_eval(x, theta)[0]
        p1 = fourier_eval(d1, theta)[0]
        p2 = fourier_eval(d2, theta)[0]
        g = (p - target) @ p1
        dg = p1 @ p1 + (p - target) @ p2
        step = -g / dg if dg > 0 else -g / (p1 @ p1)
        step = np.clip(step, -h, h)
        theta += step
        if abs(step) < 1e-14:
            break
    p = fourier_eval(x, theta)[0]
    return theta, p, float(np.hypot(*(target - p)))


@dataclass
class NearSingularOptions:
    """Near-zone handling.

    Targets closer than ``zone_factor * ds`` to a curve are evaluated with the
    ``upsample``-times refined trapezoid rule when at least ``spacing * ds``
    away, and otherwise by interpolating along the ray from the closest curve
    point through ``n_interp`` refined-trapezoid values plus the on-curve limit.
    """

    zone_factor: float = 5.0
    upsample: int = 16
    n_interp: int = 6
    spacing: float = 0.3


DEFAULT_NEAR = NearSingularOptions()


def near_zone_width(curve, opts: NearSingularOptions = DEFAULT_NEAR) -> float:
    return opts.zone_factor * geometry(_as_points(curve)).arclength_spacing


def cross_single_layer(source, density, targets, opts: NearSingularOptions = DEFAULT_NEAR,
                       check: bool = True) -> np.ndarray:
    """Trapezoid single layer at targets away from the source curve."""
    x = _as_points(source)
    density = np.asarray(density, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if density.shape != x.shape:
        raise ValueError(f"density shape {density.shape} does not match curve {x.shape}")
    geom = geometry(x)
    if check:
        dist, _ = distance_to_points(x, targets)
        width = opts.zone_factor * geom.arclength_spacing
        if np.any(dist <= width):
            raise ValueError(
                f"target within the near zone ({dist.min():.3e} <= {width:.3e}); "
                "use near_singular_eval")
    return _trapezoid_single_layer(x, geom.jacobian, density, targets)




def _sl_kernel_matrix(x, jac, targets) -> np.ndarray:
    """(2T, 2N) trapezoid single-layer matrix on the flat layout."""
    h = 2.0 * np.pi / len(x)
    r = targets[:, None, :] - x[None, :, :]
    kxx, kxy, kyy = _stokeslet_blocks(r)
    w = (jac * h / FOUR_PI)[None, :]
    return np.block([[kxx * w, kxy * w], [kxy * w, kyy * w]])


def _dl_kernel_matrix(x, jac, normal, targets) -> np.ndarray:
    h = 2.0 * np.pi / len(x)
    r = targets[:, None, :] - x[None, :, :]
    rho2 = r[..., 0] ** 2 + r[..., 1] ** 2
    rdotn = r[..., 0] * normal[None, :, 0] + r[..., 1] * normal[None, :, 1]
    c = rdotn / rho2**2 * (jac * h / np.pi)[None, :]
    kxx, kxy, kyy = c * r[..., 0] ** 2, c * r[..., 0] * r[..., 1], c * r[..., 1] ** 2
    return np.block([[kxx, kxy], [kxy, kyy]])


@lru_cache(maxsize=16)
def _resample_block(n: int, m: int) -> np.ndarray:
    """Block-diagonal Fourier resampling matrix (2m, 2n) for flat vectors."""
    r = resample(np.eye(n), m)
    out = np.kron(np.eye(2), r)
    out.flags.writeable = False
    return out


def lagrange_weights(nodes, z: float) -> np.ndarray:
    """Weights w with sum_i w_i f(nodes_i) = interpolant of f at z."""
    nodes = np.asarray(nodes, dtype=float)
    w = np.ones(len(nodes))
    for i, zi in enumerate(nodes):
        for j, zj in enumerate(nodes):
            if i != j:
                w[i] *= (z - zj) / (zi - zj)
    return w


def _near_targets(x, targets, opts, collision_side: float | None):
    """Closest points on the curve for each target.

    ``collision_side`` is +1 when targets must be on the right of the curve
    (outside a counter-clockwise vesicle), -1 for the left, None to skip the
    side test.
    """
    geom = geometry(x)
    _, idx = distance_to_points(x, targets)
    thetas = np.empty(len(targets))
    feet = np.empty((len(targets), 2))
    dist = np.empty(len(targets))
    for i, tgt in enumerate(targets):
        thetas[i], feet[i], dist[i] = closest_point(x, tgt, idx[i])
    if np.any(dist < 1e-12 * geom.length):
        raise CollisionError("target lies on the source curve")
    direction = (targets - feet) / dist[:, None]
    if collision_side is not None:
        nrm = fourier_eval(geom.normal, thetas)
        side = np.sum(direction * nrm, axis=1)
        if np.any(side * collision_side < 0):
            raise CollisionError("target crossed the source curve")
    return thetas, feet, dist, direction, geom.arclength_spacing


def _ray_matrix(x, targets, limit, kernel, opts, side) -> np.ndarray:
    """Rows mapping a density on ``x`` to the potential at near targets.

    ``limit`` is the (2N, 2N) one-sided on-curve operator and
    ``kernel(pts)`` the (2P, 2m) trapezoid matrix on the refined curve.
    Targets at least ``spacing * ds`` away use the refined rule directly;
    closer ones interpolate along the ray from the closest curve point.
    """
    n = len(x)
    nt = len(targets)
    thetas, feet, dist, direction, ds = _near_targets(x, targets, opts, side)
    rb = _resample_block(n, opts.upsample * n)
    step = opts.spacing * ds
    out = np.empty((2 * nt, 2 * n))

    direct = np.flatnonzero(dist >= step)
    if direct.size:
        k = kernel(targets[direct]) @ rb
        out[direct] = k[:direct.size]
        out[nt + direct] = k[direct.size:]

    close = np.flatnonzero(dist < step)
    if close.size:
        nc, ni = close.size, opts.n_interp
        offs = np.arange(1, ni + 1) * step
        pts = feet[close, None, :] + offs[None, :, None] * direction[close, None, :]
        k = kernel(pts.reshape(-1, 2)) @ rb
        kx = k[:nc * ni].reshape(nc, ni, 2 * n)
        ky = k[nc * ni:].reshape(nc, ni, 2 * n)
        e = fourier_interp_matrix(n, thetas[close])
        lx, ly = e @ limit[:n], e @ limit[n:]
        nodes = np.concatenate([[0.0], offs])
        for i, j in enumerate(close):
            w = lagrange_weights(nodes, dist[j])
            out[j] = w[0] * lx[i] + w[1:] @ kx[i]
            out[nt + j] = w[0] * ly[i] + w[1:] @ ky[i]
    return out


def _refined(x, factor):
    xu = resample(x, factor * len(x))
    return xu, geometry(xu)


def near_single_layer_matrix(source, targets, self_matrix=None,
                             opts: NearSingularOptions = DEFAULT_NEAR) -> np.ndarray:
    """(2T, 2N) single-layer rows for targets near (outside) a vesicle."""
    x = _as_points(source)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if self_matrix is None:
        self_matrix = self_single_layer_matrix(x)
    xu, gu = _refined(x, opts.upsample)
    return _ray_matrix(x, targets, self_matrix,
                       lambda pts: _sl_kernel_matrix(xu, gu.jacobian, pts), opts, +1.0)


def near_singular_eval(source, density, targets,
                       opts: NearSingularOptions = DEFAULT_NEAR) -> np.ndarray:
    """Single layer at targets close to (but not on) a vesicle curve.

    On-curve value at the closest point (from the Alpert self evaluation) plus
    ``n_interp`` upsampled-trapezoid values along the ray through the target,
    combined by polynomial interpolation in the distance.
    """
    x = _as_points(source)
    density = np.asarray(density, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if density.shape != x.shape:
        raise ValueError(f"density shape {density.shape} does not match curve {x.shape}")
    if not len(targets):
        return np.zeros((0, 2))
    return unflat(near_single_layer_matrix(x, targets, opts=opts) @ flat(density))


def single_layer_matrix(source, targets, self_matrix=None,
                        opts: NearSingularOptions = DEFAULT_NEAR) -> np.ndarray:
    """(2T, 2N) single layer of ``source`` at off-curve targets, near ones routed."""
    x = _as_points(source)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    geom = geometry(x)
    nt = len(targets)
    dist, _ = distance_to_points(x, targets)
    near = np.flatnonzero(dist <= opts.zone_factor * geom.arclength_spacing)
    far = np.flatnonzero(dist > opts.zone_factor * geom.arclength_spacing)
    out = np.empty((2 * nt, 2 * len(x)))
    if far.size:
        k = _sl_kernel_matrix(x, geom.jacobian, targets[far])
        out[far], out[nt + far] = k[:far.size], k[far.size:]
    if near.size:
        k = near_single_layer_matrix(x, targets[near], self_matrix, opts)
        out[near], out[nt + near] = k[:near.size], k[near.size:]
    return out


def single_layer(source, density, targets,
                 opts: NearSingularOptions = DEFAULT_NEAR) -> np.ndarray:
    """Single layer at arbitrary off-curve targets, routing near ones."""
    density = np.asarray(density, dtype=float)
    return unflat(single_layer_matrix(source, targets, opts=opts) @ flat(density))


# --- solid walls -----------------------------------------------------------

@dataclass
class WallGeometry:
    """Solid boundary: outer curve (counter-clockwise) first, then inner
    curves (clockwise), with Dirichlet velocity samples on each."""

    curves: list
    velocities: list
    centers: list = field(default_factory=list)

    def __post_init__(self):
        self.curves = [np.asarray(c, dtype=float) for c in self.curves]
        self.velocities = [np.asarray(v, dtype=float) for v in self.velocities]
        if not self.curves:
            raise ValueError("a wall needs at least one curve")
        if len(self.curves) != len(self.velocities):
            raise ValueError("one velocity array per wall curve is required")
        for c, v in zip(self.curves, self.velocities):
            if c.ndim != 2 or c.shape[1] != 2:
                raise ValueError(f"wall curve must have shape (N, 2), got {c.shape}")
            if c.shape != v.shape:
                raise ValueError(f"wall velocity shape {v.shape} does not match curve {c.shape}")
            if len(c) % 2:
                raise ValueError("wall curves need an even number of points")
        if signed_area(self.curves[0]) <= 0:
            raise ValueError("outer wall must be counter-clockwise")
        for c in self.curves[1:]:
            if signed_area(c) >= 0:
                raise ValueError("inner walls must be clockwise")
        if not self.centers:
            self.centers = [c.mean(axis=0) for c in self.curves[1:]]
        self.centers = [np.asarray(c, dtype=float) for c in self.centers]
        if len(self.centers) != len(self.curves) - 1:
            raise ValueError("one center per inner wall curve is required")
        outer = MplPath(self.curves[0])
        for c in self.curves[1:]:
            if not np.all(outer.contains_points(c)):
                raise ValueError("inner wall curve is not inside the outer wall")
        self._geoms = [geometry(c) for c in self.curves]

    @property
    def geometries(self):
        return self._geoms

    @property
    def sizes(self):
        return [len(c) for c in self.curves]

    @property
    def points(self) -> np.ndarray:
        return np.vstack(self.curves)

    @property
    def boundary_velocity(self) -> np.ndarray:
        return np.vstack(self.velocities)

    def split(self, values: np.ndarray):
        return np.split(values, np.cumsum(self.sizes)[:-1])

    def contains(self, pts) -> np.ndarray:
        """True for points inside the fluid region bounded by the walls."""
        pts = np.atleast_2d(pts)
        inside = MplPath(self.curves[0]).contains_points(pts)
        for c in self.curves[1:]:
            inside &= ~MplPath(c).contains_points(pts)
        return inside


def double_layer_diagonal(geom, h):
    """Diagonal limit -kappa / (2 pi) t t^T times the quadrature weight.

    With the normal taken at the source, (r . n_y) ~ -kappa s^2 / 2.
    """
    t = geom.tangent
    c = -geom.curvature * geom.jacobian * h / (2.0 * np.pi)
    return c * t[:, 0] ** 2, c * t[:, 0] * t[:, 1], c * t[:, 1] ** 2


def _dl_pv_matrix(x, g) -> np.ndarray:
    """Principal-value double layer of one curve onto its own points."""
    n = len(x)
    h = 2.0 * np.pi / n
    r = x[:, None, :] - x[None, :, :]
    rho2 = r[..., 0] ** 2 + r[..., 1] ** 2
    np.fill_diagonal(rho2, 1.0)
    nrm = g.normal
    rdotn = r[..., 0] * nrm[None, :, 0] + r[..., 1] * nrm[None, :, 1]
    c = rdotn / rho2**2 * (g.jacobian * h / np.pi)[None, :]
    kxx, kxy, kyy = c * r[..., 0] ** 2, c * r[..., 0] * r[..., 1], c * r[..., 1] ** 2
    idx = np.arange(n)
    kxx[idx, idx], kxy[idx, idx], kyy[idx, idx] = double_layer_diagonal(g, h)
    return np.block([[kxx, kxy], [kxy, kyy]])


def wall_double_layer_matrix(wall: WallGeometry) -> np.ndarray:
    """Dense principal-value double layer from all wall curves onto all wall points."""
    x = wall.points
    nw = len(x)
    out = np.empty((2 * nw, 2 * nw))
    offs = np.concatenate([[0], np.cumsum(wall.sizes)])
    for i, (ci, gi) in enumerate(zip(wall.curves, wall.geometries)):
        rows = np.r_[offs[i]:offs[i + 1], nw + offs[i]:nw + offs[i + 1]]
        for j, (cj, gj) in enumerate(zip(wall.curves, wall.geometries)):
            cols = np.r_[offs[j]:offs[j + 1], nw + offs[j]:nw + offs[j + 1]]
            if i == j:
                blk = _dl_pv_matrix(ci, gi)
            else:
                blk = _dl_kernel_matrix(cj, gj.jacobian, gj.normal, ci)
            out[np.ix_(rows, cols)] = blk
    return out


def wall_target_matrix(wall: WallGeometry, targets,
                       opts: NearSingularOptions = DEFAULT_NEAR) -> np.ndarray:
    """(2T, 2Nw) double layer of the wall density at fluid targets.

    Targets near a wall curve use the ray scheme with the fluid-side limit
    PV - eta / 2 (the fluid lies on the -n side of every wall curve).
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    nt = len(targets)
    nw = len(wall.points)
    out = np.zeros((2 * nt, 2 * nw))
    offs = np.concatenate([[0], np.cumsum(wall.sizes)])
    for j, (c, g) in enumerate(zip(wall.curves, wall.geometries)):
        nj = len(c)
        cols = np.r_[offs[j]:offs[j + 1], nw + offs[j]:nw + offs[j + 1]]
        dist, _ = distance_to_points(c, targets)
        width = opts.zone_factor * g.arclength_spacing
        near = np.flatnonzero(dist <= width)
        far = np.flatnonzero(dist > width)
        blk = np.empty((2 * nt, 2 * nj))
        if far.size:
            k = _dl_kernel_matrix(c, g.jacobian, g.normal, targets[far])
            blk[far], blk[nt + far] = k[:far.size], k[far.size:]
        if near.size:
            limit = _dl_pv_matrix(c, g) - 0.5 * np.eye(2 * nj)
            xu, gu = _refined(c, opts.upsample)
            k = _ray_matrix(c, targets[near], limit,
                            lambda pts: _dl_kernel_matrix(xu, gu.jacobian, gu.normal, pts),
                            opts, -1.0)
            blk[near], blk[nt + near] = k[:near.size], k[near.size:]
        out[:, cols] = blk
    return out


def wall_double_layer(wall: WallGeometry, density, targets=None, on_wall: bool = False,
                      opts: NearSingularOptions = DEFAULT_NEAR) -> np.ndarray:
    """Double layer of the wall density.

    ``on_wall=True`` evaluates the principal value at the wall points
    themselves; otherwise ``targets`` must lie in the fluid.
    """
    density = np.asarray(density, dtype=float)
    if density.shape != wall.points.shape:
        raise ValueError(f"wall density shape {density.shape} does not match {wall.points.shape}")
    if on_wall:
        return unflat(wall_double_layer_matrix(wall) @ flat(density))
    return unflat(wall_target_matrix(wall, targets, opts) @ flat(density))


def stokeslet(r: np.ndarray, force: np.ndarray) -> np.ndarray:
    """Point force at the origin evaluated at displacements r (M, 2)."""
    kxx, kxy, kyy = _stokeslet_blocks(r)
    return np.column_stack([kxx * force[0] + kxy * force[1], kxy * force[0] + kyy * force[1]]) / FOUR_PI


def rotlet(r: np.ndarray, torque: float) -> np.ndarray:
    rho2 = r[:, 0] ** 2 + r[:, 1] ** 2
    return torque * np.column_stack([-r[:, 1], r[:, 0]]) / rho2[:, None] / FOUR_PI
