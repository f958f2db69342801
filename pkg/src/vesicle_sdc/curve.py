"""Closed planar curves sampled at equispaced parameter values.

A curve with N points is parameterised by theta in [0, 2 pi) with spacing
2 pi / N. Every derivative is computed with the FFT and every contour
integral with the trapezoid rule, which is spectrally accurate for smooth
periodic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CurveError(ValueError):
    """Raised when a set of points does not describe a valid vesicle curve."""


def wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def spectral_derivative(values, order: int = 1) -> np.ndarray:
    """Derivative with respect to the uniform parameter along axis 0.

    ``values`` may be real or complex, one or more columns. The Nyquist mode
    is dropped for odd orders so real input gives real output.
    """
    if order < 1:
        raise ValueError(f"derivative order must be >= 1, got {order}")
    values = np.asarray(values)
    n = values.shape[0]
    if n % 2:
        raise ValueError(f"number of samples must be even, got {n}")
    ik = 1j * wavenumbers(n)
    if order % 2:
        ik[n // 2] = 0.0
    mult = ik**order
    mult = mult.reshape((n,) + (1,) * (values.ndim - 1))
    out = np.fft.ifft(mult * np.fft.fft(values, axis=0), axis=0)
    if np.isrealobj(values):
        return out.real
    return out


def differentiation_matrix(n: int) -> np.ndarray:
    """Dense first-derivative matrix; D @ f == spectral_derivative(f)."""
    return spectral_derivative(np.eye(n), 1)


def fourier_interp_matrix(n: int, theta) -> np.ndarray:
    """Rows evaluating the trigonometric interpolant of n samples at ``theta``.

    The Nyquist mode is split evenly between +n/2 and -n/2 so that the
    interpolant is real for real data.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    k = wavenumbers(n)
    phase = np.exp(1j * np.outer(theta, k))
    phase[:, n // 2] = np.cos(0.5 * n * theta)
    # E @ fft(f) / n evaluates the interpolant; fold the DFT in.
    grid = 2.0 * np.pi * np.arange(n) / n
    dft = np.exp(-1j * np.outer(k, grid))
    return (phase @ dft).real / n


def fourier_eval(values, theta) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at ``theta``."""
    values = np.asarray(values)
    n = values.shape[0]
    coeffs = np.fft.fft(values, axis=0) / n
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    k = wavenumbers(n)
    phase = np.exp(1j * np.outer(theta, k))
    phase[:, n // 2] = np.cos(0.5 * n * theta)
    out = phase @ coeffs.reshape(n, -1)
    out = out.reshape((theta.size,) + values.shape[1:])
    return out.real if np.isrealobj(values) else out


def resample(values, m: int) -> np.ndarray:
    """Fourier zero-padding (m > n) or truncation (m < n) along axis 0."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if m == n:
        return values.copy()
    coeffs = np.fft.fft(values, axis=0)
    out = np.zeros((m,) + values.shape[1:], dtype=complex)
    half = min(n, m) // 2
    out[:half] = coeffs[:half]
    out[m - half + 1:] = coeffs[n - half + 1:]
    if m > n:
        # split the old Nyquist mode between +n/2 and -n/2
        out[half] = 0.5 * coeffs[half]
        out[m - half] = 0.5 * coeffs[half]
    else:
        out[half] = coeffs[half] + coeffs[n - half]
    return np.fft.ifft(out, axis=0).real * (m / n)


def signed_area(points) -> float:
    points = np.asarray(points, dtype=float)
    d = spectral_derivative(points, 1)
    n = points.shape[0]
    return 0.5 * np.sum(points[:, 0] * d[:, 1] - points[:, 1] * d[:, 0]) * 2.0 * np.pi / n


def is_simple(points) -> bool:
    """Pairwise segment test on the polygon through the points."""
    p = np.asarray(points, dtype=float)
    n = len(p)
    a = p
    b = np.roll(p, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    # skip the wrap-around neighbours (first and last segment share a vertex)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]

    def orient(p0, p1, p2):
        return (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])

    o1 = orient(a[i], b[i], a[j])
    o2 = orient(a[i], b[i], b[j])
    o3 = orient(a[j], b[j], a[i])
    o4 = orient(a[j], b[j], b[i])
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
    return not np.any(crossing)


@dataclass(frozen=True)
class CurveGeometry:
    tangent: np.ndarray
    jacobian: np.ndarray
    curvature: np.ndarray
    arclength_spacing: float
    area: float
    length: float

    @property
    def normal(self) -> np.ndarray:
        """Outward normal for a counter-clockwise curve."""
        return np.column_stack([self.tangent[:, 1], -self.tangent[:, 0]])


class VesicleCurve:
    """N tracker points on a closed, positively oriented, simple curve."""

    __slots__ = ("points", "_geometry")

    def __init__(self, points, check: bool = True):
        points = np.array(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise CurveError(f"points must have shape (N, 2), got {points.shape}")
        n = points.shape[0]
        if n % 2 or n < 8:
            raise CurveError(f"N must be even and >= 8, got {n}")
        if check:
            if signed_area(points) <= 0:
                raise CurveError("curve must be counter-clockwise (positive signed area)")
            if not is_simple(points):
                raise CurveError("curve self-intersects")
        points.flags.writeable = False
        self.points = points
        self._geometry = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def geometry(self) -> CurveGeometry:
        if self._geometry is None:
            self._geometry = geometry(self.points)
        return self._geometry

    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    def __repr__(self):
        return f"VesicleCurve(N={self.n})"


def geometry(curve) -> CurveGeometry:
    """Tangent, jacobian, curvature, area and length of a closed curve.

    Accepts a VesicleCurve or an (N, 2) array (e.g. a clockwise wall).
    """
    points = curve.points if isinstance(curve, VesicleCurve) else np.asarray(curve, dtype=float)
    n = points.shape[0]
    d1 = spectral_derivative(points, 1)
    d2 = spectral_derivative(points, 2)
    jac = np.hypot(d1[:, 0], d1[:, 1])
    if np.any(jac <= 0):
        raise CurveError("degenerate parameterisation: jacobian vanishes")
    tangent = d1 / jac[:, None]
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / jac**3
    h = 2.0 * np.pi / n
    area = 0.5 * np.sum(points[:, 0] * d1[:, 1] - points[:, 1] * d1[:, 0]) * h
    length = np.sum(jac) * h
    return CurveGeometry(tangent, jac, curvature, length / n, area, length)


def upsample(curve: VesicleCurve, factor: int) -> VesicleCurve:
    if factor < 1:
        raise ValueError("upsampling factor must be >= 1")
    if factor == 1:
        return curve
    return VesicleCurve(resample(curve.points, factor * curve.n), check=False)


def ellipse(n: int, a: float, b: float, center=(0.0, 0.0), angle: float = 0.0) -> VesicleCurve:
    """Ellipse with semi-axes (a, b), rotated by ``angle`` about its center."""
    t = 2.0 * np.pi * np.arange(n) / n
    local = np.column_stack([a * np.cos(t), b * np.sin(t)])
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return VesicleCurve(local @ rot.T + np.asarray(center, dtype=float))


def polar_curve(n: int, radius_fn, center=(0.0, 0.0)) -> VesicleCurve:
    t = 2.0 * np.pi * np.arange(n) / n
    r = radius_fn(t)
    return VesicleCurve(np.column_stack([r * np.cos(t), r * np.sin(t)]) + np.asarray(center, dtype=float))


def write_curve(path, points) -> None:
    points = points.points if isinstance(points, VesicleCurve) else np.asarray(points)
    lines = [f"N={len(points)}"]
    lines += [f"{x:.16e} {y:.16e}" for x, y in points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve(path) -> np.ndarray:
    """Read the ``N=<int>`` + ``x y`` table; returns an (N, 2) array."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].strip()
    if not head.startswith("N="):
        raise CurveError(f"{path}: expected header 'N=<int>', got {head!r}")
    n = int(head[2:])
    pts = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if pts.shape != (n, 2):
        raise CurveError(f"{path}: header says N={n} but found {pts.shape[0]} rows")
    return pts
