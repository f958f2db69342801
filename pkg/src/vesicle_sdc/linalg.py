"""Unrestarted right-preconditioned GMRES and the block-diagonal preconditioner."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dynamics import ImplicitSystem


class GMRESError(RuntimeError):
    """GMRES hit its iteration cap; carries the best iterate found."""

    def __init__(self, message, x, residual, iterations):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    residual: float


def _identity(v):
    return v


def gmres(apply_op, rhs, apply_prec=None, tol: float = 1e-10, max_iter: int = 200,
          x0=None) -> GMRESResult:
    """Solve A x = b with GMRES, right preconditioner M (A M y = b, x = M y).

    Stops when the Arnoldi residual estimate drops below tol ||b||; the true
    relative residual of the returned iterate is reported (in finite precision
    it can sit slightly above the estimate for ill-conditioned systems).
    No restarts.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    prec = apply_prec or _identity
    b = np.asarray(rhs, dtype=float)
    n = b.size
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return GMRESResult(np.zeros(n), 0, 0.0)
    r0 = b - apply_op(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r0)
    if beta <= tol * bnorm:
        return GMRESResult(x, 0, beta / bnorm)

    m = min(max_iter, n)
    V = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = r0 / beta
    k = 0
    for k in range(m):
        # copy: operators may hand back their input (identity, default preconditioner)
        w = np.array(apply_op(prec(V[k])), dtype=float)
        # modified Gram-Schmidt, applied twice for robustness
        for _ in range(2):
            for i in range(k + 1):
                hik = V[i] @ w
                H[i, k] += hik
                w -= hik * V[i]
        H[k + 1, k] = np.linalg.norm(w)
        if H[k + 1, k] > 0:
            V[k + 1] = w / H[k + 1, k]
        for i in range(k):
            t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        if abs(g[k + 1]) <= tol * bnorm:
            break
    kk = k + 1
    y = sla.solve_triangular(H[:kk, :kk], g[:kk])
    x = x + prec(V[:kk].T @ y)
    res = np.linalg.norm(b - apply_op(x)) / bnorm
    if abs(g[kk]) > tol * bnorm:
        raise GMRESError(f"GMRES did not reach tol {tol:.1e} in {kk} iterations "
                         f"(residual {res:.3e})", x, res, kk)
    return GMRESResult(x, kk, res)


class BlockPreconditioner:
    """Block-diagonal inverse: one dense LU per vesicle (self-interaction
    block of the implicit operator) and the wall block when confined."""

    def __init__(self, factors, offsets, wall_lu=None, formed_at: int = 0, static=None):
        self.factors = factors
        self.offsets = offsets
        self.wall_lu = wall_lu
        self.formed_at = formed_at
        # companion built from the dt = 0 blocks, for tension-only solves
        self.static = static

    def __call__(self, v):
        out = np.empty_like(v)
        for j, lu in enumerate(self.factors):
            sl = slice(self.offsets[j], self.offsets[j + 1])
            out[sl] = sla.lu_solve(lu, v[sl])
        if self.wall_lu is not None:
            sl = slice(self.offsets[len(self.factors)], None)
            out[sl] = sla.lu_solve(self.wall_lu, v[sl])
        return out


def build_preconditioner(system: ImplicitSystem, dt: float, beta: float = 1.0,
                         formed_at: int = 0, static: bool = False) -> BlockPreconditioner:
    """Factorise every per-vesicle block of ``system.apply(., beta, dt)``.

    Counts as a single factorization in the system's work counter. The wall
    block depends on the wall only and reuses the factorization cached on the
    wall operator. With ``static`` the dt = 0 blocks of the same configuration
    are factorised in the same pass and attached as ``.static``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    prec = _factorize(system, dt, beta, formed_at)
    if static:
        prec.static = _factorize(system, 0.0, 1.0, formed_at)
    system.counter.factorizations += 1
    return prec


def factorize_blocks(system: ImplicitSystem, dt: float, beta: float = 1.0,
                     formed_at: int = 0) -> BlockPreconditioner:
    """As :func:`build_preconditioner` but also accepting dt = 0."""
    prec = _factorize(system, dt, beta, formed_at)
    system.counter.factorizations += 1
    return prec


def _factorize(system: ImplicitSystem, dt: float, beta: float, formed_at: int):
    factors = []
    for j in range(system.m):
        blk = system.self_block(j, beta, dt)
        lu = sla.lu_factor(blk, check_finite=True)
        if np.any(np.diag(lu[0]) == 0.0):
            raise np.linalg.LinAlgError(f"preconditioner block of vesicle {j} is singular")
        factors.append(lu)
    wall_lu = system.wall_op.lu if system.wall_op is not None else None
    return BlockPreconditioner(factors, system.offsets, wall_lu, formed_at)


def solve(system: ImplicitSystem, rhs, beta: float, dt: float, prec=None,
          tol: float = 1e-10, max_iter: int = 200) -> GMRESResult:
    """GMRES on ``system.apply(., beta, dt)`` with the counters updated."""
    res = gmres(lambda z: system.apply(z, beta, dt), rhs, prec, tol, max_iter)
    system.counter.gmres_iterations += res.iterations
    system.counter.solves += 1
    return res
