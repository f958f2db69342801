"""Adaptive time stepping driven by area and length conservation.

Both quantities are invariants of the exact dynamics, so their change over
one step estimates the local truncation error without a second solution.
A step of size dt from time t is accepted when, for every vesicle,

    |A(t + dt) - A(t)| <= A(t) * allowance(t, dt)

and the same holds for the length. Two allowances are available:

    plain             eps * dt / T
    remaining-budget  dt / (T - t) * (eps - |A(t) - A(0)| / A(0))

The second spreads whatever tolerance is left over the remaining horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SuspensionState
from .sdc import sdc_step
from .stepper import EULER, Solver, StepRejected, provisional_step

BUDGET_MODES = ("plain", "remaining-budget")


class BudgetExhausted(RuntimeError):
    """No step size can satisfy the error condition (unrecoverable)."""


def controller_order(n_sdc: int) -> int:
    """Order used in the step-size formula: n_sdc + 1, capped at 2."""
    if n_sdc < 0:
        raise ValueError("n_sdc must be non-negative")
    return min(n_sdc + 1, 2)


@dataclass
class StepErrors:
    """Per-vesicle changes over one step, all relative to the initial values.

    ``scale_*`` is A(t)/A(0) (resp. L) and ``drift_*`` is |A(t) - A(0)|/A(0).
    """

    area: np.ndarray
    length: np.ndarray
    scale_area: np.ndarray
    scale_length: np.ndarray
    drift_area: np.ndarray
    drift_length: np.ndarray

    @property
    def max_error(self) -> float:
        return float(max(self.area.max(), self.length.max()))


def step_errors(before: SuspensionState, after: SuspensionState,
                initial: SuspensionState | None = None) -> StepErrors:
    """Relative area and length changes over one step.

    Changes are normalised by the values of ``initial`` (default: ``before``).
    """
    if before.m != after.m:
        raise ValueError("states must hold the same vesicles")
    ref = before if initial is None else initial
    a0, l0 = ref.areas(), ref.lengths()
    a1, l1 = before.areas(), before.lengths()
    a2, l2 = after.areas(), after.lengths()
    return StepErrors(
        area=np.abs(a2 - a1) / a0,
        length=np.abs(l2 - l1) / l0,
        scale_area=a1 / a0,
        scale_length=l1 / l0,
        drift_area=np.abs(a1 - a0) / a0,
        drift_length=np.abs(l1 - l0) / l0,
    )


@dataclass
class Decision:
    accepted: bool
    dt_next: float
    ratio: float


@dataclass
class StepController:
    dt: float
    epsilon: float
    horizon: float
    order: int = 2
    beta_up: float = 1.5
    beta_down: float = 0.6
    alpha: float = math.sqrt(0.9)
    budget_mode: str = "plain"
    last_rejected: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if not (0 < self.beta_down <= 1 <= self.beta_up):
            raise ValueError("need 0 < beta_down <= 1 <= beta_up")
        if self.budget_mode not in BUDGET_MODES:
            raise ValueError(f"unknown budget mode {self.budget_mode!r}; expected one of {BUDGET_MODES}")

    def allowance(self, errs: StepErrors, dt: float, t: float):
        """Per-vesicle allowances (area, length), relative to the initial values."""
        if self.budget_mode == "plain":
            frac = self.epsilon * dt / self.horizon
            return errs.scale_area * frac, errs.scale_length * frac
        remaining = self.horizon - t
        if remaining <= 0:
            raise BudgetExhausted("no time left before the horizon")
        left_a = self.epsilon - errs.drift_area
        left_l = self.epsilon - errs.drift_length
        if np.any(left_a <= 0) or np.any(left_l <= 0):
            raise BudgetExhausted(
                f"error budget exhausted at t={t:.6g} (area drift {errs.drift_area.max():.3e}, "
                f"length drift {errs.drift_length.max():.3e}, tolerance {self.epsilon:.3e})")
        frac = dt / remaining
        # capping A(t)/A(0) at one keeps the running drift below epsilon exactly
        return (np.minimum(errs.scale_area, 1.0) * frac * left_a,
                np.minimum(errs.scale_length, 1.0) * frac * left_l)


def accept_and_propose(ctrl: StepController, errs: StepErrors, dt: float,
                       t: float = 0.0) -> Decision:
    """Accept or reject a step of size dt taken from time t; propose the next dt.

    Updates ``ctrl.dt`` and ``ctrl.last_rejected``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    allow_a, allow_l = ctrl.allowance(errs, dt, t)
    ratio = max(np.max(errs.area / allow_a), np.max(errs.length / allow_l))
    accepted = bool(ratio <= 1.0)
    if ratio <= (ctrl.alpha / ctrl.beta_up) ** ctrl.order:
        # already at the upper clamp; also avoids overflow for tiny ratios
        factor = ctrl.beta_up
    else:
        factor = ctrl.alpha * ratio ** (-1.0 / ctrl.order)
    factor = min(max(factor, ctrl.beta_down), ctrl.beta_up)
    if ctrl.last_rejected:
        factor = min(factor, 1.0)
    dt_next = factor * dt
    ctrl.last_rejected = not accepted
    ctrl.dt = dt_next
    return Decision(accepted, dt_next, float(ratio))


# --- driver -------------------------------------------------------------------

@dataclass
class AdaptiveRecord:
    time: float
    dt: float
    area_error: float
    length_error: float
    accepted: bool
    gmres_iterations: int
    residuals: list = field(default_factory=list)
    note: str = ""


@dataclass
class AdaptiveResult:
    final: SuspensionState
    records: list
    snapshots: list

    @property
    def accepts(self) -> int:
        return sum(r.accepted for r in self.records)

    @property
    def rejects(self) -> int:
        return sum(not r.accepted for r in self.records)

    def accepted_dts(self) -> np.ndarray:
        return np.array([r.dt for r in self.records if r.accepted])


def _one_step(state, dt, scheme, p, n_sdc, solver):
    if scheme == "euler":
        new = provisional_step([state], dt, EULER, solver)
        return new, solver.last_iterations, []
    new, diag = sdc_step(state, dt, p, n_sdc, solver)
    return new, int(sum(diag.gmres_iterations)), list(diag.residual_norms)


def adaptive_run(initial: SuspensionState, horizon: float, dt0: float, epsilon: float,
                 solver: Solver, scheme: str = "sdc", p: int = 4, n_sdc: int = 1,
                 budget_mode: str = "plain", max_attempts: int = 100000,
                 min_dt: float | None = None, callback=None,
                 snapshot_every: int = 0) -> AdaptiveResult:
    """Integrate to ``horizon`` with accept/reject step control.

    ``scheme`` is "sdc" (Lobatto substeps plus n_sdc corrections) or "euler".
    Solver failures and collisions count as rejections. The last step is
    clipped to land on the horizon exactly.
    """
    if scheme not in ("sdc", "euler"):
        raise ValueError("adaptive stepping supports the 'sdc' and 'euler' schemes only")
    order = 1 if scheme == "euler" else controller_order(n_sdc)
    ctrl = StepController(dt0, epsilon, horizon, order=order, budget_mode=budget_mode)
    t0 = initial.time
    end = t0 + horizon
    min_dt = horizon * 1e-10 if min_dt is None else min_dt
    state = initial
    records, snapshots = [], [initial]
    attempts = 0
    while end - state.time > 1e-12 * horizon:
        attempts += 1
        if attempts > max_attempts:
            raise BudgetExhausted(f"gave up after {max_attempts} attempted steps")
        if ctrl.dt < min_dt:
            raise BudgetExhausted(f"step size fell below {min_dt:.3e} at t={state.time:.6g}")
        dt = min(ctrl.dt, end - state.time)
        clipped = dt < ctrl.dt
        try:
            new, iters, residuals = _one_step(state, dt, scheme, p, n_sdc, solver)
        except StepRejected as exc:
            ctrl.dt = ctrl.beta_down * dt
            ctrl.last_rejected = True
            rec = AdaptiveRecord(state.time, dt, math.nan, math.nan, False, 0, [], str(exc))
            records.append(rec)
            if callback is not None:
                callback(state, rec)
            continue
        errs = step_errors(state, new, initial)
        decision = accept_and_propose(ctrl, errs, dt, state.time - t0)
        rec = AdaptiveRecord(state.time + dt, dt, float(errs.area.max()),
                             float(errs.length.max()), decision.accepted, iters, residuals)
        records.append(rec)
        if decision.accepted:
            new.time = end if clipped or end - (state.time + dt) <= 1e-12 * horizon else state.time + dt
            state = new
            if snapshot_every and sum(r.accepted for r in records) % snapshot_every == 0:
                snapshots.append(state)
        if callback is not None:
            callback(state, rec)
    if snapshots[-1] is not state:
        snapshots.append(state)
    return AdaptiveResult(state, records, snapshots)
