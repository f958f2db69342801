"""Inextensible vesicle suspensions in 2D Stokes flow with spectral deferred
correction time stepping and adaptive step control."""

from __future__ import annotations

from .adaptive import StepController, accept_and_propose, adaptive_run, step_errors
from .config import RunConfig, preset
from .curve import VesicleCurve, ellipse, read_curve, write_curve
from .dynamics import BackgroundFlow, SuspensionState
from .potentials import WallGeometry
from .sdc import lobatto_nodes, sdc_run, sdc_step
from .stepper import BDF2, EULER, Solver, SolverOptions, fixed_step_run, relative_errors

__version__ = "0.1.0"

__all__ = [
    "BDF2", "EULER", "BackgroundFlow", "RunConfig", "Solver", "SolverOptions",
    "StepController", "SuspensionState", "VesicleCurve", "WallGeometry",
    "accept_and_propose", "adaptive_run", "ellipse", "fixed_step_run", "lobatto_nodes",
    "preset", "read_curve", "relative_errors", "sdc_run", "sdc_step", "step_errors",
    "write_curve",
]
