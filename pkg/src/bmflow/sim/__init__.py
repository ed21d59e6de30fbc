"""Pseudo-spectral solver for the non-isothermal Q-tensor flow model."""
from .params import ModelParams, ParameterError, Viscosity, validate
from .physics import (PhysicalityLoss, PositivityLoss, compute_H_field, compute_S,
                      compute_stress, heat_rhs, mat_residual, recover_pressure,
                      strain_and_vorticity)
from .spectral import Grid, leray_project
from .state import FieldState, InitialData, initial_state
from .stepper import Simulator, StepFailure, step
from .diagnostics import (BalanceTracker, BumpTest, DiagnosticsRecord, diagnostics,
                          entropy_local_audit)
