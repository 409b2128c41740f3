"""Finite-volume simulation of flux-limited chemotaxis with logistic growth."""
from .elliptic import EllipticOptions, apply_operator, solve, solve_v
from .experiments import InitialData, make_initial, simulate
from .flux import LimiterParams, face_gradient, face_gradient_magnitude, limited_flux, upwind_divergence
from .grid import FaceVectorField, Grid, GridSpec, ScalarField, integrate, linf_norm, lq_norm, make_grid
from .integrator import DtPolicy, ModelParams, SimState, run, stable_dt, step

__version__ = "0.1.0"
