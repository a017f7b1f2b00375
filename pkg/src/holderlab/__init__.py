"""Numerical lab for the distance comparison d_H >= C d_R^(1/(1+theta)) on
Hoelder-continuous contact distributions in a periodic 3D chart."""
from .bounds import (ConstantsBundle, ScalingResult, build_bundle, c1_limit_check, constant_C,
                     curly_brace_check, estimate_eta, min_sin_angle, proof_chain, rho_threshold,
                     scaling_experiment, vertical_curve)
from .disks import DiskFamily, TriangulatedDisk, boundary_integral, fill_disk, stokes_ratio, stokes_sweep
from .distance import (DistanceEstimate, OptimizerConfig, estimate_upper, heisenberg_vertical_exact,
                       reachability_probe)
from .fields import GridSpec, HoelderField, eval_field, hoelder_norm_estimate, synth_weierstrass
from .forms import (CoefficientBounds, DistributionModel, MetricChart, OneForm, build_model, dual_norm,
                    eval_form, kernel_frame, sin_angle)
from .paths import ControlSequence, Polyline, close_loop, concatenate, horizontality_defect, path_length

__version__ = "0.1.0"

__all__ = [
    "ConstantsBundle", "ScalingResult", "build_bundle", "c1_limit_check", "constant_C", "curly_brace_check",
    "estimate_eta", "min_sin_angle", "proof_chain", "rho_threshold", "scaling_experiment", "vertical_curve",
    "DiskFamily", "TriangulatedDisk", "boundary_integral", "fill_disk", "stokes_ratio", "stokes_sweep",
    "DistanceEstimate", "OptimizerConfig", "estimate_upper", "heisenberg_vertical_exact", "reachability_probe",
    "GridSpec", "HoelderField", "eval_field", "hoelder_norm_estimate", "synth_weierstrass",
    "CoefficientBounds", "DistributionModel", "MetricChart", "OneForm", "build_model", "dual_norm",
    "eval_form", "kernel_frame", "sin_angle",
    "ControlSequence", "Polyline", "close_loop", "concatenate", "horizontality_defect", "path_length",
]
