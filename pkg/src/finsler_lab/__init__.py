"""Numerical lab for simple, possibly non-reversible Finsler metrics on the
unit disc: geodesics, boundary distances, Holmes-Thompson area by several
independent routes, enveloping functions, the geodesic ray transform and
volume-comparison experiments."""

from .errors import DomainError, FinslerLabError, NumericalError, SolverError, ValidationError
from .fields import (Affine, CapLog, Constant, Exp, Gaussian, Polynomial, Product, ScalarField, Sum,
                     field_from_config)
from .metrics import (Bump, Conformal, FiberHarmonic, FiberPerturbed, FinslerMetric, PerturbationSum, Randers,
                      Riemannian, Scaled, euclidean, metric_from_config, spherical_cap)
from .fiber import convexity_report, dual_norm, legendre, legendre_inverse, norm, validate
from .grids import PolarGrid, circle_points
from .integrator import integrate
from .geodesics import (connect, connect_batch, conjugate_point_check, distances, exit_chord, exit_chords, flow,
                        simplicity_report)
from .envelope import (BoundaryDistanceTable, EnvelopingFunction, bd_from_envelope, boundary_distance_table,
                       distance_field, enveloping_function, metric_from_envelope)
from .volume import VolumeResult, ht_volume_envelope_boundary, ht_volume_fiber, volume_from_bd, volume_rotinv
from .raytransform import (conformal_metric, distance_variation_check, injectivity_experiment, ray_transform,
                           sinogram)
from .monotonicity import (PsiContext, build_f_double_prime, chord_ratio_check, h_map, majorization_check,
                           monotonicity_sweep, monotonicity_trial, psi, psi_smoothness_probe)
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"
