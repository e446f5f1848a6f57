"""Subspace estimation and tracking for large antenna arrays from low-dimensional sketches."""

from .array_model import (AngularGrid, ArrayGeometry, ArrayKind, build_grid, custom_grid,
                          rect_response, response_matrix, steering, ula_response)
from .channel import (OperatorKind, SamplingOperator, ScatteringProfile, SketchBatch,
                      draw_phase_shift, draw_selection, make_sketch, read_batch, read_matrix,
                      sample_channel, simulate_batch, snr_to_sigma, true_covariance,
                      write_batch, write_matrix)
from .errors import *  # noqa: F401,F403
from .metrics import captured_profile, gamma, power_profile, subspace_gamma
from .operators import fft_adjoint, fft_forward
from .reduced import reduced_program_oracle
from .solver import (CovarianceEstimate, SolveResult, SolverConfig, grad_f1, kkt_residual,
                     lipschitz, objective, prox_l21, reconstruct_covariance, run_fbs, run_fista)
from .svt import SvtConfig, svt_complete, svt_subspace
from .tracking import (SubspaceTracker, TrackerConfig, dominant_support, recovery_time,
                       tracker_init, tracker_push)

__version__ = "0.1.0"
