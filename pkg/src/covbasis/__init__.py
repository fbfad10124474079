"""
covbasis: quantum dynamics in a non-orthogonal basis that moves with external
parameters.

The package is organized bottom-up:

``tensor_core``   frames, metrics, index placement and operator representations
``basis``         parameter-dependent basis families and their derivatives
``connection``    the affine connection, its identities and covariant derivatives
``curvature``     Riemann tensor, Ricci/Berry curvature and Chern numbers
``propagators``   moving-basis time integrators and trajectory logs
``forces``        energy derivatives and the Pulay split
``cli``           scenario-driven command-line front end
"""
from .errors import (CovBasisError, DimensionMismatch, SingularFrame, NotPositiveDefinite, SingularOperator,
                     RepMismatch, OutOfDomain, InsufficientParameters, ScNotConverged, DegenerateState,
                     AmbientUnavailable, ConfigParseError)
from .tensor_core import (BasisFrame, Operator, build_frame, convert_rep, dagger, dual_vectors,
                          herm_sqrt_pair, invert_second_rank, lower_ket, raise_bra, raise_ket, lower_bra,
                          projector_matrix, natural_hermiticity_residual)
from .basis import (BasisFamily, Rotating2D, Breathing2D, OverlapPair, GaussianChain, TwoLevelSphere,
                    StaticFamily, SmoothGauge, GaugedFamily, TrajectoryFamily, evaluate_frame,
                    frame_derivatives, frame_second_derivatives, frame_gauge_overlap, project,
                    complement_project, family_from_config)
from .connection import (ChristoffelSet, christoffel, christoffel_at, verify_connection_identities,
                         covariant_derivative_ket, covariant_derivative_bra, covariant_derivative_operator,
                         parallel_transport_step, transform_christoffel)
from .curvature import (CurvatureTensor, riemann, ricci_berry, berry_curvature, chern_number,
                        commutator_check, trace_cancellation_residual)
from .hamiltonians import (DenseHamiltonian, DrivenHamiltonian, GridHamiltonian, SubspaceHamiltonian,
                           ZeroHamiltonian)
from .propagators import (PropagatorKind, Dynamics, StateBundle, DensityTensor, ObservableLog, step,
                          initial_bundle, run_trajectory, liouville_step, compare_D_vs_G, dt_sweep)
from .forces import (EigenSolution, solve_generalized_eigen, hf_derivative, pulay_decomposition,
                     eigenvalue_fd)
from .fitting import fit_order

__version__ = "0.1.0"
