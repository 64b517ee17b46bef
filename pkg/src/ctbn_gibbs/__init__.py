"""Exact Gibbs sampling of trajectories in continuous-time Bayesian networks."""
from ._jit import JIT_ENABLED
from .linalg import matrix_exponential, propagate_distribution
from .model import (CTBNModel, ModelValidationError, StateSpaceTooLarge, amalgamate,
                    load_model, markov_blanket, parent_projection, save_model, validate_model)
from .sampler import (GibbsChain, forward_sample, gibbs_sweep, initialize_trajectory, run_chain,
                      sample_component_trajectory)
from .trajectory import (ComponentTrajectory, Evidence, EvidenceError, JointTrajectory,
                         ZeroProbabilityEvidence, load_evidence)

__version__ = "0.1.0"
