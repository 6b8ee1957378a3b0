"""Differentially private algorithms for threshold functions over ordered domains."""
from .attacks import (AttackReport, Codebook, HardDatabase, HardDistParams, MixedRadixWord,
                      TraceOutcome, attack_mechanism, fpc_gen, fpc_trace, hard_dist_sample,
                      is_feasible)
from .audit import AuditConfig, EpsilonEstimate, ExperimentResult, estimate_epsilon, run_benchmark
from .domain import Dataset, LabeledDataset, OrderedDomain, recursion_depth
from .errors import (ConfigError, DomainError, ParameterError, ProtocolError, SampleSizeError,
                     ThreshDPError, TowerOverflowError)
from .interior_point import RecPrefixSolver, rec_prefix, required_sample_size, run_rec_prefix
from .kernels import BACKEND
from .learning import ThresholdHypothesis, empirical_learn, pac_learn, subsample_amplify
from .primitives import PrivacyBudget, choosing_mechanism, exponential_mechanism, make_rng
from .release import (AccuracyParams, StepCdf, learn_distribution, thresh2_release, thresh_release,
                      tree_release)

__version__ = "0.1.0"
