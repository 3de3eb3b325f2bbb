"""Simulation and inference framework for pooled-bandit adaptive trials."""

from .engine import TrajectorySet, TrialConfig, run_trial, summarize_trial
from .environments import (CostParams, IndividualParams, MisspecifiedLinearEnv,
                           NonstationaryMabEnv, OralyticsZipEnv, SyntheticDosageEnv)
from .estimators import (EstimandSpec, EstimateReport, NAWithReason, OracleValue,
                         adaptive_sandwich_variance, average_reward_estimate,
                         confidence_interval, covers, estimate_report,
                         least_squares_estimate, psi_influence,
                         replicability_metric, standard_sandwich_variance,
                         theta_star_oracle)
from .harness import (Histogram, ReplicationSummary, histogram_export,
                      mc_theta_star, replication_pairing, run_replications)
from .limits import (ks_distance, MisspecifiedGLaw, ScaledUniformLaw, TwoPointLaw,
                     compute_misspecified_s)
from .policies import (Boltzmann, ContextualEpsGreedy, Featurization, FixedProb,
                       GaussianThompson, MabEpsilonGreedy, PolicySnapshot)
from .presets import PRESETS, parse_config, preset_config
from .rng import Ar1NoisePath, DistSpec, SeedSpec, StreamFactory, derive_stream, draw, \
    sample_ar1_noise

__version__ = "0.1.0"
