"""Monte-Carlo laboratory for random times and their hazard processes.

Simulates random times with qualitatively different information structure
(smooth first crossings, argmax-honest times, last zeros, Poisson jumps),
builds their conditional survival bundles, and compares the log hazard
-ln Z against the martingale hazard obtained by integrating dA / Z, with
statistical checks that carry explicit error bars.
"""

from .survival import (IncreasingPartEstimator, RegressionSpec,
                    SupermartingaleBundle, closed_form_bundle, fit_survival,
                    indicator_survival)
from .backend import HAS_NUMBA, active_backend
from .grid import TimeGrid, uniform_grid
from .hazard import (first_crossing_agreement, hazard_gap,
                     honest_decomposition_check, integrated_hazard_exact,
                     integrated_hazard_quadrature, log_hazard,
                     stopping_time_gap_check)
from .paths import PathEnsemble, bridge_running_sup, exponential_martingale, \
    running_sup, simulate_brownian
from .random_times import (CENSORED, ConstantIntensity, RandomTimeSample,
                           StateIntensity, cox_time,
                           honest_from_exp_martingale, last_zero_before,
                           poisson_first_jump)
from .runner import RunArtifact, run_scenario, write_artifact
from .scenario import Scenario, bundled_scenarios, parse_scenario, \
    resolve_scenario
from .stat_tests import (AvoidanceCheck, CompensatorCheck, Decision,
                         OptionalStoppingBattery, StoppingLikenessCheck,
                         TestReport)

__version__ = "0.1.0"
