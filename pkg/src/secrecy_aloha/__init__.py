"""Joint secrecy-stability analysis of finite-user slotted ALOHA over Rayleigh fading."""

from .channel import (
    CapacityEstimate,
    ChannelParams,
    ChannelState,
    compute_rho,
    estimate_ergodic_capacity,
    estimate_secrecy_capacity,
    outage_failure_prob,
    sample_channel_state,
)
from .optimizer import (
    OptimResult,
    grid_search_oracle,
    optimize_dominant_n2,
    original_throughput,
    throughput_dominant,
)
from .regions import (
    CaseLabel,
    EmptyProbs,
    RegionReport,
    SystemParams,
    classify_case,
    dominant_success_prob,
    is_secure_dominant,
    is_stable_dominant,
    joint_region_nonempty,
    original_secrecy_ok,
    original_secrecy_thresholds_n2,
    original_stability_ok,
    solve_empty_probs,
    stability_region_nonempty,
    trace_boundaries_n2,
)
from .simulator import SimConfig, SimMetrics, detect_stability, run_replications, run_simulation

__version__ = "0.1.0"
