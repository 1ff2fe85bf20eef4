"""Vehicular edge caching: contact-chain analysis, energy-efficient online
cache placement and a slotted Monte-Carlo simulator."""
from .catalog import CacheVector, Catalog, project_cache_vector, validate_cache_vector, zipf_popularity
from .energy import EnergyLedger, EnergyParams, mbs_energy, total_energy, vehicle_energy
from .errors import *  # noqa: F401,F403
from .interaction import (
    InteractionRates,
    ServiceSplit,
    effective_meeting_rate,
    expected_queue_lengths,
    served_count_pmf,
    service_split,
    solve_truncated_chain,
)
from .optimizer import (
    EfficiencyTracker,
    SlotProblem,
    VirtualQueues,
    build_slot_problem,
    diagnostics_bound,
    dinkelbach_solve_static,
    solve_slot,
    update_eta,
    update_virtual_queue,
)
from .phy import LinkState, RadioParams, channel_gain, in_range, shannon_rate, slot_throughput
from .sim import EpisodeMetrics, ScenarioConfig, SlotLedger, run_episode, run_slot, spawn_users, spawn_vehicles, sweep
