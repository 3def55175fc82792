"""Outage and area-spectral-efficiency simulator for frequency-hopping
millimeter-wave cellular uplinks over arbitrary base-station layouts."""

from .experiment import (
    ExperimentConfig,
    SweepRow,
    rate_outage_curve,
    run_sweep,
    run_trial,
    sample_rate_curve,
    summarize,
    typical_link_length,
)
from .oracle import OracleEstimate, draw_sinr, estimate_outage, run_validation
from .outage import (
    OutageInputs,
    beta_for_rate,
    code_rate,
    conditional_outage,
    g_coeff,
    h_poly,
    outage_probability,
    psi,
)
from .propagation import (
    PropagationParams,
    alpha,
    nakagami_m,
    path_loss,
    reference_m0,
    sample_shadow,
    shadow_sigma,
)
from .radio import (
    BeamParams,
    HoppingConfig,
    InterfererPeriodTerm,
    InterferenceProfile,
    RadioConfig,
    ReferenceLink,
    build_profile,
    collision_probability,
    fractional_durations,
    interference_ratio,
    mobile_beam_gain,
    sector_beam_gain,
    select_interferers,
    snr_gamma0,
    spectral_factor,
    timing_offset,
)
from .topology import (
    Association,
    BaseStation,
    NetworkRealization,
    NetworkTopology,
    PlacementInfeasibleError,
    Rect,
    Sector,
    associate,
    build_realization,
    build_sectors,
    covering_sector,
    enforce_capacity,
    generate_grid_stations,
    load_topology_csv,
    place_mobiles,
    save_topology_csv,
)

__version__ = "0.1.0"
