"""Monte Carlo harness: densification sweeps, trial averaging, rate curves.

Each trial draws one network realization, probes it with a typical
reference uplink, and evaluates the closed-form outage.  Densification is
swept through the stations-per-mobile ratio C/M: the station layout and
the mobile density stay fixed while all coordinates shrink, which
simultaneously sets the mobile count M = C / (C/M) and the typical
reference link length.

Trials are independent; each gets its own random stream derived from
(master seed, cell id, trial index) through numpy's SeedSequence spawn
keys, so results are reproducible bit for bit regardless of execution
order or worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .outage import beta_for_rate, code_rate, outage_probability
from .propagation import PropagationParams, shadow_sigma
from .radio import (
    BeamParams,
    HoppingConfig,
    InterferenceProfile,
    RadioConfig,
    ReferenceLink,
    build_profile,
)
from .topology import TWO_PI, NetworkRealization, NetworkTopology, build_realization

THREADS_ENV = "UPLINKSIM_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    topology: NetworkTopology
    prop: PropagationParams = PropagationParams()
    beam: BeamParams = BeamParams()
    hopping: HoppingConfig = HoppingConfig()
    snr_db: float = 30.0
    beta_db: tuple[float, ...] = (3.0,)
    d_r0_km: float = 0.1  # typical link length at C/M = 0.01
    cm_grid: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
    density_per_km2: float = 20.0
    shannon_loss: float = 0.794  # l_s, 1 dB off the Shannon bound
    n_trials: int = 1000
    shadowing: str = "both"  # on | off | both
    hopping_mode: str = "both"  # on | off | both
    fading: str = "distance"  # distance | rayleigh
    m0_mode: str = "round"  # reproduces the short-link integer fading values
    max_interferers: int = 30
    seed: int = 1

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("need at least one trial")
        if self.density_per_km2 <= 0 or self.d_r0_km <= 0 or self.shannon_loss <= 0:
            raise ValueError("density, d_r0 and the Shannon loss factor must be positive")
        if not self.beta_db:
            raise ValueError("need at least one SINR threshold")
        for g in self.cm_grid:
            if not 0.01 <= g <= 1.0:
                raise ValueError("C/M grid values must lie in [0.01, 1]")
        for name, val in (("shadowing", self.shadowing), ("hopping_mode", self.hopping_mode)):
            if val not in ("on", "off", "both"):
                raise ValueError(f"{name} must be on, off or both")
        if self.fading not in ("distance", "rayleigh"):
            raise ValueError("fading must be distance or rayleigh")
        if self.m0_mode not in ("floor", "round"):
            raise ValueError("m0_mode must be floor or round")
        if self.max_interferers < 1:
            raise ValueError("max_interferers must be positive")
        if self.beam.zeta != self.topology.zeta:
            raise ValueError("beam zeta must match the topology's sectors per station")

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(
            beam=self.beam,
            hopping=self.hopping,
            snr_db=self.snr_db,
            max_interferers=self.max_interferers,
            m0_mode=self.m0_mode,
        )

    @property
    def baseline_cm(self) -> float:
        """C/M of the unscaled topology at the configured mobile density."""
        return self.topology.n_stations / (self.density_per_km2 * self.topology.region.area)


@dataclass(frozen=True)
class SweepRow:
    cm_ratio: float
    d_r_km: float
    beta_db: float
    shadowing: str
    hopping: str
    fading_model: str
    avg_outage: float
    std_outage: float
    rate_bpcu: float
    ase_bpcu_per_km2: float
    n_trials: int
    seed: int


@dataclass(frozen=True)
class Cell:
    """One sweep grid point under fixed flags."""

    grid_index: int
    cm: float
    shadowing: bool
    fading: str

    @property
    def cell_id(self) -> int:
        return 4 * self.grid_index + 2 * (0 if self.shadowing else 1) + (
            0 if self.fading == "distance" else 1
        )


def typical_link_length(cm: float, d_r0: float) -> float:
    """Reference link length d_r0 / (10 sqrt(C/M)); d_r0 at C/M = 0.01."""
    if not 0.01 <= cm <= 1.0:
        raise ValueError("C/M must lie in [0.01, 1]")
    return d_r0 / (10.0 * math.sqrt(cm))


def mobiles_for(cm: float, n_stations: int) -> int:
    return int(round(n_stations / cm))


def _flags(mode: str) -> list[bool]:
    return {"on": [True], "off": [False], "both": [True, False]}[mode]


def _cells(cfg: ExperimentConfig) -> list[Cell]:
    return [
        Cell(gi, cm, sh, cfg.fading)
        for gi, cm in enumerate(cfg.cm_grid)
        for sh in _flags(cfg.shadowing)
    ]


def _trial_rng(cfg: ExperimentConfig, cell_id: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(cell_id, trial)))


def _scaled_topology(cfg: ExperimentConfig, cm: float) -> NetworkTopology:
    # shrinking the layout raises C/M at fixed station count and density
    return cfg.topology.scaled(math.sqrt(cfg.baseline_cm / cm))


def _reference_station(topo: NetworkTopology) -> int:
    d = np.hypot(*(topo.station_positions - topo.window.center).T)
    return int(np.argmin(d))


def _draw_reference(
    topo: NetworkTopology,
    station_index: int,
    d_r: float,
    prop: PropagationParams,
    shadowing: bool,
    rng: np.random.Generator,
) -> ReferenceLink:
    """Typical reference link: the sector of the chosen station covering a
    uniform random angle, with the mobile at distance d_r inside it."""
    zeta = topo.zeta
    base = topo.sector(station_index * zeta + 1).offset
    width = TWO_PI / zeta
    k = min(int(((rng.uniform(0.0, TWO_PI) - base) % TWO_PI) // width), zeta - 1)
    sector_id = station_index * zeta + k + 1
    phi = topo.sector(sector_id).offset + rng.uniform(0.0, width)
    pos = topo.station_positions[station_index] + d_r * np.array([math.cos(phi), math.sin(phi)])
    xi = float(rng.normal(0.0, float(shadow_sigma(d_r, prop)))) if shadowing else 0.0
    return ReferenceLink(position=pos, sector_id=sector_id, distance=d_r, xi_db=xi)


def trial_profile(
    cfg: ExperimentConfig,
    cell: Cell,
    trial_index: int,
    scaled: Optional[NetworkTopology] = None,
) -> InterferenceProfile:
    """Deterministic (seed, cell, trial) -> interference profile of the trial.

    The profile is independent of the hopping flag and of beta, so one
    trial serves every (hopping, threshold) combination of its cell.
    """
    if scaled is None:
        scaled = _scaled_topology(cfg, cell.cm)
    rng = _trial_rng(cfg, cell.cell_id, trial_index)
    caps = np.full(scaled.n_sectors, cfg.hopping.sector_capacity, dtype=int)
    realization = build_realization(
        scaled,
        cfg.prop,
        mobiles_for(cell.cm, scaled.n_stations),
        rng,
        shadowing=cell.shadowing,
        sector_caps=caps,
    )
    ref = _draw_reference(
        scaled,
        _reference_station(scaled),
        typical_link_length(cell.cm, cfg.d_r0_km),
        cfg.prop,
        cell.shadowing,
        rng,
    )
    return build_profile(realization, ref, cfg.radio, rng, rayleigh=cell.fading == "rayleigh")


def run_trial(
    cfg: ExperimentConfig,
    grid_index: int,
    trial_index: int,
    *,
    shadowing: Optional[bool] = None,
    hopping: Optional[bool] = None,
    beta_db: Optional[float] = None,
) -> float:
    """Outage probability of one trial's reference link.

    Flags default to the configuration (with "both" resolving to on).
    """
    if shadowing is None:
        shadowing = _flags(cfg.shadowing)[0]
    if hopping is None:
        hopping = _flags(cfg.hopping_mode)[0]
    if beta_db is None:
        beta_db = cfg.beta_db[0]
    cell = Cell(grid_index, cfg.cm_grid[grid_index], shadowing, cfg.fading)
    profile = trial_profile(cfg, cell, trial_index)
    return outage_probability(profile, 10.0 ** (beta_db / 10.0), hopping=hopping)


def _trial_block(cfg: ExperimentConfig, cell: Cell, start: int, stop: int) -> np.ndarray:
    """Outage of trials [start, stop) for every (hopping, beta) of the cell,
    shaped (stop-start, n_hop, n_beta)."""
    hops = _flags(cfg.hopping_mode)
    betas = [10.0 ** (b / 10.0) for b in cfg.beta_db]
    scaled = _scaled_topology(cfg, cell.cm)
    out = np.empty((stop - start, len(hops), len(betas)))
    for t in range(start, stop):
        profile = trial_profile(cfg, cell, t, scaled=scaled)
        for hi, hop in enumerate(hops):
            for bi, beta in enumerate(betas):
                out[t - start, hi, bi] = outage_probability(profile, beta, hopping=hop)
    return out


def _worker_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def run_cell(cfg: ExperimentConfig, cell: Cell, workers: Optional[int] = None) -> np.ndarray:
    """Per-trial outage array of one cell, shaped (n_trials, n_hop, n_beta)."""
    n = cfg.n_trials
    workers = min(_worker_count(workers), n)
    if workers == 1:
        return _trial_block(cfg, cell, 0, n)
    bounds = np.linspace(0, n, workers + 1, dtype=int)
    out = np.empty((n, len(_flags(cfg.hopping_mode)), len(cfg.beta_db)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            (a, pool.submit(_trial_block, cfg, cell, int(a), int(b)))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        for a, fut in futures:
            block = fut.result()
            out[a : a + len(block)] = block
    return out


def summarize(eps: np.ndarray, density: float, rate: float) -> tuple[float, float, float]:
    """(mean outage, sample std, area spectral efficiency) of one cell row."""
    if len(eps) == 0:
        raise ValueError("need at least one trial")
    avg = float(np.mean(eps))
    std = float(np.std(eps, ddof=1)) if len(eps) > 1 else 0.0
    return avg, std, density * rate * (1.0 - avg)


def run_sweep(cfg: ExperimentConfig, workers: Optional[int] = None) -> list[SweepRow]:
    """Full densification sweep; one row per (C/M, shadowing, hopping, beta)."""
    rows = []
    hops = _flags(cfg.hopping_mode)
    for cell in _cells(cfg):
        eps = run_cell(cfg, cell, workers=workers)
        d_r = typical_link_length(cell.cm, cfg.d_r0_km)
        for hi, hop in enumerate(hops):
            for bi, beta_db in enumerate(cfg.beta_db):
                rate = code_rate(10.0 ** (beta_db / 10.0), cfg.shannon_loss)
                avg, std, ase = summarize(eps[:, hi, bi], cfg.density_per_km2, rate)
                rows.append(
                    SweepRow(
                        cm_ratio=cell.cm,
                        d_r_km=d_r,
                        beta_db=beta_db,
                        shadowing="on" if cell.shadowing else "off",
                        hopping="on" if hop else "off",
                        fading_model=cell.fading,
                        avg_outage=avg,
                        std_outage=std,
                        rate_bpcu=rate,
                        ase_bpcu_per_km2=ase,
                        n_trials=cfg.n_trials,
                        seed=cfg.seed,
                    )
                )
    return rows


def rate_outage_curve(
    realization: NetworkRealization,
    uplink_ids: Sequence[int],
    rates: Sequence[float],
    radio: RadioConfig,
    rng: np.random.Generator,
    *,
    shannon_loss: float = 0.794,
    rayleigh: bool = False,
    hopping: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Outage versus code rate for chosen uplinks of one realization.

    Returns (curves, average) with curves shaped (n_uplinks, n_rates).
    Each uplink is an actual mobile of the realization, probed at its own
    serving sector with its cached shadowing.
    """
    if len(uplink_ids) < 1:
        raise ValueError("need at least one uplink")
    betas = [beta_for_rate(r, shannon_loss) for r in rates]
    curves = np.empty((len(uplink_ids), len(rates)))
    for row, i in enumerate(uplink_ids):
        j = int(realization.serving[i])
        if j <= 0:
            raise ValueError(f"mobile {i} is inactive")
        d = float(np.hypot(*(realization.topo.sector_position(j) - realization.mobiles[i])))
        ref = ReferenceLink(
            position=realization.mobiles[i],
            sector_id=j,
            distance=d,
            xi_db=realization.shadow_db(int(i), j),
        )
        profile = build_profile(realization, ref, radio, rng, rayleigh=rayleigh)
        curves[row] = [outage_probability(profile, b, hopping=hopping) for b in betas]
    return curves, curves.mean(axis=0)


def sample_rate_curve(
    cfg: ExperimentConfig,
    cm: float,
    n_uplinks: int,
    rates: Sequence[float],
) -> tuple[np.ndarray, np.ndarray]:
    """Rate-outage curves for random in-window uplinks of one realization."""
    if n_uplinks < 1:
        raise ValueError("need at least one uplink")
    scaled = _scaled_topology(cfg, cm)
    # spawn key disjoint from sweep cell ids, which stay below 4 * grid size
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1 << 20, 0)))
    caps = np.full(scaled.n_sectors, cfg.hopping.sector_capacity, dtype=int)
    shadowing = _flags(cfg.shadowing)[0]
    realization = build_realization(
        scaled,
        cfg.prop,
        mobiles_for(cm, scaled.n_stations),
        rng,
        shadowing=shadowing,
        sector_caps=caps,
    )
    w = scaled.window
    inside = (
        (realization.mobiles[:, 0] >= w.xmin)
        & (realization.mobiles[:, 0] <= w.xmax)
        & (realization.mobiles[:, 1] >= w.ymin)
        & (realization.mobiles[:, 1] <= w.ymax)
    )
    pool = np.flatnonzero(inside & realization.active)
    if pool.size < n_uplinks:
        raise ValueError(f"only {pool.size} active in-window mobiles, need {n_uplinks}")
    ids = np.sort(rng.choice(pool, size=n_uplinks, replace=False))
    return rate_outage_curve(
        realization,
        ids,
        rates,
        cfg.radio,
        rng,
        shannon_loss=cfg.shannon_loss,
        rayleigh=cfg.fading == "rayleigh",
        hopping=_flags(cfg.hopping_mode)[0],
    )
