"""Per-link radio mechanics: beams, hop timing, collisions, power control.

Everything here feeds the interference profile, the minimal abstraction
the outage closed form and the Monte Carlo oracle both consume: the
reference SNR, the reference integer fading parameter, and one
(omega, q, C, m) record per interferer and subframe period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .propagation import PropagationParams, nakagami_m, path_loss, reference_m0
from .topology import TWO_PI, NetworkRealization, Sector


@dataclass(frozen=True)
class BeamParams:
    """Sector and mobile antenna patterns (two-level gains)."""

    zeta: int = 24  # sector beams per station
    sector_sidelobe: float = 0.01  # b, linear
    mobile_beamwidth: float = 0.1 * math.pi  # Theta, radians
    mobile_sidelobe: float = 0.1  # a, linear

    def __post_init__(self) -> None:
        if not 0 <= self.sector_sidelobe <= 1 or not 0 <= self.mobile_sidelobe <= 1:
            raise ValueError("sidelobe gains must lie in [0, 1]")
        if not 0 < self.mobile_beamwidth < TWO_PI:
            raise ValueError("mobile beamwidth must lie in (0, 2*pi)")
        if self.zeta < 1:
            raise ValueError("zeta must be a positive integer")


@dataclass(frozen=True)
class HoppingConfig:
    """Hopset structure and slot timing."""

    channels: int = 100  # L
    block: int = 10  # L_l, contiguous channels per mobile
    slot_s: float = 0.5e-3  # T, seconds
    activity: float = 1.0  # p_i
    speed_km_s: float = 2.998e5  # propagation speed

    def __post_init__(self) -> None:
        if self.block < 1 or self.channels % self.block != 0:
            raise ValueError("block size must divide the hopset size")
        if self.channels // self.block < 2:
            raise ValueError("need at least two hop positions (L/L_l >= 2)")
        if not 0 <= self.activity <= 1:
            raise ValueError("activity probability must lie in [0, 1]")
        if self.slot_s <= 0 or self.speed_km_s <= 0:
            raise ValueError("slot duration and speed must be positive")

    @property
    def sector_capacity(self) -> int:
        """Orthogonality limit on simultaneously served mobiles, L / L_l."""
        return self.channels // self.block


@dataclass(frozen=True)
class InterfererPeriodTerm:
    """One (interferer, subframe period) record of the profile."""

    omega: float  # interference-to-signal power ratio, linear
    q: float  # collision probability
    c_frac: float  # fractional duration of the period, in [0, 1/2]
    m: float  # fading shape of the interferer link


@dataclass(frozen=True)
class InterferenceProfile:
    """Everything the outage computation needs about one reference link."""

    gamma0: float  # no-fading SNR at the sector receiver, linear
    m0: int  # integer fading parameter of the reference link
    terms: tuple[InterfererPeriodTerm, ...] = ()
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.m0 < 1 or int(self.m0) != self.m0:
            raise ValueError("m0 must be a positive integer")

    def term_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(omega, q, c, m) as parallel arrays, cached."""
        if not self._arrays:
            self._arrays["a"] = (
                np.array([t.omega for t in self.terms]),
                np.array([t.q for t in self.terms]),
                np.array([t.c_frac for t in self.terms]),
                np.array([t.m for t in self.terms]),
            )
        return self._arrays["a"]


@dataclass(frozen=True)
class ReferenceLink:
    """Reference uplink endpoint data used to assemble a profile."""

    position: np.ndarray  # mobile location, km
    sector_id: int
    distance: float  # link length d_r, km
    xi_db: float  # shadowing factor of the reference link


@dataclass(frozen=True)
class RadioConfig:
    """Link-model bundle shared by profile construction."""

    beam: BeamParams = BeamParams()
    hopping: HoppingConfig = HoppingConfig()
    snr_db: float = 30.0  # P_r / N at the reference distance, dB
    max_interferers: int = 30
    m0_mode: str = "floor"


def sector_beam_gain(sector: Sector, theta: float, bp: BeamParams) -> float:
    """Two-level sector pattern: 1 inside the half-open beam, b outside."""
    if (theta - sector.offset) % TWO_PI < sector.width:
        return 1.0
    return bp.sector_sidelobe


def mobile_beam_gain(
    x_i: np.ndarray, s_j: np.ndarray, s_serving: np.ndarray, bp: BeamParams
) -> float:
    """Gain of an interferer's beam (aimed at its server) toward s_j.

    Mainlobe iff the two unit bearings from the mobile agree within
    Theta/2, tested strictly on the cosine.
    """
    u = np.asarray(s_j, dtype=float) - x_i
    v = np.asarray(s_serving, dtype=float) - x_i
    nu, nv = np.hypot(*u), np.hypot(*v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("bearing undefined: mobile coincides with a sector position")
    if float(u @ v) / (nu * nv) > math.cos(bp.mobile_beamwidth / 2):
        return 1.0
    return bp.mobile_sidelobe


def spectral_factor(l_j: int, l_l: int) -> float:
    """Fractional power overlap min(L_j / L_l, 1) of colliding hop blocks."""
    if l_j < 1 or l_l < 1:
        raise ValueError("block sizes must be positive")
    return min(l_j / l_l, 1.0)


def timing_offset(s_j: np.ndarray, x_r: np.ndarray, x_i: np.ndarray, hc: HoppingConfig) -> float:
    """Hop-transition offset of interferer x_i at s_j, in [0, T)."""
    d_r = float(np.hypot(*(np.asarray(s_j, float) - np.asarray(x_r, float))))
    d_i = float(np.hypot(*(np.asarray(s_j, float) - np.asarray(x_i, float))))
    t = ((d_r - d_i) / hc.speed_km_s) % hc.slot_s
    return 0.0 if t == hc.slot_s else t  # float mod of a tiny negative can land on T


def fractional_durations(t: float, slot_s: float) -> tuple[float, float, float, float]:
    """Durations of the four subframe periods relative to the 2T subframe."""
    if not 0 <= t < slot_s:
        raise ValueError("timing offset must lie in [0, T)")
    c_odd = t / (2 * slot_s)
    c_even = (slot_s - t) / (2 * slot_s)
    return (c_odd, c_even, c_odd, c_even)


def collision_probability(n_g: int, l_g: int, l_j: int, channels: int, activity: float) -> float:
    """Chance that an interferer's hop collides with the reference in a period.

    Uniform hop patterns, orthogonal within each sector: q = max(N_g * L_g,
    L_j) * p / L.  Values above 1 mean the caller violated the sector
    capacity bound.
    """
    q = max(n_g * l_g, l_j) * activity / channels
    if q > 1.0:
        raise RuntimeError("collision probability above 1: sector capacity violated")
    return q


def select_interferers(
    realization: NetworkRealization,
    sector_j: int,
    hc: HoppingConfig,
    rng: np.random.Generator,
    cap: Optional[int] = None,
) -> np.ndarray:
    """Potentially interfering mobiles for reference sector j.

    Spectral overlap caps the simultaneous interferers per foreign sector
    at max(L_j / L_l, 1); overloaded sectors contribute a uniform random
    subset.  The reference sector's own mobiles never interfere.  One
    selection is drawn per (realization, reference) and shared by all four
    subframe periods.
    """
    if cap is None:
        cap = max(hc.block // hc.block, 1)  # L_j == L_l for a uniform hopset
    serving = realization.serving
    if cap == 1:
        # uniform one-per-sector choice: random order, keep first of each sector
        cand = np.flatnonzero((serving > 0) & (serving != sector_j))
        if cand.size == 0:
            return cand
        perm = rng.permutation(cand)
        _, first = np.unique(serving[perm], return_index=True)
        return np.sort(perm[first])
    chosen = []
    for l in range(1, realization.topo.n_sectors + 1):
        if l == sector_j:
            continue
        mem = realization.sector_members(l)
        if mem.size == 0:
            continue
        if mem.size <= cap:
            chosen.append(mem)
        else:
            chosen.append(rng.choice(mem, size=cap, replace=False))
    if not chosen:
        return np.empty(0, dtype=int)
    return np.sort(np.concatenate(chosen))


def interference_ratio(
    i: int,
    realization: NetworkRealization,
    sector_j: int,
    prop: PropagationParams,
    bp: BeamParams,
    hc: HoppingConfig,
) -> float:
    """Power of interferer i at sector j relative to the reference signal.

    Power control pins every mobile's local-mean received power at its own
    server to the reference's, so only beam gains, the spectral factor and
    the propagation ratio between the two links remain.
    """
    omega = _interference_ratios(realization, np.array([int(i)]), sector_j, prop, bp, hc)
    return float(omega[0])


def _interference_ratios(
    realization: NetworkRealization,
    idx: np.ndarray,
    sector_j: int,
    prop: PropagationParams,
    bp: BeamParams,
    hc: HoppingConfig,
) -> np.ndarray:
    topo = realization.topo
    x = realization.mobiles[idx]
    s_j = topo.sector_position(sector_j)
    to_j = s_j - x
    d_j = np.hypot(to_j[:, 0], to_j[:, 1])
    g_ids = realization.serving[idx]
    s_g = topo.sector_position(g_ids)
    to_g = s_g - x
    d_g = np.hypot(to_g[:, 0], to_g[:, 1])

    cos_half = math.cos(bp.mobile_beamwidth / 2)
    dot = (to_j * to_g).sum(axis=1) / (d_j * d_g)
    b_ij = np.where(dot > cos_half, 1.0, bp.mobile_sidelobe)

    arrival = np.arctan2(-to_j[:, 1], -to_j[:, 0]) % TWO_PI  # bearing S_j -> X_i
    beam = np.where(
        realization.topo.sector_beam_covers(sector_j, arrival), 1.0, bp.sector_sidelobe
    )

    f_spec = spectral_factor(hc.block, hc.block)

    xi_j = realization.shadow_db_many(idx, sector_j)
    xi_g = realization.shadow_db_serving(idx)
    shadow = 10.0 ** ((xi_j - xi_g) / 10.0)

    return b_ij * f_spec * beam * shadow * path_loss(d_j, prop) / path_loss(d_g, prop)


def snr_gamma0(snr_db: float, xi_db: float, d_r: float, prop: PropagationParams) -> float:
    """No-fading SNR of the reference link at the sector receiver, linear."""
    return 10.0 ** ((snr_db + xi_db) / 10.0) * float(path_loss(d_r, prop))


def build_profile(
    realization: NetworkRealization,
    ref: ReferenceLink,
    radio: RadioConfig,
    rng: np.random.Generator,
    *,
    rayleigh: bool = False,
) -> InterferenceProfile:
    """Assemble the interference profile seen by one reference uplink.

    Interferers are the sector-capped random selection, ranked by omega
    and truncated to the strongest max_interferers; each survivor expands
    into its four subframe-period terms, with zero-weight terms dropped.
    rayleigh=True pins every fading parameter at 1.
    """
    prop = realization.prop
    hc = radio.hopping
    gamma0 = snr_gamma0(radio.snr_db, ref.xi_db, ref.distance, prop)
    m0 = 1 if rayleigh else reference_m0(ref.distance, prop, mode=radio.m0_mode)

    idx = select_interferers(realization, ref.sector_id, hc, rng)
    if idx.size == 0:
        return InterferenceProfile(gamma0, m0)
    if not np.all(realization.serving[idx] > 0):
        raise ValueError("inactive mobile selected as interferer")

    omega = _interference_ratios(realization, idx, ref.sector_id, prop, radio.beam, hc)
    order = np.argsort(-omega, kind="stable")[: radio.max_interferers]
    idx, omega = idx[order], omega[order]

    s_j = realization.topo.sector_position(ref.sector_id)
    d_j = np.hypot(*(s_j - realization.mobiles[idx]).T)
    m_i = np.ones_like(d_j) if rayleigh else np.asarray(nakagami_m(d_j, prop), dtype=float)
    n_g = realization.loads[realization.serving[idx] - 1]
    q = np.array(
        [collision_probability(n, hc.block, hc.block, hc.channels, hc.activity) for n in n_g]
    )
    t = ((ref.distance - d_j) / hc.speed_km_s) % hc.slot_s
    t[t == hc.slot_s] = 0.0
    c_odd = t / (2 * hc.slot_s)
    c_even = 0.5 - c_odd

    terms = []
    for k in range(idx.size):
        for c in (c_odd[k], c_even[k], c_odd[k], c_even[k]):
            if q[k] * c * omega[k] > 0.0:
                terms.append(InterfererPeriodTerm(float(omega[k]), float(q[k]), float(c), float(m_i[k])))
    return InterferenceProfile(gamma0, m0, tuple(terms))
