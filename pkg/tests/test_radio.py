import math

import numpy as np
import pytest

from uplinksim import (
    BeamParams,
    HoppingConfig,
    NetworkRealization,
    NetworkTopology,
    PropagationParams,
    RadioConfig,
    Rect,
    ReferenceLink,
    associate,
    build_profile,
    collision_probability,
    fractional_durations,
    interference_ratio,
    mobile_beam_gain,
    path_loss,
    sector_beam_gain,
    select_interferers,
    snr_gamma0,
    spectral_factor,
    timing_offset,
)
from uplinksim.outage import outage_probability
from uplinksim.topology import BaseStation, build_sectors

P = PropagationParams()
BP = BeamParams()  # zeta=24, b=0.01, Theta=0.1*pi, a=0.1
HC = HoppingConfig()  # L=100, block=10, T=0.5 ms


def make_realization(positions, mobiles, zeta=1, region=None, shadowing=False, seed=0):
    stations = [BaseStation(i + 1, np.array(p, dtype=float)) for i, p in enumerate(positions)]
    region = region or Rect(-100, -100, 100, 100)
    topo = NetworkTopology.from_stations(stations, zeta, region, region)
    rng = np.random.default_rng(seed)
    mobiles = np.asarray(mobiles, dtype=float)
    assoc = associate(mobiles, topo, P, rng, shadowing=shadowing)
    loads = np.bincount(assoc.serving - 1, minlength=topo.n_sectors)
    return NetworkRealization(topo, P, mobiles, assoc, assoc.serving, loads, shadowing, rng)


# --- beam gains --------------------------------------------------------------


def test_sector_beam_gain():
    secs = build_sectors([BaseStation(1, np.zeros(2))], 24)
    s = secs[3]
    assert sector_beam_gain(s, s.offset, BP) == 1.0  # interval start included
    assert sector_beam_gain(s, s.offset + s.width + 0.01, BP) == 0.01
    full = build_sectors([BaseStation(1, np.zeros(2))], 1)[0]
    for theta in np.linspace(0, 2 * math.pi, 17, endpoint=False):
        assert sector_beam_gain(full, theta, BeamParams(zeta=1)) == 1.0


def test_mobile_beam_gain():
    x = np.zeros(2)
    serving = np.array([10.0, 0.0])
    assert mobile_beam_gain(x, serving, serving, BP) == 1.0  # aimed exactly at it
    behind = np.array([-10.0, 0.0])
    assert mobile_beam_gain(x, behind, serving, BP) == 0.1  # pi separation
    # separation exactly Theta/2 falls outside the strict mainlobe test
    wide = BeamParams(mobile_beamwidth=math.pi)
    orthogonal = np.array([0.0, 5.0])
    assert mobile_beam_gain(x, orthogonal, serving, wide) == wide.mobile_sidelobe
    with pytest.raises(ValueError):
        mobile_beam_gain(x, x, serving, BP)


def test_spectral_factor():
    assert spectral_factor(10, 10) == 1.0
    assert spectral_factor(10, 20) == 0.5  # L/10 against L/5 blocks
    assert spectral_factor(20, 10) == 1.0  # capped
    with pytest.raises(ValueError):
        spectral_factor(0, 10)


# --- hop timing ---------------------------------------------------------------


def test_timing_offset_examples():
    hc = HoppingConfig(speed_km_s=3e5)
    s = np.zeros(2)
    assert timing_offset(s, np.array([1.0, 0.0]), np.array([1.0, 0.0]), hc) == 0.0
    t = timing_offset(s, np.array([80.0, 0.0]), np.array([5.0, 0.0]), hc)
    assert t == pytest.approx(250e-6)  # +75 km difference
    t = timing_offset(s, np.array([5.0, 0.0]), np.array([35.0, 0.0]), hc)
    assert t == pytest.approx(400e-6)  # -30 km wraps to T - 100 us
    assert 0.0 <= t < hc.slot_s


def test_fractional_durations():
    assert fractional_durations(0.0, 0.5e-3) == (0.0, 0.5, 0.0, 0.5)
    assert fractional_durations(0.25e-3, 0.5e-3) == (0.25, 0.25, 0.25, 0.25)
    c = fractional_durations(0.2e-3, 0.5e-3)
    assert c == pytest.approx((0.2, 0.3, 0.2, 0.3))
    assert sum(c) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fractional_durations(0.5e-3, 0.5e-3)


def test_collision_probability():
    assert collision_probability(10, 10, 10, 100, 1.0) == 1.0  # full sector
    assert collision_probability(1, 10, 10, 100, 1.0) == pytest.approx(0.1)
    assert collision_probability(3, 10, 10, 100, 1.0) == pytest.approx(0.3)
    assert collision_probability(3, 10, 10, 100, 0.5) == pytest.approx(0.15)
    with pytest.raises(RuntimeError):
        collision_probability(11, 10, 10, 100, 1.0)


# --- interferer selection ------------------------------------------------------


def test_select_interferers_excludes_reference_sector():
    # five mobiles on station 1, three on station 2; reference sector is 2
    mobiles = [[-5 + 0.1 * i, 0.2] for i in range(5)] + [[5 + 0.1 * i, 0.2] for i in range(3)]
    real = make_realization([(-5, 0), (5, 0)], mobiles)
    assert np.array_equal(np.sort(np.unique(real.serving)), [1, 2])
    rng = np.random.default_rng(1)
    chosen = select_interferers(real, 2, HC, rng)
    assert np.all(real.serving[chosen] == 1)
    assert chosen.size == 1  # cap max(L_j/L_l, 1) = 1 per sector


def test_select_interferers_uniform_choice():
    mobiles = [[-5 + 0.1 * i, 0.2] for i in range(5)] + [[5.0, 0.2]]
    real = make_realization([(-5, 0), (5, 0)], mobiles)
    rng = np.random.default_rng(2)
    counts = np.zeros(5)
    n = 10**5
    for _ in range(n):
        counts[select_interferers(real, 2, HC, rng)[0]] += 1
    freq = counts / n
    tol = 3 * math.sqrt(0.2 * 0.8 / n)
    assert np.all(np.abs(freq - 0.2) <= tol)


def test_select_interferers_cap_two():
    mobiles = [[-5 + 0.1 * i, 0.2] for i in range(5)] + [[5.0, 0.2]]
    real = make_realization([(-5, 0), (5, 0)], mobiles)
    rng = np.random.default_rng(3)
    chosen = select_interferers(real, 2, HC, rng, cap=2)
    assert chosen.size == 2 and np.all(real.serving[chosen] == 1)
    small = select_interferers(real, 1, HC, rng, cap=2)
    assert np.array_equal(small, [5])  # below the cap: everyone included


# --- interference ratio ---------------------------------------------------------


def test_interference_ratio_symmetry():
    # interferer equidistant from both stations, aimed nearly at both,
    # no shadowing, arrival in the reference sector's mainlobe
    real = make_realization([(0, 0), (2, 0)], [[1.0, 20.0]], zeta=24)
    assert real.serving[0] == real.assoc.cover_column(0)[0]  # served by station 1
    j = int(real.assoc.cover_column(1)[0])  # station 2's covering sector
    assert interference_ratio(0, real, j, P, BP, HC) == pytest.approx(1.0, rel=1e-12)


def test_interference_ratio_sector_sidelobe():
    real = make_realization([(0, 0), (2, 0)], [[1.0, 20.0]], zeta=24)
    j_cover = int(real.assoc.cover_column(1)[0])
    j_other = 24 + (j_cover - 24 + 12 - 1) % 24 + 1  # opposite wedge of station 2
    omega = interference_ratio(0, real, j_other, P, BP, HC)
    assert omega == pytest.approx(BP.sector_sidelobe, rel=1e-12)


def test_interference_ratio_path_loss_oracle():
    # station behind the serving one: both beams aligned, distances 2:1
    real = make_realization([(0, 0), (-0.01, 0)], [[0.01, 0.0]], zeta=1)
    assert real.serving[0] == 1
    omega = interference_ratio(0, real, 2, P, BP, HC)
    expected = float(path_loss(0.02, P) / path_loss(0.01, P))
    assert omega == pytest.approx(expected, rel=1e-12)


def test_snr_gamma0():
    assert snr_gamma0(30.0, 0.0, P.d0_km, P) == pytest.approx(1000.0)
    assert snr_gamma0(30.0, 0.0, 0.01, P) == pytest.approx(1000 * float(path_loss(0.01, P)))
    base = snr_gamma0(30.0, 0.0, 0.01, P)
    assert snr_gamma0(30.0, 10.0, 0.01, P) == pytest.approx(10 * base)


# --- profile assembly ------------------------------------------------------------


def ref_link(real, sector_id, distance, xi=0.0):
    pos = real.topo.sector_position(sector_id) + np.array([distance, 0.0])
    return ReferenceLink(position=pos, sector_id=sector_id, distance=distance, xi_db=xi)


def test_build_profile_no_interferers():
    real = make_realization([(0, 0)], np.empty((0, 2)), zeta=4)
    radio = RadioConfig()
    profile = build_profile(real, ref_link(real, 1, 0.05), radio, np.random.default_rng(0))
    assert profile.terms == ()
    assert profile.gamma0 == pytest.approx(snr_gamma0(30, 0, 0.05, P))
    assert profile.m0 == 1


def test_build_profile_single_interferer_periods():
    real = make_realization([(0, 0), (1, 0)], [[1.1, 0.0]])
    radio = RadioConfig()
    profile = build_profile(real, ref_link(real, 1, 0.05), radio, np.random.default_rng(0))
    assert len(profile.terms) == 4
    om, q, c, m = profile.term_arrays()
    assert np.ptp(om) == 0 and np.ptp(q) == 0 and np.ptp(m) == 0
    assert np.sum(c) == pytest.approx(1.0)


def test_build_profile_equidistant_interferer_drops_zero_periods():
    # interferer exactly at the reference distance: t = 0, two periods vanish
    real = make_realization([(0, 0), (0.08, 0)], [[0.05, 0.0]])
    assert real.serving[0] == 2
    radio = RadioConfig()
    ref = ReferenceLink(
        position=np.array([0.0, 0.05]), sector_id=1, distance=0.05, xi_db=0.0
    )
    profile = build_profile(real, ref, radio, np.random.default_rng(0))
    assert len(profile.terms) == 2
    assert profile.term_arrays()[2] == pytest.approx([0.5, 0.5])


def test_build_profile_truncates_to_strongest():
    rng = np.random.default_rng(9)
    n = 41
    positions = [(3.0 * i, 0.0) for i in range(n)]
    mobiles = [[3.0 * i + 0.02 + 0.001 * i, 0.01] for i in range(1, n)]
    real = make_realization(positions, mobiles, zeta=1)
    assert np.array_equal(np.sort(np.unique(real.serving)), np.arange(2, n + 1))
    radio = RadioConfig(max_interferers=30)
    profile = build_profile(real, ref_link(real, 1, 0.05), radio, rng)
    kept = np.unique(profile.term_arrays()[0])
    assert len(kept) == 30 and len(profile.terms) == 120
    all_omega = np.sort(
        [interference_ratio(i, real, 1, P, BP, HC) for i in range(n - 1)]
    )
    assert kept.min() >= all_omega[-30]  # dropped ones were the weakest


def test_truncation_monotonicity():
    rng = np.random.default_rng(9)
    n = 41
    positions = [(3.0 * i, 0.0) for i in range(n)]
    mobiles = [[3.0 * i + 0.02 + 0.001 * i, 0.01] for i in range(1, n)]
    real = make_realization(positions, mobiles, zeta=1)
    ref = ref_link(real, 1, 0.05)
    p30 = build_profile(real, ref, RadioConfig(max_interferers=30), np.random.default_rng(4))
    p40 = build_profile(real, ref, RadioConfig(max_interferers=40), np.random.default_rng(4))
    for beta in (0.5, 2.0, 8.0):
        assert outage_probability(p30, beta) <= outage_probability(p40, beta) + 1e-15


def test_hopping_config_validation():
    with pytest.raises(ValueError):
        HoppingConfig(channels=100, block=100)  # only one hop position
    with pytest.raises(ValueError):
        HoppingConfig(channels=100, block=7)  # block must divide the hopset
    with pytest.raises(ValueError):
        HoppingConfig(activity=1.5)
