import numpy as np
import pytest
from scipy.special import gammainc

from uplinksim import (
    InterfererPeriodTerm,
    InterferenceProfile,
    draw_sinr,
    estimate_outage,
    outage_probability,
    run_validation,
)


def test_draw_sinr_concentrates_without_fading():
    # large shape parameters pin the reference gain at its unit mean
    profile = InterferenceProfile(40.0, 50)
    rng = np.random.default_rng(1)
    g = draw_sinr(profile, rng, 10**5)
    assert np.mean(g) == pytest.approx(40.0, rel=0.02)


def test_draw_sinr_no_noise_gamma_tail():
    # z = 0, no interference: P[sinr <= beta] follows the reference gamma CDF
    profile = InterferenceProfile(np.inf, 1)
    rng = np.random.default_rng(2)
    g = draw_sinr(profile, rng, 2 * 10**5)
    assert np.all(np.isinf(g))
    hop_gain = draw_sinr(InterferenceProfile(1.0, 1), rng, 2 * 10**5)  # z=1: g/1
    frac = np.mean(hop_gain <= 0.5)
    assert frac == pytest.approx(float(gammainc(2, 2 * 0.5)), abs=0.005)


def test_draw_sinr_deterministic_limit():
    # one always-on unit interference term with steady fading: sinr -> 1/(z+1)
    term = InterfererPeriodTerm(1.0, 1.0, 1.0, 500.0)
    profile = InterferenceProfile(5.0, 200, (term,))
    rng = np.random.default_rng(3)
    g = draw_sinr(profile, rng, 10**5)
    assert np.mean(g) == pytest.approx(1.0 / (0.2 + 1.0), rel=0.02)


def test_estimate_outage_limits():
    profile = InterferenceProfile(100.0, 1)
    rng = np.random.default_rng(4)
    assert estimate_outage(profile, 1e-9, 10**4, rng).probability == 0.0
    assert estimate_outage(profile, 1e9, 10**4, rng).probability == 1.0
    est = estimate_outage(profile, 2.0, 10**5, rng)
    assert est.stderr == pytest.approx(
        np.sqrt(est.probability * (1 - est.probability) / est.draws)
    )
    with pytest.raises(ValueError):
        estimate_outage(profile, 2.0, 10, rng)


def test_estimate_matches_gamma_cdf():
    profile = InterferenceProfile(10**3, 1)
    rng = np.random.default_rng(5)
    est = estimate_outage(profile, 10**0.3, 10**7, rng)
    assert abs(est.probability - 7.941e-6) <= 4 * est.stderr


def test_hopping_flag_changes_reference_fading():
    profile = InterferenceProfile(5.0, 2)
    rng = np.random.default_rng(6)
    hop = estimate_outage(profile, 1.5, 3 * 10**5, rng, hopping=True)
    no = estimate_outage(profile, 1.5, 3 * 10**5, rng, hopping=False)
    assert hop.probability == pytest.approx(
        outage_probability(profile, 1.5, hopping=True), abs=5 * hop.stderr
    )
    assert no.probability == pytest.approx(
        outage_probability(profile, 1.5, hopping=False), abs=5 * no.stderr
    )
    assert hop.probability != no.probability


def test_validation_agreement_small():
    rng = np.random.default_rng(7)
    results = run_validation(cases=10, draws=2 * 10**5, rng=rng)
    assert sum(0 if r.ok else 1 for r in results) <= 1
    for r in results:
        assert 0.0 <= r.closed_form <= 1.0
        assert 1 <= r.n_interferers <= 5
