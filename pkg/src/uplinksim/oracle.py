"""Brute-force Monte Carlo estimator of the outage probability.

Samples the subframe-average SINR directly from its definition: gamma
fading on every link, Bernoulli collision indicators per (interferer,
period) term.  This is the independent check on the closed form in
`outage`; it shares nothing with that evaluation beyond the profile
abstraction itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .outage import outage_probability
from .radio import InterfererPeriodTerm, InterferenceProfile


@dataclass(frozen=True)
class OracleEstimate:
    probability: float
    stderr: float
    draws: int


def draw_sinr(
    profile: InterferenceProfile,
    rng: np.random.Generator,
    n: int,
    hopping: bool = True,
) -> np.ndarray:
    """n independent samples of the subframe-average SINR.

    Reference gain: mean of two unit-mean gamma(m0) slot gains (hopping)
    or a single gamma(m0) draw (constant fading over the subframe).  Each
    term contributes Bernoulli(q) * omega * C * gamma(m, mean 1),
    independent across terms and draws.
    """
    m0 = profile.m0
    if hopping:
        gbar = 0.5 * (rng.gamma(m0, 1.0 / m0, n) + rng.gamma(m0, 1.0 / m0, n))
    else:
        gbar = rng.gamma(m0, 1.0 / m0, n)
    denom = np.full(n, 1.0 / profile.gamma0)
    omega, q, c_frac, m = profile.term_arrays()
    for k in range(len(omega)):
        hit = rng.random(n) < q[k]
        denom += hit * (omega[k] * c_frac[k]) * rng.gamma(m[k], 1.0 / m[k], n)
    with np.errstate(divide="ignore"):
        return gbar / denom


def estimate_outage(
    profile: InterferenceProfile,
    beta: float,
    draws: int,
    rng: np.random.Generator,
    hopping: bool = True,
    chunk: int = 1 << 18,
) -> OracleEstimate:
    """Fraction of SINR samples at or below beta, with its standard error."""
    if draws < 1000:
        raise ValueError("need at least 1000 draws for a meaningful estimate")
    count = 0
    left = draws
    while left > 0:
        n = min(chunk, left)
        count += int(np.count_nonzero(draw_sinr(profile, rng, n, hopping=hopping) <= beta))
        left -= n
    p = count / draws
    return OracleEstimate(p, math.sqrt(p * (1.0 - p) / draws), draws)


def random_validation_case(rng: np.random.Generator):
    """One randomized (profile, beta) pair for closed-form validation.

    1-5 interferers, each with four subframe-period terms from a random
    timing offset; m0 in {1, 2}; beta log-uniform in [0.25, 8]; omega
    log-uniform in [1e-3, 10]; interferer m in [0.5, 2.5]; z in [1e-4, 1].
    z is drawn through the noise exponent beta0*z (log-uniform in
    [0.05, 3]) so the outage stays resolvable at reasonable draw counts
    instead of saturating at 0 or 1, where a finite oracle carries no
    information.
    """
    n_interferers = int(rng.integers(1, 6))
    m0 = int(rng.integers(1, 3))
    beta = 10.0 ** rng.uniform(math.log10(0.25), math.log10(8.0))
    x0 = 10.0 ** rng.uniform(math.log10(0.05), math.log10(3.0))
    z = min(max(x0 / (2 * m0 * beta), 1e-4), 1.0)
    terms = []
    for _ in range(n_interferers):
        omega = 10.0 ** rng.uniform(-3.0, 1.0)
        q = rng.uniform(0.0, 1.0)
        m = rng.uniform(0.5, 2.5)
        frac = rng.uniform(0.0, 1.0)  # timing offset over the slot
        c_odd, c_even = frac / 2.0, (1.0 - frac) / 2.0
        for c in (c_odd, c_even, c_odd, c_even):
            if c > 0.0:
                terms.append(InterfererPeriodTerm(omega, q, c, m))
    return InterferenceProfile(1.0 / z, m0, tuple(terms)), beta


@dataclass(frozen=True)
class ValidationCase:
    closed_form: float
    estimate: OracleEstimate
    n_interferers: int
    ok: bool  # within 4 standard errors


def run_validation(
    cases: int,
    draws: int,
    rng: np.random.Generator,
    hopping: bool = True,
) -> list[ValidationCase]:
    """Closed form vs oracle on randomized profiles at the 4-sigma gate."""
    results = []
    for _ in range(cases):
        profile, beta = random_validation_case(rng)
        eps = outage_probability(profile, beta, hopping=hopping)
        est = estimate_outage(profile, beta, draws, rng, hopping=hopping)
        ok = abs(eps - est.probability) <= 4.0 * est.stderr
        results.append(ValidationCase(eps, est, len(profile.terms) // 4, ok))
    return results
