"""Exact conditional outage probability of one reference uplink.

The subframe-average SINR is gbar / (z + sum I*omega*g*C) with gbar the
reference fading gain averaged over the two hop slots and z the inverse
no-fading SNR.  Conditioned on the network realization, the outage
probability P[SINR <= beta] has a closed form: an Erlang-style series in
beta0*z whose interference content enters through coefficients H_t,
themselves sums over all ways of spreading t "moments" across the
(interferer, period) terms.

With frequency hopping the reference gain is the mean of two independent
unit-mean gamma variables of shape m0, i.e. a single gamma of shape 2*m0;
without hopping (constant fading over the subframe) it is one gamma of
shape m0.  Both cases are the same series with effective integer shape n0
and beta0 = n0 * beta.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

from .radio import InterfererPeriodTerm, InterferenceProfile

# Round-off outside [0, 1] up to this much is clamped; more is a bug.
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class OutageInputs:
    """Threshold plus profile, with the derived closed-form quantities."""

    beta: float  # linear SINR threshold
    profile: InterferenceProfile
    hopping: bool = True

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("SINR threshold must be positive")

    @property
    def n0(self) -> int:
        """Effective integer shape of the reference fading gain."""
        return 2 * self.profile.m0 if self.hopping else self.profile.m0

    @property
    def beta0(self) -> float:
        return self.n0 * self.beta

    @property
    def z(self) -> float:
        return 1.0 / self.profile.gamma0


def psi(beta0: float, omega: float, c_frac: float, m: float) -> float:
    """Kernel (beta0*omega*C/m + 1)^-1 of the per-term coefficients."""
    if m <= 0:
        raise ValueError("fading parameter must be positive")
    if omega < 0 or c_frac < 0:
        raise ValueError("omega and C must be nonnegative")
    return 1.0 / (beta0 * omega * c_frac / m + 1.0)


def g_coeff(ell: int, q: float, omega: float, c_frac: float, m: float, beta0: float) -> float:
    """Coefficient G_ell of one (interferer, period) term.

    ell = 0 is the no-collision-or-survived mass 1 - q*(1 - Psi^m); higher
    orders carry Gamma(ell+m) / (ell! Gamma(m)) evaluated by the product
    recurrence, never by large gamma calls.
    """
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if not 0 <= q <= 1:
        raise ValueError("collision probability must lie in [0, 1]")
    ps = psi(beta0, omega, c_frac, m)
    if ell == 0:
        return 1.0 - q * (1.0 - ps**m)
    ratio = 1.0
    for n in range(1, ell + 1):
        ratio *= (m + n - 1) / n
    return q * ratio * (omega * c_frac / m) ** ell * ps ** (m + ell)


TermsLike = Union[InterferenceProfile, Sequence[InterfererPeriodTerm]]


def _term_tuples(terms: TermsLike):
    if isinstance(terms, InterferenceProfile):
        return [(t.q, t.omega, t.c_frac, t.m) for t in terms.terms]
    return [(t.q, t.omega, t.c_frac, t.m) for t in terms]


def _weighted_h(terms: TermsLike, beta0: float, t_max: int) -> list[float]:
    """[beta0^t * H_t for t = 0..t_max] by truncated sequence convolution.

    Folding beta0 into the per-term coefficients keeps every factor
    bounded (x*Psi < 1), so the fold is stable for any beta0.
    """
    acc = [0.0] * (t_max + 1)
    acc[0] = 1.0
    for q, omega, c_frac, m in _term_tuples(terms):
        x = beta0 * omega * c_frac / m
        ps = 1.0 / (x + 1.0)
        g = [1.0 - q * (1.0 - ps**m)]
        if t_max:
            xps = x * ps
            coef = q * m * xps * ps**m
            g.append(coef)
            for ell in range(1, t_max):
                coef *= (m + ell) / (ell + 1) * xps
                g.append(coef)
        acc = [
            math.fsum(acc[t - ell] * g[ell] for ell in range(t + 1))
            for t in range(t_max + 1)
        ]
    return acc


def h_poly(t: int, terms: TermsLike, beta0: float) -> float:
    """Interference coefficient H_t: the sum over all nonnegative index
    assignments (one per term) totalling t of the product of G coefficients.

    Computed as a degree-t truncated convolution of the per-term G
    sequences, identical to the explicit multi-index sum.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    acc = [0.0] * (t + 1)
    acc[0] = 1.0
    for q, omega, c_frac, m in _term_tuples(terms):
        g = [g_coeff(ell, q, omega, c_frac, m, beta0) for ell in range(t + 1)]
        acc = [
            math.fsum(acc[s - ell] * g[ell] for ell in range(s + 1))
            for s in range(t + 1)
        ]
    return acc[t]


def conditional_outage(inputs: OutageInputs) -> float:
    """Outage probability of the reference uplink given its profile.

    Evaluates 1 - exp(-beta0*z) * sum_{s<n0} (beta0*z)^s * sum_{t<=s}
    z^(-t)/(s-t)! * H_t with the powers grouped as beta0^t*H_t times
    partial Poisson sums, so z = 0 (no noise) is exact and nothing
    divides by z.
    """
    m0 = inputs.profile.m0
    if m0 < 1 or int(m0) != m0:
        raise ValueError("reference fading parameter must be a positive integer")
    n0 = inputs.n0
    beta0 = inputs.beta0
    z = inputs.z
    weighted = _weighted_h(inputs.profile, beta0, n0 - 1)

    # partial Poisson masses p_u = exp(-x) x^u / u!
    x = beta0 * z
    pois = [math.exp(-x)]
    for u in range(1, n0):
        pois.append(pois[-1] * x / u)
    tails = list(itertools.accumulate(pois))  # tails[k] = sum_{u<=k}

    eps = 1.0 - math.fsum(weighted[t] * tails[n0 - 1 - t] for t in range(n0))
    if eps < 0.0:
        if eps < -CLAMP_TOL:
            raise FloatingPointError(f"outage evaluated to {eps}, below 0 beyond round-off")
        return 0.0
    if eps > 1.0:
        if eps > 1.0 + CLAMP_TOL:
            raise FloatingPointError(f"outage evaluated to {eps}, above 1 beyond round-off")
        return 1.0
    return eps


def outage_probability(profile: InterferenceProfile, beta: float, hopping: bool = True) -> float:
    """Convenience wrapper around conditional_outage."""
    return conditional_outage(OutageInputs(beta=beta, profile=profile, hopping=hopping))


def code_rate(beta: float, shannon_loss: float = 0.794) -> float:
    """Code rate supported at threshold beta: log2(1 + l_s * beta), bpcu."""
    if beta <= 0 or shannon_loss <= 0:
        raise ValueError("threshold and loss factor must be positive")
    return math.log2(1.0 + shannon_loss * beta)


def beta_for_rate(rate: float, shannon_loss: float = 0.794) -> float:
    """Inverse of code_rate: the SINR threshold needed for a given rate."""
    if rate <= 0 or shannon_loss <= 0:
        raise ValueError("rate and loss factor must be positive")
    return (2.0**rate - 1.0) / shannon_loss
