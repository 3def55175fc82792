"""Distance-dependent millimeter-wave propagation models.

Distances are in km, shadowing in dB, path gains are linear power ratios.
The three models share one transition profile tanh(mu*d): the attenuation
exponent and the shadowing deviation grow with link distance (short links
tend to be line-of-sight, long ones not), while the fading shape parameter
shrinks toward the Rayleigh value of 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PropagationParams:
    """Distance-model parameter bundle.

    Defaults are the urban millimeter-wave set used by the bundled
    experiment configuration.
    """

    alpha_min: float = 2.3
    alpha_max: float = 4.7
    sigma_min_db: float = 6.1
    sigma_max_db: float = 12.6
    m_min: float = 1.0
    m_max: float = 2.0
    mu_per_km: float = 40.0
    d0_km: float = 0.004

    def __post_init__(self) -> None:
        if self.alpha_min > self.alpha_max:
            raise ValueError("alpha_min must not exceed alpha_max")
        if self.sigma_min_db > self.sigma_max_db:
            raise ValueError("sigma_min_db must not exceed sigma_max_db")
        if not (0.5 <= self.m_min <= self.m_max):
            raise ValueError("need 0.5 <= m_min <= m_max")
        if self.mu_per_km <= 0:
            raise ValueError("mu_per_km must be positive")
        if self.d0_km <= 0:
            raise ValueError("d0_km must be positive")


def _check_nonnegative(d: ArrayLike) -> None:
    if np.any(np.asarray(d) < 0):
        raise ValueError("distance must be nonnegative")


def alpha(d: ArrayLike, p: PropagationParams) -> ArrayLike:
    """Attenuation power-law exponent at link distance d (km).

    Rises from alpha_min at d=0 toward (but never reaching) alpha_max.
    """
    _check_nonnegative(d)
    return p.alpha_min + (p.alpha_max - p.alpha_min) * np.tanh(p.mu_per_km * np.asarray(d, dtype=float))


def shadow_sigma(d: ArrayLike, p: PropagationParams) -> ArrayLike:
    """Shadowing standard deviation in dB at link distance d (km)."""
    _check_nonnegative(d)
    return p.sigma_min_db + (p.sigma_max_db - p.sigma_min_db) * np.tanh(
        p.mu_per_km * np.asarray(d, dtype=float)
    )


def nakagami_m(d: ArrayLike, p: PropagationParams) -> ArrayLike:
    """Fading shape parameter at link distance d (km); decreasing, > m_min."""
    _check_nonnegative(d)
    return p.m_max - (p.m_max - p.m_min) * np.tanh(p.mu_per_km * np.asarray(d, dtype=float))


def path_loss(d: ArrayLike, p: PropagationParams, clamp: bool = True) -> ArrayLike:
    """Area-mean path gain (d/d0)^(-alpha(d)), defined for d >= d0.

    Distances below d0 are clamped to d0 (unit gain) unless clamp=False,
    in which case they raise.  Exclusion zones keep sub-d0 links rare; the
    clamp avoids gains above 1.
    """
    _check_nonnegative(d)
    d = np.asarray(d, dtype=float)
    if clamp:
        d = np.maximum(d, p.d0_km)
    elif np.any(d < p.d0_km):
        raise ValueError(f"path loss undefined below the reference distance {p.d0_km} km")
    return (d / p.d0_km) ** (-alpha(d, p))


def sample_shadow(d: ArrayLike, p: PropagationParams, rng: np.random.Generator) -> ArrayLike:
    """Draw shadowing factor(s) in dB: zero-mean Gaussian with sigma_s(d)."""
    return rng.normal(0.0, shadow_sigma(d, p))


def reference_m0(d_r: float, p: PropagationParams, mode: str = "floor") -> int:
    """Integer fading parameter of the reference link, at least 1.

    mode="floor" truncates m(d_r); mode="round" rounds half up.  Both are
    exposed because the two conventions disagree for short links (e.g.
    m(0.01 km) ~= 1.62 with the default parameters).
    """
    m = float(nakagami_m(d_r, p))
    if mode == "floor":
        k = math.floor(m)
    elif mode == "round":
        k = math.floor(m + 0.5)
    else:
        raise ValueError(f"unknown m0 mode: {mode!r}")
    return max(1, k)
