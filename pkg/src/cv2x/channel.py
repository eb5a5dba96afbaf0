"""Propagation constants, shadowing moments and received power.

All quantities are SI and linear: meters, watts, per-meter and
per-square-meter densities. Conversions from human units live here and are
applied once, by the config parser.
"""

from dataclasses import dataclass, fields, replace
import math

import numpy as np

from .errors import DomainError, ParameterError

LN10_OVER_10 = math.log(10.0) / 10.0


def db_to_linear(db):
    if np.ndim(db):
        return 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    return 10.0 ** (float(db) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return db_to_linear(dbm) / 1000.0


def watts_to_dbm(w):
    return linear_to_db(w * 1000.0)


@dataclass(frozen=True)
class NetworkParams:
    """Model constants in SI units.

    Densities: ``mu_l`` (road length per unit area, 1/m), ``lambda_1``
    (1/m^2), ``lambda_2`` and ``lambda_r`` (1/m). Shadowing means and
    deviations are in dB; everything else is linear.
    """

    mu_l: float
    lambda_1: float
    lambda_2: float
    lambda_r: float = 0.0
    alpha: float = 4.0
    P1: float = 10.0
    P2: float = 0.2
    G1: float = 1.0
    g1: float = 0.01
    G2: float = 1.0
    g2: float = 0.01
    q_c: float = 0.05
    B1: float = 1.0
    B2: float = 1.0
    m1: int = 1
    m20: int = 1
    m21: int = 1
    omega_1: float = 0.0
    omega_20: float = 0.0
    omega_21: float = 0.0
    sigma_1: float = 0.0
    sigma_20: float = 0.0
    sigma_21: float = 0.0
    W: float = 10e6

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v!r}")
        if not self.alpha > 2:
            raise ParameterError(f"path-loss exponent must satisfy alpha > 2, got {self.alpha}")
        for name in ("mu_l", "lambda_1", "lambda_2", "lambda_r"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        for name in ("P1", "P2", "G1", "g1", "G2", "g2", "B1", "B2", "W"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        for name in ("m1", "m20", "m21"):
            m = getattr(self, name)
            if int(m) != m or m < 1:
                raise ParameterError(f"{name} must be an integer >= 1, got {m!r}")
            object.__setattr__(self, name, int(m))
        for name in ("sigma_1", "sigma_20", "sigma_21"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if not 0.0 <= self.q_c <= 1.0:
            raise ParameterError(f"q_c must lie in [0, 1], got {self.q_c}")

    @property
    def lambda_l(self):
        """Intensity of the line-generating PPP on the representation space."""
        return self.mu_l / math.pi

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class EquivalentDensities:
    """Shadowing-absorbed densities plus the association constants."""

    lambda1_e: float
    lambda2_e: float
    lambda2_a: float
    zeta21: float
    alpha: float

    @property
    def k(self):
        """Ratio zeta21^(-1/alpha): tier-1 exclusion radius per unit tier-2 distance."""
        return self.zeta21 ** (-1.0 / self.alpha)


def lognormal_neg_moment(omega, sigma, c):
    """E[X^-c] for 10 log10 X ~ N(omega, sigma^2)."""
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    if not c > 0:
        raise ParameterError("moment order c must be > 0")
    a = c * LN10_OVER_10
    return math.exp(-a * omega + 0.5 * (a * sigma) ** 2)


def equivalent_densities(p):
    a = p.alpha
    lam1e = lognormal_neg_moment(p.omega_1, p.sigma_1, 2.0 / a) * p.lambda_1
    lam2e = lognormal_neg_moment(p.omega_20, p.sigma_20, 1.0 / a) * p.lambda_2
    lam2a = lognormal_neg_moment(p.omega_21, p.sigma_21, 2.0 / a) * math.pi * p.lambda_l * p.lambda_2
    zeta = (p.P2 * p.B2 * p.G2) / (p.P1 * p.B1 * p.G1)
    return EquivalentDensities(lam1e, lam2e, lam2a, zeta, a)


def sample_nakagami_power_gain(m, rng, size=None):
    """Nakagami-m power gain: Gamma(shape m, rate m), unit mean."""
    if int(m) != m or m < 1:
        raise ParameterError(f"Nakagami m must be an integer >= 1, got {m!r}")
    return rng.gamma(m, 1.0 / m, size)


def sample_shadowing(omega, sigma, rng, size=None):
    """Log-normal shadowing gains with 10 log10 X ~ N(omega, sigma^2)."""
    if sigma == 0:
        return np.full(size, 10.0 ** (omega / 10.0)) if size is not None else 10.0 ** (omega / 10.0)
    return 10.0 ** ((omega + sigma * rng.standard_normal(size)) / 10.0)


def received_power(position, tier, on_typical_line, p, main_lobe=True, fading=1.0, shadow=1.0):
    """Received power at the origin from a node at ``position``.

    Tier-1 nodes use G1 (main lobe) or g1; tier-2 nodes on the typical line
    use G2 and every other tier-2 node the side-lobe gain g2. Arguments
    broadcast, so whole node arrays can be evaluated at once.
    """
    position = np.asarray(position, dtype=float)
    dist = np.hypot(position[..., 0], position[..., 1])
    if np.any(dist == 0):
        raise DomainError("received power is undefined at zero distance")
    tier = np.asarray(tier)
    on_l0 = np.asarray(on_typical_line, dtype=bool)
    main = np.asarray(main_lobe, dtype=bool)
    pg = np.where(tier == 1,
                  p.P1 * np.where(main, p.G1, p.g1),
                  p.P2 * np.where(on_l0, p.G2, p.g2))
    out = pg * fading * shadow * dist ** (-p.alpha)
    return out if out.ndim else float(out)
