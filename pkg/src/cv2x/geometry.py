"""Poisson line processes, Cox processes on lines and planar PPPs in a disc.

Lines are stored in normal form: a line with parameters (rho, theta) is the
set ``rho * n + t * d`` where ``n = (cos theta, sin theta)`` is the unit
normal and ``d = (-sin theta, cos theta)`` the unit direction. ``t`` is the
along-line coordinate measured from the foot of the perpendicular.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ParameterError
from .quadrature import integrate_finite

TWO_PI = 2.0 * math.pi

# the typical line L0: through the origin, along the x-axis
TYPICAL_RHO = 0.0
TYPICAL_THETA = math.pi / 2


def _check_density(name, value):
    if not np.isfinite(value) or value < 0:
        raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class LineParam:
    rho: float
    theta: float


@dataclass(frozen=True)
class SimWindow:
    radius: float

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ParameterError(f"window radius must be > 0, got {self.radius!r}")

    @property
    def area(self):
        return math.pi * self.radius ** 2


@dataclass(frozen=True)
class LineSet:
    """Realization of a line process restricted to a window.

    When ``includes_typical_line`` is set the typical line is entry 0.
    """

    rho: np.ndarray
    theta: np.ndarray
    includes_typical_line: bool = False

    def __len__(self):
        return len(self.rho)

    def __iter__(self):
        for r, t in zip(self.rho, self.theta):
            yield LineParam(float(r), float(t))

    def normals(self):
        return np.column_stack([np.cos(self.theta), np.sin(self.theta)])

    def directions(self):
        return np.column_stack([-np.sin(self.theta), np.cos(self.theta)])

    def half_chords(self, window):
        return np.sqrt(np.clip(window.radius ** 2 - self.rho ** 2, 0.0, None))

    def with_typical_line(self):
        if self.includes_typical_line:
            return self
        return LineSet(np.concatenate([[TYPICAL_RHO], self.rho]),
                       np.concatenate([[TYPICAL_THETA], self.theta]),
                       includes_typical_line=True)


@dataclass(frozen=True)
class PointPattern:
    """Marked points. ``line_index`` is -1 for planar points; ``t`` holds
    the along-line coordinate of line points (NaN for planar points)."""

    xy: np.ndarray
    tier: np.ndarray
    line_index: np.ndarray
    t: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.xy)

    @classmethod
    def empty(cls, tier):
        return cls(np.zeros((0, 2)), np.full(0, tier, dtype=np.int8),
                   np.zeros(0, dtype=np.int64), np.zeros(0))

    def subset(self, mask):
        return PointPattern(self.xy[mask], self.tier[mask], self.line_index[mask], self.t[mask])

    def on_line(self, j):
        return self.subset(self.line_index == j)


def line_points(rho, theta, t):
    """Cartesian coordinates of along-line positions ``t`` (broadcasting)."""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([rho * c - t * s, rho * s + t * c], axis=-1)


def project_onto_line(points, rho, theta):
    """Return (along-line coordinate, distance to line) for each point."""
    points = np.atleast_2d(points)
    c, s = math.cos(theta), math.sin(theta)
    along = -points[:, 0] * s + points[:, 1] * c
    off = np.abs(points[:, 0] * c + points[:, 1] * s - rho)
    return along, off


def sample_plp(mu_l, window, rng):
    """Lines of a motion-invariant PLP (line density ``mu_l``) hitting ``window``.

    The generating PPP on the representation space has intensity
    ``mu_l / pi``; the lines hitting a disc of radius R are its points in
    [0, R) x [0, 2 pi).
    """
    _check_density("line density", mu_l)
    lam_l = mu_l / math.pi
    n = rng.poisson(lam_l * TWO_PI * window.radius)
    rho = rng.uniform(0.0, window.radius, n)
    theta = rng.uniform(0.0, TWO_PI, n)
    return LineSet(rho, theta)


def sample_points_on_lines(lines, lambda_p, window, rng):
    """Independent 1D PPPs of intensity ``lambda_p`` on every chord."""
    _check_density("point density", lambda_p)
    if len(lines) == 0 or lambda_p == 0:
        return PointPattern.empty(2)
    half = lines.half_chords(window)
    counts = rng.poisson(lambda_p * 2.0 * half)
    idx = np.repeat(np.arange(len(lines)), counts)
    h = half[idx]
    t = rng.uniform(-1.0, 1.0, idx.size) * h
    xy = line_points(lines.rho[idx], lines.theta[idx], t)
    return PointPattern(xy.reshape(-1, 2), np.full(idx.size, 2, dtype=np.int8), idx, t)


def sample_ppp_2d(lam, window, rng):
    """Homogeneous PPP of intensity ``lam`` (per unit area) on the disc."""
    _check_density("planar density", lam)
    n = rng.poisson(lam * window.area)
    r = window.radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, TWO_PI, n)
    xy = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return PointPattern(xy, np.full(n, 1, dtype=np.int8), np.full(n, -1, dtype=np.int64),
                        np.full(n, np.nan))


def void_prob_cox_disc(lambda_l, lambda_p, r, rtol=1e-9):
    """P(no Cox point in the disc b(o, r)).

    ``lambda_l`` is the representation-space intensity (mu_l / pi). Chord
    length of line (rho, .) in the disc is 2 sqrt(r^2 - rho^2); the
    substitution rho = r sin(u) removes the square-root endpoint.
    """
    for name, v in (("lambda_l", lambda_l), ("lambda_p", lambda_p), ("r", r)):
        _check_density(name, v)
    if r == 0 or lambda_p == 0 or lambda_l == 0:
        return 1.0

    def integrand(u):
        c = math.cos(u)
        return -math.expm1(-2.0 * lambda_p * r * c) * r * c

    inner = integrate_finite(integrand, 0.0, math.pi / 2, rtol=rtol, atol=0.0,
                             source="geometry.void_prob_cox_disc")
    return math.exp(-TWO_PI * lambda_l * inner)


def void_prob_ppp_disc(lambda_a, r):
    _check_density("lambda_a", lambda_a)
    _check_density("r", r)
    return math.exp(-lambda_a * math.pi * r * r)


def k_function_model(r, lambda_l):
    """K(r) = 2r/(pi lambda_l) + pi r^2 for a typical line plus a planar part."""
    if not lambda_l > 0:
        raise ParameterError("lambda_l must be > 0 for the K-function")
    r = np.asarray(r, dtype=float)
    return 2.0 * r / (math.pi * lambda_l) + math.pi * r ** 2


def k_function_palm(patterns, radii, intensity):
    """K estimate from Palm samples: mean point count within r of the origin
    (the conditioning point itself excluded) divided by the intensity.

    Returns (estimate, standard error) arrays over ``radii``.
    """
    radii = np.asarray(radii, dtype=float)
    counts = np.empty((len(patterns), radii.size))
    for i, pat in enumerate(patterns):
        d = np.hypot(pat.xy[:, 0], pat.xy[:, 1]) if len(pat) else np.zeros(0)
        d.sort()
        counts[i] = np.searchsorted(d, radii, side="right")
    est = counts.mean(axis=0) / intensity
    se = counts.std(axis=0, ddof=1) / math.sqrt(len(patterns)) / intensity
    return est, se


def chord_length_density(lines, window):
    """Total chord length of ``lines`` inside ``window`` per unit area."""
    return 2.0 * lines.half_chords(window).sum() / window.area
