"""Association, serving distance, interference Laplace transform and SIR coverage.

Everything here operates on the equivalent (shadowing-absorbed) model:
tier-1 nodes form a planar PPP of density ``lambda1_e``, tier-2 nodes on the
typical line a 1D PPP of density ``lambda2_e`` and tier-2 nodes on all other
lines are replaced by a planar PPP of density ``lambda2_a``.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
import math

import numpy as np
from scipy.special import erfcx

from .channel import EquivalentDensities, NetworkParams, equivalent_densities
from .errors import DegenerateConditioningError, ParameterError
from .quadrature import integrate_finite

SQRT_PI = math.sqrt(math.pi)
DEGENERATE_PROB = 1e-300


class Event(IntEnum):
    """Association outcome: E1 = served by tier 1, E2 = served by a tier-2 node on L0."""

    E1 = 1
    E2 = 2


def _event(event):
    return Event(int(event))


# -- association ----------------------------------------------------------

def _e2_exponents(eq):
    """(a, b) with P(R2 in dr, R1 > k r) = 2b exp(-2br - a r^2) dr."""
    return math.pi * eq.lambda1_e * eq.k ** 2, eq.lambda2_e


def association_prob(eq, which):
    """P(E1) or P(E2).

    P(E2) = b sqrt(pi/a) exp(b^2/a) erfc(b/sqrt(a)); the product
    exp(x^2) erfc(x) is evaluated as ``erfcx`` so large ratios do not overflow.
    """
    which = _event(which)
    a, b = _e2_exponents(eq)
    if b <= 0:
        p2 = 0.0
    elif a <= 0:
        p2 = 1.0
    else:
        x = b / math.sqrt(a)
        p2 = min(1.0, SQRT_PI * x * float(erfcx(x)))
    return p2 if which is Event.E2 else 1.0 - p2


def _joint_prob_checked(eq, event):
    p = association_prob(eq, event)
    if p < DEGENERATE_PROB:
        raise DegenerateConditioningError(f"P({event.name}) = {p:.3g} is too small to condition on")
    return p


# -- serving distance ------------------------------------------------------

def serving_pdf(r, eq, event):
    """Density of the (equivalent) serving distance given the association event."""
    event = _event(event)
    p = _joint_prob_checked(eq, event)
    r = np.asarray(r, dtype=float)
    lam1, lam2 = eq.lambda1_e, eq.lambda2_e
    if event is Event.E1:
        c = 2.0 * eq.zeta21 ** (1.0 / eq.alpha) * lam2
        out = 2 * math.pi * lam1 * r * np.exp(-math.pi * lam1 * r * r - c * r)
    else:
        a, b = _e2_exponents(eq)
        out = 2 * b * np.exp(-2 * b * r - a * r * r)
    out = np.where(r >= 0, out / p, 0.0)
    return out if out.ndim else float(out)


def serving_cdf(r, eq, event):
    """Closed-form CDF matching :func:`serving_pdf`."""
    event = _event(event)
    p = _joint_prob_checked(eq, event)
    r = np.maximum(np.asarray(r, dtype=float), 0.0)
    if event is Event.E1:
        A = math.pi * eq.lambda1_e
        c = 2.0 * eq.zeta21 ** (1.0 / eq.alpha) * eq.lambda2_e
        tail = np.exp(-A * r * r - c * r)
        if c == 0:
            joint = 1.0 - tail
        else:
            sa = math.sqrt(A)
            x0 = c / (2 * sa)
            gauss = SQRT_PI / (2 * sa) * (erfcx(x0) - erfcx(sa * r + x0) * tail)
            joint = 1.0 - tail - c * gauss
    else:
        a, b = _e2_exponents(eq)
        tail = np.exp(-a * r * r - 2 * b * r)
        if a == 0:
            joint = 1.0 - tail
        else:
            sa = math.sqrt(a)
            x0 = b / sa
            joint = b * SQRT_PI / sa * (erfcx(x0) - erfcx(sa * r + x0) * tail)
    out = np.clip(joint / p, 0.0, 1.0)
    return out if out.ndim else float(out)


def serving_distance_rmax(eq, event, tol):
    """Radius beyond which the conditional serving-distance tail is below ``tol``.

    Uses P(R > r, E) <= exp(-a r^2 - b r) and solves a r^2 + b r = log(1/(tol P(E))).
    """
    event = _event(event)
    p = _joint_prob_checked(eq, event)
    if event is Event.E1:
        a = math.pi * eq.lambda1_e
        b = 2.0 * eq.zeta21 ** (1.0 / eq.alpha) * eq.lambda2_e
    else:
        a, b2 = _e2_exponents(eq)
        b = 2 * b2
    L = math.log(1.0 / (tol * p))
    if a > 0:
        return (-b + math.sqrt(b * b + 4 * a * L)) / (2 * a)
    return L / b


# -- Laplace transform of the interference ----------------------------------

@dataclass(frozen=True)
class Population:
    """One interfering PPP: ``dim`` 2 (planar) or 1 (on the typical line)."""

    density: float
    dim: int
    power: float
    gain: float
    m: int
    lower: float

    @property
    def weight(self):
        return 2.0 * math.pi * self.density if self.dim == 2 else 2.0 * self.density


@dataclass(frozen=True)
class LaplaceExponentTerms:
    populations: tuple = field(default_factory=tuple)


def laplace_terms(r, eq, params, event):
    """The four interfering populations and their exclusion radii."""
    event = _event(event)
    z = eq.zeta21 ** (1.0 / eq.alpha)
    if event is Event.E1:
        low1, low20 = r, z * r
    else:
        low1, low20 = r / z, r
    p = params
    return LaplaceExponentTerms((
        Population(p.q_c * eq.lambda1_e, 2, p.P1, p.G1, p.m1, low1),
        Population((1.0 - p.q_c) * eq.lambda1_e, 2, p.P1, p.g1, p.m1, low1),
        Population(eq.lambda2_e, 1, p.P2, p.G2, p.m20, low20),
        Population(eq.lambda2_a, 2, p.P2, p.g2, p.m21, 0.0),
    ))


def _rising(m, n):
    return math.prod(range(m, m + n))


def _round_key(x):
    return float(f"{x:.13g}")


_SERIES_CUTOFF = 4.0


def _unit_integral_series(n, dim, m, alpha, b):
    # far from the origin expand in x = u^-alpha <= b^-alpha:
    # g_0 = 1 - (1+x)^-m, g_n = x^n (1+x)^-(m+n), then integrate termwise
    p = m if n == 0 else m + n
    total = 0.0
    coef = 1.0  # (-1)^j (p)_j / j!
    for j in range(0, 200):
        if j:
            coef *= -(p + j - 1) / j
        e = j if n == 0 else n + j
        if e == 0:
            continue
        c = -coef if n == 0 else coef
        term = c * b ** (dim - alpha * e) / (alpha * e - dim)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total


@lru_cache(maxsize=1 << 16)
def _unit_integral(n, dim, m, alpha, b, rtol):
    """int_b^inf g_n(u) u^(dim-1) du with v = u^alpha and

    g_0 = 1 - (v/(1+v))^m,   g_n = v^m (1+v)^-(m+n)  (n >= 1).

    For b < 1 the range is split at the knee u = 1 and the tail mapped by
    u = 1/t; b >= 1 maps directly by u = b/t, and large b uses a series.
    """
    if n == 0:
        def g(u):
            v = u ** alpha
            if v == 0.0:
                return 1.0
            return -math.expm1(-m * math.log1p(1.0 / v))
    else:
        def g(u):
            v = u ** alpha
            return math.exp(m * math.log(v) - (m + n) * math.log1p(v)) if v > 0 else 0.0

    if b >= _SERIES_CUTOFF:
        return _unit_integral_series(n, dim, m, alpha, b)
    src = "analysis.laplace_exponent"

    def tail(t, scale):
        u = scale / t
        if u > 1e80:
            return 0.0
        return g(u) * u ** (dim - 1) * scale / (t * t)

    if b >= 1:
        return integrate_finite(lambda t: tail(t, b), 0.0, 1.0, rtol=rtol, atol=0.0, source=src)
    head = integrate_finite(lambda u: g(u) * u ** (dim - 1), b, 1.0, rtol=rtol, atol=0.0, source=src)
    return head + integrate_finite(lambda t: tail(t, 1.0), 0.0, 1.0, rtol=rtol, atol=0.0, source=src)


def eta_derivatives(s, r, eq, params, event, n_max=0, rtol=1e-8):
    """[eta(s), eta'(s), ..., eta^(n_max)(s)] where L_I(s) = exp(eta(s)).

    Each population contributes -weight * J^(n)(s) with
    J(s) = int_lower^inf (1 - (1 + s c y^-alpha / m)^-m) y^(dim-1) dy.
    Rescaling y = y* u, y* = (s c / m)^(1/alpha), gives
    J^(n)(s) = -(-1)^n (m)_n s^-n y*^dim I_n(lower / y*).
    """
    if s < 0 or r < 0:
        raise ParameterError("Laplace transform needs s >= 0 and r >= 0")
    out = np.zeros(n_max + 1)
    if s == 0:
        for n in range(1, n_max + 1):
            out[n] = _eta_derivative_at_zero(n, r, eq, params, event)
        return out
    alpha = eq.alpha
    for pop in laplace_terms(r, eq, params, event).populations:
        if pop.density == 0:
            continue
        ystar = (s * pop.power * pop.gain / pop.m) ** (1.0 / alpha)
        b = _round_key(pop.lower / ystar)
        scale = pop.weight * ystar ** pop.dim
        for n in range(n_max + 1):
            I = _unit_integral(n, pop.dim, pop.m, float(alpha), b, rtol)
            if n == 0:
                out[0] -= scale * I
            else:
                out[n] += scale * (-1) ** n * _rising(pop.m, n) * s ** (-n) * I
    return out


def _eta_derivative_at_zero(n, r, eq, params, event):
    # J^(n)(0) = -(-1)^n (m)_n (c/m)^n lower^(dim - n alpha) / (n alpha - dim)
    total = 0.0
    for pop in laplace_terms(r, eq, params, event).populations:
        if pop.density == 0:
            continue
        if pop.lower == 0:
            return -math.inf if n % 2 else math.inf
        c = pop.power * pop.gain / pop.m
        jn = -(-1) ** n * _rising(pop.m, n) * c ** n * pop.lower ** (pop.dim - n * eq.alpha) \
            / (n * eq.alpha - pop.dim)
        total -= pop.weight * jn
    return total


def laplace_exponent(s, r, eq, params, event, rtol=1e-8):
    return float(eta_derivatives(s, r, eq, params, event, 0, rtol)[0])


def laplace_transform(s, r, eq, params, event, rtol=1e-8):
    return math.exp(laplace_exponent(s, r, eq, params, event, rtol))


def laplace_transform_derivatives(s, r, eq, params, event, k_max, rtol=1e-8):
    """[L(s), L'(s), ..., L^(k_max)(s)] via L^(k) = sum_j C(k-1, j) eta^(k-j) L^(j)."""
    eta = eta_derivatives(s, r, eq, params, event, k_max, rtol)
    L = [math.exp(eta[0])]
    for k in range(1, k_max + 1):
        L.append(sum(math.comb(k - 1, j) * eta[k - j] * L[j] for j in range(k)))
    return L


# -- coverage ---------------------------------------------------------------

@dataclass(frozen=True)
class CoverageQuery:
    beta: float
    params: NetworkParams
    eq: EquivalentDensities = None
    quad_tol: float = 1e-8
    r_max: float = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterError("SIR threshold beta must be > 0 (linear)")
        if not 0 < self.quad_tol <= 1e-3:
            raise ParameterError("quad_tol must lie in (0, 1e-3]")
        if self.eq is None:
            object.__setattr__(self, "eq", equivalent_densities(self.params))


def _serving_constants(params, event):
    if event is Event.E1:
        return params.m1, params.P1 * params.G1
    return params.m20, params.P2 * params.G2


def conditional_coverage(beta, eq, params, event, quad_tol=1e-8, r_max=None):
    """P(SIR > beta | event), integrating the k-sum over the serving distance."""
    event = _event(event)
    if association_prob(eq, event) < DEGENERATE_PROB:
        return 0.0
    m, pg = _serving_constants(params, event)
    if r_max is None:
        r_max = serving_distance_rmax(eq, event, quad_tol)

    def integrand(r):
        s = m * beta * r ** eq.alpha / pg
        f = serving_pdf(r, eq, event)
        if f == 0.0:
            return 0.0
        if s == 0.0:
            return f
        L = laplace_transform_derivatives(s, r, eq, params, event, m - 1, quad_tol)
        acc = 0.0
        for k, lk in enumerate(L):
            acc += (-s) ** k / math.factorial(k) * lk
        return acc * f

    val = integrate_finite(integrand, 0.0, r_max, rtol=quad_tol, atol=1e-14,
                           points=_pdf_breakpoints(eq, event, r_max),
                           source="analysis.coverage_probability")
    return min(max(val, 0.0), 1.0)


def _pdf_breakpoints(eq, event, r_max):
    # scale hints: mean nearest distances of the two candidate processes
    pts = []
    if eq.lambda1_e > 0:
        pts.append(0.5 / math.sqrt(eq.lambda1_e))
    if eq.lambda2_e > 0:
        pts.append(0.5 / eq.lambda2_e)
    return [p for p in pts if p < r_max]


def coverage_probability(q):
    """Two-event sum P(E1) P(SIR>b|E1) + P(E2) P(SIR>b|E2)."""
    total = 0.0
    for ev in (Event.E1, Event.E2):
        p = association_prob(q.eq, ev)
        if p < DEGENERATE_PROB:
            continue
        total += p * conditional_coverage(q.beta, q.eq, q.params, ev, q.quad_tol, q.r_max)
    return float(min(max(total, 0.0), 1.0))


def coverage_probability_direct(q):
    """Rayleigh-only route: int L_I(beta r^a / PG) f_R dr without the k-sum.

    Valid only when m1 = m20 = 1; used as an independent check.
    """
    if q.params.m1 != 1 or q.params.m20 != 1:
        raise ParameterError("direct route requires m1 = m20 = 1")
    total = 0.0
    for ev in (Event.E1, Event.E2):
        p = association_prob(q.eq, ev)
        if p < DEGENERATE_PROB:
            continue
        _, pg = _serving_constants(q.params, ev)
        r_max = serving_distance_rmax(q.eq, ev, q.quad_tol)

        def integrand(r, ev=ev, pg=pg):
            s = q.beta * r ** q.eq.alpha / pg
            return laplace_transform(s, r, q.eq, q.params, ev, q.quad_tol) * serving_pdf(r, q.eq, ev)

        total += p * integrate_finite(integrand, 0.0, r_max, rtol=q.quad_tol, atol=1e-14,
                                      points=_pdf_breakpoints(q.eq, ev, r_max))
    return total


def coverage_curve(betas, params, quad_tol=1e-8):
    eq = equivalent_densities(params)
    return np.array([coverage_probability(CoverageQuery(b, params, eq, quad_tol)) for b in betas])
