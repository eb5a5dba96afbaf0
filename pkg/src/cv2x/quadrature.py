"""Adaptive quadrature with a hard failure contract.

Thin layer over QUADPACK (``scipy.integrate.quad``, Gauss-Kronrod 21-point
rule with recursive bisection). The only addition is that non-convergence
raises :class:`NumericError` instead of emitting a warning.
"""

import numpy as np
from scipy import integrate

from .errors import NumericError

DEFAULT_RTOL = 1e-8
ABS_FLOOR = 1e-14
SUBDIVISION_CAP = 200


def integrate_finite(f, a, b, rtol=DEFAULT_RTOL, atol=ABS_FLOOR, points=None,
                     limit=SUBDIVISION_CAP, source=None):
    """Integrate ``f`` over the finite interval [a, b].

    Raises NumericError when QUADPACK reports failure and the estimated
    error exceeds the requested tolerance.
    """
    if b == a:
        return 0.0
    kwargs = dict(epsabs=atol, epsrel=rtol, limit=limit, full_output=1)
    if points is not None:
        pts = [p for p in points if a < p < b]
        if pts:
            kwargs["points"] = pts
    out = integrate.quad(f, a, b, **kwargs)
    value, err = out[0], out[1]
    # QUADPACK appends a message to the tuple only when ier > 0
    ier = len(out) > 3
    if not np.isfinite(value):
        raise NumericError("quadrature produced a non-finite value",
                           estimate=value, error=err, source=source)
    if ier and err > max(atol, rtol * abs(value)) * 10:
        raise NumericError(
            f"quadrature did not converge (estimate {value:.6g}, "
            f"error {err:.3g}, rtol {rtol:g})",
            estimate=value, error=err, source=source)
    return value
