"""Self-contained scalar numerics: error function, safeguarded Newton,
semi-infinite quadrature, central differences, golden-section search.

Everything here is pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .errors import Divergence, NoBracket, NoConvergence

_SQRT_PI = math.sqrt(math.pi)
_TWO_OVER_SQRT_PI = 2.0 / _SQRT_PI


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances shared by the scalar solvers.

    abs_tol      residual magnitude accepted as a root
    rel_tol      relative step size accepted as convergence
    max_iter     iteration budget before NoConvergence
    fd_step_rel  relative step for finite-difference derivatives
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_iter: int = 100
    fd_step_rel: float = 1e-5

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0 and self.fd_step_rel > 0.0):
            raise ValueError("tolerances must be strictly positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def erf(x: float) -> float:
    """Error function, |error| <= 1e-12 over the whole real line.

    Maclaurin series up to |x| = 3, Lentz continued fraction for the
    complement on 3 < |x| < 6, saturation beyond (erfc(6) < 3e-17).
    Odd symmetry holds exactly: the sign is applied after evaluating |x|.
    """
    if x == 0.0:
        return 0.0
    ax = abs(x)
    sign = 1.0 if x > 0.0 else -1.0
    if ax <= 3.0:
        return sign * _erf_series(ax)
    if ax < 6.0:
        return sign * (1.0 - _erfc_cf(ax))
    return sign


def _erf_series(x: float) -> float:
    # sum (-1)^n x^(2n+1) / (n! (2n+1)); converges in < 40 terms for x <= 3
    x2 = x * x
    power = x  # (-1)^n x^(2n+1) / n!
    total = x
    for n in range(1, 200):
        power *= -x2 / n
        term = power / (2 * n + 1)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return _TWO_OVER_SQRT_PI * total
    raise NoConvergence(f"erf series did not converge at x={x}")  # pragma: no cover


def _erfc_cf(x: float) -> float:
    # erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    # evaluated with the modified Lentz algorithm
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    for n in range(1, 300):
        a = 1.0 if n == 1 else (n - 1) / 2.0
        b = x
        d = b + a * d
        if d == 0.0:
            d = tiny
        c = b + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            return math.exp(-x * x) / _SQRT_PI * f
    raise NoConvergence(f"erfc continued fraction stalled at x={x}")  # pragma: no cover


def central_diff(
    f: Callable[[float], float], x: float, order: int = 1, h_rel: float = 1e-5
) -> float:
    """Central finite difference of first or second order at x.

    Step is h_rel * max(|x|, 1) so the formula stays meaningful at x = 0.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    h = h_rel * max(abs(x), 1.0)
    if order == 1:
        return (f(x + h) - f(x - h)) / (2.0 * h)
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def newton_safeguarded(
    f: Callable[[float], float],
    x0: float,
    df: Optional[Callable[[float], float]] = None,
    bracket: Optional[Tuple[float, float]] = None,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """Newton's method with a bisection safeguard.

    When a bracket (sign change interval) is supplied, every iterate stays
    inside it; a Newton step that escapes, or a vanishing derivative, falls
    back to bisecting the current bracket.  Without a bracket a vanishing
    derivative raises NoBracket.
    """
    cfg = cfg or SolverConfig()
    if df is None:
        fd_h = cfg.fd_step_rel

        def df(z: float, _f=f, _h=fd_h) -> float:  # type: ignore[misc]
            return central_diff(_f, z, order=1, h_rel=_h)

    lo = hi = flo = fhi = None
    if bracket is not None:
        lo, hi = (bracket[0], bracket[1]) if bracket[0] <= bracket[1] else (bracket[1], bracket[0])
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
            raise NoBracket(f"f does not change sign on [{lo}, {hi}]")
        x = min(max(x0, lo), hi)
    else:
        x = x0

    dx_old = abs(hi - lo) if lo is not None else math.inf
    for _ in range(cfg.max_iter):
        fx = f(x)
        if abs(fx) <= cfg.abs_tol:
            return x
        if lo is not None:
            # shrink the bracket around the root
            if math.copysign(1.0, fx) == math.copysign(1.0, flo):
                lo, flo = x, fx
            else:
                hi, fhi = x, fx
        dfx = df(x)
        bisect = False
        if abs(dfx) < 1e-14:
            if lo is None:
                raise NoBracket(f"derivative vanished at x={x} and no bracket supplied")
            bisect = True
        else:
            x_new = x - fx / dfx
            if lo is not None and (
                not (lo <= x_new <= hi) or abs(2.0 * fx) > abs(dx_old * dfx)
            ):
                # out of bracket, or the step no longer halves the interval
                bisect = True
        if bisect:
            x_new = 0.5 * (lo + hi)
        dx_old = abs(x_new - x)
        if dx_old <= cfg.rel_tol * max(abs(x_new), 1.0):
            return x_new
        x = x_new
    raise NoConvergence(f"no root after {cfg.max_iter} iterations (last x={x}, f={f(x)})")


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    max_depth: int = 48,
) -> float:
    """Adaptive Simpson quadrature on a finite interval.

    Raises Divergence when the subdivision budget is exhausted before the
    local error estimate stabilises.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    if not (math.isfinite(flm) and math.isfinite(frm)):
        raise Divergence(f"integrand not finite near [{a}, {b}]")
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    if depth <= 0:
        raise Divergence(f"quadrature failed to stabilise on [{a}, {b}] (err={err:.3e})")
    return _simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + _simpson_rec(
        f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1
    )


def integrate_semi_infinite(g: Callable[[float], float], a: float) -> float:
    """Integral of g over [a, infinity) for integrands decaying at least
    like v^(1-alpha) with alpha > 2.

    For a > 0 the substitution v = a/(1-t) maps the tail onto (0, 1); the
    transformed integrand is then smooth for the power-law decay rates this
    package needs.  For a <= 0 the head [a, a0] is integrated directly and
    the same substitution handles the tail from a0 > 0.
    """
    if a <= 0.0:
        a0 = max(a + 1.0, 1.0)
        return _finite_part(g, a, a0) + integrate_semi_infinite(g, a0)

    t_cap = 1.0 - 1e-12

    def transformed(t: float) -> float:
        t = min(t, t_cap)
        v = a / (1.0 - t)
        return g(v) * a / ((1.0 - t) * (1.0 - t))

    # coarse pass fixes the absolute tolerance for the adaptive refinement
    coarse = abs(transformed(0.0)) + 4.0 * abs(transformed(0.5)) + abs(transformed(1.0))
    tol = max(1e-15, 1e-11 * coarse)
    return adaptive_simpson(transformed, 0.0, 1.0, tol=tol)


def _finite_part(g: Callable[[float], float], a: float, b: float) -> float:
    coarse = abs(g(a)) + 4.0 * abs(g(0.5 * (a + b))) + abs(g(b))
    tol = max(1e-15, 1e-11 * coarse * (b - a))
    return adaptive_simpson(g, a, b, tol=tol)


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> Tuple[float, float]:
    """Golden-section search for the maximum of a unimodal f on [lo, hi].

    Returns (argmax, max).  On a monotone f it converges to the better
    endpoint, which is how the optimizer reports boundary solutions.
    """
    if hi < lo:
        lo, hi = hi, lo
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol * max(1.0, abs(lo) + abs(hi)):
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = f(x1)
    x = x1 if f1 >= f2 else x2
    return x, f(x)
