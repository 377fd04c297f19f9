"""Branch-aware complex elementary functions and the Gauss series 2F1.

All functions accept scalars or numpy arrays and return the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Argument outside the domain of a multivalued or singular function."""


class ConvergenceError(RuntimeError):
    """A series did not reach its tolerance within the term cap."""


@dataclass(frozen=True)
class BranchConvention:
    """Argument window ``[window_start, window_start + 2*pi)`` with a cut ray.

    ``cut_angle`` is the direction of the excluded ray, taken mod 2*pi, and
    must coincide with ``window_start`` mod 2*pi.  Points lying exactly on
    the cut resolve to a one-sided limit: ``on_cut="upper"`` takes the limit
    from Im z > 0, ``"lower"`` from Im z < 0.  Only horizontal cuts are
    supported.
    """

    cut_angle: float
    window_start: float
    on_cut: str = "upper"

    def __post_init__(self):
        c = self.cut_angle % TWO_PI
        if not (math.isclose(c, 0.0, abs_tol=1e-12) or math.isclose(c, math.pi, abs_tol=1e-12)
                or math.isclose(c, TWO_PI, abs_tol=1e-12)):
            raise ValueError("only horizontal cuts (angle 0 or pi) are supported")
        d = (self.window_start - self.cut_angle) % TWO_PI
        if not (math.isclose(d, 0.0, abs_tol=1e-12) or math.isclose(d, TWO_PI, abs_tol=1e-12)):
            raise ValueError("window_start must lie on the cut ray")
        if self.on_cut not in ("upper", "lower"):
            raise ValueError("on_cut must be 'upper' or 'lower'")

    @property
    def positive_cut(self) -> bool:
        c = self.cut_angle % TWO_PI
        return math.isclose(c, 0.0, abs_tol=1e-12) or math.isclose(c, TWO_PI, abs_tol=1e-12)

    def with_side(self, on_cut: str) -> "BranchConvention":
        return BranchConvention(self.cut_angle, self.window_start, on_cut)


#: Principal branch, cut on the negative real axis, arguments in (-pi, pi].
PRINCIPAL = BranchConvention(math.pi, -math.pi, "upper")
#: Arguments in [0, 2*pi); real on the positive axis approached from above.
NONNEG = BranchConvention(0.0, 0.0, "upper")


def branch_arg(z, conv: BranchConvention = PRINCIPAL):
    """Argument of ``z`` in the window of ``conv``."""
    z = np.asarray(z, dtype=complex)
    theta = np.angle(z)
    off = np.mod(theta - conv.window_start, TWO_PI)
    on_cut = off == 0.0
    # x + 0j and x - 0j both land here; the convention picks the side.
    if conv.positive_cut:
        cut_value = 0.0 if conv.on_cut == "upper" else TWO_PI
    else:
        cut_value = TWO_PI if conv.on_cut == "upper" else 0.0
    off = np.where(on_cut, cut_value, off)
    return conv.window_start + off


def branch_log(z, conv: BranchConvention = PRINCIPAL):
    """Logarithm with imaginary part in the window of ``conv``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise DomainError("log(0) is undefined")
    return np.log(np.abs(z)) + 1j * branch_arg(z, conv)


def branch_pow(z, s: float, conv: BranchConvention = PRINCIPAL):
    """``exp(s * branch_log(z))``, with ``0**s = 0`` for ``s > 0``."""
    z = np.asarray(z, dtype=complex)
    zero = z == 0
    if np.any(zero):
        if s < 0:
            raise DomainError("0**s with s < 0")
        if s == 0:
            return np.ones_like(z)
    safe = np.where(zero, 1.0, z)
    out = np.exp(s * branch_log(safe, conv))
    return np.where(zero, 0.0, out)


def arctan_c(w, conv: BranchConvention = PRINCIPAL):
    """Complex arctangent ``(1/2i) log((1 + iw)/(1 - iw))``.

    With the principal convention the result is real on the real axis and
    the cuts are the imaginary rays beyond +-i.
    """
    w = np.asarray(w, dtype=complex)
    if np.any((w == 1j) | (w == -1j)):
        raise DomainError("arctan has logarithmic singularities at +-i")
    return branch_log((1 + 1j * w) / (1 - 1j * w), conv) / 2j


class Hyp2F1(NamedTuple):
    value: np.ndarray
    error_bound: np.ndarray
    terms: np.ndarray


@numba.njit(cache=True)
def _hyp2f1_sums(a, b, c, z, nmom, tol, max_terms, out, err, nterms):
    # out[i, m] = sum_n n**m t_n with t_n the n-th Gauss series term at z[i]
    decay = c - a - b + 1.0
    p = decay - (nmom - 1)
    n0 = 2.0 * (abs(a) + abs(b) + abs(c)) + 10.0
    for i in range(z.shape[0]):
        x = z[i]
        ax = abs(x)
        geo = np.inf if ax >= 1.0 else 1.0 / (1.0 - ax)
        t = 1.0 + 0.0j
        s0 = 1.0 + 0.0j
        s1 = 0.0j
        s2 = 0.0j
        bound = np.inf
        n = 0
        while n < max_terms:
            t = t * ((a + n) * (b + n) / ((1.0 + n) * (c + n))) * x
            n += 1
            s0 += t
            if nmom > 1:
                s1 += n * t
                if nmom > 2:
                    s2 += (n * n) * t
            if t.real == 0.0 and t.imag == 0.0:
                bound = 0.0
                break
            if (n & 31) == 0 and n > n0:
                # terms ~ n**(m - decay) |x|**n once the ratio has settled
                worst = abs(t) * float(n) ** (nmom - 1)
                alg = n / (p - 1.0) if p > 1.0 else np.inf
                bound = worst * min(geo, alg)
                if bound <= tol * max(abs(s0), 1.0):
                    break
        out[i, 0] = s0
        if nmom > 1:
            out[i, 1] = s1
        if nmom > 2:
            out[i, 2] = s2
        err[i] = bound
        nterms[i] = n


def hyp2f1_series(a: float, b: float, c: float, z, tol: float = 1e-12,
                  max_terms: int = 10**6, derivs: int = 0, strict: bool = True):
    """Sum the Gauss series and its weighted companions.

    Returns an array of shape ``z.shape + (derivs + 1,)`` with column ``m``
    holding ``sum_n n**m t_n`` (so column 1 is ``z F'(z)``), plus the error
    bound of the slowest column and the number of terms used.
    """
    if derivs > 2:
        raise ValueError("at most two weighted columns are supported")
    if c <= 0 and float(c).is_integer():
        raise ValueError(f"c = {c} is a nonpositive integer")
    z = np.asarray(z, dtype=complex)
    flat = np.ascontiguousarray(z.ravel())
    if np.any(np.abs(flat) > 1.0 + 1e-12):
        raise DomainError("direct series requires |z| <= 1")
    if np.any(np.abs(flat) >= 1.0 - 1e-15) and c - a - b - derivs <= 0:
        raise DomainError("series diverges on |z| = 1 unless c - a - b exceeds the derivative order")
    out = np.empty((flat.size, derivs + 1), dtype=complex)
    err = np.empty(flat.size)
    nterms = np.empty(flat.size, dtype=np.int64)
    _hyp2f1_sums(float(a), float(b), float(c), flat, derivs + 1, float(tol),
                 int(max_terms), out, err, nterms)
    if strict:
        scale = np.maximum(np.abs(out[:, 0]), 1.0)
        bad = err > tol * scale
        if np.any(bad):
            worst = np.argmax(err / scale)
            raise ConvergenceError(
                f"2F1({a},{b};{c}) series at z={flat[worst]:.6g} reached error bound "
                f"{err[worst]:.3g} after {nterms[worst]} terms (tol {tol:g})")
    shape = z.shape
    return out.reshape(shape + (derivs + 1,)), err.reshape(shape), nterms.reshape(shape)


def gauss_2f1(a: float, b: float, c: float, z, tol: float = 1e-12,
              max_terms: int = 10**6, full_output: bool = False):
    """Gauss hypergeometric function by direct series summation, ``|z| <= 1``.

    Parameters
    ----------
    a, b, c : float
        Series parameters.  ``c`` must not be a nonpositive integer, and on
        ``|z| = 1`` convergence needs ``c - a - b > 0``.
    z : complex or array_like
    tol : float
        Target relative error (absolute when the sum is below 1).
    max_terms : int
        Term cap; ``ConvergenceError`` is raised if ``tol`` is not met.
    full_output : bool
        If true return a ``Hyp2F1`` tuple with the achieved error bound.
    """
    sums, err, nterms = hyp2f1_series(a, b, c, z, tol=tol, max_terms=max_terms)
    value = sums[..., 0]
    if full_output:
        return Hyp2F1(value, err, nterms)
    return value[()] if value.ndim == 0 else value
