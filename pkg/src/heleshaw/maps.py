"""Conformal maps from a circular sector onto the self-similar Hele-Shaw regions.

Every map is normalised by ``f(0) = 0`` and ``f'(0) = scale`` and has the
form ``f(z) = sum_k a_k z**(1 + k/b)`` with real ``a_k``.  The families are

* ``NegAxisClosedForm`` -- killing on the negative half-axis (b = 1), with
  the arctangent closed form;
* ``AngleHypergeometric`` -- killing on the sides of the angle
  ``|arg z| <= pi*b``, ``f(z) = z 2F1(-1/2, 2b; 2b + 3/2; -z**(1/b))``;
* ``HalfPlaneClosedForm`` -- the b = 1/2 member in closed form;
* ``DoubledKillReflect`` -- the b = 2 killing-reflecting map on the disk
  slit along the positive axis, arguments in ``[0, 2*pi)``;
* ``SeriesOnly`` -- a truncated coefficient list (ODE solutions, test maps).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .special import (NONNEG, PRINCIPAL, BranchConvention, DomainError,
                      arctan_c, branch_arg, branch_pow, hyp2f1_series)

# Below this radius the closed forms lose ~eps/|z|**2 to cancellation.
SMALL_RADIUS = 0.1
_N_TAYLOR = 40
HYP_ALPHA = -0.5


class MapKind(enum.Enum):
    NEG_AXIS = "NegAxisClosedForm"
    ANGLE = "AngleHypergeometric"
    HALF_PLANE = "HalfPlaneClosedForm"
    DOUBLED = "DoubledKillReflect"
    SERIES = "SeriesOnly"


def hyp_params(b: float) -> tuple[float, float, float]:
    """``(alpha, beta, gamma)`` of the angle-``b`` hypergeometric map."""
    return HYP_ALPHA, 2.0 * b, 2.0 * b + 1.5


def hyp_coefficients(b: float, n_terms: int) -> np.ndarray:
    """Taylor coefficients of ``2F1(alpha, beta; gamma; -w)`` in ``w``."""
    a, bb, c = hyp_params(b)
    out = np.empty(n_terms)
    out[0] = 1.0
    for k in range(1, n_terms):
        out[k] = -out[k - 1] * (a + k - 1) * (bb + k - 1) / (k * (c + k - 1))
    return out


def negaxis_coefficients(n_terms: int) -> np.ndarray:
    """``a_k`` of the b = 1 map, i.e. the coefficient of ``z**(k+1)``.

    ``(15/16) m / ((m^2 - 1/4)(m^2 - 9/4)) (-1)^m`` with ``m = k + 1``.
    """
    m = np.arange(1, n_terms + 1, dtype=float)
    return 15.0 / 16.0 * m / ((m**2 - 0.25) * (m**2 - 2.25)) * (-1.0) ** m


@dataclass(frozen=True)
class ConformalMapModel:
    kind: MapKind
    angle_param: float
    coefficients: tuple = ()
    scale: float = 1.0
    # hypergeometric summation tolerance and cap, used by ANGLE and DOUBLED
    series_tol: float = 1e-11
    series_cap: int = 10**6

    def __post_init__(self):
        if not self.angle_param > 0:
            raise ValueError("angle parameter b must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.coefficients and self.coefficients[0] <= 0:
            raise ValueError("leading coefficient must be positive")

    # --- geometry of the reference domain -------------------------------

    @property
    def branch(self) -> BranchConvention:
        return NONNEG if self.angle_param > 1 else PRINCIPAL

    @property
    def theta_range(self) -> tuple[float, float]:
        b = self.angle_param
        if b > 1:
            if b != 2:
                raise DomainError("only the doubled b = 2 map is supported above b = 1")
            return 0.0, 2.0 * math.pi
        return -math.pi * b, math.pi * b

    @property
    def sector_area(self) -> float:
        lo, hi = self.theta_range
        return 0.5 * (hi - lo)

    def _prepare(self, z, side: str | None):
        z = np.asarray(z, dtype=complex)
        conv = self.branch if side is None else self.branch.with_side(side)
        if np.any(np.abs(z) > 1.0 + 1e-12):
            raise DomainError("point outside the unit disk")
        theta = branch_arg(np.where(z == 0, 1.0, z), conv)
        lo, hi = self.theta_range
        if np.any((theta < lo - 1e-12) | (theta > hi + 1e-12)):
            raise DomainError(f"point outside the sector {lo:.4g} <= arg <= {hi:.4g}")
        w = branch_pow(z, 1.0 / self.angle_param, conv)
        return z, w

    # --- evaluation ------------------------------------------------------

    def _jet(self, z, w, order: int):
        """Return ``[f, f', D f, D^2 f][:order + 2]`` at unit scale."""
        b = self.angle_param
        kind = self.kind
        if kind == MapKind.DOUBLED:
            x = -w
            closed = (np.abs(x) >= _DOUBLED_SMALL) & (np.abs(1 - x) > 1e-6)
            if np.all(closed):
                cols = _doubled_hyp_jet(x, order)
            else:
                a, bb, c = hyp_params(b)
                sums, _, _ = hyp2f1_series(a, bb, c, np.where(closed, 0.0, x), tol=self.series_tol,
                                           max_terms=self.series_cap, derivs=order, strict=order == 0)
                cols = [sums[..., m] for m in range(order + 1)]
                if np.any(closed):
                    cf = _doubled_hyp_jet(np.where(closed, x, 0.5), order)
                    cols = [np.where(closed, cc, ss) for cc, ss in zip(cf, cols)]
            s0 = cols[0]
            out = [z * s0]
            if order >= 1:
                out += [s0 + cols[1] / b, z * (s0 + cols[1] / b)]
            if order >= 2:
                out.append(z * (s0 + 2 * cols[1] / b + cols[2] / b**2))
            return out
        if kind == MapKind.ANGLE:
            a, bb, c = hyp_params(b)
            nd = 0 if order == 0 else order
            # derivative columns decay one power slower and cannot meet the
            # tolerance on |w| = 1; they take whatever the term cap gives
            sums, _, _ = hyp2f1_series(a, bb, c, -w, tol=self.series_tol,
                                       max_terms=self.series_cap, derivs=nd,
                                       strict=nd == 0)
            s0 = sums[..., 0]
            out = [z * s0]
            if order >= 1:
                s1 = sums[..., 1]
                out += [s0 + s1 / b, z * (s0 + s1 / b)]
            if order >= 2:
                out.append(z * (s0 + 2 * s1 / b + sums[..., 2] / b**2))
            return out
        if kind == MapKind.SERIES:
            return _series_jet(np.asarray(self.coefficients), b, z, w, order)
        small = np.abs(z) < SMALL_RADIUS
        res = _series_jet(np.asarray(self.coefficients), b, z, w, order)
        if np.any(~small):
            zz = np.where(small, 0.5, z)
            closed = _negaxis_jet(zz, order) if kind == MapKind.NEG_AXIS else _halfplane_jet(zz, order)
            res = [np.where(small, r, c) for r, c in zip(res, closed)]
        return res

    def _scaled(self, z, order, side):
        z, w = self._prepare(z, side)
        jet = self._jet(z, w, order)
        out = [self.scale * v for v in jet]
        return [v[()] if v.ndim == 0 else v for v in out]

    def __call__(self, z, side: str | None = None):
        return self._scaled(z, 0, side)[0]

    def eval(self, z, side: str | None = None):
        return self(z, side)

    def eval_deriv(self, z, side: str | None = None):
        """Complex derivative ``f'(z)``."""
        return self._scaled(z, 1, side)[1]

    def jet(self, z, order: int = 2, side: str | None = None):
        """``[f, f', Df, D^2 f]`` (truncated to ``order``) with ``D = z d/dz``."""
        return self._scaled(z, order, side)

    def log_eval(self, z, side: str | None = None):
        """Continuous logarithm of ``f`` on the sector.

        ``log f = log z + log(f/z)`` where ``log z`` uses the sector branch
        and ``f/z`` stays in the right half-plane for every family here.
        """
        z, _ = self._prepare(z, side)
        conv = self.branch if side is None else self.branch.with_side(side)
        f = self(z, side)
        lz = np.log(np.abs(z)) + 1j * branch_arg(z, conv)
        return lz + np.log(f / z)

    def with_coefficient(self, k: int, delta: float) -> "ConformalMapModel":
        """Series copy with ``a_k`` shifted by ``delta`` (sensitivity tests)."""
        coeffs = list(self.coefficients)
        coeffs[k] += delta
        return replace(self, kind=MapKind.SERIES, coefficients=tuple(coeffs))

    def scaled(self, factor: float) -> "ConformalMapModel":
        return replace(self, scale=self.scale * factor)


def _series_jet(coeffs, b, z, w, order):
    k = np.arange(len(coeffs))
    lam = 1.0 + k / b
    pv = np.polynomial.polynomial.polyval
    g = pv(w, coeffs)
    out = [z * g]
    if order >= 1:
        g1 = pv(w, lam * coeffs)
        out += [g1, z * g1]
    if order >= 2:
        out.append(z * pv(w, lam**2 * coeffs))
    return out


def _negaxis_jet(z, order):
    # Written in s = sqrt(z): f = K (Q + R arctan s) - 5/8 with Laurent
    # polynomials Q = s^-2 + 2 + s^2 and R = -s^-3 - s^-1 + s + s^3.
    K = 15.0 / 32.0
    s = branch_pow(z, 0.5, PRINCIPAL)
    corner = np.abs(z + 1) == 0
    s = np.where(corner, 0.5j, s)
    A = arctan_c(s)
    Q = s**-2 + 2 + s**2
    R = -(s**-3) - s**-1 + s + s**3
    f = K * (Q + R * A) - 5.0 / 8.0
    out = [np.where(corner, -5.0 / 8.0, f)]
    if order >= 1:
        dQ = -2 * s**-3 + 2 * s
        dR = 3 * s**-4 + s**-2 + 1 + 3 * s**2
        fs = K * (dQ + dR * A + (-(s**-3) + s))
        fp = np.where(corner, 0.0, fs / (2 * s))
        out += [fp, z * fp]
    if order >= 2:
        ddQ = 6 * s**-4 + 2
        ddR = -12 * s**-5 - 2 * s**-3 + 6 * s
        fss = K * (ddQ + ddR * A + (6 - 4 * s**-2 + 6 * s**-4) + (2 * s**-2 - 2))
        out.append(np.where(corner, np.nan, s / 4 * (fs + s * fss)))
    return out


# 2F1(-1/2, 4; 11/2; x) = (21/4096) x^-4 [P(x) + 15 Q(x) T(x)] with
# T(x) = atanh(sqrt x)/sqrt x, which is even in sqrt x and so single valued.
_DOUBLED_P = np.polynomial.Polynomial([105, -40, -34, -40, 105])
_DOUBLED_Q = np.polynomial.Polynomial([-7, 5, 2, 2, 5, -7])
_DOUBLED_C = 21.0 / 4096.0
# cancellation in the x^-4 prefactor costs ~eps/|x|^4
_DOUBLED_SMALL = 0.35


def _laurent4(poly, x, order):
    """``poly(x) x^-4`` and its first ``order`` derivatives."""
    p0 = poly(x)
    out = [p0 / x**4]
    if order >= 1:
        p1 = poly.deriv()(x)
        out.append(p1 / x**4 - 4 * p0 / x**5)
    if order >= 2:
        p2 = poly.deriv(2)(x)
        out.append(p2 / x**4 - 8 * p1 / x**5 + 20 * p0 / x**6)
    return out


def _doubled_hyp_jet(x, order):
    """``[F, x F', x F' + x^2 F'']`` for ``F = 2F1(-1/2, 4; 11/2; x)``."""
    y = np.sqrt(x)
    T = np.arctanh(y) / y
    A = _laurent4(_DOUBLED_P, x, order)
    B = _laurent4(_DOUBLED_Q, x, order)
    c, c15 = _DOUBLED_C, 15 * _DOUBLED_C
    out = [c * A[0] + c15 * B[0] * T]
    if order >= 1:
        u = 1 / (1 - x)
        T1 = (u - T) / (2 * x)
        F1 = c * A[1] + c15 * (B[1] * T + B[0] * T1)
        out.append(x * F1)
    if order >= 2:
        T2 = -(u - T) / (2 * x**2) + (u**2 - T1) / (2 * x)
        F2 = c * A[2] + c15 * (B[2] * T + 2 * B[1] * T1 + B[0] * T2)
        out.append(x * F1 + x**2 * F2)
    return out


def _halfplane_jet(z, order):
    # f = (3/8)(P + S arctan z), P = z - 1/z, S = (z + 1/z)^2
    K = 3.0 / 8.0
    corner = (z == 1j) | (z == -1j)
    zz = np.where(corner, 0.5, z)
    A = arctan_c(zz)
    P = zz - 1 / zz
    S = zz**2 + 2 + zz**-2
    f = K * (P + S * A)
    # the corners map to 0 along the imaginary axis sides
    out = [np.where(corner, 0.0, f)]
    if order >= 1:
        fp = K * ((1 + zz**-2) + (2 * zz - 2 * zz**-3) * A + (1 + zz**-2))
        fp = np.where(corner, 0.0, fp)
        out += [fp, z * fp]
    if order >= 2:
        fpp = K * (-2 * zz**-3 + (2 + 6 * zz**-4) * A + (4 / zz - 4 * zz**-3) - 2 / zz)
        out.append(np.where(corner, np.nan, zz * out[1] + zz**2 * fpp))
    return out


# --- constructors ---------------------------------------------------------

def make_negaxis_map() -> ConformalMapModel:
    """Killing on the negative half-axis: the b = 1 arctangent closed form."""
    return ConformalMapModel(MapKind.NEG_AXIS, 1.0, tuple(negaxis_coefficients(_N_TAYLOR)))


def make_halfplane_map() -> ConformalMapModel:
    """Killing on the imaginary axis (b = 1/2) in closed form."""
    return ConformalMapModel(MapKind.HALF_PLANE, 0.5, tuple(hyp_coefficients(0.5, _N_TAYLOR)))


def make_angle_map(b: float) -> ConformalMapModel:
    """Killing on the sides of ``|arg z| <= pi*b`` via the Gauss series."""
    if not b > 0:
        raise ValueError("b must be positive")
    if b > 1:
        raise DomainError("the angle map is implemented for 0 < b <= 1; use make_doubled_map for b = 2")
    return ConformalMapModel(MapKind.ANGLE, float(b), tuple(hyp_coefficients(b, _N_TAYLOR)))


def make_doubled_map() -> ConformalMapModel:
    """Killing-reflecting map, b = 2, on the disk slit along the positive axis."""
    return ConformalMapModel(MapKind.DOUBLED, 2.0, tuple(hyp_coefficients(2.0, _N_TAYLOR)))


def make_series_map(coefficients, b: float = 1.0) -> ConformalMapModel:
    return ConformalMapModel(MapKind.SERIES, float(b), tuple(float(c) for c in coefficients))


def ode_eigenvalue(b: float) -> float:
    """The constant ``h`` forced by ``f ~ z`` at the origin: ``1 + 1/(2b)``."""
    return 1.0 + 1.0 / (2.0 * b)


def solve_ode_series(b: float, n_terms: int) -> ConformalMapModel:
    """Power-series solution of ``D^2 f + (1/2b)(1-w)/(1+w) D f = h f``.

    With ``f = sum a_k z**lam_k``, ``lam_k = 1 + k/b`` and ``w = z**(1/b)``,
    multiplying through by ``1 + w`` and matching powers gives

        a_k (lam_k^2 + lam_k/2b - h) = -a_{k-1} (lam_{k-1}^2 - lam_{k-1}/2b - h).

    The k = 0 equation fixes ``h``; ``a_0 = 1``.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    if n_terms < 2:
        raise ValueError("n_terms must be at least 2")
    h = ode_eigenvalue(b)
    a = np.empty(n_terms)
    a[0] = 1.0
    for k in range(1, n_terms):
        lk, lp = 1 + k / b, 1 + (k - 1) / b
        lead = lk**2 + lk / (2 * b) - h
        assert lead != 0.0, "singular recurrence"
        a[k] = -a[k - 1] * (lp**2 - lp / (2 * b) - h) / lead
    return make_series_map(a, b)


# --- diagnostics ------------------------------------------------------------

def _arc_angles(model: ConformalMapModel, n: int) -> np.ndarray:
    lo, hi = model.theta_range
    if model.angle_param > 1:
        return lo + (hi - lo) * np.arange(n) / n
    span = hi - lo
    j = np.arange(n)
    th = span * j / n
    return np.where(th > hi + 1e-15, th - span, th)


def boundary_sample(model: ConformalMapModel, n: int):
    """Closed boundary polyline of the image region.

    Returns ``(theta, points)``.  Arc samples start at ``theta = 0`` and run
    counterclockwise; the straight sides are inserted as the vertex at the
    origin together with the far end of the clockwise side.  Rows belonging
    to the sides carry the side's angle in ``theta``.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    lo, hi = model.theta_range
    th = _arc_angles(model, n)
    if model.angle_param > 1:
        arc = model(np.exp(1j * th))
        end = model(1.0 + 0j, side="lower")
        theta = np.concatenate([th, [hi, hi]])
        pts = np.concatenate([arc, [end, 0.0]])
        return theta, pts
    upper = th >= 0
    up_th, low_th = th[upper], th[~upper]
    arc_up = model(np.exp(1j * up_th))
    arc_low = model(np.exp(1j * low_th))
    far = model(np.exp(1j * lo))
    theta = np.concatenate([up_th, [hi, lo], low_th])
    pts = np.concatenate([arc_up, [0.0, far], arc_low])
    return theta, pts


def write_boundary_csv(path, theta, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "x", "y"])
        for t, p in zip(theta, points):
            w.writerow([f"{t:.15g}", f"{p.real:.15g}", f"{p.imag:.15g}"])


def boundary_equation_constant(model: ConformalMapModel) -> float:
    """``Re(z f'(z) conj f(z))`` at ``z = 1``; 75*pi/128 for the unit-slope b = 1 map."""
    f, fp = model.jet(1.0 + 0j, order=1)[:2]
    return float((fp * np.conj(f)).real)


def boundary_equation_residual(model: ConformalMapModel, delta: float = 0.05,
                               n: int = 4096, inferred: bool = False) -> float:
    """Max deviation of ``Re(z f' conj f)`` from ``kappa cos(theta/(2b))`` on ``|z| = 1``.

    ``kappa`` is the value at ``theta = 0``, i.e. the map is rescaled so that
    the homothetic-deformation equation holds with unit right-hand side
    there.  Points with ``|theta -+ pi b| < delta`` are skipped.  Only b = 1
    is established; other ``b`` need ``inferred=True``.
    """
    b = model.angle_param
    if b != 1.0 and not inferred:
        raise ValueError("the boundary equation is only stated for b = 1; pass inferred=True")
    lo, hi = model.theta_range
    th = np.linspace(lo, hi, n + 1)
    th = th[(np.abs(th - lo) >= delta) & (np.abs(th - hi) >= delta)]
    z = np.exp(1j * th)
    f, fp = model.jet(z, order=1)[:2]
    lhs = (z * fp * np.conj(f)).real
    kappa = boundary_equation_constant(model)
    return float(np.max(np.abs(lhs / kappa - np.cos(th / (2 * b)))))


def sector_points(model: ConformalMapModel, radius: float = 0.9, n_r: int = 12,
                  n_theta: int = 24) -> np.ndarray:
    lo, hi = model.theta_range
    r = radius * (np.arange(1, n_r + 1) / n_r)
    t = lo + (hi - lo) * (np.arange(n_theta) + 0.5) / n_theta
    return (r[:, None] * np.exp(1j * t[None, :])).ravel()


def ode_residual(model: ConformalMapModel, b: float, radius: float = 0.9) -> float:
    """Max of ``|D^2 f + (1/2b)(1-w)/(1+w) D f - (1 + 1/2b) f|`` inside the sector."""
    if not math.isclose(model.angle_param, b):
        raise ValueError("map sector does not match b")
    z = sector_points(model, radius)
    w = branch_pow(z, 1.0 / b, model.branch)
    f, _, df, d2f = model.jet(z, order=2)
    res = d2f + (1 - w) / (1 + w) * df / (2 * b) - ode_eigenvalue(b) * f
    return float(np.max(np.abs(res)))


def thickness_ratio(model: ConformalMapModel) -> float:
    """``|f(1)| / |f(-1)|``: extent along the positive vs negative real axis."""
    if model.angle_param != 1.0:
        raise ValueError("thickness ratio needs a full-plane (b = 1) map")
    return float(abs(model(1.0 + 0j)) / abs(model(-1.0 + 0j)))


CUSP_US = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class CuspFit:
    classification: str
    constant: float
    spread_log: float
    spread_plain: float


def cusp_probe(model: ConformalMapModel, us=CUSP_US, point: complex = -1.0,
               threshold: float = 0.5) -> CuspFit:
    """Classify the local behaviour of ``f(point + u) - f(point)``.

    Fits ``c u^2 |log u|`` and ``c u^2`` to the samples and keeps the model
    whose pointwise constants have the smaller relative spread.
    """
    us = np.asarray(us, dtype=float)
    f0 = model(complex(point))
    d = np.abs(model(point + us + 0j) - f0)
    c_log = d / (us**2 * np.abs(np.log(us)))
    c_plain = d / us**2

    def spread(c):
        return float((c.max() - c.min()) / abs(c.mean()))

    s_log, s_plain = spread(c_log), spread(c_plain)
    if min(s_log, s_plain) > threshold:
        return CuspFit("other", float("nan"), s_log, s_plain)
    if s_log < s_plain:
        return CuspFit("power2_log", float(c_log.mean()), s_log, s_plain)
    return CuspFit("power2_plain", float(c_plain.mean()), s_log, s_plain)
