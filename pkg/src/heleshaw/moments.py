"""Harmonic moments of analytic regions (pullback quadrature) and of lattice clusters.

The region moment of ``u`` over ``Omega = f(sector)`` is computed as

    int_sector u(f(z)) |f'(z)|^2 dA(z)

with a tensor Gauss-Legendre rule in ``(r, theta)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .maps import ConformalMapModel
from .special import NONNEG, PRINCIPAL, BranchConvention, ConvergenceError, branch_arg


@dataclass(frozen=True)
class MomentSpec:
    """Test function ``Re(z^s)`` or ``Re(z^s log z)`` on a fixed branch.

    ``branch=None`` means the natural one: the map's own sector branch for
    region moments, arguments in ``[0, 2 pi)`` for lattice clusters.
    """

    exponent: float
    with_log: bool = False
    branch: BranchConvention | None = None


@dataclass(frozen=True)
class QuadratureGrid:
    radial_nodes: int = 256
    angular_nodes: int = 256
    rule: str = "tensor_gauss_legendre"

    def __post_init__(self):
        if self.radial_nodes < 8 or self.angular_nodes < 8:
            raise ValueError("node counts must be at least 8")
        if self.rule != "tensor_gauss_legendre":
            raise ValueError(f"unknown rule {self.rule!r}")

    def refined(self) -> "QuadratureGrid":
        return QuadratureGrid(2 * self.radial_nodes, 2 * self.angular_nodes, self.rule)

    def nodes(self, theta_lo: float, theta_hi: float):
        """Points ``r e^{i theta}`` and area weights (Jacobian ``r`` included)."""
        xr, wr = np.polynomial.legendre.leggauss(self.radial_nodes)
        xt, wt = np.polynomial.legendre.leggauss(self.angular_nodes)
        r = 0.5 * (xr + 1.0)
        half = 0.5 * (theta_hi - theta_lo)
        t = theta_lo + half * (xt + 1.0)
        z = r[:, None] * np.exp(1j * t[None, :])
        w = (0.5 * wr * r)[:, None] * (half * wt)[None, :]
        return z, w


@dataclass
class MomentResult:
    exponent: float
    with_log: bool
    value: float
    error_estimate: float
    abs_value: float
    label: str = ""

    @property
    def relative(self) -> float:
        return abs(self.value) / self.abs_value


def _in_window(log_f, conv: BranchConvention):
    # shift a continuous argument into the convention's window
    arg = conv.window_start + np.mod(log_f.imag - conv.window_start, 2 * math.pi)
    return log_f.real + 1j * arg


def _test_values(log_f, spec: MomentSpec):
    lf = log_f if spec.branch is None else _in_window(log_f, spec.branch)
    zs = np.exp(spec.exponent * lf)
    if spec.with_log:
        zs = zs * lf
    return zs


def _quadrature(model: ConformalMapModel, specs, grid: QuadratureGrid):
    lo, hi = model.theta_range
    z, w = grid.nodes(lo, hi)
    fp = model.eval_deriv(z)
    log_f = model.log_eval(z)
    jac = w * np.abs(fp) ** 2
    out = []
    for spec in specs:
        u = _test_values(log_f, spec)
        # fixed summation order keeps the result reproducible bit for bit
        out.append((float(np.sum((jac * u.real).ravel())), float(np.sum((jac * np.abs(u)).ravel()))))
    return out


def region_moments(model: ConformalMapModel, b: float, specs, grid: QuadratureGrid | None = None,
                   tol: float | None = None) -> list[MomentResult]:
    """Moments for several specs, sharing map evaluations.

    The value is taken on the refined grid; the error estimate is the change
    from ``grid`` to its refinement.  With ``tol`` given a change larger than
    ``10 * tol`` raises ``ConvergenceError``.
    """
    if not math.isclose(model.angle_param, b):
        raise ValueError("map sector does not match b")
    grid = grid or QuadratureGrid()
    specs = list(specs)
    for spec in specs:
        if spec.exponent <= -2:
            raise ValueError("exponent must exceed -2 for integrability at the origin")
    coarse = _quadrature(model, specs, grid)
    fine = _quadrature(model, specs, grid.refined())
    results = []
    for spec, (v0, _), (v1, a1) in zip(specs, coarse, fine):
        err = abs(v1 - v0)
        if tol is not None and err > 10 * tol:
            raise ConvergenceError(f"moment s={spec.exponent}: grid refinement changed the value by {err:.3g}")
        results.append(MomentResult(spec.exponent, spec.with_log, v1, err, a1))
    return results


def region_moment(model: ConformalMapModel, b: float, spec: MomentSpec,
                  grid: QuadratureGrid | None = None, tol: float | None = None) -> MomentResult:
    """``int_Omega Re(z^s [log z])`` for ``Omega = model(sector)``."""
    return region_moments(model, b, [spec], grid, tol)[0]


def region_area(model: ConformalMapModel, grid: QuadratureGrid | None = None) -> float:
    return region_moment(model, model.angle_param, MomentSpec(0.0), grid).value


def series_area(model: ConformalMapModel) -> float:
    """``pi b sum (1 + k/b) a_k^2`` -- exact area of a series map with ``b <= 1``."""
    b = model.angle_param
    if b > 1:
        raise ValueError("the coefficient formula needs the full sector |arg z| <= pi b")
    a = np.asarray(model.coefficients)
    lam = 1.0 + np.arange(len(a)) / b
    return float(math.pi * b * np.sum(lam * a**2) * model.scale**2)


def alpha_of_p(p: float) -> float:
    """Exponent shift ``arccos(p) / 2 pi`` for pass probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return math.acos(p) / (2 * math.pi)


def branch_for(model: ConformalMapModel) -> BranchConvention:
    return NONNEG if model.angle_param > 1 else PRINCIPAL


def suite_specs(b: float, n_max: int, p: float | None = None, branch: BranchConvention = NONNEG):
    """Exponent table: ``(2n+1)/(2b)`` for ``n = 0..n_max``, or ``n -+ alpha`` with ``p``.

    Each entry is ``(label, spec, expected_zero)``.  The ``n = 0`` row of the
    first family is kept as a reference: its moment does not vanish (the
    source at the origin contributes), only ``n >= 1`` do.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    rows = []
    if p is None:
        for n in range(n_max + 1):
            rows.append((f"(2*{n}+1)/(2b)", MomentSpec((2 * n + 1) / (2 * b), False, branch), n >= 1))
    else:
        a = alpha_of_p(p)
        seen = set()
        for n in range(1, n_max + 1):
            for sign, s in (("+", n + a), ("-", n - a)):
                key = round(s, 12)
                if key in seen:
                    continue
                seen.add(key)
                rows.append((f"{n}{sign}alpha", MomentSpec(s, False, branch), True))
        if a == 0.0:
            for n in range(1, n_max + 1):
                rows.append((f"{n} log", MomentSpec(float(n), True, branch), True))
    return rows


@dataclass
class MomentTable:
    rows: list = field(default_factory=list)
    expected_zero: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["exponent", "with_log", "value", "error_estimate"])
            for r in self.rows:
                w.writerow([f"{r.exponent:.15g}", int(r.with_log), f"{r.value:.15g}", f"{r.error_estimate:.6g}"])

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "rows": [dict(asdict(r), relative=r.relative, expected_zero=e)
                     for r, e in zip(self.rows, self.expected_zero)],
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def moment_suite(model: ConformalMapModel, b: float, n_max: int, p: float | None = None,
                 grid: QuadratureGrid | None = None) -> MomentTable:
    rows = suite_specs(b, n_max, p, branch_for(model))
    results = region_moments(model, b, [r[1] for r in rows], grid)
    for (label, _, _), res in zip(rows, results):
        res.label = label
    grid = grid or QuadratureGrid()
    meta = {"kind": model.kind.value, "b": b, "n_max": n_max, "p": p,
            "grid": [grid.radial_nodes, grid.angular_nodes]}
    return MomentTable(results, [r[2] for r in rows], meta)


def discrete_region_moment(cells, spacing: float, spec: MomentSpec, absolute: bool = False) -> float:
    """Midpoint-rule moment of a union of lattice cells.

    ``cells`` is an ``(n, 2)`` integer array (or a ``LatticeCluster``);
    cell ``(i, j)`` is centred at ``spacing * (i, j)`` with area
    ``spacing**2``.  Centres on the branch cut take the upper-side limit;
    a centre at the origin contributes ``0**s`` (zero for ``s > 0``).
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    pts = getattr(cells, "sites", cells)
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    z = spacing * (pts[:, 0] + 1j * pts[:, 1])
    nz = z != 0
    vals = np.zeros(len(z), dtype=complex)
    zz = z[nz]
    conv = (spec.branch or NONNEG).with_side("upper")
    lz = np.log(np.abs(zz)) + 1j * branch_arg(zz, conv)
    u = np.exp(spec.exponent * lz)
    if spec.with_log:
        u = u * lz
    vals[nz] = u
    if spec.exponent == 0 and not spec.with_log:
        vals[~nz] = 1.0
    data = np.abs(vals) if absolute else vals.real
    return float(np.sum(data) * spacing**2)
