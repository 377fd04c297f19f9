"""Aggregation models on Z^2 with killing and reflecting boundary rules.

Internal DLA, rotor-router and the divisible sandpile, all with the source
at the origin.  Walkers use a splitmix64 counter-based generator; particle
``k`` (counting every emission, killed or not) draws its steps from its own
substream and any pass/kill coin flips from a second one, so a run is fully
determined by ``seed``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

# direction codes, also the rotor order N -> E -> S -> W
DX = np.array([0, 1, 0, -1], dtype=np.int64)
DY = np.array([1, 0, -1, 0], dtype=np.int64)
MIRROR = np.array([2, 1, 0, 3], dtype=np.int64)

BC_NONE, BC_KILL_NEG_AXIS, BC_KILL_HALF_PLANE, BC_KILL_WEDGE, BC_KILL_REFLECT, BC_KPR = range(6)

STATUS_DONE, STATUS_GROW, STATUS_WALK_CAP, STATUS_TOTAL_CAP = range(4)

ROTOR_NORTH, ROTOR_SYMMETRIC, ROTOR_RANDOM = range(3)

DEFAULT_WALK_CAP = 10**9


class StepCapExceeded(RuntimeError):
    """A walk or run exhausted its step budget; ``cluster`` holds the partial run."""

    def __init__(self, message: str, cluster: "LatticeCluster"):
        super().__init__(message)
        self.cluster = cluster


@dataclass(frozen=True)
class BoundaryCondition:
    """Lattice boundary rule.

    kind is one of ``none``, ``kill_neg_axis``, ``kill_angle_sides`` (with
    ``b`` in {1/4, 1/2}), ``kill_reflect`` or ``kpr`` (with ``p``).

    ``kill_angle_sides`` uses the wedge ``|arg z| <= pi b`` symmetric about
    the positive axis: for b = 1/2 walkers die on ``x <= 0`` (origin
    excepted), for b = 1/4 on ``|y| >= x``.
    """

    kind: str = "none"
    b: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "kill_neg_axis", "kill_angle_sides", "kill_reflect", "kpr"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "kill_angle_sides" and self.b not in (0.25, 0.5):
            raise ValueError("kill_angle_sides needs b = 0.25 or 0.5")
        if self.kind == "kpr" and (self.p is None or not 0.0 <= self.p <= 1.0):
            raise ValueError("kpr needs p in [0, 1]")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def kill_neg_axis(cls):
        return cls("kill_neg_axis")

    @classmethod
    def kill_angle_sides(cls, b: float):
        return cls("kill_angle_sides", b=float(b))

    @classmethod
    def kill_reflect(cls):
        return cls("kill_reflect")

    @classmethod
    def kpr(cls, p: float):
        return cls("kpr", p=float(p))

    @property
    def code(self) -> int:
        if self.kind == "kill_angle_sides":
            return BC_KILL_HALF_PLANE if self.b == 0.5 else BC_KILL_WEDGE
        return {"none": BC_NONE, "kill_neg_axis": BC_KILL_NEG_AXIS,
                "kill_reflect": BC_KILL_REFLECT, "kpr": BC_KPR}[self.kind]

    def is_killing(self, x: int, y: int) -> bool:
        return bool(_is_kill(x, y, self.code))

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.b is not None:
            d["b"] = self.b
        if self.p is not None:
            d["p"] = self.p
        return d

    @classmethod
    def from_json(cls, d: dict) -> "BoundaryCondition":
        return cls(d["kind"], d.get("b"), d.get("p"))

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        """``none``, ``negaxis``, ``angle:0.5``, ``killreflect``, ``kpr:0.3``."""
        name, _, arg = text.partition(":")
        name = name.lower().replace("-", "").replace("_", "")
        if name == "none":
            return cls.none()
        if name in ("negaxis", "killnegaxis"):
            return cls.kill_neg_axis()
        if name in ("angle", "killanglesides"):
            return cls.kill_angle_sides(float(arg))
        if name in ("killreflect", "kr"):
            return cls.kill_reflect()
        if name == "kpr":
            return cls.kpr(float(arg))
        raise ValueError(f"unknown boundary condition {text!r}")


@dataclass
class LatticeCluster:
    sites: np.ndarray                # (N, 2) int64, in settling order
    emitted: int
    seed: int | None
    model: str
    bc: BoundaryCondition
    steps: int = 0
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def survivors(self) -> int:
        return len(self.sites)

    @property
    def occupied(self) -> set:
        return {(int(x), int(y)) for x, y in self.sites}

    def header(self) -> dict:
        h = {"model": self.model, "bc": self.bc.to_json(), "N": self.survivors,
             "emitted": self.emitted, "seed": self.seed, "steps": self.steps}
        if self.truncated:
            h["truncated"] = True
        h.update(self.meta)
        return h

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(json.dumps(self.header(), sort_keys=True) + "\n")
        for x, y in self.sites:
            buf.write(f"{x} {y}\n")
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "LatticeCluster":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty cluster file")
        head = json.loads(lines[0])
        body = [ln.split() for ln in lines[1:] if ln.strip()]
        if any(len(t) != 2 for t in body):
            raise ValueError("cluster rows must be 'x y' integer pairs")
        sites = np.array([[int(a), int(b)] for a, b in body], dtype=np.int64).reshape(-1, 2)
        if len(sites) != head["N"]:
            raise ValueError("row count does not match header N")
        known = {"model", "bc", "N", "emitted", "seed", "steps", "truncated"}
        meta = {k: v for k, v in head.items() if k not in known}
        return cls(sites, int(head["emitted"]), head.get("seed"), head["model"],
                   BoundaryCondition.from_json(head["bc"]), int(head.get("steps", 0)),
                   bool(head.get("truncated", False)), meta)

    @classmethod
    def load(cls, path) -> "LatticeCluster":
        with open(path) as fh:
            return cls.loads(fh.read())

    def raster(self, pad: int = 1):
        """Occupancy bitmap (row 0 is the top) and the lattice coords of pixel (0, 0)."""
        xs, ys = self.sites[:, 0], self.sites[:, 1]
        x0, y1 = xs.min() - pad, ys.max() + pad
        w, h = xs.max() + pad - x0 + 1, y1 - (ys.min() - pad) + 1
        img = np.zeros((h, w), dtype=np.uint8)
        img[y1 - ys, xs - x0] = 1
        return img, (int(x0), int(y1))

    def save_pbm(self, path) -> None:
        img, _ = self.raster()
        h, w = img.shape
        with open(path, "wb") as fh:
            fh.write(f"P4\n{w} {h}\n".encode())
            fh.write(np.packbits(img, axis=1).tobytes())


# --- kernels ----------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM = np.uint64(0xD1B54A32D192ED03)
_COIN_SALT = np.uint64(0x8CB92BA72F3D8DD7)


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _next(state):
    state = state + _GOLDEN
    return state, _mix(state)


@numba.njit(cache=True)
def _stream_seed(seed, k, salt):
    return _mix(seed ^ _mix(np.uint64(k) * _STREAM + salt))


@numba.njit(cache=True)
def _is_kill(x, y, code):
    if code == BC_KILL_NEG_AXIS:
        return y == 0 and x <= -1
    if code == BC_KILL_HALF_PLANE:
        return x < 0 or (x == 0 and y != 0)
    if code == BC_KILL_WEDGE:
        return not (x == 0 and y == 0) and abs(y) >= x
    return False


@numba.njit(cache=True)
def _axis_blocked(x, y, code, axis_settle):
    # positive half-axis sites that may not hold a particle under KPR rules
    return axis_settle == 0 and (code == BC_KILL_REFLECT or code == BC_KPR) and y == 0 and x >= 1


@numba.njit(cache=True)
def _resolve(x, y, d, code, p, variant, u):
    """Outcome of attempting direction d from (x, y): (status, nx, ny).

    status 0 = moved, 1 = reflected (stays), 2 = killed.
    """
    nx = x + DX[d]
    ny = y + DY[d]
    if (code == BC_KILL_REFLECT or code == BC_KPR) and ny == 0 and nx >= 1 and y != 0:
        if y == 1:
            return 1, x, y
        if code == BC_KILL_REFLECT or not (u < p):
            return 2, nx, ny
        if variant == 1:
            return 0, nx, 1
        return 0, nx, 0
    if _is_kill(nx, ny, code):
        return 2, nx, ny
    return 0, nx, ny


@numba.njit(cache=True)
def _needs_coin(x, y, d, code):
    return code == BC_KPR and y == -1 and DY[d] == 1 and x >= 1


@numba.njit(cache=True)
def _idla_kernel(occ, off, code, p, variant, axis_settle, seed, n_target,
                 sites, counters, walker, walk_cap, total_cap):
    # counters: [settled, emitted, total_steps]
    # walker:   [active, x, y, dir_state, bits, bits_left, coin_state, walk_steps]
    h, w = occ.shape
    useed = np.uint64(seed)
    while counters[0] < n_target:
        if walker[0] == 0:
            k = counters[1]
            counters[1] += 1
            walker[0] = 1
            walker[1] = 0
            walker[2] = 0
            walker[3] = np.int64(_stream_seed(useed, k, np.uint64(0)))
            walker[5] = 0
            walker[6] = np.int64(_stream_seed(useed, k, _COIN_SALT))
            walker[7] = 0
            if occ[off, off] == 0:
                occ[off, off] = 1
                sites[counters[0], 0] = 0
                sites[counters[0], 1] = 0
                counters[0] += 1
                walker[0] = 0
                continue
        x = walker[1]
        y = walker[2]
        dstate = np.uint64(walker[3])
        bits = np.uint64(walker[4])
        left = walker[5]
        cstate = np.uint64(walker[6])
        steps = walker[7]
        status = -1
        while True:
            if steps >= walk_cap:
                status = STATUS_WALK_CAP
                break
            if counters[2] >= total_cap:
                status = STATUS_TOTAL_CAP
                break
            # room check before any randomness is consumed, so a resumed
            # walk continues exactly where it stopped (a pass may move 2 rows)
            if x + off < 3 or y + off < 3 or x + off >= w - 3 or y + off >= h - 3:
                status = STATUS_GROW
                break
            if left == 0:
                dstate, bits = _next(dstate)
                left = 32
            d = np.int64(bits & np.uint64(3))
            bits = bits >> np.uint64(2)
            left -= 1
            steps += 1
            counters[2] += 1
            u = 1.0
            if _needs_coin(x, y, d, code):
                cstate, r = _next(cstate)
                u = np.float64(r >> np.uint64(11)) * (1.0 / 9007199254740992.0)
            st, nx, ny = _resolve(x, y, d, code, p, variant, u)
            if st == 1:
                continue
            if st == 2:
                status = -2
                break
            ix = nx + off
            iy = ny + off
            x = nx
            y = ny
            if occ[iy, ix] == 0 and not _axis_blocked(x, y, code, axis_settle):
                occ[iy, ix] = 1
                sites[counters[0], 0] = x
                sites[counters[0], 1] = y
                counters[0] += 1
                status = -3
                break
        if status == -2 or status == -3:
            walker[0] = 0
            continue
        walker[1] = x
        walker[2] = y
        walker[3] = np.int64(dstate)
        walker[4] = np.int64(bits)
        walker[5] = left
        walker[6] = np.int64(cstate)
        walker[7] = steps
        return status
    return STATUS_DONE


@numba.njit(cache=True)
def _rotor_init(x, y, mode, seed):
    if mode == ROTOR_RANDOM:
        h = _mix(np.uint64(seed) ^ _mix(np.uint64(x & 0xFFFFFFFF) << np.uint64(32)
                                         | np.uint64(y & 0xFFFFFFFF)))
        return np.int64(h & np.uint64(3))
    if mode == ROTOR_SYMMETRIC and y < 0:
        return 2
    return 0


@numba.njit(cache=True)
def _rotor_kernel(occ, rot, off, code, p, variant, axis_settle, mode, seed, n_target,
                  sites, counters, walker, walk_cap, total_cap):
    # walker: [active, x, y, walk_steps]; rot holds -1 for untouched sites
    h, w = occ.shape
    u = 0.0 if p < 0.5 else 1.0
    while counters[0] < n_target:
        if walker[0] == 0:
            counters[1] += 1
            walker[0] = 1
            walker[1] = 0
            walker[2] = 0
            walker[3] = 0
            if occ[off, off] == 0:
                occ[off, off] = 1
                sites[counters[0], 0] = 0
                sites[counters[0], 1] = 0
                counters[0] += 1
                walker[0] = 0
                continue
        x = walker[1]
        y = walker[2]
        steps = walker[3]
        status = -1
        while True:
            if steps >= walk_cap:
                status = STATUS_WALK_CAP
                break
            if counters[2] >= total_cap:
                status = STATUS_TOTAL_CAP
                break
            r = rot[y + off, x + off]
            if r < 0:
                r = _rotor_init(x, y, mode, seed)
            if mode == ROTOR_SYMMETRIC and y < 0:
                r = MIRROR[(MIRROR[r] + 1) & 3]
            else:
                r = (r + 1) & 3
            # out-of-room check before committing the rotor turn
            nx = x + DX[r]
            ny = y + DY[r]
            if nx + off < 1 or ny + off < 1 or nx + off >= w - 1 or ny + off >= h - 1:
                status = STATUS_GROW
                break
            rot[y + off, x + off] = r
            steps += 1
            counters[2] += 1
            st, nx, ny = _resolve(x, y, r, code, p, variant, u)
            if st == 1:
                continue
            if st == 2:
                status = -2
                break
            x = nx
            y = ny
            if occ[y + off, x + off] == 0 and not _axis_blocked(x, y, code, axis_settle):
                occ[y + off, x + off] = 1
                sites[counters[0], 0] = x
                sites[counters[0], 1] = y
                counters[0] += 1
                status = -3
                break
        if status == -2 or status == -3:
            walker[0] = 0
            continue
        walker[1] = x
        walker[2] = y
        walker[3] = steps
        return status
    return STATUS_DONE


def _grow(arr, off, fill=0):
    h = arr.shape[0]
    new = np.full((2 * h + 1, 2 * h + 1), fill, dtype=arr.dtype)
    noff = off + (h + 1) // 2
    shift = noff - off
    new[shift:shift + h, shift:shift + h] = arr
    return new, noff


def _initial_half(n: int) -> int:
    return int(2 * math.sqrt(n) + 8)


def _finish(status, sites, counters, seed, model, bc, meta, walk_cap):
    n = int(counters[0])
    cluster = LatticeCluster(sites[:n].copy(), int(counters[1]), seed, model, bc,
                             int(counters[2]), status != STATUS_DONE, meta)
    if status == STATUS_WALK_CAP:
        raise StepCapExceeded(f"a single walk exceeded {walk_cap} steps after {n} survivors", cluster)
    if status == STATUS_TOTAL_CAP:
        raise StepCapExceeded(f"total step cap reached after {n} survivors", cluster)
    return cluster


def run_idla(N: int, bc: BoundaryCondition | None = None, seed: int = 0, *,
             walk_cap: int = DEFAULT_WALK_CAP, total_cap: int | None = None,
             pass_variant: str = "land", axis_settle: bool = True,
             model: str = "IDLA") -> LatticeCluster:
    """Internal DLA from the origin with ``N`` surviving particles.

    ``walk_cap`` bounds a single walk, ``total_cap`` (optional) the whole
    run; exceeding either raises ``StepCapExceeded`` carrying the partial
    cluster.  ``pass_variant`` and ``axis_settle`` only matter for the
    reflecting rules on the positive axis.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    bc = bc or BoundaryCondition.none()
    if pass_variant not in ("land", "skip"):
        raise ValueError("pass_variant must be 'land' or 'skip'")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    half = _initial_half(N)
    occ = np.zeros((2 * half + 1, 2 * half + 1), dtype=np.uint8)
    off = half
    sites = np.zeros((N, 2), dtype=np.int64)
    counters = np.zeros(3, dtype=np.int64)
    walker = np.zeros(8, dtype=np.int64)
    p = -1.0 if bc.p is None else bc.p
    tc = np.iinfo(np.int64).max if total_cap is None else int(total_cap)
    while True:
        status = _idla_kernel(occ, off, bc.code, p, 1 if pass_variant == "skip" else 0,
                              1 if axis_settle else 0, np.uint64(seed), N, sites, counters,
                              walker, int(walk_cap), tc)
        if status != STATUS_GROW:
            break
        occ, noff = _grow(occ, off)
        off = noff
    meta = {}
    if bc.kind in ("kpr", "kill_reflect"):
        meta = {"pass_variant": pass_variant, "axis_settle": axis_settle}
    return _finish(status, sites, counters, seed, model, bc, meta, walk_cap)


def run_kpr(N: int, p: float, seed: int = 0, **kwargs) -> LatticeCluster:
    """Internal DLA with reflection from above and pass-with-probability ``p``
    from below on the positive half-axis."""
    return run_idla(N, BoundaryCondition.kpr(p), seed, **kwargs)


_ROTOR_MODES = {"north": ROTOR_NORTH, "symmetric": ROTOR_SYMMETRIC, "random": ROTOR_RANDOM}


def run_rotor_router(N: int, bc: BoundaryCondition | None = None, rotors: str = "north",
                     seed: int = 0, *, walk_cap: int = DEFAULT_WALK_CAP,
                     total_cap: int | None = None, pass_variant: str = "land",
                     axis_settle: bool = True) -> LatticeCluster:
    """Rotor-router aggregation; rotors turn N -> E -> S -> W before each move.

    ``rotors`` picks the initial state: ``north`` everywhere, ``symmetric``
    (sites below the axis start south and turn the mirrored way) or
    ``random`` (a hash of ``seed`` and the site).  Under ``kpr`` only
    ``p`` in {0, 1} is deterministic; other values are rejected.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    bc = bc or BoundaryCondition.none()
    if rotors not in _ROTOR_MODES:
        raise ValueError(f"unknown rotor initialisation {rotors!r}")
    if bc.kind == "kpr" and bc.p not in (0.0, 1.0):
        raise ValueError("rotor-router supports kpr only with p = 0 or 1")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    half = _initial_half(N)
    occ = np.zeros((2 * half + 1, 2 * half + 1), dtype=np.uint8)
    rot = np.full(occ.shape, -1, dtype=np.int8)
    off = half
    sites = np.zeros((N, 2), dtype=np.int64)
    counters = np.zeros(3, dtype=np.int64)
    walker = np.zeros(4, dtype=np.int64)
    p = -1.0 if bc.p is None else bc.p
    tc = np.iinfo(np.int64).max if total_cap is None else int(total_cap)
    while True:
        status = _rotor_kernel(occ, rot, off, bc.code, p, 1 if pass_variant == "skip" else 0,
                               1 if axis_settle else 0, _ROTOR_MODES[rotors], np.uint64(seed),
                               N, sites, counters, walker, int(walk_cap), tc)
        if status != STATUS_GROW:
            break
        occ, noff = _grow(occ, off)
        rot, _ = _grow(rot, off, fill=-1)
        off = noff
    meta = {"rotors": rotors}
    return _finish(status, sites, counters, seed if rotors == "random" else None,
                   "RotorRouter", bc, meta, walk_cap)


# --- divisible sandpile -------------------------------------------------------

@dataclass
class SandpileState:
    mass: np.ndarray          # square array, site (x, y) at [y + offset, x + offset]
    offset: int
    total_injected: float
    absorbed_total: float
    sweeps: int
    eps: float
    bc: BoundaryCondition

    def occupied_sites(self) -> np.ndarray:
        iy, ix = np.nonzero(self.mass >= 1.0 - self.eps)
        return np.column_stack([ix - self.offset, iy - self.offset]).astype(np.int64)

    def to_cluster(self) -> LatticeCluster:
        sites = self.occupied_sites()
        order = np.lexsort((sites[:, 0], sites[:, 1]))
        meta = {"total_mass": self.total_injected, "absorbed": self.absorbed_total,
                "eps": self.eps, "sweeps": self.sweeps}
        return LatticeCluster(sites[order], len(sites), None, "DivisibleSandpile", self.bc, 0, False, meta)


@numba.njit(cache=True)
def _sandpile_sweeps(mass, off, code, eps, max_sweeps, out):
    # out: [absorbed, sweeps, status]; status 1 = needs more room
    h, w = mass.shape
    lo = 1
    absorbed = out[0]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        worst = 0.0
        for iy in range(lo, h - lo):
            for ix in range(lo, w - lo):
                m = mass[iy, ix]
                if m > 1.0:
                    if ix < 3 or iy < 3 or ix >= w - 3 or iy >= h - 3:
                        # grow before touching this site so no mass goes missing
                        out[0] = absorbed
                        out[1] += sweeps
                        out[2] = 1.0
                        return
                    ex = m - 1.0
                    if ex > worst:
                        worst = ex
                    mass[iy, ix] = 1.0
                    q = 0.25 * ex
                    for d in range(4):
                        jx = ix + DX[d]
                        jy = iy + DY[d]
                        if _is_kill(jx - off, jy - off, code):
                            absorbed += q
                        else:
                            mass[jy, jx] += q
        if worst < eps:
            break
    out[0] = absorbed
    out[1] += sweeps
    out[2] = 0.0 if sweeps < max_sweeps else 2.0


def run_divisible_sandpile(total_mass: float, bc: BoundaryCondition | None = None,
                           eps: float = 1e-6, max_sweeps: int = 10**6) -> SandpileState:
    """Topple mass above 1 equally to the four neighbours until the largest
    excess is below ``eps``; mass sent to killing sites is deleted."""
    if not total_mass > 0:
        raise ValueError("total_mass must be positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    bc = bc or BoundaryCondition.none()
    if bc.kind in ("kill_reflect", "kpr"):
        raise ValueError("the sandpile supports killing rules only")
    half = _initial_half(int(math.ceil(total_mass)))
    mass = np.zeros((2 * half + 1, 2 * half + 1))
    off = half
    mass[off, off] = total_mass
    out = np.zeros(3)
    while True:
        _sandpile_sweeps(mass, off, bc.code, eps, max_sweeps - int(out[1]), out)
        if out[2] != 1.0:
            break
        mass, off = _grow(mass, off, fill=0.0)
    if out[2] == 2.0:
        raise RuntimeError(f"sandpile did not settle within {max_sweeps} sweeps")
    return SandpileState(mass, off, float(total_mass), float(out[0]), int(out[1]), eps, bc)


# --- emission scaling ---------------------------------------------------------

@dataclass
class BeurlingFit:
    Ns: list
    mean_emitted: list
    stderr: list
    slope: float
    slope_stderr: float
    intercept: float

    @property
    def ci95(self) -> tuple[float, float]:
        return self.slope - 1.96 * self.slope_stderr, self.slope + 1.96 * self.slope_stderr


def derived_seed(base: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(base), *map(int, keys)]).generate_state(1, np.uint64)[0])


def _emitted(job):
    n, bc, model, seed = job
    if model == "idla":
        return run_idla(n, bc, seed).emitted
    if model == "rotor":
        return run_rotor_router(n, bc, "random", seed).emitted
    raise ValueError(f"unknown model {model!r}")


def beurling_fit(Ns, seeds: int, bc: BoundaryCondition | None = None, model: str = "idla",
                 base_seed: int = 0, workers: int = 1) -> BeurlingFit:
    """Least-squares slope of ``log(mean emitted)`` against ``log N``.

    Run ``j`` at size ``n`` uses ``derived_seed(base_seed, n, j)``; with
    ``workers > 1`` runs are spread over processes, results are identical.
    """
    Ns = sorted(int(n) for n in Ns)
    if len(set(Ns)) < 3:
        raise ValueError("need at least 3 distinct N values")
    if seeds < 3:
        raise ValueError("need at least 3 seeds per N")
    if model not in ("idla", "rotor"):
        raise ValueError(f"unknown model {model!r}")
    bc = bc or BoundaryCondition.none()
    jobs = [(n, bc, model, derived_seed(base_seed, n, j)) for n in Ns for j in range(seeds)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            emitted = list(pool.map(_emitted, jobs))
    else:
        emitted = [_emitted(j) for j in jobs]
    means, errs = [], []
    for i, n in enumerate(Ns):
        em = np.asarray(emitted[i * seeds:(i + 1) * seeds], dtype=float)
        means.append(float(em.mean()))
        errs.append(float(em.std(ddof=1) / math.sqrt(len(em))))
    x, y = np.log(Ns), np.log(means)
    coef, cov = np.polyfit(x, y, 1, cov="unscaled")
    resid = y - np.polyval(coef, x)
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    se = math.sqrt(max(cov[0, 0] * s2, 0.0))
    return BeurlingFit(Ns, means, errs, float(coef[0]), se, float(coef[1]))
