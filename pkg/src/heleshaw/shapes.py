"""Unit-area normalisation of clusters and map regions, and shape metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

from .maps import ConformalMapModel, boundary_sample


class ShapeError(ValueError):
    """Input cannot be turned into a single simple region."""


@dataclass
class NormalizedShape:
    """Closed polyline of a unit-area region (last vertex not repeated)."""

    boundary: np.ndarray
    area: float = 1.0
    origin_inside: bool = True
    scale: float = 1.0          # factor applied to the raw coordinates
    label: str = ""

    @property
    def polygon(self) -> Polygon:
        """Shapely polygon; zero-width slits are removed."""
        return Polygon(self.boundary).buffer(0)

    def translated(self, dx: float, dy: float) -> "NormalizedShape":
        return NormalizedShape(self.boundary + np.array([dx, dy]), self.area,
                               self.origin_inside, self.scale, self.label)


def shoelace_area(ring: np.ndarray) -> float:
    """Signed area of a closed ring (positive when counterclockwise)."""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _from_ring(ring: np.ndarray, label: str) -> NormalizedShape:
    ring = np.asarray(ring, dtype=float)
    if np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    area = shoelace_area(ring)
    if area < 0:
        ring, area = ring[::-1].copy(), -area
    if not area > 0:
        raise ShapeError("ring encloses no area")
    scale = 1.0 / math.sqrt(area)
    ring = ring * scale
    inside = bool(Polygon(ring).buffer(0).covers(shapely.Point(0.0, 0.0))) or \
        float(shapely.distance(shapely.Point(0.0, 0.0), LineString(np.vstack([ring, ring[:1]])))) < 1e-12
    return NormalizedShape(ring, shoelace_area(ring), inside, scale, label)


def cluster_polygon(cluster) -> Polygon:
    """Union of the unit cells centred on the sites; holes are dropped."""
    sites = np.asarray(getattr(cluster, "sites", cluster), dtype=float).reshape(-1, 2)
    boxes = shapely.box(sites[:, 0] - 0.5, sites[:, 1] - 0.5, sites[:, 0] + 0.5, sites[:, 1] + 0.5)
    union = shapely.coverage_union_all(boxes)
    if not isinstance(union, Polygon):
        raise ShapeError("cluster is not connected")
    return Polygon(union.exterior)


def normalize_cluster(cluster, mirror: bool = False, min_sites: int = 100) -> NormalizedShape:
    """Outer contour of the cell union, scaled to unit enclosed area.

    Without holes the enclosed area is ``N`` and the scale is ``N**-1/2``.
    ``mirror`` reflects ``x -> -x`` (only for comparison against images
    drawn with the opposite orientation).
    """
    sites = np.asarray(getattr(cluster, "sites", cluster)).reshape(-1, 2)
    if len(sites) < min_sites:
        raise ShapeError(f"need at least {min_sites} sites, got {len(sites)}")
    poly = cluster_polygon(sites)
    if mirror:
        poly = shapely.affinity.scale(poly, xfact=-1.0, yfact=1.0, origin=(0, 0))
    model = getattr(cluster, "model", "cluster")
    return _from_ring(np.asarray(poly.exterior.coords), f"{model} N={len(sites)}")


def map_ring(model: ConformalMapModel, n: int) -> np.ndarray:
    """Boundary vertices of the map region, slits included.

    Slits (killing or reflecting segments with the region on both sides)
    appear as zero-width spikes; they add nothing to the shoelace area and
    the even-odd rasteriser, but stay part of the boundary for distances.
    """
    _, pts = boundary_sample(model, n)
    return np.column_stack([pts.real, pts.imag])


def normalize_map_region(model: ConformalMapModel, b: float, n: int = 4096) -> NormalizedShape:
    """Boundary polygon of ``model``'s region scaled to unit area."""
    if n < 256:
        raise ShapeError("n must be at least 256")
    if not math.isclose(model.angle_param, b):
        raise ShapeError("map sector does not match b")
    return _from_ring(map_ring(model, n), f"{model.kind.value} b={b:g}")


def majority_cluster(clusters) -> np.ndarray:
    """Sites occupied in at least half of the runs (largest 4-connected piece)."""
    from collections import Counter

    clusters = list(clusters)
    counts = Counter()
    for c in clusters:
        counts.update(map(tuple, np.asarray(getattr(c, "sites", c)).tolist()))
    need = math.ceil(len(clusters) / 2)
    keep = {s for s, k in counts.items() if k >= need}
    start = (0, 0) if (0, 0) in keep else next(iter(keep))
    seen, stack = {start}, [start]
    while stack:
        x, y = stack.pop()
        for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if q in keep and q not in seen:
                seen.add(q)
                stack.append(q)
    return np.array(sorted(seen), dtype=np.int64)


def region_sites(shape: NormalizedShape, n_sites: int) -> np.ndarray:
    """Lattice sites whose centres fall inside ``shape`` blown up to area ``n_sites``."""
    k = math.sqrt(n_sites)
    ring = shape.boundary * k
    lo = np.floor(ring.min(axis=0)) - 1
    hi = np.ceil(ring.max(axis=0)) + 1
    side = float((hi - lo).max()) + 1
    n = int(side)
    # pixel centres at integer points: start half a pixel below lo
    img = rasterize(NormalizedShape(ring), (lo[0] - 0.5, lo[1] - 0.5, float(n)), n)
    iy, ix = np.nonzero(img)
    return np.column_stack([ix + lo[0], iy + lo[1]]).astype(np.int64)


# --- metrics ---------------------------------------------------------------

@numba.njit(cache=True)
def _fill_even_odd(xs, ys, x0, y0, h, ny, nx, out):
    # pixel (i, j) has centre (x0 + (j + 1/2) h, y0 + (i + 1/2) h)
    m = xs.shape[0]
    cross = np.empty(m)
    for i in range(ny):
        yc = y0 + (i + 0.5) * h
        k = 0
        for e in range(m):
            ya = ys[e]
            yb = ys[(e + 1) % m]
            if (ya <= yc) != (yb <= yc):
                xa = xs[e]
                xb = xs[(e + 1) % m]
                cross[k] = xa + (yc - ya) * (xb - xa) / (yb - ya)
                k += 1
        c = np.sort(cross[:k])
        for q in range(0, k - 1, 2):
            j0 = int(math.ceil((c[q] - x0) / h - 0.5))
            j1 = int(math.floor((c[q + 1] - x0) / h - 0.5))
            if j0 < 0:
                j0 = 0
            if j1 > nx - 1:
                j1 = nx - 1
            for j in range(j0, j1 + 1):
                out[i, j] = 1


def rasterize(shape: NormalizedShape, bbox, n: int) -> np.ndarray:
    """Boolean ``n x n`` occupancy of pixel centres in the square ``bbox``."""
    x0, y0, side = bbox
    h = side / n
    out = np.zeros((n, n), dtype=np.uint8)
    b = np.ascontiguousarray(shape.boundary, dtype=float)
    _fill_even_odd(b[:, 0].copy(), b[:, 1].copy(), x0, y0, h, n, n, out)
    return out.astype(bool)


def _common_box(a: NormalizedShape, b: NormalizedShape):
    pts = np.vstack([a.boundary, b.boundary])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = float((hi - lo).max()) * 1.02
    mid = 0.5 * (lo + hi)
    return float(mid[0] - side / 2), float(mid[1] - side / 2), side


def _raster_symdiff(a, b, n):
    box = _common_box(a, b)
    ra, rb = rasterize(a, box, n), rasterize(b, box, n)
    return float(np.count_nonzero(ra ^ rb)) * (box[2] / n) ** 2


def symmetric_difference_fraction(a: NormalizedShape, b: NormalizedShape, grid: int = 1024,
                                  tol: float = 1e-3, max_grid: int = 8192,
                                  full_output: bool = False):
    """Area of ``a`` xor ``b`` on a common pixel grid, doubled until stable to ``tol``."""
    n = grid
    prev = _raster_symdiff(a, b, n)
    while n < max_grid:
        n *= 2
        cur = _raster_symdiff(a, b, n)
        done = abs(cur - prev) < tol
        prev = cur
        if done:
            break
    return (prev, n) if full_output else prev


def _samples(ring: np.ndarray) -> np.ndarray:
    nxt = np.roll(ring, -1, axis=0)
    return np.vstack([ring, 0.5 * (ring + nxt)])


def hausdorff_distance(a: NormalizedShape, b: NormalizedShape) -> float:
    """Symmetric Hausdorff distance between the two boundary polylines,
    sampled at vertices and edge midpoints."""
    la = LineString(np.vstack([a.boundary, a.boundary[:1]]))
    lb = LineString(np.vstack([b.boundary, b.boundary[:1]]))
    da = shapely.distance(shapely.points(_samples(a.boundary)), lb).max()
    db = shapely.distance(shapely.points(_samples(b.boundary)), la).max()
    return float(max(da, db))


@dataclass
class ComparisonReport:
    shape_a: str
    shape_b: str
    sym_diff: float
    hausdorff: float
    grid: int
    seeds: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def compare_shapes(a: NormalizedShape, b: NormalizedShape, seeds=(), grid: int = 1024) -> ComparisonReport:
    sd, n = symmetric_difference_fraction(a, b, grid=grid, full_output=True)
    return ComparisonReport(a.label, b.label, sd, hausdorff_distance(a, b), n, list(seeds))


def overlay_svg(a: NormalizedShape, b: NormalizedShape, size: int = 600) -> str:
    """Two outlined polygons (``shape-a`` and ``shape-b``) in one SVG document."""
    pts = np.vstack([a.boundary, b.boundary])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float((hi - lo).max()) * 1.05
    pad = 0.025 * span

    def path(shape, cls, color):
        xy = (shape.boundary - lo + pad) * (size / span)
        xy[:, 1] = size - xy[:, 1]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in xy)
        return f'<polygon class="{cls}" points="{coords}" fill="none" stroke="{color}" stroke-width="1"/>'

    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
            f'viewBox="0 0 {size} {size}">\n'
            f'{path(a, "shape-a", "#1f77b4")}\n{path(b, "shape-b", "#d62728")}\n</svg>\n')
