"""
Core Geometry

Implicit domains, boundary point clouds, discrete measures, Hausdorff
estimates and the gallery of canonical test domains.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma

from .exceptions import GMTInputError
from .utils import as_points, read_points_csv, write_points_csv

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]
BoxTest = Callable[[np.ndarray, np.ndarray], np.ndarray]

ORACLE_TOL = 1e-9


@dataclass(frozen=True)
class Ball:
    """Euclidean ball B(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise GMTInputError(f"Ball radius must be positive, got {self.radius}")

    def dilate(self, lam: float) -> "Ball":
        return Ball(self.center, lam * self.radius)

    def contains(self, points: np.ndarray, closed: bool = True) -> np.ndarray:
        d = np.linalg.norm(as_points(points) - self.center, axis=1)
        return d <= self.radius if closed else d < self.radius


@dataclass(frozen=True, eq=False)
class ImplicitDomain:
    """Open set given by a vectorized signed-distance oracle.

    ``sdist`` maps an (n, D) array to (n,) values, negative inside, positive
    outside, and its magnitude never exceeds the true distance to the boundary.
    ``project``, ``box_inside`` and ``box_meets_boundary`` are optional exact
    oracles; generic fallbacks are used when they are missing.
    """

    dimension: int
    sdist: Oracle
    bbox: Tuple[np.ndarray, np.ndarray]
    diam_boundary: float = math.inf
    name: str = "domain"
    nta_constant: Optional[float] = None
    project: Optional[Oracle] = None
    box_inside: Optional[BoxTest] = None
    box_meets_boundary: Optional[BoxTest] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise GMTInputError("Ambient dimension must be at least 2")
        lo, hi = (np.asarray(b, dtype=float) for b in self.bbox)
        if lo.shape != (self.dimension,) or hi.shape != (self.dimension,):
            raise GMTInputError("Bounding box does not match the dimension")
        object.__setattr__(self, "bbox", (lo, hi))

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.diam_boundary)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.sdist(as_points(x, self.dimension)), dtype=float)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.signed_distance(x) < 0.0

    def closest_boundary_point(self, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        pts = as_points(x, self.dimension)
        if self.project is not None:
            return np.asarray(self.project(pts), dtype=float)
        return newton_project(self.sdist, pts, tol=tol)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite sample of a set; ``source`` is ``boundary`` or ``user``."""

    points: np.ndarray
    mesh: float
    source: str = "user"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise GMTInputError(f"Point cloud must be 2-dimensional, got {pts.shape}")
        if not self.mesh > 0:
            raise GMTInputError(f"Mesh must be positive, got {self.mesh}")
        if self.source not in ("boundary", "user"):
            raise GMTInputError(f"Unknown point cloud source '{self.source}'")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def subset(self, indices: Sequence[int]) -> "PointCloud":
        return PointCloud(self.points[np.asarray(indices, dtype=int)], self.mesh, self.source)

    def kdtree(self) -> cKDTree:
        return cKDTree(self.points)

    def to_csv(self, path: Any, weights: Optional[np.ndarray] = None) -> None:
        write_points_csv(path, self.points, weights)

    @classmethod
    def from_csv(cls, path: Any, mesh: Optional[float] = None) -> "PointCloud":
        """Load a cloud; the mesh defaults to the median nearest-neighbour gap."""
        points, _ = read_points_csv(path)
        if mesh is None:
            mesh = _median_spacing(points)
        return cls(points, mesh, "user")


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Nonnegative weights on the points of a cloud."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise GMTInputError("Measure weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    def mass(self, indices: Union[Sequence[int], np.ndarray]) -> float:
        """Exact sum over the given indices, in sorted order."""
        idx = np.asarray(indices)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        if idx.size == 0:
            return 0.0
        return math.fsum(self.weights[np.sort(idx.astype(int))])

    @classmethod
    def uniform(cls, n: int, total: float = 1.0) -> "DiscreteMeasure":
        return cls(np.full(n, total / n) if n else np.zeros(0))

    @classmethod
    def from_csv(cls, path: Any) -> "DiscreteMeasure":
        _, weights = read_points_csv(path)
        return cls(weights)


class HausdorffEstimate(float):
    """Float estimate carrying the number of cells used and an empty-set flag."""

    n_cells: int
    empty: bool

    def __new__(cls, value: float, n_cells: int = 0, empty: bool = False) -> "HausdorffEstimate":
        obj = super().__new__(cls, value)
        obj.n_cells = n_cells
        obj.empty = empty
        return obj


def _median_spacing(points: np.ndarray) -> float:
    if len(points) < 2:
        return 1.0
    d, _ = cKDTree(points).query(points, k=2)
    gaps = d[:, 1][d[:, 1] > 0]
    return float(np.median(gaps)) if gaps.size else 1.0


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (1 for k = 0)."""
    return float(math.pi ** (k / 2.0) / gamma(k / 2.0 + 1.0))


def numeric_gradient(sdist: Oracle, x: np.ndarray, step: float = 1e-7) -> np.ndarray:
    """Central-difference gradient of an oracle at each row of ``x``."""
    n, dim = x.shape
    grad = np.empty((n, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = step
        grad[:, k] = (sdist(x + e) - sdist(x - e)) / (2.0 * step)
    return grad


def newton_project(
    sdist: Oracle, x: np.ndarray, tol: float = 1e-10, max_iter: int = 40
) -> np.ndarray:
    """Move points onto the zero set with steps x - s(x) grad s / |grad s|^2."""
    x = np.array(x, dtype=float)
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        s = np.asarray(sdist(x[active]), dtype=float)
        done = np.abs(s) <= tol
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
        s = s[~done]
        pts = x[active]
        g = numeric_gradient(sdist, pts)
        gn2 = np.einsum("ij,ij->i", g, g)
        gn2[gn2 < 1e-24] = 1.0
        x[active] = pts - (s / gn2)[:, None] * g
    return x


def _box_corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    dim = lo.shape[1]
    offsets = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))
    return lo[:, None, :] + offsets[None, :, :] * (hi - lo)[:, None, :]


def _split_boxes(lo: np.ndarray, hi: np.ndarray, owner: np.ndarray) -> Tuple[np.ndarray, ...]:
    dim = lo.shape[1]
    mid = (lo + hi) / 2.0
    offsets = np.array(list(itertools.product((0, 1), repeat=dim)), dtype=bool)
    new_lo = np.where(offsets[None], mid[:, None, :], lo[:, None, :]).reshape(-1, dim)
    new_hi = np.where(offsets[None], hi[:, None, :], mid[:, None, :]).reshape(-1, dim)
    return new_lo, new_hi, np.repeat(owner, len(offsets))


def generic_box_inside(
    sdist: Oracle, lo: np.ndarray, hi: np.ndarray, depth: int = 4, tol: float = ORACLE_TOL
) -> np.ndarray:
    """Certify closed boxes inside the open set by recursive subdivision.

    A sub-box is certified when -sdist(center) exceeds its half-diagonal; any
    corner with sdist >= -tol rules the box out. Boxes still undecided after
    ``depth`` subdivisions are reported as not inside.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    failed = np.zeros(len(lo), dtype=bool)
    owner = np.arange(len(lo))
    for level in range(depth + 1):
        if len(lo) == 0:
            break
        corners = _box_corners(lo, hi)
        cs = sdist(corners.reshape(-1, lo.shape[1])).reshape(len(lo), -1)
        hits = np.any(cs >= -tol, axis=1)
        failed[owner[hits]] = True
        center = (lo + hi) / 2.0
        half_diag = np.linalg.norm(hi - lo, axis=1) / 2.0
        certified = -sdist(center) > half_diag
        keep = ~certified & ~failed[owner]
        lo, hi, owner = lo[keep], hi[keep], owner[keep]
        if level < depth and len(lo):
            lo, hi, owner = _split_boxes(lo, hi, owner)
    failed[owner] = True
    return ~failed


def generic_box_meets_boundary(
    sdist: Oracle, lo: np.ndarray, hi: np.ndarray, depth: int = 3, tol: float = ORACLE_TOL
) -> np.ndarray:
    """Decide whether closed boxes meet the zero set; undecided counts as meeting."""
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    found = np.zeros(len(lo), dtype=bool)
    owner = np.arange(len(lo))
    for level in range(depth + 1):
        if len(lo) == 0:
            break
        corners = _box_corners(lo, hi)
        cs = sdist(corners.reshape(-1, lo.shape[1])).reshape(len(lo), -1)
        mixed = (cs.min(axis=1) <= tol) & (cs.max(axis=1) >= -tol)
        found[owner[mixed]] = True
        center = (lo + hi) / 2.0
        half_diag = np.linalg.norm(hi - lo, axis=1) / 2.0
        far = np.abs(sdist(center)) > half_diag
        keep = ~far & ~found[owner]
        lo, hi, owner = lo[keep], hi[keep], owner[keep]
        if level < depth and len(lo):
            lo, hi, owner = _split_boxes(lo, hi, owner)
    found[owner] = True
    return found


def box_inside(domain: ImplicitDomain, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vectorized test of closed boxes [lo, hi] against the open domain."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    if domain.box_inside is not None:
        return np.asarray(domain.box_inside(lo, hi), dtype=bool)
    return generic_box_inside(domain.sdist, lo, hi)


def box_meets_boundary(domain: ImplicitDomain, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    if domain.box_meets_boundary is not None:
        return np.asarray(domain.box_meets_boundary(lo, hi), dtype=bool)
    return generic_box_meets_boundary(domain.sdist, lo, hi)


def signed_distance(domain: ImplicitDomain, x: Any) -> Union[float, np.ndarray]:
    """Signed distance of one point (returns float) or of an (n, D) array."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise GMTInputError("Signed distance needs finite input")
    values = domain.signed_distance(arr)
    return float(values[0]) if arr.ndim == 1 else values


def sample_boundary(
    domain: ImplicitDomain, h: float, tol: float = 1e-8, max_cells: int = 32
) -> PointCloud:
    """Sample the boundary inside the bounding box as an h-net.

    Cells of side h whose centers lie within half a diagonal of the boundary are
    found by coarse-to-fine subdivision, projected onto the zero set and thinned
    on an h/4 grid.
    """
    if not h > 0:
        raise GMTInputError(f"Mesh h must be positive, got {h}")
    lo, hi = domain.bbox
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise GMTInputError("Boundary sampling needs a finite bounding box")

    dim = domain.dimension
    extent = float(np.max(hi - lo))
    levels = max(0, int(math.ceil(math.log2(max(extent / (h * max_cells), 1.0)))))
    size = h * 2 ** levels

    axes = [np.arange(lo[k], hi[k], size) for k in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cell_lo = np.stack([m.ravel() for m in mesh], axis=1)
    for _ in range(levels + 1):
        centers = cell_lo + size / 2.0
        near = np.abs(domain.sdist(centers)) <= size * math.sqrt(dim) / 2.0
        cell_lo = cell_lo[near]
        if size <= h * (1 + 1e-12) or len(cell_lo) == 0:
            break
        offsets = np.array(list(itertools.product((0.0, 1.0), repeat=dim))) * (size / 2.0)
        cell_lo = (cell_lo[:, None, :] + offsets[None]).reshape(-1, dim)
        size /= 2.0
    logger.debug(f"{domain.name}: {len(cell_lo)} boundary cells at mesh {size:g}")

    if len(cell_lo) == 0:
        logger.warning(f"No boundary of '{domain.name}' inside its bounding box")
        return PointCloud(np.zeros((0, dim)), h, "boundary")

    pts = domain.closest_boundary_point(cell_lo + size / 2.0)
    ok = np.abs(domain.sdist(pts)) <= tol
    ok &= np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12), axis=1)
    pts = pts[ok]
    if len(pts) == 0:
        logger.warning(f"Projection onto the boundary of '{domain.name}' failed everywhere")
        return PointCloud(np.zeros((0, dim)), h, "boundary")

    keys = np.floor(pts / (h / 4.0)).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    pts = pts[np.sort(first)]
    order = np.lexsort(pts.T[::-1])
    logger.info(f"Sampled {len(pts)} boundary points of '{domain.name}' at h={h:g}")
    return PointCloud(pts[order], h, "boundary")


def hausdorff_estimate(
    F: Any, d: int, h: float, method: str = "cells"
) -> HausdorffEstimate:
    """Estimate the d-dimensional measure of a finite point set at mesh h.

    ``cells`` counts grid cells of side h meeting F and multiplies by h^d.
    ``minkowski`` measures the h-neighbourhood of F on a fine grid and divides
    by the volume of a (D-d)-ball of radius h; it does not overcount oblique
    curves the way axis-aligned cells do.
    """
    if not h > 0:
        raise GMTInputError(f"Mesh h must be positive, got {h}")
    pts = np.asarray(F, dtype=float)
    if pts.size == 0:
        logger.warning("Hausdorff estimate of an empty set")
        return HausdorffEstimate(0.0, 0, empty=True)
    pts = as_points(pts)
    dim = pts.shape[1]
    if not 0 <= d <= dim:
        raise GMTInputError(f"Dimension d={d} outside [0, {dim}]")

    keys = np.unique(np.floor(pts / h).astype(np.int64), axis=0)
    if method == "cells":
        return HausdorffEstimate(len(keys) * h ** d, len(keys))
    if method != "minkowski":
        raise GMTInputError(f"Unknown Hausdorff estimation method '{method}'")

    sub = 8 if dim <= 2 else 4
    g = h / sub
    neigh = np.array(list(itertools.product((-1, 0, 1), repeat=dim)), dtype=np.int64)
    cells = np.unique((keys[:, None, :] + neigh[None]).reshape(-1, dim), axis=0)
    fine = np.array(list(itertools.product(range(sub), repeat=dim)), dtype=float)
    tree = cKDTree(pts)
    count = 0
    for start in range(0, len(cells), 4096):
        block = cells[start:start + 4096].astype(float) * h
        grid = (block[:, None, :] + (fine[None] + 0.5) * g).reshape(-1, dim)
        dist, _ = tree.query(grid, k=1, distance_upper_bound=h * (1 + 1e-12))
        count += int(np.count_nonzero(dist <= h))
    volume = count * g ** dim
    value = volume / (unit_ball_volume(dim - d) * h ** (dim - d))
    return HausdorffEstimate(value, len(keys))


def hausdorff_weights(cloud: PointCloud, d: int, h: Optional[float] = None) -> DiscreteMeasure:
    """H^d-surrogate weights: each occupied h-cell carries h^d split evenly."""
    h = cloud.mesh if h is None else h
    if len(cloud) == 0:
        return DiscreteMeasure(np.zeros(0))
    keys = np.floor(cloud.points / h).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).ravel()
    return DiscreteMeasure(h ** d / counts[inverse])


def lipschitz_violation(
    domain: ImplicitDomain, n_pairs: int = 1000, seed: int = 0, scale: float = 1.0
) -> float:
    """Largest |s(x)-s(y)| - |x-y| over random pairs near the bounding box."""
    rng = np.random.default_rng(seed)
    lo, hi = domain.bbox
    x = rng.uniform(lo, hi, size=(n_pairs, domain.dimension))
    y = x + rng.normal(scale=scale, size=x.shape) * rng.uniform(0, 1, size=(n_pairs, 1))
    gap = np.abs(domain.sdist(x) - domain.sdist(y)) - np.linalg.norm(x - y, axis=1)
    return float(gap.max())


# -- gallery ---------------------------------------------------------------


def _norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=1)


def _box_sdf(x: np.ndarray, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    q = np.abs(x - center) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(q.max(axis=1), 0.0)
    return outside + inside


def _cube_bbox(center: np.ndarray, half: float) -> Tuple[np.ndarray, np.ndarray]:
    return center - half, center + half


def ball(radius: float = 1.0, dimension: int = 2, center: Optional[Sequence[float]] = None) -> ImplicitDomain:
    if not radius > 0:
        raise GMTInputError("Ball radius must be positive")
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float)

    def sdist(x: np.ndarray) -> np.ndarray:
        return _norm(x - c) - radius

    def project(x: np.ndarray) -> np.ndarray:
        v = x - c
        n = _norm(v)
        zero = n == 0
        v[zero] = np.eye(dimension)[0]
        n[zero] = 1.0
        return c + radius * v / n[:, None]

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        far = np.maximum(np.abs(lo - c), np.abs(hi - c))
        return _norm(far) < radius

    def meets(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        near = np.clip(c, lo, hi) - c
        far = np.maximum(np.abs(lo - c), np.abs(hi - c))
        return (_norm(near) <= radius) & (_norm(far) >= radius)

    return ImplicitDomain(
        dimension, sdist, _cube_bbox(c, 1.25 * radius), 2.0 * radius,
        "ball", 2.0, project, inside, meets, {"radius": radius},
    )


def half_space(dimension: int = 2, extent: float = 4.0) -> ImplicitDomain:
    """{x : x_last > 0}."""

    def sdist(x: np.ndarray) -> np.ndarray:
        return -x[:, -1]

    def project(x: np.ndarray) -> np.ndarray:
        p = np.array(x, dtype=float)
        p[:, -1] = 0.0
        return p

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return lo[:, -1] > 0.0

    def meets(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return (lo[:, -1] <= 0.0) & (hi[:, -1] >= 0.0)

    lo = np.full(dimension, -extent)
    hi = np.full(dimension, extent)
    return ImplicitDomain(
        dimension, sdist, (lo, hi), math.inf, "half_space", 2.0, project, inside, meets,
        {"extent": extent},
    )


def slab(eps: float = 2.0 ** -10, dimension: int = 2, extent: float = 4.0) -> ImplicitDomain:
    """{0 < x_last < eps}."""
    if not eps > 0:
        raise GMTInputError("Slab thickness must be positive")

    def sdist(x: np.ndarray) -> np.ndarray:
        return np.maximum(-x[:, -1], x[:, -1] - eps)

    def project(x: np.ndarray) -> np.ndarray:
        p = np.array(x, dtype=float)
        p[:, -1] = np.where(x[:, -1] < eps / 2.0, 0.0, eps)
        return p

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return (lo[:, -1] > 0.0) & (hi[:, -1] < eps)

    lo = np.full(dimension, -extent)
    hi = np.full(dimension, extent)
    lo[-1], hi[-1] = -eps, 2.0 * eps
    return ImplicitDomain(
        dimension, sdist, (lo, hi), math.inf, "slab", None, project, inside, None,
        {"eps": eps},
    )


def lipschitz_graph(slope: float = 0.5, period: float = 1.0, extent: float = 2.0, window: int = 8) -> ImplicitDomain:
    """Region above the triangle wave of the given slope in R^2."""
    if slope < 0 or not period > 0:
        raise GMTInputError("Graph slope must be >= 0 and period > 0")
    half = period / 2.0
    clip = (window - 1) * half

    def f(x: np.ndarray) -> np.ndarray:
        u = np.mod(x, period)
        return slope * np.where(u <= half, u, period - u)

    def _nearest(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        base = np.floor(x[:, 0] / half)
        best_d = np.full(len(x), np.inf)
        best_p = np.zeros_like(x)
        for k in range(-window, window + 1):
            a0 = (base + k) * half
            a = np.stack([a0, f(a0)], axis=1)
            b = np.stack([a0 + half, f(a0 + half)], axis=1)
            ab = b - a
            t = np.clip(np.einsum("ij,ij->i", x - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
            p = a + t[:, None] * ab
            d = _norm(x - p)
            better = d < best_d
            best_d[better] = d[better]
            best_p[better] = p[better]
        return best_d, best_p

    def sdist(x: np.ndarray) -> np.ndarray:
        d, _ = _nearest(x)
        sign = np.where(x[:, 1] > f(x[:, 0]), -1.0, 1.0)
        return sign * np.minimum(d, clip)

    def project(x: np.ndarray) -> np.ndarray:
        return _nearest(x)[1]

    amp = slope * half
    lo = np.array([-extent, -extent / 2.0])
    hi = np.array([extent, amp + extent / 2.0])
    return ImplicitDomain(
        2, sdist, (lo, hi), math.inf, "lipschitz_graph", None, project, None, None,
        {"slope": slope, "period": period},
    )


def perforated_half_space(m: int = 3, radius_exponent: int = 10, extent: float = 1.0) -> ImplicitDomain:
    """Upper half-space of R^3 minus the closed balls
    B((i 2^-n, j 2^-n, 2^-n), 2^(-n-radius_exponent)) for 0 <= n <= m."""
    if m < 0:
        raise GMTInputError(f"Perforation depth must be >= 0, got {m}")

    def sdist(x: np.ndarray) -> np.ndarray:
        value = -x[:, 2]
        for n in range(m + 1):
            s = 2.0 ** -n
            c = np.stack([np.round(x[:, 0] / s) * s, np.round(x[:, 1] / s) * s, np.full(len(x), s)], axis=1)
            value = np.maximum(value, 2.0 ** (-n - radius_exponent) - _norm(x - c))
        return value

    lo = np.array([-extent, -extent, -0.25])
    hi = np.array([extent, extent, 1.75])
    return ImplicitDomain(
        3, sdist, (lo, hi), math.inf, "perforated_half_space", None, None, None, None,
        {"m": m, "radius_exponent": radius_exponent},
    )


def cube_complement(side: float = 1.0, dimension: int = 2) -> ImplicitDomain:
    """R^D minus the closed cube [-side/2, side/2]^D."""
    half = np.full(dimension, side / 2.0)
    center = np.zeros(dimension)

    def sdist(x: np.ndarray) -> np.ndarray:
        return -_box_sdf(x, center, half)

    def project(x: np.ndarray) -> np.ndarray:
        p = np.clip(x, -half, half)
        interior = np.all(np.abs(x) < half, axis=1)
        if interior.any():
            xi = x[interior]
            axis = np.argmax(np.abs(xi) / half, axis=1)
            pi = xi.copy()
            rows = np.arange(len(xi))
            pi[rows, axis] = np.where(xi[rows, axis] >= 0, half[axis], -half[axis])
            p[interior] = pi
        return p

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return np.any((lo > half) | (hi < -half), axis=1)

    return ImplicitDomain(
        dimension, sdist, _cube_bbox(center, side), side * math.sqrt(dimension),
        "cube_complement", None, project, inside, None, {"side": side},
    )


def annulus(r_in: float = 0.5, r_out: float = 1.0, dimension: int = 2) -> ImplicitDomain:
    if not 0 < r_in < r_out:
        raise GMTInputError("Annulus needs 0 < r_in < r_out")

    def sdist(x: np.ndarray) -> np.ndarray:
        n = _norm(x)
        return np.maximum(r_in - n, n - r_out)

    def project(x: np.ndarray) -> np.ndarray:
        n = _norm(x)
        safe = np.where(n == 0, 1.0, n)
        v = np.where((n == 0)[:, None], np.eye(dimension)[0], x / safe[:, None])
        target = np.where(n < (r_in + r_out) / 2.0, r_in, r_out)
        return v * target[:, None]

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        far = _norm(np.maximum(np.abs(lo), np.abs(hi)))
        near = _norm(np.clip(np.zeros_like(lo), lo, hi))
        return (far < r_out) & (near > r_in)

    return ImplicitDomain(
        dimension, sdist, _cube_bbox(np.zeros(dimension), 1.25 * r_out), 2.0 * r_out,
        "annulus", None, project, inside, None, {"r_in": r_in, "r_out": r_out},
    )


def punctured_space(dimension: int = 2, extent: float = 1.0) -> ImplicitDomain:
    """R^D minus the origin."""

    def sdist(x: np.ndarray) -> np.ndarray:
        return -_norm(x)

    def project(x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return np.any((lo > 0.0) | (hi < 0.0), axis=1)

    def meets(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return ~inside(lo, hi)

    return ImplicitDomain(
        dimension, sdist, _cube_bbox(np.zeros(dimension), extent), 0.0,
        "punctured_space", None, project, inside, meets, {},
    )


def _rect_covered(lo: np.ndarray, hi: np.ndarray, rects: Sequence[Tuple[np.ndarray, np.ndarray]]) -> bool:
    """Closed box [lo, hi] covered by the union of closed rectangles."""
    if not rects:
        return False
    rlo, rhi = rects[0]
    if np.any(rhi <= lo) or np.any(rlo >= hi):
        return _rect_covered(lo, hi, rects[1:])
    # peel off the parts of [lo, hi] outside the first rectangle
    cur_lo, cur_hi = lo.copy(), hi.copy()
    for k in range(len(lo)):
        if cur_lo[k] < rlo[k]:
            piece_hi = cur_hi.copy()
            piece_hi[k] = rlo[k]
            if not _rect_covered(cur_lo.copy(), piece_hi, rects[1:]):
                return False
            cur_lo[k] = rlo[k]
        if cur_hi[k] > rhi[k]:
            piece_lo = cur_lo.copy()
            piece_lo[k] = rhi[k]
            if not _rect_covered(piece_lo, cur_hi.copy(), rects[1:]):
                return False
            cur_hi[k] = rhi[k]
    return True


def union_of_boxes(
    boxes: Sequence[Tuple[Sequence[float], Sequence[float]]], name: str = "union_of_boxes",
    margin: float = 0.25, params: Optional[Dict[str, Any]] = None,
) -> ImplicitDomain:
    """Interior of a finite union of closed axis-parallel boxes."""
    rects = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float)) for a, b in boxes]
    centers = np.array([(a + b) / 2.0 for a, b in rects])
    halves = np.array([(b - a) / 2.0 for a, b in rects])
    dim = centers.shape[1]

    def sdist(x: np.ndarray) -> np.ndarray:
        out = np.full(len(x), np.inf)
        for c, h in zip(centers, halves):
            out = np.minimum(out, _box_sdf(x, c, h))
        return out

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        result = np.zeros(len(lo), dtype=bool)
        for i in range(len(lo)):
            pad = 1e-12 * max(1.0, float(np.max(hi[i] - lo[i])))
            result[i] = _rect_covered(lo[i] - pad, hi[i] + pad, rects)
        return result

    all_lo = np.min([a for a, _ in rects], axis=0) - margin
    all_hi = np.max([b for _, b in rects], axis=0) + margin
    diam = float(np.linalg.norm(all_hi - all_lo - 2 * margin))
    return ImplicitDomain(dim, sdist, (all_lo, all_hi), diam, name, None, None, inside, None, params or {})


def rooms_and_corridor(w: float = 2.0 ** -8, wall: float = 0.125, room: float = 1.0) -> ImplicitDomain:
    """Two square rooms separated by a wall of thickness ``wall`` and joined by a
    channel of width ``w`` through the middle of the wall."""
    if not 0 < w < room:
        raise GMTInputError("Channel width must lie in (0, room)")
    t = wall / 2.0
    overlap = wall / 8.0
    boxes = [
        ((-t - room, -room / 2.0), (-t, room / 2.0)),
        ((t, -room / 2.0), (t + room, room / 2.0)),
        ((-t - overlap, -w / 2.0), (t + overlap, w / 2.0)),
    ]
    return union_of_boxes(boxes, "rooms_and_corridor", params={"w": w, "wall": wall, "room": room})


def complement_of_points(points: np.ndarray, margin: float = 0.5) -> ImplicitDomain:
    """R^D minus a finite point set E."""
    pts = as_points(points)
    if len(pts) == 0:
        raise GMTInputError("Complement of an empty point set has no boundary")
    tree = cKDTree(pts)

    def sdist(x: np.ndarray) -> np.ndarray:
        d, _ = tree.query(x, k=1)
        return -d

    def project(x: np.ndarray) -> np.ndarray:
        _, i = tree.query(x, k=1)
        return pts[i]

    def inside(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        half = (hi - lo) / 2.0
        if np.allclose(half, half[:, :1]):
            # cubes: the nearest point in the max-norm decides
            d, _ = tree.query((lo + hi) / 2.0, k=1, p=np.inf)
            return d > half[:, 0]
        return np.array([
            not np.any(np.all((pts >= a) & (pts <= b), axis=1)) for a, b in zip(lo, hi)
        ])

    def meets(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return ~inside(lo, hi)

    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return ImplicitDomain(
        pts.shape[1], sdist, (lo, hi), diam, "complement_of_points", None, project, inside, meets,
        {"n_points": len(pts)},
    )


GALLERY: Dict[str, Callable[..., ImplicitDomain]] = {
    "ball": ball,
    "half_space": half_space,
    "slab": slab,
    "lipschitz_graph": lipschitz_graph,
    "perforated_half_space": perforated_half_space,
    "cube_complement": cube_complement,
    "annulus": annulus,
    "punctured_space": punctured_space,
    "rooms_and_corridor": rooms_and_corridor,
}


def gallery_domain(name: str, **params: Any) -> ImplicitDomain:
    """Build a canonical test domain by name."""
    try:
        factory = GALLERY[name]
    except KeyError:
        raise GMTInputError(f"Unknown gallery domain '{name}'; choose from {sorted(GALLERY)}")
    try:
        return factory(**params)
    except TypeError as e:
        raise GMTInputError(f"Bad parameters for gallery domain '{name}': {e}")


# -- parametric clouds -----------------------------------------------------


def circle_cloud(n: int, radius: float = 1.0, center: Sequence[float] = (0.0, 0.0), phase: float = 0.0) -> PointCloud:
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    pts = np.asarray(center, dtype=float) + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return PointCloud(pts, 2.0 * np.pi * radius / max(n, 1), "user")


def arc_cloud(n: int, start: float, stop: float, radius: float = 1.0) -> PointCloud:
    theta = np.linspace(start, stop, n)
    pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return PointCloud(pts, radius * abs(stop - start) / max(n - 1, 1), "user")


def segment_cloud(a: Sequence[float], b: Sequence[float], h: float) -> PointCloud:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = int(math.ceil(np.linalg.norm(b - a) / h)) + 1
    t = np.linspace(0.0, 1.0, n)[:, None]
    return PointCloud(a + t * (b - a), h, "user")


def cantor_dust(level: int, ratio: float = 0.25) -> PointCloud:
    """Centers of the level-th generation of the four-corner Cantor set in [0,1]^2."""
    if level < 0:
        raise GMTInputError("Cantor dust level must be >= 0")
    pts = np.array([[0.5, 0.5]])
    size = 1.0
    for _ in range(level):
        child = size * ratio
        offset = (size - child) / 2.0
        shifts = np.array([[-offset, -offset], [-offset, offset], [offset, -offset], [offset, offset]])
        pts = (pts[:, None, :] + shifts[None]).reshape(-1, 2)
        size = child
    order = np.lexsort(pts.T[::-1])
    return PointCloud(pts[order], size, "user")


CLOUDS: Dict[str, Callable[..., PointCloud]] = {
    "circle": circle_cloud,
    "arc": arc_cloud,
    "segment": segment_cloud,
    "cantor_dust": cantor_dust,
}


def parametric_cloud(name: str, **params: Any) -> PointCloud:
    try:
        factory = CLOUDS[name]
    except KeyError:
        raise GMTInputError(f"Unknown cloud generator '{name}'; choose from {sorted(CLOUDS)}")
    return factory(**params)
