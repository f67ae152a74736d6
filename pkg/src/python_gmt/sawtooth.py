"""
Sawtooth Domains

Inner and outer sawtooth regions over a boundary set E, built from dilated
Whitney cubes, with boundary-cube sums, trace checks and regularity profiles.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .core import (
    DiscreteMeasure,
    ImplicitDomain,
    PointCloud,
    box_meets_boundary,
    complement_of_points,
    sample_boundary,
)
from .exceptions import GMTConstructionError, GMTInputError
from .metric_cubes import cloud_diameter
from .models import RegularityProfile, TraceReport
from .whitney import DilatedCubeUnion, DyadicCube, WhitneyForest, whitney_decompose

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SawtoothDomain:
    """Open union of dilated core cubes; the outer kind also unions the base domain."""

    kind: str
    base: ImplicitDomain
    forest: WhitneyForest
    core: np.ndarray
    lam: float
    E: PointCloud
    params: Dict[str, Any] = field(default_factory=dict)
    truncated: bool = False
    tail_measure: float = 0.0
    union: DilatedCubeUnion = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.core = np.unique(np.asarray(self.core, dtype=np.int64))
        self.union = DilatedCubeUnion(
            self.forest.levels[self.core], self.forest.anchors[self.core], self.lam
        )

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def cubes(self) -> List[DyadicCube]:
        return [self.forest.cube(int(i)) for i in self.core]

    def sdist(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self.core) == 0:
            inner = np.full(len(x), np.inf)
        else:
            inner = self.union.sdist(x)
        if self.kind == "outer":
            return np.minimum(inner, self.base.sdist(x))
        return inner

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.sdist(x) < 0.0

    def cube_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Corners of the dilated core cubes."""
        sides = self.forest.sides[self.core]
        centers = self.forest.centers[self.core]
        half = self.lam * sides[:, None] / 2.0
        return centers - half, centers + half

    def as_domain(self) -> ImplicitDomain:
        """View as an ImplicitDomain for the estimators and verifiers."""
        if len(self.core):
            lo, hi = self.cube_bounds()
            lo, hi = lo.min(axis=0), hi.max(axis=0)
        else:
            lo, hi = self.base.bbox
        if self.kind == "outer":
            lo = np.minimum(lo, self.base.bbox[0])
            hi = np.maximum(hi, self.base.bbox[1])
            diam = self.base.diam_boundary
        else:
            diam = float(np.linalg.norm(hi - lo))
        return ImplicitDomain(
            self.dimension, self.sdist, (lo, hi), diam, f"{self.kind}_sawtooth",
            params={"base": self.base.name, **self.params},
        )

    def drop_cubes(self, mask: np.ndarray) -> "SawtoothDomain":
        """Copy with the core cubes selected by ``mask`` removed."""
        keep = self.core[~np.asarray(mask, dtype=bool)]
        return SawtoothDomain(
            self.kind, self.base, self.forest, keep, self.lam, self.E, dict(self.params),
            self.truncated, self.tail_measure,
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "params": self.params,
            "truncated": self.truncated,
            "tail_measure": self.tail_measure,
            "cubes": [
                {"level": int(self.forest.levels[i]), "anchor": [int(a) for a in self.forest.anchors[i]]}
                for i in self.core
            ],
        }


@dataclass
class BoundaryCubeSet:
    """Core cubes adjacent to an out-of-core cube and meeting B(xi, r)."""

    xi: np.ndarray
    r: float
    cubes: List[DyadicCube]
    sum_d: float
    clipped: bool = False


@dataclass
class SandwichResult:
    n_points: int
    inner_violations: int
    outer_violations: int
    witness: Optional[List[float]] = None

    @property
    def passed(self) -> bool:
        return self.inner_violations == 0 and self.outer_violations == 0


@dataclass
class Localization:
    """Empirical containment and diameter constants of an inner sawtooth."""

    C_minus_emp: float
    boundary_diameter: float
    diameter_ratio: float


@dataclass
class ComparabilityWitnesses:
    """Per boundary cube: y_Q and the ratios relating Q, y_Q and E."""

    y: np.ndarray
    near_ratio: np.ndarray
    far_ratio: np.ndarray
    size_ratio: np.ndarray
    skipped: int = 0

    @property
    def constants(self) -> Dict[str, float]:
        if len(self.y) == 0:
            return {}
        return {
            "dist_yQ_over_dist_yE": float(self.near_ratio.max()),
            "dist_yE_over_dist_QE_max": float(self.far_ratio.max()),
            "dist_yE_over_dist_QE_min": float(self.far_ratio.min()),
            "dist_QE_over_side_max": float(self.size_ratio.max()),
            "dist_QE_over_side_min": float(self.size_ratio.min()),
        }


def _box_distance(lo: np.ndarray, hi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Euclidean distance from points x to the closed box [lo, hi]."""
    gap = np.maximum(np.maximum(lo - x, x - hi), 0.0)
    return np.linalg.norm(gap, axis=-1)


def _check_on_boundary(domain: ImplicitDomain, E: PointCloud, tol: float) -> None:
    off = np.abs(domain.sdist(E.points)) > tol
    if off.any():
        raise GMTInputError(
            f"{int(off.sum())} points of E lie off the boundary (first {E.points[off][0].tolist()})"
        )


def _path_completion(forest: WhitneyForest, seeds: np.ndarray, C_tilde: int) -> np.ndarray:
    """Cubes on some shortest path of at most C_tilde cubes between two seeds."""
    if len(seeds) < 2 or C_tilde < 2:
        return seeds
    limit = C_tilde - 1
    reach = dijkstra(forest.adjacency, directed=False, indices=seeds, limit=limit, min_only=True)
    local = np.flatnonzero(np.isfinite(reach))
    pos = np.full(len(forest), -1, dtype=np.int64)
    pos[local] = np.arange(len(local))
    sub = forest.adjacency[local][:, local]
    seed_pos = pos[seeds]
    dist = dijkstra(sub, directed=False, indices=seed_pos, limit=limit)

    on_path = np.zeros(len(local), dtype=bool)
    on_path[seed_pos] = True
    between = dist[:, seed_pos]
    for a in range(len(seeds)):
        partners = np.flatnonzero(between[a, a + 1:] <= limit) + a + 1
        if partners.size == 0:
            continue
        total = dist[a][None, :] + dist[partners]
        on_path |= np.any(total == between[a, partners][:, None], axis=0)
    return np.union1d(seeds, local[on_path])


def build_inner_sawtooth(
    domain: ImplicitDomain,
    forest: WhitneyForest,
    E: PointCloud,
    C0: float = 7.0,
    C_tilde: int = 8,
    lam: float = 9.0 / 8.0,
    xi0: Optional[Sequence[float]] = None,
    r0: Optional[float] = None,
    tol: float = 1e-6,
) -> SawtoothDomain:
    """Inner sawtooth over E: cubes with C0*Q meeting E and side <= r0, plus
    all cubes on short cube paths between them.
    """
    if not lam > 1:
        raise GMTInputError(f"Dilation lambda must exceed 1, got {lam}")
    if len(E) == 0:
        raise GMTConstructionError("Inner sawtooth over an empty set")
    _check_on_boundary(domain, E, tol)

    pts = E.points
    if xi0 is None:
        xi0 = pts[int(np.argmin(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))]
    xi0 = np.asarray(xi0, dtype=float)
    spread = float(np.linalg.norm(pts - xi0, axis=1).max())
    if r0 is None:
        r0 = max(spread, E.mesh)
    if spread > r0 * (1 + 1e-9) + tol:
        raise GMTInputError(f"E is not contained in B(xi0, r0={r0:g})")

    sides = forest.sides
    cheb, _ = cKDTree(pts).query(forest.centers, k=1, p=np.inf) if len(forest) else (np.zeros(0), None)
    seeds = np.flatnonzero((cheb <= C0 * sides / 2.0 * (1 + 1e-12)) & (sides <= r0 * (1 + 1e-12)))
    core = _path_completion(forest, seeds, C_tilde)

    truncated, tail = False, 0.0
    if forest.truncated:
        t_side = math.ldexp(1.0, forest.n_min)
        t_centers = (forest.tail_anchors + 0.5) * t_side
        t_cheb, _ = cKDTree(pts).query(t_centers, k=1, p=np.inf)
        near = t_cheb <= C0 * t_side / 2.0
        if near.any():
            truncated = True
            tail = float(near.sum()) * t_side ** (domain.dimension - 1)
            logger.warning(f"Inner sawtooth meets {int(near.sum())} truncated forest cubes")

    saw = SawtoothDomain(
        "inner", domain, forest, core, lam, E,
        {"C0": C0, "C_tilde": C_tilde, "K": forest.K, "r0": r0, "xi0": xi0.tolist()},
        truncated, tail,
    )
    logger.info(
        f"Inner sawtooth: {len(seeds)} seed cubes, {len(saw.core)} after path completion"
    )
    return saw


def build_outer_sawtooth(
    domain: ImplicitDomain,
    E: PointCloud,
    K: float = 12.0,
    lam: float = 9.0 / 8.0,
    levels_below_mesh: int = 3,
    box: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
) -> SawtoothDomain:
    """Outer sawtooth: the domain together with the dilated Whitney cubes of
    R^D minus E that meet the boundary.

    The Whitney forest of the complement of E is kept whole over ``box`` so that
    out-of-core neighbours are available for boundary sums.
    """
    if K < 12:
        raise GMTInputError(f"Outer sawtooth needs K >= 12, got {K}")
    if not lam > 1:
        raise GMTInputError(f"Dilation lambda must exceed 1, got {lam}")
    if len(E) == 0:
        raise GMTConstructionError("Outer sawtooth over an empty set would swallow the boundary")

    complement = complement_of_points(E.points)
    if box is None:
        box = domain.bbox
    n_min = int(math.floor(math.log2(E.mesh))) - levels_below_mesh
    forest = whitney_decompose(complement, K=K, box=box, n_min=n_min)
    core = np.flatnonzero(box_meets_boundary(domain, forest.lo, forest.hi)) if len(forest) else []

    saw = SawtoothDomain(
        "outer", domain, forest, core, lam, E,
        {"K": K, "n_min": n_min, "levels_below_mesh": levels_below_mesh},
    )
    logger.info(f"Outer sawtooth: {len(saw.core)} of {len(forest)} Whitney cubes meet the boundary")
    return saw


def boundary_cubes(saw: SawtoothDomain) -> np.ndarray:
    """Forest indices of core cubes with a neighbour outside the core."""
    in_core = np.zeros(len(saw.forest), dtype=bool)
    in_core[saw.core] = True
    adj = saw.forest.adjacency
    out = [i for i in saw.core if np.any(~in_core[adj.indices[adj.indptr[i]:adj.indptr[i + 1]]])]
    return np.asarray(out, dtype=np.int64)


def boundary_cube_sum(saw: SawtoothDomain, xi: Sequence[float], r: float, tol: float = 1e-6) -> BoundaryCubeSet:
    """Sum of side^d over boundary core cubes meeting the closed ball B(xi, r)."""
    if not r > 0:
        raise GMTInputError(f"Radius must be positive, got {r}")
    xi = np.asarray(xi, dtype=float)
    gap, _ = cKDTree(saw.E.points).query(xi, k=1)
    if gap > tol:
        logger.warning(f"Boundary sum center {xi.tolist()} is not a point of E")

    d = saw.dimension - 1
    idx = boundary_cubes(saw)
    forest = saw.forest
    hit = idx[_box_distance(forest.lo[idx], forest.hi[idx], xi) <= r] if len(idx) else idx
    sides = forest.sides[hit]

    # the forest stops at the base bounding box
    blo, bhi = saw.base.bbox
    clipped = bool(np.any(xi - r < blo) or np.any(xi + r > bhi))
    if clipped:
        logger.warning(f"B({xi.tolist()}, {r:g}) leaves the domain box; sum is clipped")
    return BoundaryCubeSet(
        xi=xi,
        r=r,
        cubes=[forest.cube(int(i)) for i in hit],
        sum_d=math.fsum(sorted(sides ** d)),
        clipped=clipped,
    )


def boundary_sum_sweep(
    saw: SawtoothDomain, centers: np.ndarray, radii: Sequence[float]
) -> Tuple[List[Tuple[List[float], float, float, float]], float]:
    """Rows (xi, r, sum, sum / r^d) over a grid and their sup, the empirical C'."""
    d = saw.dimension - 1
    rows = []
    for xi in np.atleast_2d(centers):
        for r in radii:
            cs = boundary_cube_sum(saw, xi, r)
            rows.append((xi.tolist(), float(r), cs.sum_d, cs.sum_d / r ** d))
    sup = max((row[3] for row in rows), default=0.0)
    logger.info(f"Boundary sum sweep over {len(rows)} balls: C' = {sup:.4g}")
    return rows, sup


def _face_template(side: float, h: float, dim: int) -> np.ndarray:
    """Grid points on the boundary of a cube of the given side, centered at 0."""
    n = max(2, int(math.ceil(side / h)) + 1)
    ticks = np.linspace(-side / 2.0, side / 2.0, n)
    faces = []
    for k in range(dim):
        others = np.array(list(itertools.product(ticks, repeat=dim - 1)))
        for sign in (-1.0, 1.0):
            face = np.insert(others, k, sign * side / 2.0, axis=1)
            faces.append(face)
    return np.unique(np.concatenate(faces), axis=0)


def sample_sawtooth_boundary(saw: SawtoothDomain, h: float, tol: float = 1e-12) -> PointCloud:
    """Points of the sawtooth boundary at spacing <= h."""
    if not h > 0:
        raise GMTInputError(f"Mesh h must be positive, got {h}")
    dim = saw.dimension
    chunks = []
    levels = saw.forest.levels[saw.core]
    centers = saw.forest.centers[saw.core]
    for n in np.unique(levels):
        side = saw.lam * math.ldexp(1.0, int(n))
        template = _face_template(side, h, dim)
        pts = (centers[levels == n][:, None, :] + template[None]).reshape(-1, dim)
        chunks.append(pts[saw.union.sdist(pts) >= -tol * max(1.0, side)])
    faces = np.concatenate(chunks) if chunks else np.zeros((0, dim))

    if saw.kind == "outer":
        faces = faces[saw.base.sdist(faces) >= -tol] if len(faces) else faces
        base_pts = sample_boundary(saw.base, h).points
        if len(base_pts) and len(saw.core):
            base_pts = base_pts[saw.union.sdist(base_pts) >= -tol]
        faces = np.concatenate([faces, base_pts])

    if len(faces):
        faces = np.unique(np.round(faces, 12), axis=0)
    logger.debug(f"{len(faces)} boundary samples of the {saw.kind} sawtooth")
    return PointCloud(faces, h, "user")


def check_trace(saw: SawtoothDomain, E: PointCloud, h: float, band: Optional[float] = None) -> TraceReport:
    """Compare the sawtooth boundary with E near the base boundary at tolerance 2h.

    (a) every point of E is within 2h of the sawtooth boundary; (b) every
    boundary sample with |sdist_base| <= band is within 2h of E. The band
    defaults to h/2 for the inner kind, whose boundary stops short of the base
    boundary, and to 1e-6 for the outer kind.
    """
    if band is None:
        band = h / 2.0 if saw.kind == "inner" else 1e-6
    boundary = sample_sawtooth_boundary(saw, h / 2.0)
    if len(boundary) == 0:
        return TraceReport(
            passed=False, max_E_gap=math.inf, max_trace_gap=0.0,
            witness=E.points[0].tolist() if len(E) else None,
        )

    gap_E, _ = cKDTree(boundary.points).query(E.points, k=1)
    near = np.abs(saw.base.sdist(boundary.points)) <= band
    trace = boundary.points[near]
    gap_T = cKDTree(E.points).query(trace, k=1)[0] if len(trace) else np.zeros(0)

    max_E = float(gap_E.max()) if len(gap_E) else 0.0
    max_T = float(gap_T.max()) if len(gap_T) else 0.0
    witness = None
    if max_E > 2 * h:
        witness = E.points[int(np.argmax(gap_E))].tolist()
    elif max_T > 2 * h:
        witness = trace[int(np.argmax(gap_T))].tolist()
    report = TraceReport(
        passed=witness is None,
        max_E_gap=max_E,
        max_trace_gap=max_T,
        witness=witness,
        n_boundary_samples=len(boundary),
        n_trace_samples=len(trace),
    )
    logger.info(
        f"Trace check ({saw.kind}): max E gap {max_E:.3g}, max trace gap {max_T:.3g}, "
        f"passed={report.passed}"
    )
    return report


def regularity_profile(
    surface: PointCloud,
    weights: DiscreteMeasure,
    radii: Sequence[float],
    centers: Optional[np.ndarray] = None,
    d: Optional[int] = None,
) -> RegularityProfile:
    """Upper and lower Ahlfors constants over closed balls B(x, r).

    A_upper = max mass/r^d and A_lower = max r^d/mass, both reported as at
    least 1 as in the regularity definition. Centers default to the surface.
    """
    if len(weights.weights) != len(surface):
        raise GMTInputError("Weights and surface sizes differ")
    if len(surface) == 0:
        raise GMTInputError("Regularity profile of an empty surface")
    d = surface.dimension - 1 if d is None else d
    centers = surface.points if centers is None else np.atleast_2d(np.asarray(centers, dtype=float))
    tree = surface.kdtree()

    upper, lower = 1.0, 1.0
    w_up, w_low = None, None
    n_balls = 0
    for r in radii:
        hits = tree.query_ball_point(centers, r * (1 + 1e-12))
        for x, idx in zip(centers, hits):
            mass = weights.mass(idx)
            n_balls += 1
            if mass <= 0:
                if lower < math.inf:
                    lower, w_low = math.inf, (x.tolist(), float(r))
                    logger.warning(f"Zero-mass ball at {x.tolist()}, r={r:g}")
                continue
            if mass / r ** d > upper:
                upper, w_up = mass / r ** d, (x.tolist(), float(r))
            if r ** d / mass > lower:
                lower, w_low = r ** d / mass, (x.tolist(), float(r))
    logger.info(f"Regularity profile: A_upper={upper:.4g}, A_lower={lower:.4g} over {n_balls} balls")
    return RegularityProfile(
        A_upper=upper, A_lower=lower, witness_upper=w_up, witness_lower=w_low, n_balls=n_balls
    )


def sandwich_check(
    inner: SawtoothDomain,
    base: ImplicitDomain,
    outer: SawtoothDomain,
    n: int = 100000,
    seed: int = 0,
    box: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> SandwichResult:
    """Random-point test of inner ⊆ base ⊆ outer."""
    rng = np.random.default_rng(seed)
    if box is None:
        ilo, ihi = inner.as_domain().bbox
        lo = np.minimum(ilo, base.bbox[0])
        hi = np.maximum(ihi, base.bbox[1])
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    x = rng.uniform(lo, hi, size=(n, base.dimension))
    in_base = base.contains(x)
    bad_inner = inner.contains(x) & ~in_base
    bad_outer = in_base & ~outer.contains(x)
    witness = None
    if bad_inner.any():
        witness = x[bad_inner][0].tolist()
    elif bad_outer.any():
        witness = x[bad_outer][0].tolist()
    result = SandwichResult(n, int(bad_inner.sum()), int(bad_outer.sum()), witness)
    logger.info(
        f"Sandwich check on {n} points: {result.inner_violations} inner, "
        f"{result.outer_violations} outer violations"
    )
    return result


def localization(saw: SawtoothDomain, xi0: Sequence[float], r0: float, h: Optional[float] = None) -> Localization:
    """C- = sup |x - xi0| / r0 over the sawtooth and its boundary diameter ratio."""
    if len(saw.core) == 0:
        raise GMTConstructionError("Localization of an empty sawtooth")
    xi0 = np.asarray(xi0, dtype=float)
    lo, hi = saw.cube_bounds()
    corners = np.array(list(itertools.product((0, 1), repeat=saw.dimension)), dtype=bool)
    far = 0.0
    for c in corners:
        far = max(far, float(np.linalg.norm(np.where(c, hi, lo) - xi0, axis=1).max()))

    h = h if h is not None else saw.E.mesh
    diam = cloud_diameter(sample_sawtooth_boundary(saw, h).points)
    return Localization(
        C_minus_emp=far / r0,
        boundary_diameter=diam,
        diameter_ratio=r0 / diam if diam > 0 else math.inf,
    )


def comparability_witnesses(
    saw: SawtoothDomain, E: PointCloud, sigma: PointCloud, search: float = 4.0
) -> ComparabilityWitnesses:
    """For each boundary cube Q find y_Q in sigma minimizing dist(y,Q)/dist(y,E)."""
    forest = saw.forest
    idx = boundary_cubes(saw)
    e_tree = cKDTree(E.points)
    s_tree = sigma.kdtree()
    ys, near, far, size = [], [], [], []
    skipped = 0
    for i in idx:
        lo, hi, side = forest.lo[i], forest.hi[i], forest.sides[i]
        center = forest.centers[i]
        reach = float(e_tree.query(center, k=1)[0]) + side * math.sqrt(saw.dimension)
        cand = np.asarray(e_tree.query_ball_point(center, reach), dtype=int)
        dist_QE = float(_box_distance(lo, hi, E.points[cand]).min()) if cand.size else math.inf

        pool = np.asarray(s_tree.query_ball_point(center, search * (reach + side)), dtype=int)
        if pool.size == 0 or dist_QE <= 0:
            skipped += 1
            continue
        y = sigma.points[pool]
        dist_yE, _ = e_tree.query(y, k=1)
        ok = dist_yE > 0
        if not ok.any():
            skipped += 1
            continue
        y, dist_yE = y[ok], dist_yE[ok]
        score = _box_distance(lo, hi, y) / dist_yE
        k = int(np.argmin(score))
        ys.append(y[k])
        near.append(score[k])
        far.append(dist_yE[k] / dist_QE)
        size.append(dist_QE / side)
    if skipped:
        logger.warning(f"No comparability witness for {skipped} boundary cubes")
    dim = saw.dimension
    return ComparabilityWitnesses(
        y=np.asarray(ys).reshape(-1, dim),
        near_ratio=np.asarray(near),
        far_ratio=np.asarray(far),
        size_ratio=np.asarray(size),
        skipped=skipped,
    )
