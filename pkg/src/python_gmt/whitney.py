"""
Whitney Decompositions

Dyadic Whitney cubes of an implicit domain, their adjacency graph, the
cube-path distance d_Omega and the NTA / uniformity verifiers.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial import cKDTree

from .core import Ball, ImplicitDomain, box_inside
from .exceptions import GMTConstructionError, GMTInputError
from .models import UniformityFit

logger = logging.getLogger(__name__)

BoxLike = Union[Ball, Tuple[Sequence[float], Sequence[float]], None]


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Closed cube prod [i_k 2^n, (i_k + 1) 2^n]."""

    level: int
    anchor: Tuple[int, ...]

    @property
    def side(self) -> float:
        return math.ldexp(1.0, self.level)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.anchor, dtype=float) * self.side

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    @property
    def center(self) -> np.ndarray:
        return self.lo + self.side / 2.0

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(len(self.anchor))

    def dilate(self, lam: float) -> Tuple[np.ndarray, np.ndarray]:
        """Corners of lam*Q: same center, side lam * side."""
        half = lam * self.side / 2.0
        return self.center - half, self.center + half

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(a // 2 for a in self.anchor))

    def children(self) -> List["DyadicCube"]:
        return [
            DyadicCube(self.level - 1, tuple(2 * a + o for a, o in zip(self.anchor, off)))
            for off in itertools.product((0, 1), repeat=len(self.anchor))
        ]


@dataclass(frozen=True)
class CubePath:
    """Shortest chain of adjacent cubes; ``length_d`` is n + 1 for n edges."""

    cubes: Tuple[DyadicCube, ...]
    found: bool = True

    @property
    def length_d(self) -> float:
        return float(len(self.cubes)) if self.found else math.inf


@dataclass(eq=False)
class WhitneyForest:
    """Whitney cubes W_K(Omega) stored as level and anchor arrays.

    ``tail_levels`` / ``tail_anchors`` are the cubes at level ``n_min`` that
    were neither accepted nor ruled out; they carry the truncated part.
    """

    K: float
    dimension: int
    levels: np.ndarray
    anchors: np.ndarray
    n_min: int
    tail_levels: np.ndarray
    tail_anchors: np.ndarray
    adjacency: csr_matrix = field(init=False)
    _index: Dict[Tuple[int, Tuple[int, ...]], int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.levels = np.asarray(self.levels, dtype=np.int64)
        self.anchors = np.asarray(self.anchors, dtype=np.int64).reshape(-1, self.dimension)
        self._index = {
            (int(n), tuple(int(a) for a in anc)): i
            for i, (n, anc) in enumerate(zip(self.levels, self.anchors))
        }
        self.adjacency = cube_adjacency(self.levels, self.anchors)

    def __len__(self) -> int:
        return len(self.levels)

    def __contains__(self, cube: DyadicCube) -> bool:
        return (cube.level, tuple(cube.anchor)) in self._index

    @property
    def sides(self) -> np.ndarray:
        return np.ldexp(1.0, self.levels)

    @property
    def lo(self) -> np.ndarray:
        return self.anchors * self.sides[:, None]

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.sides[:, None]

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.sides[:, None] / 2.0

    @property
    def truncated(self) -> bool:
        return len(self.tail_levels) > 0

    def cube(self, i: int) -> DyadicCube:
        return DyadicCube(int(self.levels[i]), tuple(int(a) for a in self.anchors[i]))

    def index_of(self, cube: DyadicCube) -> int:
        try:
            return self._index[(cube.level, tuple(cube.anchor))]
        except KeyError:
            raise GMTInputError(f"Cube {cube} is not in the forest")

    def neighbors(self, i: int) -> np.ndarray:
        row = self.adjacency.getrow(i)
        return np.sort(row.indices)

    def tail_measure(self, d: int) -> float:
        """Sum of side^d over the truncated tail."""
        return math.fsum(np.ldexp(1.0, self.tail_levels * d))

    def to_records(self) -> List[Dict[str, Any]]:
        records = [
            {"level": int(n), "anchor": [int(a) for a in anc], "flags": []}
            for n, anc in zip(self.levels, self.anchors)
        ]
        records += [
            {"level": int(n), "anchor": [int(a) for a in anc], "flags": ["truncated"]}
            for n, anc in zip(self.tail_levels, self.tail_anchors)
        ]
        return records


def cube_adjacency(levels: np.ndarray, anchors: np.ndarray) -> csr_matrix:
    """Sparse symmetric graph of cubes whose closed boxes intersect."""
    m = len(levels)
    if m == 0:
        return csr_matrix((0, 0))
    sides = np.ldexp(1.0, levels)
    centers = (anchors + 0.5) * sides[:, None]
    groups = {int(n): np.flatnonzero(levels == n) for n in np.unique(levels)}
    trees = {n: cKDTree(centers[idx]) for n, idx in groups.items()}
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    keys = sorted(groups)
    for a_pos, a in enumerate(keys):
        for b in keys[a_pos:]:
            r = (math.ldexp(1.0, a) + math.ldexp(1.0, b)) / 2.0 * (1.0 + 1e-12)
            pairs = trees[a].sparse_distance_matrix(trees[b], r, p=np.inf, output_type="ndarray")
            i = groups[a][pairs["i"]]
            j = groups[b][pairs["j"]]
            keep = i != j
            rows += [i[keep], j[keep]]
            cols += [j[keep], i[keep]]
    row = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    col = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    graph = coo_matrix((np.ones(len(row)), (row, col)), shape=(m, m)).tocsr()
    graph.sum_duplicates()
    graph.data[:] = 1.0
    return graph


def _box_bounds(box: BoxLike, domain: ImplicitDomain) -> Tuple[np.ndarray, np.ndarray]:
    if box is None:
        return domain.bbox
    if isinstance(box, Ball):
        return box.center - box.radius, box.center + box.radius
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if lo.shape != (domain.dimension,) or np.any(hi <= lo):
        raise GMTInputError("Whitney box must be a nondegenerate box of the domain's dimension")
    return lo, hi


def _children(anchors: np.ndarray) -> np.ndarray:
    dim = anchors.shape[1]
    offsets = np.array(list(itertools.product((0, 1), repeat=dim)), dtype=np.int64)
    return (2 * anchors[:, None, :] + offsets[None]).reshape(-1, dim)


def _dilated_inside(domain: ImplicitDomain, anchors: np.ndarray, level: int, K: float) -> np.ndarray:
    s = math.ldexp(1.0, level)
    center = (anchors + 0.5) * s
    return box_inside(domain, center - K * s / 2.0, center + K * s / 2.0)


def whitney_decompose(
    domain: ImplicitDomain,
    K: float = 3.0,
    box: BoxLike = None,
    n_min: int = -6,
    n_top: Optional[int] = None,
    restrict: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> WhitneyForest:
    """Maximal dyadic cubes Q meeting ``box`` with K*Q inside the domain.

    Cubes are refined top-down from level ``n_top`` to ``n_min``. ``restrict``
    optionally prunes cubes (and their descendants) by a box predicate.
    """
    if K < 3:
        raise GMTInputError(f"Whitney constant K must be >= 3, got {K}")
    lo, hi = _box_bounds(box, domain)
    if n_top is None:
        n_top = int(math.ceil(math.log2(float(np.max(hi - lo)))))
    if n_min > n_top:
        raise GMTInputError(f"n_min={n_min} lies above the top level {n_top}")

    dim = domain.dimension
    top = math.ldexp(1.0, n_top)
    ranges = [
        range(int(math.floor(lo[k] / top)), max(int(math.ceil(hi[k] / top)), int(math.floor(lo[k] / top)) + 1))
        for k in range(dim)
    ]
    cand = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, dim)

    acc_levels: List[np.ndarray] = []
    acc_anchors: List[np.ndarray] = []
    tail = np.zeros((0, dim), dtype=np.int64)

    for level in range(n_top, n_min - 1, -1):
        if len(cand) == 0:
            break
        s = math.ldexp(1.0, level)
        c_lo = cand * s
        c_hi = c_lo + s
        keep = np.all(c_lo <= hi, axis=1) & np.all(c_hi >= lo, axis=1)
        if restrict is not None and keep.any():
            keep[keep] = np.asarray(restrict(c_lo[keep], c_hi[keep]), dtype=bool)
        cand = cand[keep]
        if len(cand) == 0:
            break

        inside = _dilated_inside(domain, cand, level, K)
        accepted = cand[inside]
        if level == n_top and len(accepted):
            accepted_levels, accepted = _climb(domain, accepted, level, K)
            acc_levels.append(accepted_levels)
        else:
            acc_levels.append(np.full(len(accepted), level, dtype=np.int64))
        acc_anchors.append(accepted)

        rest = cand[~inside]
        center = (rest + 0.5) * s
        outside = domain.sdist(center) >= s * math.sqrt(dim) / 2.0
        rest = rest[~outside]
        logger.debug(f"level {level}: {int(inside.sum())} accepted, {len(rest)} refined")
        if level > n_min:
            cand = _children(rest)
        else:
            tail = rest

    levels = np.concatenate(acc_levels) if acc_levels else np.zeros(0, dtype=np.int64)
    anchors = np.concatenate(acc_anchors) if acc_anchors else np.zeros((0, dim), dtype=np.int64)
    order = np.lexsort(tuple(anchors.T[::-1]) + (-levels,)) if len(levels) else np.zeros(0, dtype=int)
    levels, anchors = levels[order], anchors[order]

    if len(tail):
        logger.info(f"Whitney forest truncated at level {n_min}: {len(tail)} undecided cubes")
    forest = WhitneyForest(
        K, dim, levels, anchors, n_min, np.full(len(tail), n_min, dtype=np.int64), tail
    )
    logger.info(f"Whitney forest of '{domain.name}' with K={K}: {len(forest)} cubes")
    return forest


def _climb(domain: ImplicitDomain, anchors: np.ndarray, level: int, K: float) -> Tuple[np.ndarray, np.ndarray]:
    """Replace accepted top cubes by their maximal qualifying ancestors."""
    levels = np.full(len(anchors), level, dtype=np.int64)
    anchors = anchors.copy()
    active = np.ones(len(anchors), dtype=bool)
    for _ in range(64):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        parents = np.floor_divide(anchors[idx], 2)
        ok = np.zeros(len(idx), dtype=bool)
        for n in np.unique(levels[idx]):
            sel = levels[idx] == n
            ok[sel] = _dilated_inside(domain, parents[sel], int(n) + 1, K)
        anchors[idx[ok]] = parents[ok]
        levels[idx[ok]] += 1
        active[idx[~ok]] = False
    merged = np.unique(np.concatenate([levels[:, None], anchors], axis=1), axis=0)
    return merged[:, 0], merged[:, 1:]


def whitney_distance(forest: WhitneyForest, Q: DyadicCube, R: DyadicCube) -> CubePath:
    """Shortest path of adjacent Whitney cubes from Q to R."""
    i = forest.index_of(Q)
    j = forest.index_of(R)
    if i == j:
        return CubePath((Q,))
    dist, pred = shortest_path(
        forest.adjacency, directed=False, unweighted=True, indices=i, return_predecessors=True
    )
    if not np.isfinite(dist[j]):
        return CubePath((), found=False)
    path = [j]
    while path[-1] != i:
        path.append(int(pred[path[-1]]))
    return CubePath(tuple(forest.cube(k) for k in reversed(path)))


def cube_gap(forest: WhitneyForest, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Euclidean distance between closed cubes i and j."""
    c = forest.centers
    s = forest.sides
    sep = np.abs(c[i] - c[j]) - (s[i] + s[j])[:, None] / 2.0
    return np.linalg.norm(np.maximum(sep, 0.0), axis=1)


def fit_uniformity(
    forest: WhitneyForest,
    pairs: Optional[Sequence[Tuple[int, int]]] = None,
    n_pairs: int = 500,
    seed: int = 0,
    bound: float = 8.0,
    n_grid: int = 12,
) -> UniformityFit:
    """Empirical envelope N(s) of d_Omega(Q,R) against dist(Q,R)/min side.

    The sample is uniformity-consistent when d_Omega <= bound * log2(2 + s)
    for every pair, i.e. the envelope is dominated by an affine function of
    log s over the tested range.
    """
    if len(forest) == 0:
        raise GMTInputError("Uniformity fit needs a nonempty forest")
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = rng.integers(0, len(forest), size=(n_pairs, 2))
    pairs_arr = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if len(pairs_arr) < 100:
        logger.warning(f"Uniformity fit on only {len(pairs_arr)} pairs")

    sources, inverse = np.unique(pairs_arr[:, 0], return_inverse=True)
    dist = shortest_path(forest.adjacency, directed=False, unweighted=True, indices=sources)
    hops = dist[np.asarray(inverse).ravel(), pairs_arr[:, 1]]
    bad = ~np.isfinite(hops)
    if bad.any():
        offending = [tuple(int(v) for v in p) for p in pairs_arr[bad][:10]]
        raise GMTConstructionError(f"Disconnected cube pairs in uniformity sample: {offending}")

    d_omega = hops + 1.0
    sides = forest.sides
    s = cube_gap(forest, pairs_arr[:, 0], pairs_arr[:, 1]) / np.minimum(
        sides[pairs_arr[:, 0]], sides[pairs_arr[:, 1]]
    )
    s_max = float(s.max())
    grid = np.concatenate([[0.0], np.geomspace(1.0, max(2.0, s_max), n_grid)])
    envelope = [float(d_omega[s <= g].max()) if np.any(s <= g) else 0.0 for g in grid]
    ratio = float(np.max(d_omega / np.log2(2.0 + s)))
    consistent = ratio <= bound
    logger.info(f"Uniformity fit: max d/log2(2+s) = {ratio:.3f} (bound {bound})")
    return UniformityFit(
        s_grid=grid.tolist(), envelope=envelope, log_ratio_max=ratio, bound=bound,
        consistent=consistent, n_pairs=len(pairs_arr),
    )


def find_corkscrew(
    domain: ImplicitDomain,
    xi: Sequence[float],
    r: float,
    side: str = "interior",
    C: float = 2.0,
    grid: int = 16,
    tol: float = 1e-6,
) -> Optional[Ball]:
    """Search for a ball of radius >= r/C in B(xi, r) on the requested side.

    A lattice of spacing r/grid over the cube around xi seeds a pattern search
    maximizing min(depth(x), r - |x - xi|). ``None`` means the search failed,
    not that no such ball exists.
    """
    if not r > 0:
        raise GMTInputError(f"Corkscrew radius must be positive, got {r}")
    if not C > 1:
        raise GMTInputError(f"Corkscrew constant must exceed 1, got {C}")
    if side not in ("interior", "exterior"):
        raise GMTInputError(f"Unknown corkscrew side '{side}'")
    xi = np.asarray(xi, dtype=float)
    if abs(float(domain.sdist(xi[None])[0])) > tol * max(1.0, r):
        raise GMTInputError("Corkscrew center must lie on the boundary")

    sign = -1.0 if side == "interior" else 1.0

    def radius(x: np.ndarray) -> np.ndarray:
        depth = sign * domain.sdist(x)
        return np.minimum(depth, r - np.linalg.norm(x - xi, axis=1))

    ticks = np.arange(-grid, grid + 1) / grid
    lattice = np.array(list(itertools.product(ticks, repeat=domain.dimension)))
    pts = xi + r * lattice
    vals = radius(pts)
    best = int(np.argmax(vals))
    x, rho = pts[best], float(vals[best])

    step = r / grid / 2.0
    moves = np.concatenate([np.eye(domain.dimension), -np.eye(domain.dimension)])
    while step > r * 1e-4:
        trial = x + step * moves
        tv = radius(trial)
        k = int(np.argmax(tv))
        if tv[k] > rho + 1e-15:
            x, rho = trial[k], float(tv[k])
        else:
            step /= 2.0

    if rho >= r / C * (1 - 1e-12):
        return Ball(x, rho)
    logger.debug(f"No corkscrew of radius {r / C:g} found at {xi.tolist()} (best {rho:g})")
    return None


@dataclass
class WhitneyCheck:
    """Achieved Whitney constants of a forest."""

    n_cubes: int
    distance_violations: int
    min_lower_ratio: float
    max_upper_ratio: float
    neighbor_ratio: Tuple[float, float]
    max_overlap: int
    overlap_bound: int

    @property
    def passed(self) -> bool:
        lo, hi = self.neighbor_ratio
        return (
            self.distance_violations == 0
            and lo >= 0.25 and hi <= 4.0
            and self.max_overlap <= self.overlap_bound
        )


def verify_whitney(
    forest: WhitneyForest,
    domain: ImplicitDomain,
    samples_per_cube: int = 4,
    lam: float = 9.0 / 8.0,
    n_overlap: int = 2000,
    seed: int = 0,
    tol: float = 1e-9,
) -> WhitneyCheck:
    """Check the distance sandwich, neighbour sizes and bounded overlap."""
    rng = np.random.default_rng(seed)
    m, dim = len(forest), forest.dimension
    if m == 0:
        return WhitneyCheck(0, 0, math.inf, 0.0, (1.0, 1.0), 0, 2 ** dim * 9)

    sides = forest.sides
    x = forest.lo[:, None, :] + rng.uniform(size=(m, samples_per_cube, dim)) * sides[:, None, None]
    dist = -domain.sdist(x.reshape(-1, dim)).reshape(m, samples_per_cube)
    lower = (forest.K - 1) / 2.0 * sides
    upper = (1 + forest.K) * sides * math.sqrt(dim)
    bad = (dist < lower[:, None] - tol) | (dist > upper[:, None] + tol)
    violations = int(np.any(bad, axis=1).sum())

    coo = forest.adjacency.tocoo()
    if coo.nnz:
        ratios = sides[coo.row] / sides[coo.col]
        neighbor = (float(ratios.min()), float(ratios.max()))
    else:
        neighbor = (1.0, 1.0)

    union = DilatedCubeUnion(forest.levels, forest.anchors, lam)
    lo = forest.lo.min(axis=0)
    hi = forest.hi.max(axis=0)
    probes = rng.uniform(lo, hi, size=(n_overlap, dim))
    overlap = int(union.multiplicity(probes).max())

    check = WhitneyCheck(
        m, violations,
        float(np.min(dist / lower[:, None])), float(np.max(dist / (sides[:, None] * math.sqrt(dim)))),
        neighbor, overlap, 2 ** dim * 9,
    )
    logger.info(
        f"Whitney check: {violations} distance violations, neighbour ratios {neighbor}, "
        f"overlap {overlap}"
    )
    return check


class DilatedCubeUnion:
    """Union of open dilated cubes (lam*Q)° with a per-level max-norm oracle.

    ``sdist`` is negative inside the union and its magnitude is a 1-Lipschitz
    lower bound on the Euclidean distance to the union's boundary.
    """

    def __init__(self, levels: np.ndarray, anchors: np.ndarray, lam: float) -> None:
        """Initialize the per-level search trees."""
        self.lam = lam
        self.levels = np.asarray(levels, dtype=np.int64)
        self.anchors = np.asarray(anchors, dtype=np.int64)
        self.dimension = self.anchors.shape[1] if self.anchors.ndim == 2 else 0
        self._groups: List[Tuple[float, cKDTree, np.ndarray]] = []
        for n in np.unique(self.levels):
            idx = np.flatnonzero(self.levels == n)
            s = math.ldexp(1.0, int(n))
            centers = (self.anchors[idx] + 0.5) * s
            self._groups.append((lam * s / 2.0, cKDTree(centers), idx))

    def __len__(self) -> int:
        return len(self.levels)

    def sdist(self, x: np.ndarray) -> np.ndarray:
        out = np.full(len(x), np.inf)
        for half, tree, _ in self._groups:
            d, _ = tree.query(x, k=1, p=np.inf)
            out = np.minimum(out, d - half)
        return out

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.sdist(x) < 0.0

    def multiplicity(self, x: np.ndarray) -> np.ndarray:
        """Number of closed dilated cubes containing each point."""
        count = np.zeros(len(x), dtype=int)
        for half, tree, _ in self._groups:
            hits = tree.query_ball_point(x, half * (1 + 1e-12), p=np.inf, return_length=True)
            count += np.asarray(hits, dtype=int)
        return count

    def members_containing(self, x: np.ndarray) -> List[List[int]]:
        """Indices of the closed dilated cubes containing each point."""
        out: List[List[int]] = [[] for _ in range(len(x))]
        for half, tree, idx in self._groups:
            for p, hit in enumerate(tree.query_ball_point(x, half * (1 + 1e-12), p=np.inf)):
                out[p].extend(int(idx[h]) for h in hit)
        return out
