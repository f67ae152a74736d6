"""
Metric Dyadic Cubes

Christ-David style cube trees on a finite point cloud, built from greedy
nested nets, with inner cubes and post-hoc axiom verification.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .core import PointCloud
from .exceptions import GMTInputError
from .models import AxiomCheck, CubeAxiomReport

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Cube:
    """One cube of generation ``level``; ``center`` indexes the cloud."""

    level: int
    index: int
    center: int
    members: np.ndarray
    length: float
    parent: Optional[int] = None
    children: List[int] = field(default_factory=list)

    @property
    def key(self) -> Tuple[int, int]:
        return (self.level, self.index)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class InnerCube:
    """Points of ``parent`` farther than t*length from the rest of the cloud."""

    parent: Cube
    t: float
    members: np.ndarray


@dataclass(eq=False)
class CubeTree:
    """Generations D_0..D_depth of cubes on ``sigma``.

    ``labels[n, p]`` is the index of the generation-n cube containing point p.
    """

    sigma: PointCloud
    c0: float
    scale: float
    levels: List[List[Cube]]
    labels: np.ndarray
    c1_achieved: float = 0.0
    truncated: bool = False
    _kdtree: Optional[cKDTree] = field(default=None, repr=False)
    _gap_cache: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def kdtree(self) -> cKDTree:
        if self._kdtree is None:
            self._kdtree = cKDTree(self.sigma.points)
        return self._kdtree

    def length(self, level: int) -> float:
        return self.scale * self.c0 ** level

    def cube(self, level: int, index: int) -> Cube:
        return self.levels[level][index]

    def cubes(self) -> Iterator[Cube]:
        for generation in self.levels:
            yield from generation

    def n_cubes(self) -> int:
        return sum(len(g) for g in self.levels)

    def parent(self, cube: Cube) -> Optional[Cube]:
        return None if cube.parent is None else self.levels[cube.level - 1][cube.parent]

    def ancestors(self, cube: Cube) -> List[Cube]:
        """Ancestors from the parent up to generation 0."""
        out = []
        cur = self.parent(cube)
        while cur is not None:
            out.append(cur)
            cur = self.parent(cur)
        return out

    def contains(self, outer: Cube, inner: Cube) -> bool:
        """inner is a subset of outer (generations are nested)."""
        if inner.level < outer.level or len(inner.members) == 0:
            return False
        return bool(self.labels[outer.level, inner.members[0]] == outer.index)

    def ball_members(self, cube: Cube, M: float) -> np.ndarray:
        """Indices of the cloud in the open ball B(zeta, M * length)."""
        zeta = self.sigma.points[cube.center]
        radius = M * cube.length
        idx = np.asarray(self.kdtree.query_ball_point(zeta, radius), dtype=int)
        if idx.size:
            d = np.linalg.norm(self.sigma.points[idx] - zeta, axis=1)
            idx = np.sort(idx[d < radius])
        return idx

    def complement_distance(self, cube: Cube) -> np.ndarray:
        """dist(xi, cloud minus cube) for each member, +inf beyond the cube length."""
        cached = self._gap_cache.get(cube.key)
        if cached is not None:
            return cached
        pts = self.sigma.points
        zeta = pts[cube.center]
        near = np.asarray(self.kdtree.query_ball_point(zeta, 2.0 * cube.length), dtype=int)
        outside = near[self.labels[cube.level, near] != cube.index] if near.size else near
        if outside.size == 0:
            gaps = np.full(len(cube.members), np.inf)
        else:
            gaps, _ = cKDTree(pts[outside]).query(
                pts[cube.members], k=1, distance_upper_bound=cube.length
            )
        self._gap_cache[cube.key] = gaps
        return gaps

    def to_json(self) -> Dict[str, Any]:
        return {
            "c0": self.c0,
            "c1_achieved": self.c1_achieved,
            "scale": self.scale,
            "truncated": self.truncated,
            "levels": [
                [{"center_idx": int(c.center), "member_idx": [int(m) for m in c.members]} for c in gen]
                for gen in self.levels
            ],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any], sigma: PointCloud) -> "CubeTree":
        """Rebuild a tree written by ``to_json`` over the same cloud."""
        n = len(sigma)
        gens = data.get("levels") or []
        if not gens:
            raise GMTInputError("Cube tree JSON has no levels")
        labels = np.full((len(gens), n), -1, dtype=np.int64)
        levels: List[List[Cube]] = []
        scale = float(data["scale"])
        c0 = float(data["c0"])
        for level, gen in enumerate(gens):
            cubes = []
            for k, rec in enumerate(gen):
                members = np.asarray(rec["member_idx"], dtype=np.int64)
                if members.size and (members.min() < 0 or members.max() >= n):
                    raise GMTInputError(f"Cube ({level}, {k}) indexes outside the {n}-point cloud")
                labels[level, members] = k
                cubes.append(Cube(level, k, int(rec["center_idx"]), members, scale * c0 ** level))
            levels.append(cubes)
        if np.any(labels < 0):
            raise GMTInputError("Cube tree JSON does not partition the cloud")
        for level in range(1, len(levels)):
            for cube in levels[level]:
                cube.parent = int(labels[level - 1, cube.center])
                levels[level - 1][cube.parent].children.append(cube.index)
        return cls(
            sigma, c0, scale, levels, labels,
            c1_achieved=float(data.get("c1_achieved", 0.0)),
            truncated=bool(data.get("truncated", False)),
        )


def cloud_diameter(points: np.ndarray, chunk: int = 1024) -> float:
    """Exact diameter by chunked pairwise distances."""
    if len(points) < 2:
        return 0.0
    best = 0.0
    for start in range(0, len(points), chunk):
        best = max(best, float(cdist(points[start:start + chunk], points).max()))
    return best


def _greedy_net(points: np.ndarray, r: float, seeds: List[int]) -> List[int]:
    """Maximal r-separated subset containing ``seeds``, filled in index order."""
    chosen = list(seeds)
    grid: Dict[Tuple[int, ...], List[int]] = defaultdict(list)
    dim = points.shape[1]
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * dim, indexing="ij")).reshape(dim, -1).T
    keys = np.floor(points / r).astype(np.int64)
    in_net = np.zeros(len(points), dtype=bool)
    for i in seeds:
        grid[tuple(keys[i])].append(i)
        in_net[i] = True
    for i in range(len(points)):
        if in_net[i]:
            continue
        p = points[i]
        blocked = False
        for off in offsets:
            for j in grid.get(tuple(keys[i] + off), ()):
                if math.dist(p, points[j]) < r:
                    blocked = True
                    break
            if blocked:
                break
        if not blocked:
            grid[tuple(keys[i])].append(i)
            in_net[i] = True
            chosen.append(i)
    return sorted(chosen)


def _nearest_lowest(points: np.ndarray, net: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Nearest net point for each query row; ties go to the lowest index."""
    tree = cKDTree(points[net])
    k = min(4, len(net))
    d, j = tree.query(query, k=k)
    if k == 1:
        return net[np.asarray(j).reshape(-1)]
    tie = d <= d[:, :1] * (1 + 1e-12) + 1e-15
    cand = np.where(tie, net[j], np.iinfo(np.int64).max)
    return cand.min(axis=1)


def build_cube_tree(sigma: PointCloud, c0: float = 0.25, depth: int = 4) -> CubeTree:
    """Nested greedy nets X_0 ⊆ X_1 ⊆ ... with separation length/2.

    Generation-n cubes are the sets of points whose chain of nearest-parent
    assignments passes through a point of X_n; ``length(n) = diam * c0**n``.
    """
    if len(sigma) == 0:
        raise GMTInputError("Cube tree needs a nonempty point cloud")
    if not 0 < c0 <= 0.25:
        raise GMTInputError(f"c0 must lie in (0, 1/4], got {c0}")
    if depth < 1:
        raise GMTInputError(f"Depth must be >= 1, got {depth}")

    pts = sigma.points
    n = len(pts)
    diam = cloud_diameter(pts)
    scale = diam if diam > 0 else 1.0

    nets: List[np.ndarray] = []
    truncated = False
    seeds: List[int] = []
    for level in range(depth + 1):
        r = scale * c0 ** level / 2.0
        seeds = _greedy_net(pts, r, seeds)
        nets.append(np.asarray(seeds, dtype=np.int64))
        if len(seeds) == n and level < depth:
            truncated = True
            logger.warning(f"Cube tree saturated at generation {level}; truncated")
            break

    top = len(nets) - 1
    # owner[n][p]: the X_n point representing p
    owner = [np.empty(n, dtype=np.int64) for _ in nets]
    owner[top] = _nearest_lowest(pts, nets[top], pts)
    for level in range(top - 1, -1, -1):
        finer = nets[level + 1]
        parent_of = _nearest_lowest(pts, nets[level], pts[finer])
        lookup = np.full(n, -1, dtype=np.int64)
        lookup[finer] = parent_of
        owner[level] = lookup[owner[level + 1]]

    labels = np.empty((len(nets), n), dtype=np.int64)
    levels: List[List[Cube]] = []
    for level, net in enumerate(nets):
        rank = np.full(n, -1, dtype=np.int64)
        rank[net] = np.arange(len(net))
        labels[level] = rank[owner[level]]
        order = np.argsort(labels[level], kind="stable")
        bounds = np.searchsorted(labels[level][order], np.arange(len(net) + 1))
        length = scale * c0 ** level
        levels.append([
            Cube(level, k, int(net[k]), order[bounds[k]:bounds[k + 1]], length)
            for k in range(len(net))
        ])

    for level in range(1, len(levels)):
        for cube in levels[level]:
            cube.parent = int(labels[level - 1, cube.center])
            levels[level - 1][cube.parent].children.append(cube.index)

    tree = CubeTree(sigma, c0, scale, levels, labels, truncated=truncated)
    tree.c1_achieved = _achieved_c1(tree)[0]
    logger.info(
        f"Cube tree on {n} points: {tree.n_cubes()} cubes in {len(levels)} generations, "
        f"c1 achieved {tree.c1_achieved:.4f}"
    )
    return tree


def _achieved_c1(tree: CubeTree) -> Tuple[float, Optional[Dict[str, Any]]]:
    """Largest c1 <= 1 with cloud ∩ B(zeta, c1*length) inside every cube."""
    pts = tree.sigma.points
    best, witness = 1.0, None
    for cube in tree.cubes():
        zeta = pts[cube.center]
        near = np.asarray(tree.kdtree.query_ball_point(zeta, cube.length), dtype=int)
        if near.size == 0:
            continue
        member = np.zeros(len(pts), dtype=bool)
        member[cube.members] = True
        outside = near[~member[near]]
        if outside.size == 0:
            continue
        d = np.linalg.norm(pts[outside] - zeta, axis=1)
        k = int(np.argmin(d))
        ratio = float(d[k]) / cube.length
        if ratio < best:
            best = ratio
            witness = {"level": cube.level, "cube": cube.index, "point": int(outside[k])}
    return best, witness


def inner_cube(tree: CubeTree, cube: Cube, t: float) -> InnerCube:
    """(1-t)Δ: members at distance > t*length from the rest of the cloud."""
    if not 0 < t < 1:
        raise GMTInputError(f"t must lie in (0, 1), got {t}")
    gaps = tree.complement_distance(cube)
    return InnerCube(cube, t, cube.members[gaps > t * cube.length])


def verify_cube_axioms(tree: CubeTree) -> CubeAxiomReport:
    """Check partition, nesting and the ball sandwich for every cube."""
    pts = tree.sigma.points
    n = len(pts)

    partition = AxiomCheck(name="partition", passed=True)
    for level, generation in enumerate(tree.levels):
        all_members = np.concatenate([c.members for c in generation]) if generation else np.zeros(0, int)
        counts = np.bincount(all_members.astype(int), minlength=n)
        bad = np.flatnonzero(counts != 1)
        if bad.size:
            partition = AxiomCheck(
                name="partition", passed=False,
                witness={"level": level, "index": int(bad[0]), "count": int(counts[bad[0]])},
            )
            break

    nesting = AxiomCheck(name="nesting", passed=True)
    for level in range(1, len(tree.levels)):
        coarse = np.full(n, -1, dtype=np.int64)
        for c in tree.levels[level - 1]:
            coarse[c.members] = c.index
        for c in tree.levels[level]:
            owners = np.unique(coarse[c.members])
            if len(owners) > 1:
                stray = c.members[coarse[c.members] != coarse[c.members[0]]][0]
                nesting = AxiomCheck(
                    name="nesting", passed=False,
                    witness={"level": level, "cube": c.index, "point": int(stray)},
                )
                break
        if not nesting.passed:
            break

    worst, upper_witness = 0.0, None
    for cube in tree.cubes():
        if len(cube.members) == 0:
            continue
        d = np.linalg.norm(pts[cube.members] - pts[cube.center], axis=1)
        k = int(np.argmax(d))
        if d[k] / cube.length > worst:
            worst = float(d[k] / cube.length)
            upper_witness = {"level": cube.level, "cube": cube.index, "point": int(cube.members[k])}
    c1, lower_witness = _achieved_c1(tree)
    upper_ok = worst < 1.0
    sandwich = AxiomCheck(
        name="sandwich", passed=upper_ok and c1 > 0,
        witness=upper_witness if not upper_ok else lower_witness,
    )
    report = CubeAxiomReport(partition=partition, nesting=nesting, sandwich=sandwich, c1_achieved=c1)
    logger.info(
        f"Cube axioms: partition={partition.passed} nesting={nesting.passed} "
        f"sandwich={sandwich.passed} c1={c1:.4f}"
    )
    return report
