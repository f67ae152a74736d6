"""
Rectifiability

Bilateral beta numbers of point clouds, the Carleson energy of the bad set of
scales and the far-point witness search.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud
from .exceptions import GMTInputError
from .models import BetaRecord, CarlesonEnergyReport

logger = logging.getLogger(__name__)


@dataclass
class FarPointWitness:
    """Outcome of the far-point search in B(xi, r)."""

    hypotheses_met: bool
    found: bool
    beta: float
    z: Optional[List[float]] = None
    distance: float = 0.0
    zeta: Optional[List[float]] = None
    reason: str = ""

    @property
    def counterexample_candidate(self) -> bool:
        return self.hypotheses_met and not self.found


class NetDistance:
    """Distance to a sampled set, refined on short edges of the sample.

    A point's distance is the smaller of the nearest-sample distance and the
    distance to segments joining pairs among its k nearest samples that are at
    most ``2 * mesh`` apart.
    """

    def __init__(self, cloud: PointCloud, k: Optional[int] = None) -> None:
        self.points = cloud.points
        self.mesh = cloud.mesh
        self.tree = cloud.kdtree()
        self.k = min(k or cloud.dimension, len(cloud))

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(q)
        if self.k <= 1:
            d, _ = self.tree.query(q, k=1)
            return np.asarray(d, dtype=float)
        d, idx = self.tree.query(q, k=self.k)
        best = d[:, 0].copy()
        for a, b in itertools.combinations(range(self.k), 2):
            pa, pb = self.points[idx[:, a]], self.points[idx[:, b]]
            edge = pb - pa
            length2 = np.einsum("ij,ij->i", edge, edge)
            short = (length2 > 0) & (length2 <= (2.0 * self.mesh) ** 2)
            if not short.any():
                continue
            t = np.einsum("ij,ij->i", q - pa, edge) / np.where(length2 > 0, length2, 1.0)
            foot = pa + np.clip(t, 0.0, 1.0)[:, None] * edge
            seg = np.linalg.norm(q - foot, axis=1)
            best = np.where(short, np.minimum(best, seg), best)
        return best


def _tangent_frame(normal: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to ``normal``."""
    dim = len(normal)
    q, _ = np.linalg.qr(np.column_stack([normal, np.eye(dim)]))
    frame = q[:, 1:dim].T
    return frame


def _disk_grid(dim: int, n: int) -> np.ndarray:
    """Grid on the unit (dim-1)-disk with n ticks per half-axis."""
    ticks = np.arange(-n, n + 1) / n
    grid = np.array(list(itertools.product(ticks, repeat=dim - 1)))
    return grid[np.linalg.norm(grid, axis=1) <= 1.0 + 1e-12]


class _BetaObjective:
    def __init__(self, ball_pts: np.ndarray, xi: np.ndarray, r: float, net: NetDistance, disk: np.ndarray) -> None:
        self.ball_pts = ball_pts
        self.xi = xi
        self.r = r
        self.net = net
        self.disk = disk

    def terms(self, normal: np.ndarray) -> Tuple[float, float]:
        flat = float(np.max(np.abs((self.ball_pts - self.xi) @ normal))) / self.r
        frame = _tangent_frame(normal)
        q = self.xi + self.r * self.disk @ frame
        bilateral = float(np.max(self.net(q))) / self.r
        return min(flat, 1.0), min(bilateral, 1.0)

    def __call__(self, normal: np.ndarray) -> float:
        return sum(self.terms(normal))


def bbeta(
    Z: PointCloud,
    xi: Sequence[float],
    r: float,
    disk_ticks: int = 16,
    net: Optional[NetDistance] = None,
    tol: float = 1e-6,
) -> BetaRecord:
    """Bilateral beta number at (xi, r), minimized over planes through xi.

    The PCA plane of Z ∩ B(xi, r) seeds a pattern search over normal
    directions; the result is an upper bound on the infimum.
    """
    if not r > 0:
        raise GMTInputError(f"Radius must be positive, got {r}")
    xi = np.asarray(xi, dtype=float)
    tree = Z.kdtree() if net is None else net.tree
    if float(tree.query(xi, k=1)[0]) > tol * max(1.0, r):
        raise GMTInputError(f"Center {xi.tolist()} is not a point of Z")
    net = net or NetDistance(Z)

    idx = tree.query_ball_point(xi, r * (1 + 1e-12))
    ball_pts = Z.points[np.sort(np.asarray(idx, dtype=int))]
    dim = Z.dimension
    degenerate = len(ball_pts) < dim

    if len(ball_pts) >= 2:
        centered = ball_pts - ball_pts.mean(axis=0)
        _, vecs = np.linalg.eigh(centered.T @ centered)
        normal = vecs[:, 0]
    else:
        normal = np.eye(dim)[-1]
    objective = _BetaObjective(ball_pts, xi, r, net, _disk_grid(dim, disk_ticks))

    best = objective(normal)
    step = 0.25
    while step > 1e-3 and best > 0:
        improved = False
        for t in _tangent_frame(normal):
            for sign in (1.0, -1.0):
                trial = normal * math.cos(step) + sign * t * math.sin(step)
                trial /= np.linalg.norm(trial)
                value = objective(trial)
                if value < best - 1e-15:
                    best, normal, improved = value, trial, True
        if not improved:
            step /= 2.0

    flat, bilateral = objective.terms(normal)
    if normal[np.argmax(np.abs(normal))] < 0:
        normal = -normal
    return BetaRecord(
        xi=xi.tolist(),
        r=float(r),
        value=flat + bilateral,
        plane_normal=normal.tolist(),
        flat_term=flat,
        bilateral_term=bilateral,
        degenerate=degenerate,
    )


def beta_sweep(Z: PointCloud, centers: np.ndarray, scales: Sequence[float]) -> List[BetaRecord]:
    """bbeta over every (center, scale) pair, centers outermost."""
    net = NetDistance(Z)
    return [bbeta(Z, xi, r, net=net) for xi in np.atleast_2d(centers) for r in scales]


def _cell_centers(points: np.ndarray, h: float) -> np.ndarray:
    """First point of every occupied h-cell, in cell order."""
    keys = np.floor(points / h).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def default_scale_count(r0: float, mesh: float) -> int:
    """Dyadic scales r0 * 2^-j down to four mesh lengths."""
    return max(1, int(math.floor(math.log2(r0 / (4.0 * mesh)))) + 1)


def carleson_energy(
    Z: PointCloud,
    xi0: Sequence[float],
    r0: float,
    epsilon: float,
    n_scales: Optional[int] = None,
    h: Optional[float] = None,
    d: Optional[int] = None,
) -> CarlesonEnergyReport:
    """Discrete sigma-mass of {(xi, r): bbeta > epsilon} over B(xi0, r0) x (0, r0).

    Each occupied h-cell carries H^d weight h^d and each dyadic scale cell
    carries dr/r mass log 2.
    """
    if not r0 > 0:
        raise GMTInputError(f"r0 must be positive, got {r0}")
    h = Z.mesh if h is None else h
    d = Z.dimension - 1 if d is None else d
    n_scales = default_scale_count(r0, h) if n_scales is None else n_scales
    xi0 = np.asarray(xi0, dtype=float)

    idx = Z.kdtree().query_ball_point(xi0, r0)
    centers = _cell_centers(Z.points[np.sort(np.asarray(idx, dtype=int))], h)
    scales = [r0 * 2.0 ** -j for j in range(n_scales)]
    weight = h ** d * math.log(2.0)

    net = NetDistance(Z)
    n_bad = 0
    for xi in centers:
        for r in scales:
            if bbeta(Z, xi, r, net=net).value > epsilon:
                n_bad += 1
    estimate = n_bad * weight
    report = CarlesonEnergyReport(
        epsilon=epsilon,
        xi0=xi0.tolist(),
        r0=r0,
        estimate=estimate,
        C_UR_emp=estimate / r0 ** d,
        n_cells=len(centers) * len(scales),
        n_bad=n_bad,
    )
    logger.info(
        f"Carleson energy at epsilon={epsilon}: {n_bad}/{report.n_cells} bad cells, "
        f"C_UR_emp={report.C_UR_emp:.4g}"
    )
    return report


def far_point_witness(
    Z: PointCloud,
    sigma: PointCloud,
    E: Sequence[int],
    xi: Sequence[float],
    r: float,
    epsilon: float,
    C: float,
) -> FarPointWitness:
    """Search Z ∩ B(xi, r) for a point at distance >= epsilon*r from E.

    The search only runs when bbeta_Z(xi, r) < epsilon and some zeta in
    sigma ∩ B(xi, r/(2C)) lies farther than (2C+1)*epsilon*r from E.
    """
    if not C > 0:
        raise GMTInputError(f"C must be positive, got {C}")
    if not 0 < epsilon < 1.0 / (8.0 * C * C):
        raise GMTInputError(f"epsilon must lie in (0, 1/(8C^2)) = (0, {1 / (8 * C * C):.4g})")
    xi = np.asarray(xi, dtype=float)
    e_idx = np.asarray(E, dtype=np.int64).reshape(-1)
    e_pts = sigma.points[e_idx]
    e_tree = cKDTree(e_pts) if len(e_pts) else None

    def dist_E(x: np.ndarray) -> np.ndarray:
        if e_tree is None:
            return np.full(len(x), np.inf)
        return e_tree.query(x, k=1)[0]

    beta = bbeta(Z, xi, r).value
    if beta >= epsilon:
        return FarPointWitness(False, False, beta, reason=f"beta {beta:.4g} >= epsilon")

    near = np.asarray(sigma.kdtree().query_ball_point(xi, r / (2.0 * C)), dtype=int)
    zeta = None
    if near.size:
        gaps = dist_E(sigma.points[near])
        ok = gaps > (2.0 * C + 1.0) * epsilon * r
        if ok.any():
            zeta = sigma.points[near[ok][int(np.argmax(gaps[ok]))]].tolist()
    if zeta is None:
        return FarPointWitness(False, False, beta, reason="hypotheses not met: no far zeta")

    cand = np.asarray(Z.kdtree().query_ball_point(xi, r), dtype=int)
    if cand.size:
        gaps = dist_E(Z.points[cand])
        k = int(np.argmax(gaps))
        if gaps[k] >= epsilon * r:
            return FarPointWitness(
                True, True, beta, Z.points[cand[k]].tolist(), float(gaps[k]), zeta,
            )
    logger.warning(f"No far point in Z ∩ B({xi.tolist()}, {r:g}) although the hypotheses hold")
    return FarPointWitness(True, False, beta, zeta=zeta, reason="no witness at this resolution")
