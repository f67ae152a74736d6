"""
Porosity and Carleson Packing

Doubling profiles of discrete measures, the lambda packing coefficients,
porous cubes, Carleson sums, shell decay fits and the refinement E -> E'.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .config import PorosityConfig
from .core import Ball, DiscreteMeasure, PointCloud
from .exceptions import GMTConfigurationError, GMTInputError, GMTRefinementError
from .metric_cubes import Cube, CubeTree, inner_cube
from .models import CarlesonReport, DoublingProfile, ShellDecayFit

logger = logging.getLogger(__name__)

# Key of the virtual cube holding the whole cloud when generation 0 has several cubes.
ROOT_KEY = (-1, 0)


@dataclass
class RefinementResult:
    """Outcome of the porous-cube refinement of E."""

    E_prime: np.ndarray
    T: List[Cube]
    N: int
    E_N: np.ndarray
    t_used: float
    mass_ratio: float
    C1: float
    max_membership: int = 0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {
            "E_prime_idx": [int(i) for i in self.E_prime],
            "E_N_idx": [int(i) for i in self.E_N],
            "T": [[c.level, c.index] for c in self.T],
            "N": self.N,
            "C1": self.C1,
            "t_used": self.t_used,
            "mass_ratio": self.mass_ratio,
            "max_membership": self.max_membership,
        }


def _index_mask(tree: CubeTree, E: Sequence[int]) -> np.ndarray:
    idx = np.asarray(E, dtype=np.int64).reshape(-1)
    n = len(tree.sigma)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise GMTInputError("E contains indices outside the cloud")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return mask


def estimate_doubling(
    mu: DiscreteMeasure,
    cloud: PointCloud,
    region: Ball,
    scales: Sequence[float],
    max_centers: int = 256,
) -> DoublingProfile:
    """Empirical sup of mu(B(xi, 2r)) / mu(B(xi, r)) over the region.

    Centers range over supp(mu) inside ``region`` (evenly thinned to
    ``max_centers``); balls are closed.
    """
    if len(mu.weights) != len(cloud):
        raise GMTInputError("Measure and cloud sizes differ")
    radii = np.asarray(sorted(scales), dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise GMTInputError("Scales must be positive")

    inside = region.contains(cloud.points) & (mu.weights > 0)
    if mu.mass(inside) <= 0:
        raise GMTInputError("Measure of the doubling region is zero")
    centers = np.flatnonzero(inside)
    if len(centers) > max_centers:
        centers = centers[np.linspace(0, len(centers) - 1, max_centers).astype(int)]

    tree = cloud.kdtree()
    best, n_pairs, skipped = 1.0, 0, 0
    for r in radii:
        small = tree.query_ball_point(cloud.points[centers], r * (1 + 1e-12))
        big = tree.query_ball_point(cloud.points[centers], 2 * r * (1 + 1e-12))
        for s_idx, b_idx in zip(small, big):
            denom = mu.mass(s_idx)
            if denom <= 0:
                skipped += 1
                continue
            best = max(best, mu.mass(b_idx) / denom)
            n_pairs += 1
    if skipped:
        logger.warning(f"Doubling estimate skipped {skipped} zero-mass balls")

    profile = DoublingProfile(
        C_mu=best,
        region_center=region.center.tolist(),
        region_radius=region.radius,
        scale_range=(float(radii[0]), float(radii[-1])),
        beta0=math.log2(best),
        n_pairs=n_pairs,
        skipped=skipped,
    )
    logger.info(f"Doubling constant {best:.4f} (beta0 = {profile.beta0:.4f}) over {n_pairs} balls")
    return profile


def complement_cubes(tree: CubeTree, E: Sequence[int], M: float) -> List[Cube]:
    """W(E^c): maximal cubes whose ball M*B_Delta misses E, by a top-down scan."""
    if not M > 1:
        raise GMTInputError(f"M must exceed 1, got {M}")
    mask = _index_mask(tree, E)
    pts = tree.sigma.points
    if not mask.any():
        return list(tree.levels[0])

    e_tree = cKDTree(pts[mask])
    found: List[Cube] = []
    frontier = list(tree.levels[0])
    while frontier:
        centers = pts[[c.center for c in frontier]]
        gap, _ = e_tree.query(centers, k=1)
        nxt: List[Cube] = []
        for cube, g in zip(frontier, gap):
            if g >= M * cube.length:
                found.append(cube)
            elif cube.level < tree.depth:
                nxt.extend(tree.levels[cube.level + 1][k] for k in cube.children)
        frontier = nxt
    found.sort(key=lambda c: c.key)
    return found


def _within_ball(tree: CubeTree, inner: Cube, center: np.ndarray, radius: float) -> bool:
    d = np.linalg.norm(tree.sigma.points[inner.members] - center, axis=1)
    return bool(np.all(d < radius))


def lambda_coefficient(
    tree: CubeTree,
    E: Sequence[int],
    cube: Cube,
    M: float,
    beta: float,
    profile: Optional[DoublingProfile] = None,
) -> float:
    """Sum of (l(D')/l(D))^beta over W(E^c) cubes D' inside M*B_D; 0 if empty."""
    return math.fsum(ratio for _, ratio in lambda_terms(tree, E, cube, M, beta, profile))


def lambda_terms(
    tree: CubeTree,
    E: Sequence[int],
    cube: Cube,
    M: float,
    beta: float,
    profile: Optional[DoublingProfile] = None,
) -> List[Tuple[Cube, float]]:
    zeta = tree.sigma.points[cube.center]
    radius = M * cube.length
    if profile is not None:
        reach = float(np.linalg.norm(zeta - np.asarray(profile.region_center))) + radius
        if reach > profile.region_radius:
            logger.warning(
                f"M*B of cube {cube.key} leaves the doubling region "
                f"({reach:.4g} > {profile.region_radius:.4g})"
            )
    return [
        (other, (other.length / cube.length) ** beta)
        for other in complement_cubes(tree, E, M)
        if _within_ball(tree, other, zeta, radius)
    ]


def mass_scaling_check(
    tree: CubeTree,
    mu: DiscreteMeasure,
    profile: DoublingProfile,
    E: Sequence[int],
    cube: Cube,
    M: float,
) -> float:
    """Max of (l'/l)^beta0 / (K0 mu(D')/mu(D)) over the lambda cubes of ``cube``.

    K0 = C_mu ** log2(4M / c1). Values <= 1 confirm the mass scaling bound.
    """
    c1 = max(tree.c1_achieved, 1e-12)
    K0 = profile.C_mu ** math.log2(4.0 * M / c1)
    total = mu.mass(cube.members)
    worst = 0.0
    for other, _ in lambda_terms(tree, E, cube, M, profile.beta0):
        part = mu.mass(other.members)
        lhs = (other.length / cube.length) ** profile.beta0
        if part <= 0:
            return math.inf
        worst = max(worst, lhs / (K0 * part / total))
    return worst


def porous_cubes(tree: CubeTree, E: Sequence[int], M: float, delta: float) -> List[Cube]:
    """Cubes meeting E whose ball M*B holds a cloud point at distance >= delta*l from E."""
    if not M > 1:
        raise GMTInputError(f"M must exceed 1, got {M}")
    if not 0 < delta < 1:
        raise GMTInputError(f"delta must lie in (0, 1), got {delta}")
    mask = _index_mask(tree, E)
    if not mask.any():
        return []
    pts = tree.sigma.points
    dist_E, _ = cKDTree(pts[mask]).query(pts, k=1)

    porous = []
    for cube in tree.cubes():
        if not mask[cube.members].any():
            continue
        near = tree.ball_members(cube, M)
        if near.size and float(dist_E[near].max()) >= delta * cube.length:
            porous.append(cube)
    logger.debug(f"{len(porous)} porous cubes for M={M}, delta={delta}")
    return porous


def carleson_sum(tree: CubeTree, family: Sequence[Cube], mu: DiscreteMeasure, cube: Cube) -> float:
    """Sum of mu(D) over family cubes inside ``cube``, divided by mu(cube).

    Returns NaN when ``cube`` carries no mass.
    """
    denom = mu.mass(cube.members)
    if denom <= 0:
        logger.warning(f"Cube {cube.key} has zero mass; Carleson ratio undefined")
        return math.nan
    parts = [mu.mass(c.members) for c in family if tree.contains(cube, c)]
    return math.fsum(parts) / denom


def empirical_carleson_norm(
    tree: CubeTree, family: Sequence[Cube], mu: DiscreteMeasure
) -> CarlesonReport:
    """Sup over all cubes (and the virtual root) of :func:`carleson_sum`."""
    contributions: Dict[Tuple[int, int], List[float]] = defaultdict(list)
    for c in family:
        m = mu.mass(c.members)
        contributions[ROOT_KEY].append(m)
        contributions[c.key].append(m)
        for anc in tree.ancestors(c):
            contributions[anc.key].append(m)

    candidates: List[Tuple[Tuple[int, int], float]] = [(ROOT_KEY, mu.total)]
    candidates += [(c.key, mu.mass(c.members)) for c in tree.cubes()]

    ratios: List[Tuple[int, int, float]] = []
    excluded: List[Tuple[int, int]] = []
    best, argmax = 0.0, None
    for key, denom in candidates:
        if denom <= 0:
            excluded.append(key)
            continue
        value = math.fsum(sorted(contributions.get(key, []))) / denom
        ratios.append((key[0], key[1], value))
        if value > best:
            best, argmax = value, key
    if excluded:
        logger.warning(f"{len(excluded)} zero-mass cubes excluded from the Carleson sup")
    logger.info(f"Empirical Carleson norm {best:.4f} over {len(ratios)} cubes")
    return CarlesonReport(C1=best, argmax=argmax, ratios=ratios, excluded=excluded)


def shell_decay(tree: CubeTree, mu: DiscreteMeasure, t_grid: Sequence[float]) -> ShellDecayFit:
    """Fit max_D mu(D minus (1-t)D)/mu(D) <= t0 * t^alpha on a log-log envelope."""
    ts = np.asarray(sorted(t_grid), dtype=float)
    if len(ts) < 4 or np.any(ts <= 0) or np.any(ts >= 1):
        raise GMTInputError("t_grid needs at least 4 values in (0, 1)")

    envelope = np.zeros(len(ts))
    n_cubes = 0
    for cube in tree.cubes():
        total = mu.mass(cube.members)
        if total <= 0:
            continue
        n_cubes += 1
        gaps = tree.complement_distance(cube)
        for k, t in enumerate(ts):
            shell = cube.members[gaps <= t * cube.length]
            envelope[k] = max(envelope[k], mu.mass(shell) / total)

    positive = envelope > 0
    if positive.sum() < 2:
        logger.warning("Shell masses vanish; decay exponent undefined")
        return ShellDecayFit(
            t_grid=ts.tolist(), envelope=envelope.tolist(), undefined=True, n_cubes=n_cubes
        )

    lt, le = np.log(ts[positive]), np.log(envelope[positive])
    alpha, intercept = np.polyfit(lt, le, 1)
    residual = le - (alpha * lt + intercept)
    t0 = float(np.max(envelope[positive] / ts[positive] ** alpha))
    logger.info(f"Shell decay fit: t0 = {t0:.4g}, alpha = {alpha:.4g}")
    return ShellDecayFit(
        t_grid=ts.tolist(),
        envelope=envelope.tolist(),
        t0_hat=t0,
        alpha_hat=float(alpha),
        residual_max=float(np.max(np.abs(residual))),
        n_cubes=n_cubes,
    )


def _strict_porous_depth(tree: CubeTree, porous: Sequence[Cube]) -> np.ndarray:
    """k(D) for the finest cube of every point: porous cubes strictly above it."""
    flagged = {c.key for c in porous}
    finest = tree.levels[tree.depth]
    k = np.zeros(len(finest), dtype=np.int64)
    for cube in finest:
        k[cube.index] = sum(1 for anc in tree.ancestors(cube) if anc.key in flagged)
    return k[tree.labels[tree.depth]]


def refine_set(
    tree: CubeTree,
    E: Sequence[int],
    mu: DiscreteMeasure,
    cfg: PorosityConfig,
    profile: Optional[DoublingProfile] = None,
) -> RefinementResult:
    """Excise deep porous nesting and thin shells from E.

    N is the least integer above 2*C1/(tau*rho). E_N drops the points lying in
    a cube with k(D) >= N, T keeps the porous cubes meeting E_N, and E' drops
    the t-shells of T from E_N. All result invariants are verified exactly.
    """
    if len(mu.weights) != len(tree.sigma):
        raise GMTInputError("Measure and cloud sizes differ")
    if profile is not None and not cfg.beta > profile.beta0:
        raise GMTConfigurationError(
            f"beta={cfg.beta} must exceed beta0={profile.beta0:.4f}"
        )
    e_mask = _index_mask(tree, E)
    mass_E = mu.mass(e_mask)
    if mu.total <= 0 or mass_E / mu.total < cfg.rho:
        raise GMTInputError(
            f"mu(E)/mu(root) = {mass_E / mu.total if mu.total > 0 else 0.0:.4g} "
            f"is below rho = {cfg.rho}"
        )

    porous = porous_cubes(tree, np.flatnonzero(e_mask), cfg.M, cfg.delta)
    C1 = empirical_carleson_norm(tree, porous, mu).C1 if porous else 0.0
    N = int(math.floor(2.0 * C1 / (cfg.tau * cfg.rho))) + 1

    k = _strict_porous_depth(tree, porous)
    en_mask = e_mask & (k < N)
    T = [c for c in porous if en_mask[c.members].any()]

    shell_mask = np.zeros(len(tree.sigma), dtype=bool)
    for cube in T:
        kept = inner_cube(tree, cube, cfg.t).members
        shell = np.setdiff1d(cube.members, kept, assume_unique=True)
        shell_mask[shell] = True
    ep_mask = en_mask & ~shell_mask

    membership = np.zeros(len(tree.sigma), dtype=np.int64)
    for cube in T:
        membership[cube.members] += 1
    max_membership = int(membership[ep_mask].max()) if ep_mask.any() else 0
    mass_ratio = mu.mass(ep_mask) / mass_E if mass_E > 0 else 1.0

    diagnostics = {
        "C1": C1,
        "N": N,
        "t": cfg.t,
        "n_porous": len(porous),
        "n_T": len(T),
        "excised_mass": mass_E - mu.mass(en_mask),
        "shell_mass": mu.mass(en_mask) - mu.mass(ep_mask),
        "mass_ratio": mass_ratio,
    }
    if np.any(ep_mask & ~en_mask) or np.any(en_mask & ~e_mask):
        raise GMTRefinementError("Refined sets are not nested", diagnostics)
    if max_membership > N:
        raise GMTRefinementError(
            f"A point of E' lies in {max_membership} cubes of T, more than N={N}", diagnostics
        )
    if mass_ratio < 1.0 - cfg.tau:
        logger.error(f"Refinement kept {mass_ratio:.4f} of mu(E) with t={cfg.t}")
        raise GMTRefinementError(
            f"mu(E')/mu(E) = {mass_ratio:.4f} is below 1 - tau = {1 - cfg.tau:.4f}; "
            "retry with a smaller t",
            diagnostics,
        )

    logger.info(
        f"Refinement: N={N}, |T|={len(T)}, |E'|={int(ep_mask.sum())}/{int(e_mask.sum())}, "
        f"mass ratio {mass_ratio:.4f}"
    )
    return RefinementResult(
        E_prime=np.flatnonzero(ep_mask),
        T=T,
        N=N,
        E_N=np.flatnonzero(en_mask),
        t_used=cfg.t,
        mass_ratio=mass_ratio,
        C1=C1,
        max_membership=max_membership,
        diagnostics=diagnostics,
    )


def refine_with_retry(
    tree: CubeTree,
    E: Sequence[int],
    mu: DiscreteMeasure,
    cfg: PorosityConfig,
    profile: Optional[DoublingProfile] = None,
    max_halvings: int = 8,
) -> RefinementResult:
    """Run :func:`refine_set`, halving t after each mass-bound failure."""
    current = cfg
    for attempt in range(max_halvings + 1):
        try:
            return refine_set(tree, E, mu, current, profile)
        except GMTRefinementError as e:
            shell_failure = e.diagnostics.get("mass_ratio", 1.0) < 1.0 - current.tau
            if attempt == max_halvings or not shell_failure:
                raise
            logger.warning(f"Refinement failed with t={current.t:g}; halving t")
            current = current.model_copy(update={"t": current.t / 2.0})
    raise GMTRefinementError("Refinement retries exhausted")
