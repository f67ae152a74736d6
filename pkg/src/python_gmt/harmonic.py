"""
Harmonic Measure

Walk-on-spheres sampling of harmonic measure and the empirical checks built
on it: doubling, comparison constants, the maximum-principle sandwich and A∞
scatter experiments.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import WoSParams
from .core import ImplicitDomain, PointCloud, hausdorff_estimate
from .exceptions import GMTEstimationError, GMTInputError
from .metric_cubes import CubeTree
from .models import (
    AinftyRow,
    AinftyScatter,
    ComparisonReport,
    ComparisonRow,
    DoublingRow,
    DoublingTable,
    MaxPrincipleReport,
    WoSEstimate,
)
from .whitney import find_corkscrew

logger = logging.getLogger(__name__)

Indicator = Callable[[np.ndarray], np.ndarray]

MIN_WALKS = 1000


@dataclass
class WalkExits:
    """Exit points of one batch of walks; escaped rows are NaN."""

    points: np.ndarray
    escaped: np.ndarray
    seed: int
    eps_shell: float
    escape_radius: Optional[float]

    @property
    def n_walks(self) -> int:
        return len(self.escaped)

    @property
    def escaped_fraction(self) -> float:
        return float(self.escaped.mean()) if self.n_walks else 0.0

    def hits(self, indicator: Indicator) -> np.ndarray:
        """Boolean hit mask over all walks; escaped walks never hit."""
        mask = np.zeros(self.n_walks, dtype=bool)
        done = ~self.escaped
        if done.any():
            mask[done] = np.asarray(indicator(self.points[done]), dtype=bool)
        return mask

    def estimate(self, indicator: Indicator) -> WoSEstimate:
        n = self.n_walks
        hits = int(self.hits(indicator).sum())
        value = hits / n
        escaped = self.escaped_fraction
        unreliable = escaped > 0.5
        if unreliable:
            logger.warning(f"{escaped:.1%} of walks escaped; estimate unreliable")
        return WoSEstimate(
            value=value,
            n_walks=n,
            hits=hits,
            std_err=math.sqrt(value * (1.0 - value) / n),
            eps_shell=self.eps_shell,
            escape_radius=self.escape_radius,
            seed=self.seed,
            escaped_fraction=escaped,
            unreliable=unreliable,
        )


def _walk_chunk(
    domain: ImplicitDomain,
    z: np.ndarray,
    n: int,
    seq: np.random.SeedSequence,
    eps: float,
    max_steps: int,
    escape_radius: Optional[float],
) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seq)
    dim = len(z)
    x = np.tile(z, (n, 1))
    exits = np.full((n, dim), np.nan)
    escaped = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(max_steps):
        if active.size == 0:
            break
        s = np.abs(domain.sdist(x[active]))
        done = s <= eps
        if done.any():
            exits[active[done]] = x[active[done]]
        out = np.zeros(len(active), dtype=bool)
        if escape_radius is not None:
            out = ~done & (np.linalg.norm(x[active] - z, axis=1) > escape_radius)
            escaped[active[out]] = True
        keep = ~done & ~out
        active, s = active[keep], s[keep]
        step = rng.standard_normal((len(active), dim))
        step /= np.linalg.norm(step, axis=1)[:, None]
        x[active] += s[:, None] * step
    escaped[active] = True
    return exits, escaped


def wos_exits(
    domain: ImplicitDomain,
    z: Sequence[float],
    n_walks: int = 20000,
    seed: int = 0,
    params: Optional[WoSParams] = None,
    escape_radius: Optional[float] = None,
) -> WalkExits:
    """Run ``n_walks`` walks on spheres from z.

    Walks stop within ``eps_shell`` of the boundary and are projected onto it
    when the domain has an exact projection. Walk k draws from the substream of
    chunk k // chunk_size spawned from ``seed``, so the exits do not depend on
    the worker count.
    """
    params = params or WoSParams()
    z = np.asarray(z, dtype=float)
    if z.shape != (domain.dimension,) or not np.all(np.isfinite(z)):
        raise GMTInputError(f"Pole must be a finite {domain.dimension}-vector")
    depth = -float(domain.sdist(z[None])[0])
    if not depth > params.eps_shell:
        raise GMTInputError(f"Pole {z.tolist()} is not inside the domain beyond the shell")
    if n_walks < 1:
        raise GMTInputError("Need at least one walk")
    if escape_radius is None:
        escape_radius = params.escape_factor * depth

    sizes = [min(params.chunk_size, n_walks - start) for start in range(0, n_walks, params.chunk_size)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(k: int) -> Tuple[np.ndarray, np.ndarray]:
        return _walk_chunk(domain, z, sizes[k], streams[k], params.eps_shell, params.max_steps, escape_radius)

    if params.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(k) for k in range(len(sizes))]

    points = np.concatenate([r[0] for r in results])
    escaped = np.concatenate([r[1] for r in results])
    done = ~escaped
    if domain.project is not None and done.any():
        points[done] = domain.closest_boundary_point(points[done])
    exits = WalkExits(points, escaped, seed, params.eps_shell, escape_radius)
    if exits.escaped_fraction >= 1.0:
        raise GMTEstimationError(f"All {n_walks} walks from {z.tolist()} escaped")
    logger.debug(f"{n_walks} walks on '{domain.name}': {exits.escaped_fraction:.2%} escaped")
    return exits


def wos_sample(
    domain: ImplicitDomain,
    z: Sequence[float],
    rng_stream: np.random.SeedSequence,
    params: Optional[WoSParams] = None,
) -> Optional[np.ndarray]:
    """One exit point, or None when the walk escapes."""
    params = params or WoSParams()
    z = np.asarray(z, dtype=float)
    depth = -float(domain.sdist(z[None])[0])
    if not depth > params.eps_shell:
        raise GMTInputError(f"Pole {z.tolist()} is not inside the domain beyond the shell")
    exits, escaped = _walk_chunk(
        domain, z, 1, rng_stream, params.eps_shell, params.max_steps, params.escape_factor * depth
    )
    if escaped[0]:
        return None
    point = exits[0]
    if domain.project is not None:
        point = domain.closest_boundary_point(point[None])[0]
    return point


def harmonic_measure(
    domain: ImplicitDomain,
    z: Sequence[float],
    indicator: Indicator,
    n_walks: int = 20000,
    seed: int = 0,
    params: Optional[WoSParams] = None,
) -> WoSEstimate:
    """Estimate omega^z(F) for the boundary set F given by ``indicator``."""
    if n_walks < MIN_WALKS:
        raise GMTInputError(f"Harmonic measure needs at least {MIN_WALKS} walks, got {n_walks}")
    est = wos_exits(domain, z, n_walks, seed, params).estimate(indicator)
    logger.info(f"omega^{list(np.round(z, 4))} = {est.value:.5f} ± {est.std_err:.5f}")
    return est


# -- boundary set oracles ----------------------------------------------------


def everything(x: np.ndarray) -> np.ndarray:
    return np.ones(len(x), dtype=bool)


def ball_indicator(center: Sequence[float], radius: float) -> Indicator:
    c = np.asarray(center, dtype=float)
    return lambda x: np.linalg.norm(x - c, axis=1) <= radius


def box_indicator(lo: Sequence[float], hi: Sequence[float]) -> Indicator:
    a = np.asarray(lo, dtype=float)
    b = np.asarray(hi, dtype=float)
    return lambda x: np.all((x >= a) & (x <= b), axis=1)


def arc_indicator(start: float, stop: float, center: Sequence[float] = (0.0, 0.0)) -> Indicator:
    """Points whose polar angle about ``center`` lies in [start, stop) mod 2pi."""
    c = np.asarray(center, dtype=float)
    width = (stop - start) % (2 * math.pi) or 2 * math.pi

    def inside(x: np.ndarray) -> np.ndarray:
        theta = np.arctan2(x[:, 1] - c[1], x[:, 0] - c[0])
        return (theta - start) % (2 * math.pi) < width

    return inside


def cloud_indicator(cloud: PointCloud, radius: Optional[float] = None) -> Indicator:
    """Points within ``radius`` (default 2h) of a sampled set."""
    radius = 2.0 * cloud.mesh if radius is None else radius
    tree = cloud.kdtree()
    return lambda x: tree.query(x, k=1)[0] <= radius


def voronoi_indicator(E: PointCloud, members: Sequence[int], radius: Optional[float] = None) -> Indicator:
    """Points within ``radius`` of E whose nearest sample of E is in ``members``."""
    radius = 2.0 * E.mesh if radius is None else radius
    tree = E.kdtree()
    chosen = np.zeros(len(E), dtype=bool)
    chosen[np.asarray(members, dtype=np.int64)] = True

    def inside(x: np.ndarray) -> np.ndarray:
        d, i = tree.query(x, k=1)
        return (d <= radius) & chosen[i]

    return inside


def ks_uniform_angle(exits: WalkExits, center: Sequence[float] = (0.0, 0.0)) -> Tuple[float, float]:
    """Kolmogorov-Smirnov statistic and p-value of exit angles against the uniform law."""
    pts = exits.points[~exits.escaped]
    c = np.asarray(center, dtype=float)
    u = (np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]) % (2 * math.pi)) / (2 * math.pi)
    result = stats.kstest(u, "uniform")
    return float(result.statistic), float(result.pvalue)


# -- verification suite --------------------------------------------------------


def _indeterminate(est: WoSEstimate) -> bool:
    return est.value < 10.0 * est.std_err or est.value == 0.0


def doubling_profile_omega(
    domain: ImplicitDomain,
    z0: Sequence[float],
    centers: np.ndarray,
    radii: Sequence[float],
    n_walks: int = 20000,
    seed: int = 0,
    params: Optional[WoSParams] = None,
) -> DoublingTable:
    """Ratios omega(B(xi, 2r)) / omega(B(xi, r)) from one shared batch of exits."""
    exits = wos_exits(domain, z0, n_walks, seed, params)
    rows = []
    for xi in np.atleast_2d(centers):
        for r in radii:
            small = exits.estimate(ball_indicator(xi, r))
            big = exits.estimate(ball_indicator(xi, 2 * r))
            if _indeterminate(small):
                rows.append(DoublingRow(xi=xi.tolist(), r=float(r), ratio=None, std_err=None, indeterminate=True))
                continue
            ratio = big.value / small.value
            rel = math.hypot(big.std_err / big.value, small.std_err / small.value)
            rows.append(DoublingRow(xi=xi.tolist(), r=float(r), ratio=ratio, std_err=ratio * rel))
    ratios = [row.ratio for row in rows if row.ratio is not None]
    table = DoublingTable(rows=rows, sup_ratio=max(ratios) if ratios else None)
    logger.info(f"Harmonic doubling over {len(rows)} balls: sup ratio {table.sup_ratio}")
    return table


def _comparison_row(kind: str, lhs: float, rhs: float, undetermined: bool) -> ComparisonRow:
    if lhs == 0.0 and rhs == 0.0:
        return ComparisonRow(kind=kind, lhs=lhs, rhs=rhs, ratio=None)
    if undetermined or rhs == 0.0:
        return ComparisonRow(kind=kind, lhs=lhs, rhs=rhs, ratio=None, indeterminate=True)
    return ComparisonRow(kind=kind, lhs=lhs, rhs=rhs, ratio=lhs / rhs)


def comparison_suite(
    domain: ImplicitDomain,
    z0: Sequence[float],
    samples: Sequence[Tuple[Sequence[float], float]],
    E: Optional[Indicator] = None,
    C: float = 4.0,
    n_walks: int = 20000,
    seed: int = 0,
    params: Optional[WoSParams] = None,
) -> ComparisonReport:
    """Both sides of the ratio, lower-bound and Harnack comparisons.

    For each (xi, r), z is an interior corkscrew point of B(xi, r); the test set
    is E ∩ B(xi, r/4) (the whole sub-ball when E is None).
    """
    pole = wos_exits(domain, z0, n_walks, seed, params)
    rows: List[ComparisonRow] = []
    for k, (xi, r) in enumerate(samples):
        xi = np.asarray(xi, dtype=float)
        ball = find_corkscrew(domain, xi, r, "interior", C)
        if ball is None:
            logger.warning(f"No corkscrew at {xi.tolist()}, r={r:g}; comparison skipped")
            continue
        z = ball.center
        near = wos_exits(domain, z, n_walks, seed + 7919 * (k + 1), params)

        big = ball_indicator(xi, r)
        sub = ball_indicator(xi, r / 4.0)
        F: Indicator = sub if E is None else (lambda x, s=sub: s(x) & E(x))

        w_big = near.estimate(big)
        rows.append(_comparison_row("wbig", w_big.value, 1.0, False))

        num, den, loc = pole.estimate(F), pole.estimate(big), near.estimate(F)
        lhs = num.value / den.value if den.value > 0 else 0.0
        rows.append(_comparison_row("ratio", lhs, loc.value, _indeterminate(den) or _indeterminate(loc)))

        y = z.copy()
        y[0] += ball.radius / 2.0
        other = wos_exits(domain, y, n_walks, seed + 104729 * (k + 1), params)
        a, b = near.estimate(big), other.estimate(big)
        rows.append(_comparison_row("harnack", a.value, b.value, _indeterminate(a) or _indeterminate(b)))

    constants: Dict[str, Optional[float]] = {}
    for kind in ("ratio", "harnack"):
        vals = [max(row.ratio, 1.0 / row.ratio) for row in rows if row.kind == kind and row.ratio]
        constants[kind] = max(vals) if vals else None
    wb = [row.lhs for row in rows if row.kind == "wbig"]
    constants["wbig_min"] = min(wb) if wb else None
    logger.info(f"Comparison constants: {constants}")
    return ComparisonReport(rows=rows, constants=constants)


def max_principle_check(
    inner: ImplicitDomain,
    outer: ImplicitDomain,
    F: PointCloud,
    z: Sequence[float],
    h: Optional[float] = None,
    n_walks: int = 20000,
    seed: int = 0,
    params: Optional[WoSParams] = None,
) -> MaxPrincipleReport:
    """omega_inner^z(F) <= omega_outer^z(F) within three joint standard errors.

    F must lie within 2h of both boundaries and z inside the inner domain.
    """
    h = F.mesh if h is None else h
    if len(F) == 0:
        raise GMTInputError("Maximum principle check needs a nonempty set F")
    for name, dom in (("inner", inner), ("outer", outer)):
        gap = float(np.abs(dom.sdist(F.points)).max())
        if gap > 2 * h:
            raise GMTInputError(f"F is not on the {name} boundary (gap {gap:.3g} > 2h)")
    zz = np.asarray(z, dtype=float)[None]
    if not inner.sdist(zz)[0] < 0:
        raise GMTInputError("Pole must lie inside the inner domain")

    indicator = cloud_indicator(F, 2 * h)
    est_in = wos_exits(inner, z, n_walks, seed, params).estimate(indicator)
    est_out = wos_exits(outer, z, n_walks, seed, params).estimate(indicator)
    joint = math.hypot(est_in.std_err, est_out.std_err)
    margin = est_out.value - est_in.value + 3.0 * joint
    report = MaxPrincipleReport(inner=est_in, outer=est_out, margin=margin, passed=margin >= 0)
    logger.info(
        f"Maximum principle: {est_in.value:.4f} (inner) vs {est_out.value:.4f} (outer), "
        f"margin {margin:.4f}"
    )
    return report


@dataclass(frozen=True)
class TestSet:
    """A Borel test set F ⊆ B(xi, r) ∩ E given by indices into E."""

    __test__ = False

    xi: Tuple[float, ...]
    r: float
    F_id: str
    members: Tuple[int, ...]


def cube_test_sets(
    tree: CubeTree,
    centers: np.ndarray,
    radii: Sequence[float],
    max_per_ball: int = 16,
    E_idx: Optional[Sequence[int]] = None,
) -> List[TestSet]:
    """Cube-tree cells contained in B(xi, r), finest first, per ball.

    With ``E_idx`` each cell is cut down to its members in E and cells that
    miss E are dropped, so every F lies in B(xi, r) ∩ E.
    """
    pts = tree.sigma.points
    keep = None if E_idx is None else np.unique(np.asarray(E_idx, dtype=np.int64))
    cubes = sorted(tree.cubes(), key=lambda c: (-c.level, c.index))
    out = []
    for xi in np.atleast_2d(centers):
        for r in radii:
            found = []
            seen = set()
            for cube in cubes:
                if not np.all(np.linalg.norm(pts[cube.members] - xi, axis=1) < r):
                    continue
                members = np.asarray(cube.members, dtype=np.int64)
                if keep is not None:
                    members = members[np.isin(members, keep)]
                    if len(members) == 0:
                        continue
                key = tuple(int(m) for m in members)
                if key in seen:
                    continue
                seen.add(key)
                found.append((cube, key))
            for cube, key in found[:max_per_ball]:
                out.append(TestSet(
                    tuple(float(v) for v in xi), float(r), f"cube-{cube.level}-{cube.index}", key,
                ))
    return out


def _modulus(rows: Sequence[AinftyRow], eps_grid: Sequence[float]) -> Dict[str, Tuple[float, float]]:
    """Largest delta in each direction such that one ratio < delta forces the other < eps."""
    out = {}
    for eps in eps_grid:
        bad_hd = [row.omega_ratio for row in rows if row.hd_ratio >= eps]
        bad_om = [row.hd_ratio for row in rows if row.omega_ratio >= eps]
        out[str(eps)] = (min(bad_hd, default=math.inf), min(bad_om, default=math.inf))
    return out


def ainfty_scatter(
    domain: ImplicitDomain,
    E: PointCloud,
    test_sets: Sequence[TestSet],
    z0: Sequence[float],
    n_walks: int = 20000,
    seed: int = 0,
    params: Optional[WoSParams] = None,
    d: Optional[int] = None,
    eps_grid: Sequence[float] = (0.5, 0.2, 0.1),
) -> AinftyScatter:
    """Scatter omega(F)/omega(B) against H^d(F)/r^d with exits attributed to
    their nearest sample of E.
    """
    d = domain.dimension - 1 if d is None else d
    exits = wos_exits(domain, z0, n_walks, seed, params)
    rows: List[AinftyRow] = []
    dropped = 0
    for ts in test_sets:
        ball = exits.estimate(ball_indicator(ts.xi, ts.r))
        if not ts.members:
            rows.append(AinftyRow(xi=list(ts.xi), r=ts.r, F_id=ts.F_id, omega_ratio=0.0, hd_ratio=0.0))
            continue
        if _indeterminate(ball):
            dropped += 1
            continue
        part = exits.estimate(voronoi_indicator(E, ts.members))
        hd = float(hausdorff_estimate(E.points[list(ts.members)], d, E.mesh))
        rows.append(AinftyRow(
            xi=list(ts.xi), r=ts.r, F_id=ts.F_id,
            omega_ratio=part.value / ball.value, hd_ratio=hd / ts.r ** d,
        ))
    if dropped:
        logger.warning(f"A-infinity scatter dropped {dropped} rows with indeterminate denominators")
    scatter = AinftyScatter(
        rows=rows, domain_id=domain.name, seed=seed, modulus=_modulus(rows, eps_grid), dropped=dropped
    )
    logger.info(f"A-infinity scatter: {len(rows)} rows, modulus {scatter.modulus}")
    return scatter
