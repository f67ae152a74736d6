"""
Experiment Pipelines

Runnable storylines that chain the toolkit stages and write a report bundle of
JSON/CSV artifacts, per-stage verdicts and a hashed manifest.
"""

import logging
import math
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .config import PipelineConfig, SawtoothParams
from .core import (
    Ball,
    DiscreteMeasure,
    ImplicitDomain,
    PointCloud,
    hausdorff_weights,
    parametric_cloud,
    sample_boundary,
)
from .exceptions import GMTConstructionError, GMTError, GMTInputError, GMTRefinementError
from .harmonic import ainfty_scatter, cube_test_sets, max_principle_check
from .metric_cubes import CubeTree, build_cube_tree, verify_cube_axioms
from .models import ReportBundle, StageVerdict
from .porosity import empirical_carleson_norm, estimate_doubling, porous_cubes, refine_with_retry
from .rectifiability import beta_sweep, carleson_energy, default_scale_count
from .sawtooth import (
    SawtoothDomain,
    boundary_sum_sweep,
    build_inner_sawtooth,
    build_outer_sawtooth,
    check_trace,
    comparability_witnesses,
    localization,
    regularity_profile,
    sample_sawtooth_boundary,
    sandwich_check,
)
from .utils import bundle_digest, write_json, write_points_csv, write_rows_csv
from .whitney import find_corkscrew, fit_uniformity, verify_whitney, whitney_decompose

logger = logging.getLogger(__name__)

PIPELINES: Dict[str, List[str]] = {
    "main-theorem": ["sample", "cubes", "doubling", "refine", "sawtooth", "sums", "harmonic"],
    "in-and-out": ["sample", "beta_energy", "sawtooth", "sums", "harmonic"],
    "verify-nta": ["sample", "corkscrew", "uniformity"],
    "sub-nta": ["sample", "sawtooth", "sums"],
}

MANIFEST = "manifest.json"


def center_and_radius(points: np.ndarray, floor: float = 0.0) -> Tuple[np.ndarray, float]:
    """The point nearest the mean and the radius of the smallest ball about it
    holding every point."""
    xi0 = points[int(np.argmin(np.linalg.norm(points - points.mean(axis=0), axis=1)))]
    return xi0, max(float(np.linalg.norm(points - xi0, axis=1).max()), floor)


def _thin(points: np.ndarray, k: int) -> np.ndarray:
    if len(points) <= k:
        return points
    return points[np.linspace(0, len(points) - 1, k).astype(int)]


def _restrict_near(points: np.ndarray, margin: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    lo = points.min(axis=0) - margin
    hi = points.max(axis=0) + margin

    def keep(c_lo: np.ndarray, c_hi: np.ndarray) -> np.ndarray:
        return np.all((c_hi >= lo) & (c_lo <= hi), axis=1)

    return keep


def build_sawtooth(
    kind: str, domain: ImplicitDomain, E: PointCloud, params: Optional[SawtoothParams] = None
) -> SawtoothDomain:
    """Inner or outer sawtooth over E with forests resolved below the mesh of E.

    The inner forest is only built within 4 r0 of E.
    """
    sp = params or SawtoothParams()
    if kind == "outer":
        return build_outer_sawtooth(domain, E, sp.K_outer, sp.lam, sp.levels_below_mesh)
    if kind != "inner":
        raise GMTInputError(f"Sawtooth kind must be 'inner' or 'outer', got '{kind}'")
    if len(E) == 0:
        raise GMTConstructionError("Inner sawtooth over an empty set")
    xi0, r0 = center_and_radius(E.points, E.mesh)
    n_min = int(math.floor(math.log2(E.mesh))) - sp.levels_below_mesh
    forest = whitney_decompose(
        domain, K=sp.K_inner, n_min=n_min, restrict=_restrict_near(E.points, 4.0 * r0)
    )
    return build_inner_sawtooth(domain, forest, E, sp.C0, sp.C_tilde, sp.lam, xi0=xi0, r0=r0)


class PipelineRunner:
    """Runs the stages of one pipeline preset and assembles the bundle."""

    def __init__(self, cfg: PipelineConfig) -> None:
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.artifacts: List[Path] = []

        self.domain: Optional[ImplicitDomain] = None
        self.sigma: Optional[PointCloud] = None
        self.mu: Optional[DiscreteMeasure] = None
        self.E_idx: np.ndarray = np.zeros(0, dtype=np.int64)
        self.E_prime: Optional[PointCloud] = None
        self.E_prime_idx: np.ndarray = np.zeros(0, dtype=np.int64)
        self.tree: Optional[CubeTree] = None
        self.profile = None
        self.inner: Optional[SawtoothDomain] = None
        self.outer: Optional[SawtoothDomain] = None

    # -- artifact helpers ----------------------------------------------------

    def _json(self, name: str, data: object) -> None:
        self.artifacts.append(write_json(self.out / name, data))

    def _rows(self, name: str, header: List[str], rows: List[list]) -> None:
        self.artifacts.append(write_rows_csv(self.out / name, header, rows))

    def _points(self, name: str, points: np.ndarray, weights: Optional[np.ndarray] = None) -> None:
        self.artifacts.append(write_points_csv(self.out / name, points, weights))

    @property
    def d(self) -> int:
        assert self.domain is not None
        return self.domain.dimension - 1

    # -- stages --------------------------------------------------------------

    def _select_E(self, sigma: PointCloud) -> np.ndarray:
        spec = self.cfg.E
        pts = sigma.points
        if spec.kind == "box":
            lo, hi = np.asarray(spec.lo, dtype=float), np.asarray(spec.hi, dtype=float)
            return np.flatnonzero(np.all((pts >= lo) & (pts <= hi), axis=1))
        if spec.kind == "ball":
            c = np.asarray(spec.center, dtype=float)
            return np.flatnonzero(np.linalg.norm(pts - c, axis=1) <= spec.radius)
        return np.arange(len(sigma))

    def stage_sample(self) -> StageVerdict:
        cfg = self.cfg
        self.domain = cfg.domain.build()
        if cfg.E.kind == "csv":
            self.sigma = PointCloud.from_csv(cfg.E.path)
        elif cfg.E.kind == "generator":
            self.sigma = parametric_cloud(cfg.E.generator, **cfg.E.params)
        else:
            self.sigma = sample_boundary(self.domain, cfg.h)
        if len(self.sigma) == 0:
            raise GMTConstructionError("Boundary sample is empty")
        if self.sigma.dimension != self.domain.dimension:
            raise GMTInputError("E and the domain live in different dimensions")

        self.mu = hausdorff_weights(self.sigma, self.d, self.sigma.mesh)
        self.E_idx = self._select_E(self.sigma)
        if len(self.E_idx) == 0:
            raise GMTConstructionError("The selected set E is empty")
        self.E_prime = self.sigma.subset(self.E_idx)
        self.E_prime_idx = self.E_idx
        self._points("sigma.csv", self.sigma.points, self.mu.weights)
        return StageVerdict(
            stage="sample",
            verdict="pass",
            details={"n_sigma": len(self.sigma), "n_E": len(self.E_idx), "mesh": self.sigma.mesh},
        )

    def stage_cubes(self) -> StageVerdict:
        assert self.sigma is not None
        self.tree = build_cube_tree(self.sigma, self.cfg.c0, self.cfg.depth)
        report = verify_cube_axioms(self.tree)
        self._json("tree.json", self.tree.to_json())
        self._json("cube_axioms.json", report.model_dump())
        return StageVerdict(
            stage="cubes",
            verdict="pass" if report.all_passed else "fail",
            details={"n_cubes": self.tree.n_cubes(), "c1_achieved": report.c1_achieved},
        )

    def stage_doubling(self) -> StageVerdict:
        assert self.sigma is not None and self.mu is not None and self.E_prime is not None
        xi0, r0 = center_and_radius(self.E_prime.points, self.sigma.mesh)
        lo = 2.0 * self.sigma.mesh
        scales = np.geomspace(lo, max(r0, 2.0 * lo), 4)
        self.profile = estimate_doubling(self.mu, self.sigma, Ball(xi0, 2.0 * r0), scales)
        self._json("doubling.json", self.profile.model_dump())
        verdict = "pass" if math.isfinite(self.profile.C_mu) else "fail"
        return StageVerdict(
            stage="doubling",
            verdict=verdict,
            details={"C_mu": self.profile.C_mu, "beta0": self.profile.beta0},
        )

    def stage_refine(self) -> StageVerdict:
        assert self.tree is not None and self.mu is not None and self.sigma is not None
        pcfg = self.cfg.porosity
        porous = porous_cubes(self.tree, self.E_idx, pcfg.M, pcfg.delta)
        carleson = empirical_carleson_norm(self.tree, porous, self.mu)
        self._rows("carleson.csv", ["level", "index", "ratio"], [list(r) for r in carleson.ratios])

        result = refine_with_retry(self.tree, self.E_idx, self.mu, pcfg, self.profile)
        self._json("refinement.json", result.to_json())
        self.E_prime = self.sigma.subset(result.E_prime)
        self.E_prime_idx = np.asarray(result.E_prime, dtype=np.int64)
        if len(self.E_prime) == 0:
            raise GMTConstructionError("Refinement removed every point of E")
        return StageVerdict(
            stage="refine",
            verdict="pass",
            details={
                "N": result.N,
                "C1": result.C1,
                "t_used": result.t_used,
                "mass_ratio": result.mass_ratio,
                "n_E_prime": len(result.E_prime),
            },
        )

    def stage_beta_energy(self) -> StageVerdict:
        """Carleson energy of the bad scales at two depths; growth means non-UR."""
        assert self.E_prime is not None
        Z = self.E_prime
        h = Z.mesh
        xi0, r0 = center_and_radius(Z.points, h)
        n_fine = max(default_scale_count(r0, h), self.cfg.beta_scales)
        n_coarse = max(1, n_fine - 2)
        eps = self.cfg.beta_epsilon
        coarse = carleson_energy(Z, xi0, r0, eps, n_coarse, h)
        fine = carleson_energy(Z, xi0, r0, eps, n_fine, h)
        self._json("beta_energy.json", {"coarse": coarse.model_dump(), "fine": fine.model_dump()})
        if self.cfg.emit_plots:
            scales = [r0 * 2.0 ** -j for j in range(n_fine)]
            records = beta_sweep(Z, _thin(Z.points, 32), scales)
            self._rows(
                "plots/beta_sweep.csv",
                ["xi", "r", "beta", "flat", "bilateral"],
                [[str(b.xi), b.r, b.value, b.flat_term, b.bilateral_term] for b in records],
            )

        grows = fine.C_UR_emp > 1.25 * coarse.C_UR_emp + 1e-12
        details = {
            "C_UR_coarse": coarse.C_UR_emp,
            "C_UR_fine": fine.C_UR_emp,
            "n_scales": [n_coarse, n_fine],
        }
        if grows:
            logger.warning("Carleson energy grows as scales are added; the set does not look UR")
            return StageVerdict(stage="beta_energy", verdict="fail", details=details)
        return StageVerdict(stage="beta_energy", verdict="pass", details=details)

    def stage_sawtooth(self) -> StageVerdict:
        assert self.domain is not None and self.E_prime is not None and self.sigma is not None
        sp = self.cfg.sawtooth
        E = self.E_prime
        h = E.mesh
        xi0, r0 = center_and_radius(E.points, h)
        self.inner = build_sawtooth("inner", self.domain, E, sp)
        self._json("inner_sawtooth.json", self.inner.to_json())
        traces = {"inner": check_trace(self.inner, E, h)}
        loc = localization(self.inner, xi0, r0, h)
        details: Dict[str, object] = {
            "n_inner": len(self.inner.core),
            "inner_truncated": self.inner.truncated,
            "C_minus_emp": loc.C_minus_emp,
            "comparability": comparability_witnesses(self.inner, E, self.sigma).constants,
        }

        passed = True
        if self.cfg.pipeline != "sub-nta":
            self.outer = build_sawtooth("outer", self.domain, E, sp)
            self._json("outer_sawtooth.json", self.outer.to_json())
            traces["outer"] = check_trace(self.outer, E, h)
            lo = xi0 - 2.0 * r0
            hi = xi0 + 2.0 * r0
            sandwich = sandwich_check(
                self.inner, self.domain, self.outer, seed=self.cfg.seed, box=(lo, hi)
            )
            details["n_outer"] = len(self.outer.core)
            details["sandwich_violations"] = sandwich.inner_violations + sandwich.outer_violations
            passed = sandwich.passed

        self._json("trace.json", {k: v.model_dump() for k, v in traces.items()})
        details["trace"] = {k: v.passed for k, v in traces.items()}
        passed = passed and all(v.passed for v in traces.values())
        if self.cfg.emit_plots:
            self._points("plots/E_prime.csv", E.points)
            self._points("plots/inner_boundary.csv", sample_sawtooth_boundary(self.inner, h).points)
        return StageVerdict(stage="sawtooth", verdict="pass" if passed else "fail", details=details)

    def stage_sums(self) -> StageVerdict:
        assert self.E_prime is not None and self.inner is not None
        E = self.E_prime
        h = E.mesh
        xi0, r0 = center_and_radius(E.points, h)
        centers = _thin(E.points, 20)
        radii = [r for r in r0 * 2.0 ** -np.arange(1, 9) if r >= 2.0 * h] or [2.0 * h]
        reg_radii = [r for r in r0 * 2.0 ** -np.arange(1, 7) if r >= 2.0 * h] or [2.0 * h]

        rows: List[list] = []
        details: Dict[str, object] = {}
        finite = True
        for saw in (self.inner, self.outer):
            if saw is None:
                continue
            sums, sup = boundary_sum_sweep(saw, centers, radii)
            rows += [[saw.kind, str(xi), r, s, ratio] for xi, r, s, ratio in sums]
            surface = sample_sawtooth_boundary(saw, h)
            weights = hausdorff_weights(surface, self.d, h)
            reg = regularity_profile(surface, weights, reg_radii, centers=_thin(surface.points, 64))
            details[saw.kind] = {"C_prime": sup, "A_upper": reg.A_upper, "A_lower": reg.A_lower}
            finite = finite and all(math.isfinite(v) for v in (sup, reg.A_upper, reg.A_lower))
        self._rows("sums.csv", ["kind", "xi", "r", "sum", "ratio"], rows)
        self._json("regularity.json", details)
        return StageVerdict(stage="sums", verdict="pass" if finite else "fail", details=details)

    def _pole(self) -> np.ndarray:
        assert self.inner is not None
        if self.cfg.z is not None:
            return np.asarray(self.cfg.z, dtype=float)
        forest = self.inner.forest
        core = self.inner.core
        if len(core) == 0:
            raise GMTConstructionError("Inner sawtooth is empty; no pole available")
        big = core[np.lexsort((np.arange(len(core)), -forest.sides[core]))[0]]
        return forest.centers[big]

    def stage_harmonic(self) -> StageVerdict:
        assert self.domain is not None and self.E_prime is not None and self.inner is not None
        assert self.outer is not None and self.sigma is not None
        wos = self.cfg.wos
        E = self.E_prime
        h = E.mesh
        z = self._pole()
        inner_dom, outer_dom = self.inner.as_domain(), self.outer.as_domain()

        chunks = [c for c in np.array_split(np.arange(len(E)), self.cfg.n_test_sets) if len(c)]
        rows = []
        passed = True
        for k, chunk in enumerate(chunks):
            F = E.subset(chunk)
            seed = self.cfg.seed + k
            lower = max_principle_check(inner_dom, self.domain, F, z, h, wos.n_walks, seed, wos)
            upper = max_principle_check(self.domain, outer_dom, F, z, h, wos.n_walks, seed, wos)
            passed = passed and lower.passed and upper.passed
            rows.append([k, lower.inner.value, lower.outer.value, upper.outer.value,
                         lower.margin, upper.margin])
        self._rows(
            "max_principle.csv",
            ["F", "omega_inner", "omega_base", "omega_outer", "margin_lower", "margin_upper"],
            rows,
        )

        tree = self.tree or build_cube_tree(self.sigma, self.cfg.c0, self.cfg.depth)
        xi0, r0 = center_and_radius(E.points, h)
        test_sets = cube_test_sets(tree, _thin(E.points, 4), [r0 / 2.0, r0], E_idx=self.E_prime_idx)
        scatter = ainfty_scatter(
            self.domain, self.sigma, test_sets, z, wos.n_walks, self.cfg.seed, wos, self.d
        )
        self._rows(
            "scatter.csv",
            ["xi", "r", "F_id", "omega_ratio", "hd_ratio"],
            [[str(r.xi), r.r, r.F_id, r.omega_ratio, r.hd_ratio] for r in scatter.rows],
        )
        self._json("ainfty.json", {"modulus": scatter.modulus, "dropped": scatter.dropped})

        positive = bool(scatter.rows) and all(
            a > 0 and b > 0 for a, b in scatter.modulus.values()
        )
        if not passed:
            verdict = "fail"
        elif not scatter.rows:
            verdict = "indeterminate"
        else:
            verdict = "pass" if positive else "fail"
        return StageVerdict(
            stage="harmonic",
            verdict=verdict,
            details={
                "pole": z.tolist(),
                "max_principle_passed": passed,
                "n_scatter_rows": len(scatter.rows),
                "modulus": {k: list(v) for k, v in scatter.modulus.items()},
            },
        )

    def stage_corkscrew(self) -> StageVerdict:
        assert self.domain is not None and self.sigma is not None
        C = self.cfg.C_corkscrew
        radii = [r for r in (0.5, 0.25, 0.125) if r >= 2.0 * self.cfg.h]
        rows, failures = [], []
        for xi in _thin(self.sigma.points, 8):
            for r in radii:
                for side in ("interior", "exterior"):
                    ball = find_corkscrew(self.domain, xi, r, side, C)
                    found = ball is not None
                    rows.append([str(xi.tolist()), r, side, found, ball.radius if found else 0.0])
                    if not found:
                        failures.append({"xi": xi.tolist(), "r": r, "side": side})
        self._rows("corkscrew.csv", ["xi", "r", "side", "found", "radius"], rows)
        details: Dict[str, object] = {"n_checked": len(rows), "n_failed": len(failures)}
        if failures:
            details["witness"] = failures[0]
            logger.warning(f"Corkscrew condition fails at {failures[0]}")
        return StageVerdict(stage="corkscrew", verdict="fail" if failures else "pass", details=details)

    def stage_uniformity(self) -> StageVerdict:
        assert self.domain is not None
        sp = self.cfg.sawtooth
        n_min = int(math.floor(math.log2(self.cfg.h))) - sp.levels_below_mesh
        forest = whitney_decompose(self.domain, K=sp.K_inner, n_min=n_min)
        check = verify_whitney(forest, self.domain, seed=self.cfg.seed)
        fit = fit_uniformity(forest, seed=self.cfg.seed)
        self._json("whitney.json", {"forest": forest.to_records(), "check": vars(check)})
        self._json("uniformity.json", fit.model_dump())
        passed = check.passed and fit.consistent
        return StageVerdict(
            stage="uniformity",
            verdict="pass" if passed else "fail",
            details={
                "n_cubes": len(forest),
                "whitney_passed": check.passed,
                "log_ratio_max": fit.log_ratio_max,
                "consistent": fit.consistent,
            },
        )

    # -- driver --------------------------------------------------------------

    def run(self, stages: Optional[List[str]] = None) -> ReportBundle:
        """Run the preset stages (or the given subset, in order); a failing stage
        ends the run."""
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)
        bundle = ReportBundle(
            pipeline=cfg.pipeline,
            seed=cfg.seed,
            version=__version__,
            config=cfg.model_dump(mode="json"),
        )
        started = time.perf_counter()

        stages = stages or PIPELINES[cfg.pipeline]
        unknown = [s for s in stages if not hasattr(self, f"stage_{s}")]
        if unknown:
            raise GMTInputError(f"Unknown pipeline stages {unknown}")
        for position, name in enumerate(stages):
            logger.info(f"[{cfg.pipeline}] stage '{name}'")
            stage: Callable[[], StageVerdict] = getattr(self, f"stage_{name}")
            try:
                verdict = stage()
            except GMTError as e:
                logger.error(f"Stage '{name}' failed: {e.message}")
                details: Dict[str, object] = {"error": e.message, "error_code": e.error_code}
                if isinstance(e, GMTRefinementError):
                    details["diagnostics"] = e.diagnostics
                verdict = StageVerdict(stage=name, verdict="fail", details=details)
            bundle.verdicts.append(verdict)
            if verdict.verdict == "fail":
                skipped = stages[position + 1:]
                if skipped:
                    logger.warning(f"Skipping later stages {skipped}")
                break

        self._json("verdicts.json", [v.model_dump() for v in bundle.verdicts])
        self._json("config.json", bundle.config)
        digest = bundle_digest(self.artifacts, self.out)
        bundle.artifacts = digest["files"]
        bundle.bundle_sha256 = digest["sha256"]
        bundle.wall_clock = time.perf_counter() - started
        write_json(self.out / MANIFEST, bundle.model_dump(mode="json"))
        logger.info(f"Pipeline '{cfg.pipeline}' finished: {bundle.overall} in {bundle.wall_clock:.1f}s")
        return bundle


def run_pipeline(cfg: PipelineConfig) -> ReportBundle:
    """Run the configured pipeline and write its bundle to ``cfg.output_dir``."""
    return PipelineRunner(cfg).run()
