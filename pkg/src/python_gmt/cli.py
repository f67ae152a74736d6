"""
CLI Interface for the GMT Toolkit

Command-line interface for constructions, estimators and experiment pipelines.
"""

import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
import yaml
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .config import PipelineConfig, PorosityConfig, SawtoothParams, WoSParams
from .core import DiscreteMeasure, ImplicitDomain, PointCloud, gallery_domain, parametric_cloud
from .exceptions import GMTError, GMTInputError
from .harmonic import (
    Indicator,
    ainfty_scatter,
    arc_indicator,
    ball_indicator,
    box_indicator,
    cube_test_sets,
    everything,
    harmonic_measure,
)
from .metric_cubes import CubeTree, build_cube_tree, verify_cube_axioms
from .models import ReportBundle
from .pipeline import PipelineRunner, build_sawtooth, center_and_radius
from .porosity import empirical_carleson_norm, porous_cubes, refine_with_retry
from .rectifiability import beta_sweep, carleson_energy
from .sawtooth import SawtoothDomain, boundary_sum_sweep, check_trace
from .utils import (
    parse_float_list,
    read_json,
    read_points_csv,
    setup_logging,
    write_json,
    write_rows_csv,
)
from .whitney import verify_whitney, whitney_decompose

console = Console()


def _parse_params(pairs: Tuple[str, ...]) -> Dict[str, Any]:
    """``key=value`` pairs with YAML-typed values."""
    params: Dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise GMTInputError(f"Parameter '{pair}' is not of the form key=value")
        key, value = pair.split("=", 1)
        params[key.strip()] = yaml.safe_load(value)
    return params


def _load_domain(name: str, params: Tuple[str, ...]) -> ImplicitDomain:
    return gallery_domain(name, **_parse_params(params))


def _load_cloud(cloud: Optional[Path], generator: Optional[str], params: Tuple[str, ...]) -> PointCloud:
    if cloud is not None:
        return PointCloud.from_csv(cloud)
    if generator is not None:
        return parametric_cloud(generator, **_parse_params(params))
    raise GMTInputError("Give either --cloud or --generator")


def _parse_box(text: str) -> Tuple[List[float], List[float]]:
    """``lo0,lo1,...;hi0,hi1,...``"""
    lo, sep, hi = text.partition(";")
    if not sep:
        raise GMTInputError(f"Box '{text}' is not of the form lo0,lo1,...;hi0,hi1,...")
    return parse_float_list(lo), parse_float_list(hi)


def _load_indices(text: str) -> np.ndarray:
    """Comma-separated indices, or a file of indices separated by commas or whitespace."""
    path = Path(text)
    body = path.read_text() if path.is_file() else text
    try:
        return np.asarray([int(v) for v in body.replace(",", " ").split()], dtype=np.int64)
    except ValueError as e:
        raise GMTInputError(f"Cannot parse indices from '{text}': {e}")


def _parse_set(text: str) -> Indicator:
    """``all``, ``ball:cx,cy,...,r``, ``box:lo0,lo1,...;hi0,hi1,...`` or ``arc:start,stop``."""
    kind, _, body = text.partition(":")
    if kind == "all":
        return everything
    if kind == "ball":
        values = parse_float_list(body)
        return ball_indicator(values[:-1], values[-1])
    if kind == "box":
        return box_indicator(*_parse_box(body))
    if kind == "arc":
        start, stop = parse_float_list(body)
        return arc_indicator(start, stop)
    raise GMTInputError(f"Unknown boundary set '{text}'")


def _fail(ctx: click.Context, e: Exception) -> None:
    console.print(f"[red]Error: {e}[/red]")
    if ctx.obj.get("debug"):
        console.print_exception()
    sys.exit(1)


def _verdict_table(bundle: ReportBundle) -> Table:
    colors = {"pass": "green", "fail": "red", "indeterminate": "yellow"}
    table = Table(title=f"{bundle.pipeline} (seed {bundle.seed})")
    table.add_column("Stage", style="cyan")
    table.add_column("Verdict")
    table.add_column("Details", style="magenta")
    for v in bundle.verdicts:
        details = json.dumps(v.details, default=str, sort_keys=True)
        if len(details) > 120:
            details = details[:117] + "..."
        table.add_row(v.stage, f"[{colors[v.verdict]}]{v.verdict}[/{colors[v.verdict]}]", details)
    return table


@click.group()
@click.version_option(__version__, prog_name="gmt")
@click.option("--debug", is_flag=True, help="Enable debug logging")
@click.option("--log-file", type=click.Path(path_type=Path), default=None, help="Also log to this file")
@click.pass_context
def main(ctx: click.Context, debug: bool, log_file: Optional[Path]) -> None:
    """GMT toolkit: sawtooth domains, porosity and harmonic measure experiments"""
    ctx.ensure_object(dict)
    ctx.obj["debug"] = debug
    setup_logging(debug=debug, log_file=str(log_file) if log_file else None)


@main.command()
@click.option("--domain", "domain_name", required=True, help="Gallery domain name")
@click.option("--param", "-p", multiple=True, help="Domain parameter key=value")
@click.option("--K", "K", default=3.0, show_default=True, help="Whitney constant")
@click.option("--nmin", "--n-min", "n_min", default=-6, show_default=True, help="Finest dyadic level")
@click.option("--box", default=None, help="Window lo0,lo1,...;hi0,hi1,... (default: domain box)")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Forest JSON output")
@click.pass_context
def whitney(ctx: click.Context, domain_name: str, param: Tuple[str, ...], K: float, n_min: int,
            box: Optional[str], out: Optional[Path]) -> None:
    """Whitney decomposition of a gallery domain"""
    try:
        domain = _load_domain(domain_name, param)
        forest = whitney_decompose(domain, K=K, box=_parse_box(box) if box else None, n_min=n_min)
        check = verify_whitney(forest, domain)

        table = Table(title=f"Whitney forest of {domain.name}")
        table.add_column("Level", style="cyan")
        table.add_column("Cubes", style="magenta")
        levels, counts = np.unique(forest.levels, return_counts=True)
        for n, c in zip(levels[::-1], counts[::-1]):
            table.add_row(str(n), str(c))
        console.print(table)
        status = "[green]passed[/green]" if check.passed else "[red]failed[/red]"
        console.print(
            f"Whitney check {status}: neighbour ratio {check.neighbor_ratio}, "
            f"max overlap {check.max_overlap}, truncated={forest.truncated}"
        )
        if out:
            write_json(out, forest.to_records())
            console.print(f"[green]Forest written to {out}[/green]")
    except GMTError as e:
        _fail(ctx, e)


@main.command()
@click.option("--cloud", type=click.Path(exists=True, path_type=Path), default=None, help="Point cloud CSV")
@click.option("--generator", default=None, help="Cloud generator name")
@click.option("--param", "-p", multiple=True, help="Generator parameter key=value")
@click.option("--c0", default=0.25, show_default=True, help="Scale ratio")
@click.option("--depth", default=4, show_default=True, help="Number of levels")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Tree JSON output")
@click.pass_context
def cubes(ctx: click.Context, cloud: Optional[Path], generator: Optional[str], param: Tuple[str, ...],
          c0: float, depth: int, out: Optional[Path]) -> None:
    """Build and verify a dyadic cube tree on a point cloud"""
    try:
        sigma = _load_cloud(cloud, generator, param)
        tree = build_cube_tree(sigma, c0, depth)
        report = verify_cube_axioms(tree)

        table = Table(title="Cube tree axioms")
        table.add_column("Axiom", style="cyan")
        table.add_column("Result")
        for check in (report.partition, report.nesting, report.sandwich):
            table.add_row(check.name, "[green]pass[/green]" if check.passed else f"[red]fail[/red] {check.witness}")
        console.print(table)
        console.print(f"{tree.n_cubes()} cubes over {tree.depth} levels, c1 achieved {report.c1_achieved:.4f}")
        if out:
            write_json(out, tree.to_json())
            console.print(f"[green]Tree written to {out}[/green]")
    except GMTError as e:
        _fail(ctx, e)


def _run_stages(ctx: click.Context, config: Path, stages: Optional[List[str]], seed: Optional[int],
                out: Optional[Path], emit_plots: bool = False, pipeline: Optional[str] = None) -> None:
    try:
        cfg = PipelineConfig.from_file(config)
        update: Dict[str, Any] = {}
        if pipeline is not None:
            update["pipeline"] = pipeline
        if seed is not None:
            update["seed"] = seed
        if out is not None:
            update["output_dir"] = out
        if emit_plots:
            update["emit_plots"] = True
        cfg = PipelineConfig(**{**cfg.model_dump(), **update})
    except (FileNotFoundError, ValueError) as e:
        _fail(ctx, e)
        return

    console.print(Panel.fit(
        f"[bold blue]{cfg.pipeline}[/bold blue]\n[cyan]domain {cfg.domain.name}, seed {cfg.seed}[/cyan]",
        border_style="blue",
    ))
    try:
        bundle = PipelineRunner(cfg).run(stages)
    except GMTError as e:
        _fail(ctx, e)
        return
    console.print(_verdict_table(bundle))
    color = {"pass": "green", "fail": "red", "indeterminate": "yellow"}[bundle.overall]
    console.print(f"[{color}]Overall: {bundle.overall}[/{color}]  bundle {cfg.output_dir} "
                  f"sha256 {bundle.bundle_sha256}")
    if bundle.overall == "fail":
        sys.exit(1)


config_option = click.option(
    "--config", "-c", type=click.Path(exists=True, path_type=Path), required=True,
    help="Pipeline configuration (YAML or JSON)",
)
seed_option = click.option("--seed", type=int, default=None, help="Override the global seed")
out_option = click.option("--out", type=click.Path(path_type=Path), default=None, help="Bundle directory")


@main.group()
def porosity() -> None:
    """Porous cubes and refinement"""
    pass


@porosity.command("refine")
@click.option("--config", "-c", type=click.Path(exists=True, path_type=Path), default=None,
              help="Run the refinement stages of a pipeline configuration instead")
@seed_option
@click.option("--tree", "tree_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Cube tree JSON")
@click.option("--measure", "measure_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Weighted cloud CSV (x0,...,xd,weight)")
@click.option("--E", "E_spec", default=None, help="Indices of E: comma-separated or a file")
@click.option("--tau", type=float, default=None, help="Allowed relative mass loss")
@click.option("--M", "M", type=float, default=None, help="Ball dilation of porous cubes")
@click.option("--delta", type=float, default=None, help="Porosity threshold")
@click.option("--t", "t", type=float, default=None, help="Shell thickness")
@click.option("--rho", type=float, default=None, help="Lower bound on mu(E)/mu(root)")
@click.option("--carleson", type=click.Path(path_type=Path), default=None, help="Carleson ratio CSV output")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Refinement JSON (bundle directory with --config)")
@click.pass_context
def porosity_refine(ctx: click.Context, config: Optional[Path], seed: Optional[int],
                    tree_path: Optional[Path], measure_path: Optional[Path], E_spec: Optional[str],
                    tau: Optional[float], M: Optional[float], delta: Optional[float], t: Optional[float],
                    rho: Optional[float], carleson: Optional[Path], out: Optional[Path]) -> None:
    """Refine E to E' by excising porous nesting and shells"""
    if config is not None:
        _run_stages(ctx, config, ["sample", "cubes", "doubling", "refine"], seed, out)
        return
    try:
        if tree_path is None or measure_path is None or E_spec is None:
            raise GMTInputError("Give --config, or all of --tree, --measure and --E")
        sigma = PointCloud.from_csv(measure_path)
        mu = DiscreteMeasure.from_csv(measure_path)
        tree = CubeTree.from_json(read_json(tree_path), sigma)
        E_idx = _load_indices(E_spec)
        overrides = {"tau": tau, "M": M, "delta": delta, "t": t, "rho": rho}
        pcfg = PorosityConfig(**{k: v for k, v in overrides.items() if v is not None})

        porous = porous_cubes(tree, E_idx, pcfg.M, pcfg.delta)
        report = empirical_carleson_norm(tree, porous, mu)
        result = refine_with_retry(tree, E_idx, mu, pcfg)

        table = Table(title="Refinement of E")
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="magenta")
        for name, value in (
            ("|E|", len(np.unique(E_idx))), ("porous cubes", len(porous)), ("C1", f"{result.C1:.4g}"),
            ("N", result.N), ("|T|", len(result.T)), ("t used", f"{result.t_used:g}"),
            ("|E'|", len(result.E_prime)), ("mass ratio", f"{result.mass_ratio:.4f}"),
        ):
            table.add_row(name, str(value))
        console.print(table)
        if carleson:
            write_rows_csv(carleson, ["level", "index", "ratio"], [list(r) for r in report.ratios])
        if out:
            write_json(out, result.to_json())
            console.print(f"[green]Refinement written to {out}[/green]")
    except (GMTError, ValueError) as e:
        _fail(ctx, e)


@main.group()
def sawtooth() -> None:
    """Sawtooth domain constructions"""
    pass


_sawtooth_build_options = [
    click.option("--config", "-c", type=click.Path(exists=True, path_type=Path), default=None,
                 help="Run the sawtooth stages of a pipeline configuration instead"),
    seed_option,
    click.option("--kind", type=click.Choice(["inner", "outer"]), default="inner", show_default=True),
    click.option("--domain", "domain_name", default=None, help="Gallery domain name"),
    click.option("--param", "-p", multiple=True, help="Domain parameter key=value"),
    click.option("--E", "E_path", type=click.Path(exists=True, path_type=Path), default=None,
                 help="Boundary set CSV"),
    click.option("--h", type=float, default=None, help="Mesh of E (default: median spacing)"),
    click.option("--K", "K", type=float, default=None, help="Whitney constant (default 3 inner, 12 outer)"),
    click.option("--C0", "C0", type=float, default=None, help="Dilation selecting cubes near E"),
    click.option("--C-tilde", "C_tilde", type=int, default=None, help="Path completion length"),
]


def sawtooth_build_options(f: Callable[..., Any]) -> Callable[..., Any]:
    for option in reversed(_sawtooth_build_options):
        f = option(f)
    return f


def _build_from_options(kind: str, domain_name: Optional[str], param: Tuple[str, ...],
                        E_path: Optional[Path], h: Optional[float], K: Optional[float],
                        C0: Optional[float], C_tilde: Optional[int]) -> Tuple[SawtoothDomain, PointCloud]:
    if domain_name is None or E_path is None:
        raise GMTInputError("Give --config, or both --domain and --E")
    domain = _load_domain(domain_name, param)
    E = PointCloud.from_csv(E_path, mesh=h)
    overrides: Dict[str, Any] = {"C0": C0, "C_tilde": C_tilde}
    overrides["K_inner" if kind == "inner" else "K_outer"] = K
    sp = SawtoothParams(**{k: v for k, v in overrides.items() if v is not None})
    return build_sawtooth(kind, domain, E, sp), E


@sawtooth.command("build")
@sawtooth_build_options
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Sawtooth JSON (bundle directory with --config)")
@click.pass_context
def sawtooth_build(ctx: click.Context, config: Optional[Path], seed: Optional[int], kind: str,
                   domain_name: Optional[str], param: Tuple[str, ...], E_path: Optional[Path],
                   h: Optional[float], K: Optional[float], C0: Optional[float], C_tilde: Optional[int],
                   out: Optional[Path]) -> None:
    """Build a sawtooth domain over E and check its trace on the boundary"""
    if config is not None:
        _run_stages(ctx, config, ["sample", "sawtooth"], seed, out)
        return
    try:
        saw, E = _build_from_options(kind, domain_name, param, E_path, h, K, C0, C_tilde)
        trace = check_trace(saw, E, E.mesh)
        status = "[green]passed[/green]" if trace.passed else "[red]failed[/red]"
        console.print(
            f"{saw.kind} sawtooth over {len(E)} points: {len(saw.core)} cubes, "
            f"truncated={saw.truncated}; trace check {status}"
        )
        if out:
            write_json(out, saw.to_json())
            console.print(f"[green]Sawtooth written to {out}[/green]")
    except (GMTError, ValueError) as e:
        _fail(ctx, e)


@sawtooth.command("sums")
@sawtooth_build_options
@click.option("--xi", "xis", multiple=True, help="Ball center, comma-separated (default: center of E)")
@click.option("--r-grid", default=None, help="Comma-separated radii")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Sums CSV (bundle directory with --config)")
@click.pass_context
def sawtooth_sums(ctx: click.Context, config: Optional[Path], seed: Optional[int], kind: str,
                  domain_name: Optional[str], param: Tuple[str, ...], E_path: Optional[Path],
                  h: Optional[float], K: Optional[float], C0: Optional[float], C_tilde: Optional[int],
                  xis: Tuple[str, ...], r_grid: Optional[str], out: Optional[Path]) -> None:
    """Boundary cube sums of a sawtooth domain over a grid of balls"""
    if config is not None:
        _run_stages(ctx, config, ["sample", "sawtooth", "sums"], seed, out)
        return
    try:
        if r_grid is None:
            raise GMTInputError("Give --r-grid with the radii to sum over")
        saw, E = _build_from_options(kind, domain_name, param, E_path, h, K, C0, C_tilde)
        centers = (np.array([parse_float_list(x) for x in xis]) if xis
                   else center_and_radius(E.points, E.mesh)[0][None, :])
        rows, sup = boundary_sum_sweep(saw, centers, parse_float_list(r_grid))

        table = Table(title=f"Boundary cube sums of the {saw.kind} sawtooth")
        for col in ("xi", "r", "sum", "sum/r^d"):
            table.add_column(col, style="cyan" if col == "xi" else "magenta")
        for xi, r, s, ratio in rows:
            table.add_row(str(np.round(xi, 4).tolist()), f"{r:g}", f"{s:.4g}", f"{ratio:.4g}")
        console.print(table)
        console.print(f"Empirical C' = {sup:.4g}")
        if out:
            write_rows_csv(out, ["xi", "r", "sum", "sum/r^d"],
                           [[str(xi), r, s, ratio] for xi, r, s, ratio in rows])
            console.print(f"[green]Sums written to {out}[/green]")
    except (GMTError, ValueError) as e:
        _fail(ctx, e)


@main.group()
def beta() -> None:
    """Bilateral beta numbers"""
    pass


@beta.command("sweep")
@click.option("--cloud", type=click.Path(exists=True, path_type=Path), default=None, help="Point cloud CSV")
@click.option("--generator", default=None, help="Cloud generator name")
@click.option("--param", "-p", multiple=True, help="Generator parameter key=value")
@click.option("--scales", required=True, help="Comma-separated radii")
@click.option("--centers", default="16", show_default=True,
              help="Centers CSV (points of the cloud), or a number of evenly spaced centers")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="CSV output")
@click.pass_context
def beta_sweep_cmd(ctx: click.Context, cloud: Optional[Path], generator: Optional[str],
                   param: Tuple[str, ...], scales: str, centers: str, out: Optional[Path]) -> None:
    """bbeta over a grid of centers and scales"""
    try:
        Z = _load_cloud(cloud, generator, param)
        if Path(centers).is_file():
            xi, _ = read_points_csv(centers)
        else:
            try:
                count = int(centers)
            except ValueError:
                raise GMTInputError(f"--centers must be a CSV file or a count, got '{centers}'")
            xi = Z.points[np.linspace(0, len(Z) - 1, min(count, len(Z))).astype(int)]
        records = beta_sweep(Z, xi, parse_float_list(scales))
        table = Table(title="Bilateral beta numbers")
        for col in ("xi", "r", "beta", "flat", "bilateral"):
            table.add_column(col, style="cyan" if col == "xi" else "magenta")
        for b in records:
            table.add_row(str(np.round(b.xi, 4).tolist()), f"{b.r:g}", f"{b.value:.4f}",
                          f"{b.flat_term:.4f}", f"{b.bilateral_term:.4f}")
        console.print(table)
        if out:
            write_rows_csv(out, ["xi", "r", "bbeta", "plane_normal", "flat", "bilateral", "degenerate"],
                           [[str(b.xi), b.r, b.value, str(b.plane_normal), b.flat_term,
                             b.bilateral_term, b.degenerate] for b in records])
            console.print(f"[green]Sweep written to {out}[/green]")
    except (GMTError, ValueError) as e:
        _fail(ctx, e)


@beta.command("energy")
@click.option("--cloud", type=click.Path(exists=True, path_type=Path), default=None, help="Point cloud CSV")
@click.option("--generator", default=None, help="Cloud generator name")
@click.option("--param", "-p", multiple=True, help="Generator parameter key=value")
@click.option("--epsilon", default=0.3, show_default=True, help="Bad-scale threshold")
@click.option("--scales", "n_scales", type=int, default=None, help="Number of dyadic scales")
@click.pass_context
def beta_energy_cmd(ctx: click.Context, cloud: Optional[Path], generator: Optional[str],
                    param: Tuple[str, ...], epsilon: float, n_scales: Optional[int]) -> None:
    """Carleson energy of the bad scales of a cloud"""
    try:
        Z = _load_cloud(cloud, generator, param)
        xi0, r0 = center_and_radius(Z.points, Z.mesh)
        report = carleson_energy(Z, xi0, r0, epsilon, n_scales)
        console.print_json(report.model_dump_json())
    except GMTError as e:
        _fail(ctx, e)


@main.command()
@click.option("--domain", "domain_name", required=True, help="Gallery domain name")
@click.option("--param", "-p", multiple=True, help="Domain parameter key=value")
@click.option("--z", "pole", required=True, help="Pole, comma-separated")
@click.option("--set", "set_spec", default="all", show_default=True,
              help="all | ball:c0,..,r | box:lo;hi | arc:start,stop")
@click.option("--walks", default=20000, show_default=True, help="Number of walks")
@click.option("--seed", default=0, show_default=True, help="Random seed")
@click.option("--eps-shell", default=1e-4, show_default=True, help="Boundary shell thickness")
@click.option("--workers", default=1, show_default=True, help="Worker threads")
@click.pass_context
def wos(ctx: click.Context, domain_name: str, param: Tuple[str, ...], pole: str, set_spec: str,
        walks: int, seed: int, eps_shell: float, workers: int) -> None:
    """Walk-on-spheres estimate of a harmonic measure value"""
    try:
        domain = _load_domain(domain_name, param)
        params = WoSParams(n_walks=max(walks, 1000), eps_shell=eps_shell, workers=workers)
        est = harmonic_measure(domain, parse_float_list(pole), _parse_set(set_spec), walks, seed, params)
        console.print_json(est.model_dump_json())
    except (GMTError, ValueError) as e:
        _fail(ctx, e)


@main.command()
@click.option("--domain", "domain_name", required=True, help="Gallery domain name")
@click.option("--param", "-p", multiple=True, help="Domain parameter key=value")
@click.option("--E", "E_path", type=click.Path(exists=True, path_type=Path), required=True,
              help="Boundary set CSV")
@click.option("--grid", required=True, help="Comma-separated radii")
@click.option("--z", "pole", required=True, help="Pole, comma-separated")
@click.option("--walks", default=20000, show_default=True, help="Number of walks")
@click.option("--seed", default=0, show_default=True, help="Random seed")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Scatter CSV output")
@click.pass_context
def ainfty(ctx: click.Context, domain_name: str, param: Tuple[str, ...], E_path: Path, grid: str,
           pole: str, walks: int, seed: int, out: Path) -> None:
    """A-infinity scatter of harmonic measure against Hausdorff measure"""
    try:
        domain = _load_domain(domain_name, param)
        E = PointCloud.from_csv(E_path)
        tree = build_cube_tree(E)
        pick = np.linspace(0, len(E) - 1, min(4, len(E))).astype(int)
        test_sets = cube_test_sets(tree, E.points[pick], parse_float_list(grid))
        scatter = ainfty_scatter(domain, E, test_sets, parse_float_list(pole), walks, seed)
        write_rows_csv(out, ["xi", "r", "F_id", "omega_ratio", "hd_ratio"],
                       [[str(r.xi), r.r, r.F_id, r.omega_ratio, r.hd_ratio] for r in scatter.rows])

        table = Table(title="Empirical A-infinity modulus")
        table.add_column("epsilon", style="cyan")
        table.add_column("delta (omega => H^d)", style="magenta")
        table.add_column("delta (H^d => omega)", style="magenta")
        for eps, (a, b) in scatter.modulus.items():
            table.add_row(eps, f"{a:.4g}", f"{b:.4g}")
        console.print(table)
        console.print(f"[green]{len(scatter.rows)} rows written to {out}[/green] ({scatter.dropped} dropped)")
    except GMTError as e:
        _fail(ctx, e)


def _pipeline_command(name: str, doc: str) -> None:
    @main.command(name, help=doc)
    @config_option
    @seed_option
    @out_option
    @click.option("--emit-plots", is_flag=True, help="Write plot-ready CSV files")
    @click.pass_context
    def command(ctx: click.Context, config: Path, seed: Optional[int], out: Optional[Path],
                emit_plots: bool) -> None:
        _run_stages(ctx, config, None, seed, out, emit_plots, pipeline=name)


_pipeline_command("main-theorem", "Refine E, build both sawtooth domains and test harmonic measure")
_pipeline_command("in-and-out", "Certify uniform rectifiability of E, then build the sawtooth domains")
_pipeline_command("verify-nta", "Corkscrew sweep and uniformity fit of a domain")
_pipeline_command("sub-nta", "Inner sawtooth and regularity profile over a subset of a regular boundary")


if __name__ == "__main__":
    main()
