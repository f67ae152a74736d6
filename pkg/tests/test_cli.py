"""Tests for the command-line interface."""

import json
import math

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from python_gmt import __version__
from python_gmt.cli import main
from python_gmt.core import circle_cloud, hausdorff_weights, segment_cloud
from python_gmt.metric_cubes import build_cube_tree
from python_gmt.utils import write_json, write_points_csv


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


class TestConstructionCommands:
    def test_whitney_writes_forest(self, runner, tmp_path):
        out = tmp_path / "forest.json"
        result = runner.invoke(main, ["whitney", "--domain", "ball", "--nmin", "-3", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "Whitney forest" in result.output
        records = json.loads(out.read_text())
        assert isinstance(records, list) and records
        assert set(records[0]) == {"level", "anchor", "flags"}
        assert min(r["level"] for r in records) >= -3

    def test_whitney_box_window(self, runner, tmp_path):
        out = tmp_path / "forest.json"
        result = runner.invoke(
            main,
            ["whitney", "--domain", "half_space", "-p", "dimension=2", "--box", "0,0;8,8",
             "--nmin", "-3", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        kept = [r for r in json.loads(out.read_text()) if "truncated" not in r["flags"]]
        assert kept
        assert {r["anchor"][1] for r in kept} == {2, 3}

    def test_unknown_domain(self, runner):
        result = runner.invoke(main, ["whitney", "--domain", "klein_bottle"])
        assert result.exit_code == 1
        assert "Error" in result.output

    def test_cubes_on_generator(self, runner, tmp_path):
        out = tmp_path / "tree.json"
        result = runner.invoke(
            main, ["cubes", "--generator", "circle", "-p", "n=128", "--depth", "2", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert "cubes over 2 levels" in result.output
        assert len(json.loads(out.read_text())["levels"]) == 3

    def test_cubes_needs_a_cloud(self, runner):
        result = runner.invoke(main, ["cubes"])
        assert result.exit_code == 1

    def test_beta_energy_of_segment(self, runner):
        result = runner.invoke(
            main,
            ["beta", "energy", "--generator", "segment", "-p", "a=[-1, 0]", "-p", "b=[1, 0]",
             "-p", "h=0.0625", "--epsilon", "0.1", "--scales", "2"],
        )
        assert result.exit_code == 0, result.output
        assert '"n_bad": 0' in result.output


class TestWosCommand:
    def test_arc_estimate(self, runner):
        result = runner.invoke(
            main,
            ["wos", "--domain", "ball", "--z", "0,0", "--set", f"arc:0,{math.pi / 3}",
             "--walks", "2000", "--seed", "1"],
        )
        assert result.exit_code == 0, result.output
        assert '"value"' in result.output
        assert '"n_walks": 2000' in result.output

    def test_unknown_set(self, runner):
        result = runner.invoke(main, ["wos", "--domain", "ball", "--z", "0,0", "--set", "spiral:1"])
        assert result.exit_code == 1


class TestPipelineCommands:
    def test_failing_pipeline_exits_nonzero(self, runner, tmp_path):
        config = tmp_path / "slab.yaml"
        config.write_text(yaml.safe_dump({
            "pipeline": "verify-nta",
            "domain": {"name": "slab"},
            "h": 0.03125,
        }))
        out = tmp_path / "bundle"
        result = runner.invoke(main, ["verify-nta", "-c", str(config), "--out", str(out), "--seed", "3"])
        assert result.exit_code == 1
        assert "Overall: fail" in result.output
        saved = json.loads((out / "config.json").read_text())
        assert saved["seed"] == 3
        assert saved["pipeline"] == "verify-nta"

    def test_missing_config(self, runner, tmp_path):
        result = runner.invoke(main, ["sub-nta", "-c", str(tmp_path / "nope.yaml")])
        assert result.exit_code == 2


class TestDirectInputs:
    @pytest.fixture
    def circle_files(self, tmp_path):
        sigma = circle_cloud(256)
        mu = hausdorff_weights(sigma, 1)
        measure = write_points_csv(tmp_path / "sigma.csv", sigma.points, mu.weights)
        tree = write_json(tmp_path / "tree.json", build_cube_tree(sigma, 0.25, 3).to_json())
        upper = np.flatnonzero(sigma.points[:, 1] >= 0.0)
        E = tmp_path / "E.txt"
        E.write_text(",".join(str(i) for i in upper))
        return measure, tree, E, upper

    @pytest.fixture
    def segment_csv(self, tmp_path):
        E = segment_cloud((-0.5, 0.0), (0.5, 0.0), 2.0 ** -5)
        return write_points_csv(tmp_path / "segment.csv", E.points)

    def test_porosity_refine_from_files(self, runner, tmp_path, circle_files):
        measure, tree, E, upper = circle_files
        out = tmp_path / "refine.json"
        carleson = tmp_path / "carleson.csv"
        result = runner.invoke(
            main,
            ["porosity", "refine", "--tree", str(tree), "--measure", str(measure), "--E", str(E),
             "--tau", "0.1", "--M", "2", "--delta", "0.05", "--t", "0.001",
             "--carleson", str(carleson), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "Refinement of E" in result.output
        data = json.loads(out.read_text())
        assert set(data["E_prime_idx"]) <= set(upper.tolist())
        assert data["mass_ratio"] >= 0.9
        assert carleson.read_text().splitlines()[0] == "level,index,ratio"

    def test_porosity_refine_needs_inputs(self, runner, circle_files):
        measure, tree, _, _ = circle_files
        result = runner.invoke(main, ["porosity", "refine", "--tree", str(tree), "--measure", str(measure)])
        assert result.exit_code == 1
        assert "--E" in result.output

    def test_sawtooth_build_inner(self, runner, tmp_path, segment_csv):
        out = tmp_path / "saw.json"
        result = runner.invoke(
            main,
            ["sawtooth", "build", "--kind", "inner", "--domain", "half_space", "-p", "dimension=2",
             "-p", "extent=1.0", "--E", str(segment_csv), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "inner sawtooth" in result.output
        assert json.loads(out.read_text())["kind"] == "inner"

    def test_sawtooth_sums_grid(self, runner, tmp_path, segment_csv):
        out = tmp_path / "sums.csv"
        result = runner.invoke(
            main,
            ["sawtooth", "sums", "--kind", "outer", "--domain", "half_space", "-p", "dimension=2",
             "-p", "extent=1.0", "--E", str(segment_csv), "--xi", "0,0", "--r-grid", "0.25,0.5",
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "Empirical C'" in result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "xi,r,sum,sum/r^d"
        assert len(lines) == 3

    def test_sawtooth_sums_needs_radii(self, runner, segment_csv):
        result = runner.invoke(
            main, ["sawtooth", "sums", "--domain", "half_space", "--E", str(segment_csv)]
        )
        assert result.exit_code == 1
        assert "--r-grid" in result.output

    def test_beta_sweep_with_centers_file(self, runner, tmp_path):
        centers = write_points_csv(tmp_path / "centers.csv", circle_cloud(512).points[[0, 128]])
        out = tmp_path / "betas.csv"
        result = runner.invoke(
            main,
            ["beta", "sweep", "--generator", "circle", "-p", "n=512", "--scales", "0.25,0.125",
             "--centers", str(centers), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0].split(",")[:4] == ["xi", "r", "bbeta", "plane_normal"]
        assert len(lines) == 5
