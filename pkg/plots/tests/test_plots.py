import json
import shutil
from pathlib import Path

import pytest

from equibandits_plots import (
    EmptyResults,
    MissingColumns,
    ResultsBundle,
    SchemaMismatch,
    plot_capacity,
    plot_gini_reward,
    plot_group_bars,
    plot_pareto,
)
from equibandits_plots.capacity import main as capacity_main
from equibandits_plots.gini_reward import main as gini_reward_main
from equibandits_plots.group_bars import main as group_bars_main
from equibandits_plots.pareto import main as pareto_main

FIXTURES = Path(__file__).parent / "fixtures"
RUN = FIXTURES / "run_bundle"
PARETO = FIXTURES / "pareto_bundle"
CAPACITY = FIXTURES / "capacity_bundle"

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

RENDERERS = [
    (plot_group_bars, RUN, "group_bars.png"),
    (plot_gini_reward, RUN, "gini_reward.png"),
    (plot_pareto, PARETO, "pareto.png"),
    (plot_capacity, CAPACITY, "capacity.png"),
]


def empty_run_bundle(tmp_path):
    bundle = tmp_path / "empty"
    bundle.mkdir()
    shutil.copy(RUN / "manifest.json", bundle / "manifest.json")
    records = (RUN / "records.csv").read_text().splitlines()[0]
    (bundle / "records.csv").write_text(records + "\n")
    summary = json.loads((RUN / "summary.json").read_text())
    summary["policies"] = {}
    (bundle / "summary.json").write_text(json.dumps(summary))
    return bundle


class TestRendering:
    @pytest.mark.parametrize("render,bundle,name", RENDERERS)
    def test_renders_non_empty_png(self, tmp_path, render, bundle, name):
        path = render(bundle, tmp_path)
        assert Path(path).name == name
        data = Path(path).read_bytes()
        assert data.startswith(PNG_MAGIC) and len(data) > 1000

    @pytest.mark.parametrize("render,bundle,name", RENDERERS)
    def test_deterministic_bytes(self, tmp_path, render, bundle, name):
        first = Path(render(bundle, tmp_path / "a")).read_bytes()
        second = Path(render(bundle, tmp_path / "b")).read_bytes()
        assert first == second

    def test_inputs_not_mutated(self, tmp_path):
        before = {p.name: p.read_bytes() for p in RUN.iterdir()}
        plot_group_bars(RUN, tmp_path)
        plot_gini_reward(RUN, tmp_path)
        after = {p.name: p.read_bytes() for p in RUN.iterdir()}
        assert before == after

    def test_single_point_capacity_curve(self, tmp_path):
        bundle = tmp_path / "single"
        bundle.mkdir()
        shutil.copy(CAPACITY / "manifest.json", bundle / "manifest.json")
        shutil.copy(CAPACITY / "summary.json", bundle / "summary.json")
        lines = (CAPACITY / "capacity.csv").read_text().splitlines()
        (bundle / "capacity.csv").write_text("\n".join(lines[:2]) + "\n")
        path = plot_capacity(bundle, tmp_path / "out")
        assert Path(path).read_bytes().startswith(PNG_MAGIC)


class TestFailureModes:
    def test_empty_records_error_and_no_file(self, tmp_path):
        bundle = empty_run_bundle(tmp_path)
        out = tmp_path / "out"
        with pytest.raises(EmptyResults):
            plot_group_bars(bundle, out)
        with pytest.raises(EmptyResults):
            plot_gini_reward(bundle, out)
        assert not out.exists()

    def test_schema_mismatch(self, tmp_path):
        bundle = tmp_path / "wrong"
        bundle.mkdir()
        manifest = json.loads((RUN / "manifest.json").read_text())
        manifest["schema_version"] = 99
        (bundle / "manifest.json").write_text(json.dumps(manifest))
        shutil.copy(RUN / "records.csv", bundle / "records.csv")
        with pytest.raises(SchemaMismatch):
            ResultsBundle(bundle)

    def test_missing_columns(self, tmp_path):
        bundle = tmp_path / "cols"
        bundle.mkdir()
        shutil.copy(RUN / "manifest.json", bundle / "manifest.json")
        lines = (RUN / "records.csv").read_text().splitlines()
        stripped = [",".join(line.split(",")[:-1]) for line in lines]
        (bundle / "records.csv").write_text("\n".join(stripped) + "\n")
        with pytest.raises(MissingColumns):
            ResultsBundle(bundle).records()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ResultsBundle(tmp_path)


class TestCommandLine:
    @pytest.mark.parametrize(
        "main,bundle",
        [
            (group_bars_main, RUN),
            (gini_reward_main, RUN),
            (pareto_main, PARETO),
            (capacity_main, CAPACITY),
        ],
    )
    def test_success_exit_code(self, tmp_path, capsys, main, bundle):
        assert main(["--bundle", str(bundle), "--out", str(tmp_path)]) == 0
        assert capsys.readouterr().out.strip().endswith(".png")

    def test_empty_bundle_fails_cleanly(self, tmp_path, capsys):
        bundle = empty_run_bundle(tmp_path)
        code = group_bars_main(["--bundle", str(bundle), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error:" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()
