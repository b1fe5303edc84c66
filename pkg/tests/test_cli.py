import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from periodic_hawkes import load_fit, parse_events, read_fit_document
from periodic_hawkes.cli import main, same_day_cooccurrence
from periodic_hawkes.model import EventSequence

FIXTURE = str(Path(__file__).parent / "data" / "transactions.csv")


@pytest.fixture
def runner():
    return CliRunner()


def _run(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def _tree_digests(root: Path, skip={"manifest.json"}) -> dict[str, str]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name not in skip:
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


class TestFitCommand:
    def test_outputs_and_determinism(self, runner, tmp_path):
        args = [
            "fit", FIXTURE, "--min-events", "50", "--seed", "1", "--max-figures", "1",
        ]
        _run(runner, args + ["--out", str(tmp_path / "a")])
        _run(runner, args + ["--out", str(tmp_path / "b")])
        a = _tree_digests(tmp_path / "a")
        b = _tree_digests(tmp_path / "b")
        assert a and a == b
        assert "summary.csv" in a
        assert any(name.startswith("fit_") for name in a)
        assert any(name.startswith("branching_") for name in a)
        assert any(name.startswith("figures/") for name in a)
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        fit_doc = read_fit_document(
            next((tmp_path / "a").glob("fit_000_*.json"))
        )
        assert fit_doc["manifest_id"] == manifest["manifest_id"]

    def test_workers_do_not_change_results(self, runner, tmp_path):
        base = ["fit", FIXTURE, "--min-events", "50", "--max-figures", "0"]
        _run(runner, base + ["--workers", "1", "--out", str(tmp_path / "w1")])
        _run(runner, base + ["--workers", "2", "--out", str(tmp_path / "w2")])
        assert _tree_digests(tmp_path / "w1") == _tree_digests(tmp_path / "w2")

    def test_omega_grid_selects_by_likelihood(self, runner, tmp_path):
        _run(runner, [
            "fit", FIXTURE, "--min-events", "50", "--max-figures", "0",
            "--omega-grid", "0.5,1.0", "--out", str(tmp_path / "grid"),
        ])
        summary = (tmp_path / "grid" / "summary.csv").read_text().splitlines()
        omegas = {line.split(",")[2] for line in summary[2:]}
        assert omegas <= {"0.5", "1.0"}

    def test_branching_table_format(self, runner, tmp_path):
        _run(runner, [
            "fit", FIXTURE, "--min-events", "50", "--max-figures", "0",
            "--out", str(tmp_path / "f"),
        ])
        table = next((tmp_path / "f").glob("branching_000_*.csv")).read_text()
        lines = table.splitlines()
        assert lines[0].startswith("# manifest_id=")
        assert lines[1] == "event_index,parent_index,probability"
        assert any(",SELF," in line for line in lines[2:])


class TestSimulateCommand:
    def test_demo_roundtrip_recovery(self, runner, tmp_path):
        # simulate the demo scenario, then fit the CLI's own output: the
        # generating background rate comes back within 0.05
        _run(runner, [
            "simulate", "--demo", "--horizon", "10000", "--seed", "5",
            "--out", str(tmp_path / "sim"), "--max-figures", "0",
        ])
        _run(runner, [
            "fit", str(tmp_path / "sim" / "events.csv"), "--min-events", "50",
            "--max-figures", "0", "--out", str(tmp_path / "fit"),
        ])
        fitted = load_fit(next((tmp_path / "fit").glob("fit_000_*.json")))
        assert abs(fitted.params.mu[0] - 0.2) < 0.05

    def test_requires_exactly_one_source(self, runner, tmp_path):
        result = runner.invoke(main, [
            "simulate", "--horizon", "10", "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code == 1
        assert "error category=input" in result.output

    def test_from_fit_file(self, runner, tmp_path):
        _run(runner, [
            "fit", FIXTURE, "--min-events", "50", "--max-figures", "0",
            "--out", str(tmp_path / "fit"),
        ])
        fit_file = next((tmp_path / "fit").glob("fit_000_*.json"))
        _run(runner, [
            "simulate", "--fit-file", str(fit_file), "--horizon", "50",
            "--seed", "2", "--out", str(tmp_path / "sim"),
        ])
        parsed = parse_events(
            tmp_path / "sim" / "events.csv", min_events=1, horizon=50.0
        )
        assert "sim" in parsed.sequences


class TestGofCommand:
    def test_poisson_model_rejected_on_bursty_data(self, runner, tmp_path):
        _run(runner, [
            "gof", FIXTURE, "--min-events", "50", "--model", "poisson",
            "--seed", "3", "--max-figures", "1", "--out", str(tmp_path / "gof"),
        ])
        rows = (tmp_path / "gof" / "gof.csv").read_text().splitlines()[2:]
        assert rows and all(row.split(",")[2] == "True" for row in rows)
        assert (tmp_path / "gof" / "figures").exists()


class TestPredictCommand:
    def test_writes_tables_and_figure(self, runner, tmp_path):
        _run(runner, [
            "predict", FIXTURE, "--min-events", "50", "--seed", "4",
            "--n-samples", "100", "--top-k-types", "3",
            "--out", str(tmp_path / "pred"),
        ])
        for name in ["pr_hawkes.csv", "pr_poisson.csv", "average_precision.csv"]:
            assert (tmp_path / "pred" / name).exists()
        header = (tmp_path / "pred" / "pr_hawkes.csv").read_text().splitlines()[1]
        assert header == "type,threshold,precision,recall"


class TestCooccurCommand:
    def test_same_day_counts(self):
        seq = EventSequence.from_pairs(
            [(0.1, 0), (0.5, 1), (0.9, 1), (1.2, 0)], horizon=2.0, num_types=2
        )
        counts = same_day_cooccurrence(seq)
        # day 0 holds (0,1), (0,1), (1,1); day 1 holds only one event
        assert counts[0, 1] == 2.0
        assert counts[1, 1] == 1.0
        assert counts[0, 0] == 0.0 and counts.sum() == 3.0

    def test_writes_matrices(self, runner, tmp_path):
        _run(runner, [
            "cooccur", FIXTURE, "--min-events", "50", "--seed", "5",
            "--max-figures", "1", "--out", str(tmp_path / "co"),
        ])
        assert next((tmp_path / "co").glob("cooccur_000_*.csv")).exists()
        assert next((tmp_path / "co").glob("excitation_000_*.csv")).exists()


class TestErrorReporting:
    def test_input_error_category(self, runner, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("who,when,what\nu,2020-01-01,a\n")
        result = runner.invoke(main, ["fit", str(bad), "--out", str(tmp_path / "o")])
        assert result.exit_code == 1
        assert "error category=input" in result.output
