import numpy as np
import pytest

from periodic_hawkes import e_step, interevent_cdf, precision_recall, simulate
from periodic_hawkes import figures
from periodic_hawkes.evaluation import PredictionScore


@pytest.fixture
def sample(cascade_params):
    seq = simulate(cascade_params, 60.0, seed=18)
    return seq, e_step(cascade_params, seq)


def _assert_rendered(path):
    assert path.exists()
    assert path.stat().st_size > 2000


def test_event_raster(tmp_path, sample):
    seq, _ = sample
    _assert_rendered(figures.save_event_raster(seq, tmp_path / "raster.png",
                                               vocabulary=["a", "b", "c"]))


def test_day_profile(tmp_path):
    _assert_rendered(figures.save_day_profile(np.ones(7), tmp_path / "delta.png"))


def test_excitation_heatmap(tmp_path, cascade_params):
    _assert_rendered(
        figures.save_excitation_heatmap(
            cascade_params.excitation, tmp_path / "heat.png", labels=["a", "b", "c"]
        )
    )


def test_matrix_comparison(tmp_path, cascade_params):
    _assert_rendered(
        figures.save_matrix_comparison(
            cascade_params.excitation, cascade_params.excitation, tmp_path / "cmp.png"
        )
    )


def test_branching_diagram(tmp_path, sample):
    seq, branching = sample
    _assert_rendered(
        figures.save_branching_diagram(seq, branching, tmp_path / "branching.png")
    )


def test_cdf_overlay(tmp_path, sample, cascade_params):
    seq, _ = sample
    sims = [interevent_cdf(simulate(cascade_params, 60.0, seed=s)) for s in range(3)]
    _assert_rendered(
        figures.save_cdf_overlay(interevent_cdf(seq), sims, tmp_path / "cdf.png")
    )


def test_pr_curves(tmp_path):
    scores = [
        PredictionScore(user=f"u{k}", type_index=0, score=s, label=l, model="m")
        for k, (s, l) in enumerate([(0.9, True), (0.6, False), (0.4, True)])
    ]
    curve = precision_recall(scores, [0.3, 0.5, 0.8])
    _assert_rendered(
        figures.save_pr_curves({"a": {"m": curve}}, tmp_path / "pr.png")
    )


def test_byte_determinism(tmp_path, sample):
    seq, branching = sample
    one = figures.save_branching_diagram(seq, branching, tmp_path / "one.png",
                                         manifest_id="x")
    two = figures.save_branching_diagram(seq, branching, tmp_path / "two.png",
                                         manifest_id="x")
    assert one.read_bytes() == two.read_bytes()
