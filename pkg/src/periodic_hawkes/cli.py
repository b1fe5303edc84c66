"""Command-line pipelines: fit, simulate, gof, predict, cooccur.

Every run takes a seed (default 0), writes its outputs plus a
``manifest.json`` into ``--out``, and embeds the manifest id in each output
file, so identical (input, config, seed) triples reproduce bit-identical
outputs.  Figures render alongside the delimited tables; ``--max-figures 0``
disables them.  Failures exit nonzero with a one-line
``error category=<name> ...`` message on stderr.
"""

from __future__ import annotations

import csv
import functools
import io as _stdio
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import figures
from .errors import InputError, PeriodicHawkesError, error_category
from .estimation import EmConfig, FitResult, fit_map_em
from .evaluation import (
    hawkes_gof_pair,
    interevent_cdf,
    mc_gof_test,
    hawkes_prediction_model,
    poisson_gof_pair,
    poisson_prediction_model,
    prediction_benchmark,
)
from .io import (
    LIBRARY_VERSION,
    RunManifest,
    file_digest,
    parse_events,
    read_fit_document,
    save_fit,
    write_events_csv,
    write_manifest,
)
from .model import EventSequence, GammaPriors, HawkesParams, observed_log_likelihood
from .simulation import simulate


def _cli_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PeriodicHawkesError as exc:
            click.echo(f"error category={error_category(exc)} message={exc}", err=True)
            sys.exit(1)

    return wrapper


def _fit_options(func):
    options = [
        click.option("--omega", type=float, default=1.0, show_default=True,
                     help="Kernel decay rate (1/days); fixed during EM."),
        click.option("--omega-grid", type=str, default="", show_default=False,
                     help="Comma-separated omegas; each user keeps the one "
                          "maximizing the observed log-likelihood."),
        click.option("--prior-shape-a", type=float, default=1.0, show_default=True,
                     help="Gamma shape pseudocount on every excitation entry."),
        click.option("--prior-rate-a", type=float, default=0.0, show_default=True,
                     help="Gamma rate pseudocount on every excitation entry."),
        click.option("--prior-shape-delta", type=float, default=1.0, show_default=True,
                     help="Gamma shape pseudocount on every day multiplier."),
        click.option("--max-iters", type=int, default=500, show_default=True),
        click.option("--tol", type=float, default=1e-6, show_default=True,
                     help="Relative objective change that stops EM."),
        click.option("--min-events", type=int, default=90, show_default=True,
                     help="Users with fewer events are excluded."),
        click.option("--whole-week-approx", is_flag=True,
                     help="Report likelihoods with the week-averaged background "
                          "compensator instead of exact partial-week accounting."),
        click.option("--exact-kernel-tail", is_flag=True,
                     help="Use each event's exact kernel mass up to the horizon "
                          "in the excitation update instead of treating it as 1."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _em_config(opts: dict, omega: float) -> EmConfig:
    return EmConfig(
        max_iters=opts["max_iters"],
        tol=opts["tol"],
        omega=omega,
        full_tail_mass=not opts["exact_kernel_tail"],
    )


def _priors(opts: dict, num_types: int) -> GammaPriors:
    return GammaPriors.uniform(
        num_types,
        days=7,
        shape_a=opts["prior_shape_a"],
        rate_a=opts["prior_rate_a"],
        shape_delta=opts["prior_shape_delta"],
    )


def _omega_list(opts: dict) -> list[float]:
    if opts["omega_grid"]:
        try:
            values = [float(tok) for tok in opts["omega_grid"].split(",") if tok.strip()]
        except ValueError as exc:
            raise InputError(f"unparseable --omega-grid: {exc}") from exc
        if not values:
            raise InputError("--omega-grid must name at least one value")
        return values
    return [opts["omega"]]


def _fit_one(seq: EventSequence, opts: dict) -> tuple[FitResult, float, float]:
    """Fit over the omega grid; keep the observed-log-likelihood winner."""
    best: tuple[FitResult, float, float] | None = None
    for omega in _omega_list(opts):
        result = fit_map_em(
            seq, priors=_priors(opts, seq.num_types), cfg=_em_config(opts, omega)
        )
        loglik = observed_log_likelihood(
            result.params, seq, whole_week_approx=opts["whole_week_approx"]
        )
        if best is None or loglik > best[2]:
            best = (result, omega, loglik)
    assert best is not None
    return best


def _fit_task(payload: tuple[str, EventSequence, dict]) -> tuple[str, FitResult, float, float]:
    user, seq, opts = payload
    result, omega, loglik = _fit_one(seq, opts)
    return user, result, omega, loglik


def _safe_name(user: str) -> str:
    return "".join(ch if (ch.isalnum() or ch in "-_") else "_" for ch in user)


def _write_csv(path: Path, header: list[str], rows: list[list], manifest_id: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = _stdio.StringIO()
    buffer.write(f"# manifest_id={manifest_id}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buffer.getvalue(), encoding="utf-8")
    tmp.replace(path)
    return path


def _float_repr(x: float) -> str:
    return repr(float(x))


@click.group()
@click.version_option(LIBRARY_VERSION, prog_name="periodic-hawkes")
def main():
    """Periodic multivariate Hawkes processes: fit, simulate, test, predict."""


# ---------------------------------------------------------------------------
# fit


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@_fit_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              help="Fit users concurrently; results are identical at any width.")
@click.option("--max-figures", type=int, default=8, show_default=True,
              help="Render figures for at most this many users (0 disables).")
@click.option("--min-edge-prob", type=float, default=1e-3, show_default=True,
              help="Smallest parent probability kept in the branching table.")
@_cli_errors
def fit(input_path, out_dir, seed, workers, max_figures, min_edge_prob, **opts):
    """Fit one model per user and write fit files plus branching tables."""
    out = Path(out_dir)
    parsed = parse_events(input_path, min_events=opts["min_events"])
    manifest = RunManifest(
        command="fit",
        config={**opts, "workers": workers, "min_edge_prob": min_edge_prob},
        seed=seed,
        input_digest=file_digest(input_path),
    )
    _echo_parse_summary(parsed)
    if not parsed.sequences:
        raise InputError("no users passed the minimum-event filter")

    tasks = [(user, seq, opts) for user, seq in parsed.sequences.items()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_fit_task, tasks))
    else:
        outcomes = [_fit_task(task) for task in tasks]

    summary_rows = []
    for index, (user, result, omega, loglik) in enumerate(outcomes):
        stem = f"{index:03d}_{_safe_name(user)}"
        save_fit(result, out / f"fit_{stem}.json",
                 vocabulary=parsed.vocabulary, manifest_id=manifest.manifest_id)
        edges = [[i, "SELF", _float_repr(p)]
                 for i, p in enumerate(result.branching.background)]
        for child, parent, prob in zip(result.branching.child,
                                       result.branching.parent,
                                       result.branching.probability):
            if prob >= min_edge_prob:
                edges.append([int(child), int(parent), _float_repr(prob)])
        edges.sort(key=lambda row: (row[0], -1 if row[1] == "SELF" else row[1]))
        _write_csv(out / f"branching_{stem}.csv",
                   ["event_index", "parent_index", "probability"],
                   edges, manifest.manifest_id)
        seq = parsed.sequences[user]
        summary_rows.append([user, len(seq), _float_repr(omega), result.iterations,
                             result.converged, _float_repr(loglik)])
        if index < max_figures:
            figures.save_excitation_heatmap(
                result.params.excitation, out / f"figures/excitation_{stem}.png",
                labels=parsed.vocabulary, manifest_id=manifest.manifest_id)
            figures.save_day_profile(
                result.params.delta, out / f"figures/day_profile_{stem}.png",
                manifest_id=manifest.manifest_id)
            figures.save_branching_diagram(
                seq, result.branching, out / f"figures/branching_{stem}.png",
                vocabulary=parsed.vocabulary, manifest_id=manifest.manifest_id)
        click.echo(f"user={user} events={len(seq)} omega={omega:g} "
                   f"iterations={result.iterations} converged={result.converged} "
                   f"loglik={loglik:.6f}")
    _write_csv(out / "summary.csv",
               ["user", "events", "omega", "iterations", "converged", "log_likelihood"],
               summary_rows, manifest.manifest_id)
    write_manifest(manifest, out)


def _echo_parse_summary(parsed) -> None:
    click.echo(
        f"parsed rows={parsed.total_rows} users={len(parsed.sequences)} "
        f"excluded_users={len(parsed.excluded_users)} row_errors={len(parsed.row_errors)} "
        f"types={len(parsed.vocabulary)} horizon={parsed.horizon:g}"
    )
    for lineno, message in parsed.row_errors[:10]:
        click.echo(f"  row error line {lineno}: {message}", err=True)


# ---------------------------------------------------------------------------
# simulate


def _demo_params() -> tuple[HawkesParams, list[str]]:
    # Cascade demo: type a arrives on its own and self-excites; a triggers b,
    # and b triggers c.
    excitation = np.zeros((3, 3))
    excitation[0, 0] = 0.5
    excitation[0, 1] = 0.5
    excitation[1, 2] = 0.5
    params = HawkesParams(
        mu=np.array([0.2, 0.0, 0.0]),
        delta=np.ones(7),
        excitation=excitation,
        omega=1.0,
    )
    return params, ["a", "b", "c"]


@main.command()
@click.option("--fit-file", type=click.Path(exists=True, dir_okay=False),
              help="Take parameters from a saved fit.")
@click.option("--demo", is_flag=True, help="Use the built-in 3-type cascade demo.")
@click.option("--horizon", type=float, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--max-figures", type=int, default=1, show_default=True)
@_cli_errors
def simulate_cmd(fit_file, demo, horizon, seed, out_dir, max_figures):
    """Draw one event sequence and write it as CSV (plus a raster figure)."""
    if bool(fit_file) == bool(demo):
        raise InputError("choose exactly one of --fit-file or --demo")
    out = Path(out_dir)
    if demo:
        params, vocabulary = _demo_params()
        source_digest = "demo"
    else:
        document = read_fit_document(fit_file)
        p = document["params"]
        params = HawkesParams(mu=np.array(p["mu"]), delta=np.array(p["delta"]),
                              excitation=np.array(p["excitation"]), omega=p["omega"])
        vocabulary = document["vocabulary"] or [str(u) for u in range(params.num_types)]
        source_digest = file_digest(fit_file)
    manifest = RunManifest(
        command="simulate",
        config={"horizon": horizon, "source": "demo" if demo else "fit-file"},
        seed=seed,
        input_digest=source_digest,
    )
    seq = simulate(params, horizon, seed)
    write_events_csv(out / "events.csv", seq, vocabulary=vocabulary,
                     manifest_id=manifest.manifest_id)
    if max_figures > 0:
        figures.save_event_raster(seq, out / "figures/events.png",
                                  vocabulary=vocabulary, manifest_id=manifest.manifest_id)
    write_manifest(manifest, out)
    click.echo(f"simulated events={len(seq)} horizon={horizon:g} seed={seed}")


main.add_command(simulate_cmd, name="simulate")


# ---------------------------------------------------------------------------
# gof


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--model", type=click.Choice(["hawkes", "poisson"]), default="hawkes",
              show_default=True, help="Model family under test.")
@click.option("--mc-reps", type=int, default=20, show_default=True)
@_fit_options
@click.option("--gof-method", type=click.Choice(["ranksum", "permutation"]),
              default="ranksum", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-figures", type=int, default=8, show_default=True)
@_cli_errors
def gof(input_path, out_dir, model, mc_reps, gof_method, seed, max_figures, **opts):
    """Monte Carlo goodness-of-fit on the inter-event-time distribution."""
    out = Path(out_dir)
    parsed = parse_events(input_path, min_events=opts["min_events"])
    _echo_parse_summary(parsed)
    if not parsed.sequences:
        raise InputError("no users passed the minimum-event filter")
    manifest = RunManifest(
        command="gof",
        config={**opts, "model": model, "mc_reps": mc_reps, "gof_method": gof_method},
        seed=seed,
        input_digest=file_digest(input_path),
    )
    if model == "hawkes":
        fitter, simulator = hawkes_gof_pair(cfg=_em_config(opts, opts["omega"]))
    else:
        fitter, simulator = poisson_gof_pair()
    seeds = np.random.SeedSequence(seed).generate_state(
        len(parsed.sequences), dtype=np.uint64
    )
    rows = []
    for index, (user, seq) in enumerate(parsed.sequences.items()):
        result = mc_gof_test(seq, fitter, simulator, replicates=mc_reps,
                             seed=int(seeds[index]), method=gof_method)
        rows.append([user, _float_repr(result.p_value), result.rejected_at_5pct,
                     result.replicates])
        click.echo(f"user={user} p_value={result.p_value:.4f} "
                   f"rejected={result.rejected_at_5pct}")
        if index < max_figures:
            fitted = fitter(seq)
            sims = []
            overlay_seeds = np.random.SeedSequence((seed, index)).generate_state(
                10, dtype=np.uint64
            )
            for s in overlay_seeds:
                sim = simulator(fitted, seq.horizon, int(s))
                if len(sim) >= 2:
                    sims.append(interevent_cdf(sim))
            figures.save_cdf_overlay(
                interevent_cdf(seq), sims,
                out / f"figures/interevent_{index:03d}_{_safe_name(user)}.png",
                manifest_id=manifest.manifest_id)
    _write_csv(out / "gof.csv", ["user", "p_value", "rejected", "M"], rows,
               manifest.manifest_id)
    write_manifest(manifest, out)


# ---------------------------------------------------------------------------
# predict


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@_fit_options
@click.option("--epsilon", type=float, default=2.0, show_default=True,
              help="Prediction window length in days.")
@click.option("--holdout", type=float, default=0.10, show_default=True,
              help="Fraction of each history from which the split day is drawn.")
@click.option("--top-k-types", type=int, default=10, show_default=True)
@click.option("--n-samples", type=int, default=200, show_default=True,
              help="Simulated continuations per score.")
@click.option("--models", type=str, default="hawkes,poisson", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-figures", type=int, default=1, show_default=True)
@_cli_errors
def predict(input_path, out_dir, epsilon, holdout, top_k_types, n_samples, models,
            seed, max_figures, **opts):
    """Next-window activity prediction benchmark with PR curves per type."""
    out = Path(out_dir)
    parsed = parse_events(input_path, min_events=opts["min_events"])
    _echo_parse_summary(parsed)
    if not parsed.sequences:
        raise InputError("no users passed the minimum-event filter")
    manifest = RunManifest(
        command="predict",
        config={**opts, "epsilon": epsilon, "holdout": holdout,
                "top_k_types": top_k_types, "n_samples": n_samples, "models": models},
        seed=seed,
        input_digest=file_digest(input_path),
    )
    model_list = []
    for name in [tok.strip() for tok in models.split(",") if tok.strip()]:
        if name == "hawkes":
            model_list.append(hawkes_prediction_model(cfg=_em_config(opts, opts["omega"])))
        elif name == "poisson":
            model_list.append(poisson_prediction_model())
        else:
            raise InputError(f"unknown model {name!r} (expected hawkes or poisson)")
    result = prediction_benchmark(
        parsed.sequences, epsilon=epsilon, holdout_fraction=holdout,
        models=model_list, seed=seed, top_k=top_k_types, n_samples=n_samples,
    )
    labels = parsed.vocabulary
    ap_rows = []
    for model in model_list:
        rows = []
        for u in result.tracked_types:
            curve = result.curves.get((model.name, u))
            if curve is None:
                continue
            for threshold, precision, recall in zip(curve.thresholds, curve.precision,
                                                    curve.recall):
                rows.append([labels[u], _float_repr(threshold),
                             _float_repr(precision), _float_repr(recall)])
            ap_rows.append([model.name, labels[u],
                            _float_repr(curve.average_precision),
                            curve.num_positive, curve.num_scored])
        _write_csv(out / f"pr_{model.name}.csv",
                   ["type", "threshold", "precision", "recall"], rows,
                   manifest.manifest_id)
    _write_csv(out / "average_precision.csv",
               ["model", "type", "average_precision", "positives", "scored"],
               ap_rows, manifest.manifest_id)
    if max_figures > 0 and result.curves:
        grid = {
            labels[u]: {
                model.name: result.curves[(model.name, u)]
                for model in model_list if (model.name, u) in result.curves
            }
            for u in result.tracked_types
            if any((model.name, u) in result.curves for model in model_list)
        }
        figures.save_pr_curves(grid, out / "figures/pr_curves.png",
                               manifest_id=manifest.manifest_id)
    write_manifest(manifest, out)
    click.echo(f"scored users={len(result.split_times)} skipped={result.skipped_users} "
               f"types={len(result.tracked_types)}")
    for model_name, u in sorted(result.curves):
        curve = result.curves[(model_name, u)]
        click.echo(f"model={model_name} type={labels[u]} "
                   f"average_precision={curve.average_precision:.4f}")


# ---------------------------------------------------------------------------
# cooccur


def same_day_cooccurrence(seq: EventSequence) -> np.ndarray:
    """Ordered same-day pair counts: rows = earlier (parent) type."""
    matrix = np.zeros((seq.num_types, seq.num_types))
    days = np.floor(seq.times).astype(np.int64)
    start = 0
    for i in range(1, len(seq) + 1):
        if i == len(seq) or days[i] != days[start]:
            block = seq.types[start:i]
            for a in range(block.size):
                for b in range(a + 1, block.size):
                    matrix[block[a], block[b]] += 1.0
            start = i
    return matrix


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@_fit_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-figures", type=int, default=8, show_default=True)
@_cli_errors
def cooccur(input_path, out_dir, seed, max_figures, **opts):
    """Same-day co-occurrence counts next to the fitted excitation matrix."""
    out = Path(out_dir)
    parsed = parse_events(input_path, min_events=opts["min_events"])
    _echo_parse_summary(parsed)
    if not parsed.sequences:
        raise InputError("no users passed the minimum-event filter")
    manifest = RunManifest(
        command="cooccur", config=dict(opts), seed=seed,
        input_digest=file_digest(input_path),
    )
    labels = parsed.vocabulary
    header = ["parent"] + labels
    for index, (user, seq) in enumerate(parsed.sequences.items()):
        stem = f"{index:03d}_{_safe_name(user)}"
        counts = same_day_cooccurrence(seq)
        result, omega, _ = _fit_one(seq, opts)
        excitation = result.params.excitation
        _write_csv(out / f"cooccur_{stem}.csv", header,
                   [[labels[v]] + [_float_repr(x) for x in counts[v]]
                    for v in range(len(labels))],
                   manifest.manifest_id)
        _write_csv(out / f"excitation_{stem}.csv", header,
                   [[labels[v]] + [_float_repr(x) for x in excitation[v]]
                    for v in range(len(labels))],
                   manifest.manifest_id)
        if index < max_figures:
            figures.save_matrix_comparison(
                counts, excitation, out / f"figures/cooccur_{stem}.png",
                labels=labels, manifest_id=manifest.manifest_id)
        click.echo(f"user={user} omega={omega:g} "
                   f"pairs={int(counts.sum())} excitation_mass={excitation.sum():.4f}")
    write_manifest(manifest, out)


if __name__ == "__main__":
    main()
