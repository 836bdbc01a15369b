"""Command-line interface: ensemble generation, constraint handling,
selection, the active loop, the benchmark harness and the HTTP service."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click
import numpy as np

from .constraints import ConstraintSet, Kind, SimulatedOracle, generate_random_constraints
from .data import load_dataset, normalize, split_supervision
from .engines import ClusteringEnsemble, HyperGrid, generate_ensemble
from .evaluation import ExperimentSpec, evaluate_selected, run_experiment
from .selection import ActiveConfig, ActiveSession, cobs_select


def _parse_label_col(value: str | None):
    if value is None:
        return None
    return int(value) if value.lstrip("-").isdigit() else value


def _load_grid(spec: str | None) -> HyperGrid:
    if spec is None or spec == "default":
        return HyperGrid()
    return HyperGrid.from_dict(json.loads(Path(spec).read_text()))


@click.group()
def main():
    """Constraint-based clustering selection."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--label-col", default=None, help="Label column name or index.")
@click.option("--grid", default="default",
              help="'default' or a path to a grid JSON file.")
@click.option("--out", required=True, type=click.Path())
@click.option("--workers", default=1, show_default=True)
def generate(data, label_col, grid, out, workers):
    """Sweep the hyperparameter grid and write the ensemble JSON."""
    dataset = normalize(load_dataset(data, _parse_label_col(label_col)))
    ensemble = generate_ensemble(dataset, _load_grid(grid), workers=workers)
    ensemble.save(out)
    click.echo(f"wrote {len(ensemble)} clusterings to {out} "
               f"({len(ensemble.skipped)} skipped)")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--label-col", required=True)
@click.option("--count", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
def constraints(data, label_col, count, seed, out):
    """Generate random oracle-labeled constraints from the supervision split."""
    dataset = normalize(load_dataset(data, _parse_label_col(label_col)))
    seeds = np.random.SeedSequence(seed).generate_state(2)
    split = split_supervision(dataset, int(seeds[0]))
    oracle = SimulatedOracle(dataset.labels)
    cs = generate_random_constraints(split, oracle, count, int(seeds[1]))
    Path(out).write_text(json.dumps(cs.to_json_list()))
    click.echo(f"wrote {len(cs.ml)} must-link / {len(cs.cl)} cannot-link to {out}")


@main.command()
@click.option("--ensemble", "ensemble_path", required=True,
              type=click.Path(exists=True))
@click.option("--constraints", "constraints_path", required=True,
              type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path())
def select(ensemble_path, constraints_path, seed, out):
    """Pick the clustering satisfying the most constraints."""
    ensemble = ClusteringEnsemble.load(ensemble_path)
    cs = ConstraintSet.from_json_list(json.loads(Path(constraints_path).read_text()))
    selected = cobs_select(ensemble, cs, seed)
    click.echo(f"selected {selected.provenance.label()}")
    if out:
        Path(out).write_text(json.dumps({
            "provenance": selected.provenance.as_dict(),
            "assignment": selected.assignment.tolist(),
        }))
        click.echo(f"wrote assignment to {out}")


class _StdinOracle:
    """Interactive oracle: shows both instances and asks must/cannot-link."""

    def __init__(self, dataset):
        self.dataset = dataset

    def answer(self, i, j):
        click.echo(f"\nquery: instances {i} and {j}")
        for idx in (i, j):
            row = ", ".join(
                f"{name}={value:g}" for name, value in
                zip(self.dataset.feature_names, self.dataset.instances[idx]))
            click.echo(f"  [{idx}] {row}")
        while True:
            reply = click.prompt("same cluster? [m]ust-link / [c]annot-link")
            if reply.lower().startswith("m"):
                return Kind.MUST_LINK
            if reply.lower().startswith("c"):
                return Kind.CANNOT_LINK


@main.command()
@click.option("--ensemble", "ensemble_path", required=True,
              type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--label-col", default=None)
@click.option("--oracle", "oracle_kind", default="labels", show_default=True,
              type=click.Choice(["labels", "interactive"]))
@click.option("--budget", required=True, type=int)
@click.option("--m", default=2.0, show_default=True, type=float)
@click.option("--pool", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path())
def active(ensemble_path, data, label_col, oracle_kind, budget, m, pool, seed, out):
    """Run the active query loop and report the selected clustering."""
    raw = load_dataset(data, _parse_label_col(label_col))
    dataset = normalize(raw)
    ensemble = ClusteringEnsemble.load(ensemble_path)
    if oracle_kind == "labels":
        if dataset.labels is None:
            raise click.UsageError("--oracle labels needs --label-col")
        oracle = SimulatedOracle(dataset.labels)
    else:
        oracle = _StdinOracle(raw)
    config = ActiveConfig(budget=budget, m=m, sample_size=pool, seed=seed)
    session = ActiveSession(ensemble, config)
    while session.u < budget and session.pool_size() > 0:
        pair = session.next_query()
        kind = oracle.answer(*pair)
        session.answer(pair, kind)
        if oracle_kind == "labels":
            click.echo(f"query {session.u}/{budget}: {pair} -> {kind.value}")
    selected = session.result()
    click.echo(f"selected {selected.provenance.label()}")
    if dataset.labels is not None and len(session.queried):
        ari = evaluate_selected(selected, dataset, session.queried)
        click.echo(f"ARI on constraint-free instances: {ari:.4f}")
    if out:
        Path(out).write_text(json.dumps({
            "provenance": selected.provenance.as_dict(),
            "assignment": selected.assignment.tolist(),
            "log": [[p[0], p[1], k.value] for p, k in session.log],
        }))


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--workers", default=1, show_default=True, type=int)
def bench(spec_path, out, workers):
    """Run a benchmark spec JSON and write result tables."""
    raw = json.loads(Path(spec_path).read_text())
    dataset = normalize(load_dataset(raw["data"],
                                     _parse_label_col(raw.get("label_col"))))
    grid = (HyperGrid.from_dict(raw["grid"]) if raw.get("grid")
            else HyperGrid())
    if raw.get("ensemble"):
        ensemble = ClusteringEnsemble.load(raw["ensemble"])
    else:
        click.echo(f"generating ensemble ({grid.size()} configurations)...")
        ensemble = generate_ensemble(dataset, grid, workers=workers)
    active_cfg = None
    if raw.get("mode") == "active":
        a = raw.get("active", {})
        active_cfg = ActiveConfig(
            budget=0, m=a.get("m", 2.0),
            sample_size=a.get("sample_size", 1000))
    spec = ExperimentSpec(
        dataset=raw.get("name", dataset.name),
        constraint_counts=tuple(raw["constraint_counts"]),
        repetitions=raw.get("repetitions", 25),
        mode=raw.get("mode", "batch-random"),
        active=active_cfg,
        master_seed=raw.get("master_seed", 0),
    )
    table = run_experiment(spec, dataset, ensemble, workers=workers)
    table.save(out)
    click.echo(table.to_csv_text())
    click.echo(f"wrote results to {out}")


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store", "store_dir", default="cobs-store", show_default=True,
              type=click.Path())
@click.option("--ui", "ui_dir", default=None, type=click.Path(),
              help="Directory with the built browser UI, served at /ui.")
def serve(port, host, store_dir, ui_dir):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app

    app = create_app(store_dir, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
