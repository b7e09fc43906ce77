"""Command line interface: `bench run`, `bench probe`, `bench verify-lemmas`."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bench, diagnostics, problems
from .errors import BlockCDError
from .problems import Family


@click.group()
def main():
    """Benchmark runner and diagnostics for the block coordinate solvers."""


@main.command()
@click.argument("specfile", type=click.Path(exists=True))
@click.option("--jobs", type=int, default=1, show_default=True, help="parallel runs")
@click.option("--out", type=str, default=None, envvar="BENCH_OUT", help="output directory")
@click.option("--seed", type=int, default=None, help="override the experiment seed")
@click.option(
    "--reproducible/--wall-clock",
    default=False,
    help="record a zero clock instead of wall time so reruns are byte-identical",
)
def run(specfile, jobs, out, seed, reproducible):
    """Run the experiment described in SPECFILE (TOML)."""
    try:
        spec = bench.load_spec(specfile)
        if out is not None:
            spec.out_dir = out
        if seed is not None:
            spec.seed = seed
        status = bench.run_experiment(spec, jobs=jobs, reproducible=reproducible)
    except (BlockCDError, ValueError, OSError, KeyError) as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), err=True)
        sys.exit(1)
    sys.exit(status)


def _load_run_context(final_csv: Path):
    name = final_csv.name
    if not (name.startswith("final_") and name.endswith(".csv")):
        raise ValueError("expected a final_<method>_<grid>_<trial>.csv file")
    tag = name[len("final_") : -len(".csv")]
    meta = json.loads((final_csv.parent / f"meta_{tag}.json").read_text())
    A = bench.load_matrix_csv(final_csv.parent / meta["a_csv"])
    y = bench.load_matrix_csv(final_csv.parent / meta["y_csv"]).ravel()
    fam = Family(meta["family"])
    if fam is Family.SIT:
        p = problems.sit_problem(A, y, meta["lambda"], meta["s"], meta["theta"])
    elif fam is Family.NNSPCA:
        p = problems.nnspca_problem(A, meta["lambda"], meta["s"], meta["gamma"], meta["theta"])
    elif fam is Family.DCPB1:
        p = problems.dcpb1_problem(A, y, meta["gamma"] / 2.0, meta["c"], meta["theta"])
    else:
        p = problems.dcpb2_problem(A, y, meta["lambda"], meta["c"], meta["theta"])
    x = bench.load_matrix_csv(final_csv).ravel()
    return p, problems.feasible_set_for(p), x


@main.command()
@click.argument("final_csv", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--mode",
    default="exhaustive",
    show_default=True,
    help="'exhaustive' or 'sampled:COUNT'",
)
@click.option("--k", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def probe(final_csv, mode, k, seed):
    """Probe a run's final point for pairwise-stationary status."""
    try:
        p, fs, x = _load_run_context(final_csv)
        if mode.startswith("sampled:"):
            count = int(mode.split(":", 1)[1])
            rep = diagnostics.probe_cws(p, fs, x, k=k, mode="sampled", count=count, seed=seed)
        elif mode == "exhaustive":
            rep = diagnostics.probe_cws(p, fs, x, k=k, mode="exhaustive")
        else:
            raise ValueError(f"unknown mode {mode!r}")
    except (BlockCDError, ValueError, OSError, KeyError) as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), err=True)
        sys.exit(1)
    click.echo(
        json.dumps(
            {
                "is_cws": rep.is_cws,
                "worst_block": [int(v) for v in rep.worst_block],
                "worst_improvement": rep.worst_improvement,
                "blocks_probed": rep.blocks_probed,
            }
        )
    )
    sys.exit(0)


@main.command("verify-lemmas")
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def verify_lemmas(n, k, trials, seed):
    """Check the working-set expectation identities by enumeration."""
    try:
        rep = diagnostics.verify_expectation_identities(n, k, trials, seed)
    except (BlockCDError, ValueError) as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), err=True)
        sys.exit(1)
    click.echo(json.dumps(rep))
    sys.exit(0 if rep["pass"] else 1)


if __name__ == "__main__":
    main()
