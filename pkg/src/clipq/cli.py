"""Command-line interface: a thin client over `ops`.

Hyperparameters come from defaults, then an optional `key = value` config
file, then flags, in that order.  `--bits` picks the code budget directly;
the number of codebooks follows from it with K codewords each (256 unless
`--codewords` says otherwise), so pass `--codewords` together with `--bits`
when changing both.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import RunConfig, parse_config_file
from .errors import EngineError
from . import ops

_HYPER_FLAGS = [
    click.option("--bits", type=int, default=None, help="Code length in bits; codebooks = bits / log2(codewords)."),
    click.option("--codewords", "k", type=int, default=None, help="Codewords per codebook (power of two)."),
    click.option("--dim", type=int, default=None, help="Projection dimension (default: input dimension)."),
    click.option("--eta", type=int, default=None, help="Negatives clipped per query."),
    click.option("--tau", type=float, default=None, help="Similarity temperature."),
    click.option("--alpha", type=float, default=None, help="Soft-assignment sharpness."),
    click.option("--beta", type=float, default=None, help="Head weight-decay coefficient."),
    click.option("--gamma", type=float, default=None, help="Codeword-separation coefficient."),
    click.option("--batch", "batch_size", type=int, default=None, help="Items per batch."),
    click.option("--epochs", "max_epochs", type=int, default=None, help="Epoch budget."),
    click.option("--seed", type=int, default=None, help="Seed for init, shuffling and augmentation."),
]

_PATH_FLAGS = [
    click.option("--manifest", type=click.Path(path_type=Path), default=None, help="Dataset manifest."),
    click.option("--out", type=click.Path(path_type=Path), default=None, help="Artifact output directory."),
    click.option("--snapshot", type=click.Path(path_type=Path), default=None, help="Parameter snapshot path."),
    click.option("--database", type=click.Path(path_type=Path), default=None, help="Code database path."),
    click.option("--config", "config_file", type=click.Path(path_type=Path), default=None,
                 help="key = value config file applied before flags."),
]


def _with_flags(flags):
    def wrap(fn):
        for flag in reversed(flags):
            fn = flag(fn)
        return fn
    return wrap


def _resolve(config_file, **overrides) -> RunConfig:
    run = RunConfig()
    if config_file is not None:
        run = run.with_overrides(**parse_config_file(config_file))
    # settle the codebook size first so a bits override divides by the right K
    k = overrides.pop("k", None)
    if k is not None:
        run = run.with_overrides(k=k)
    run = run.with_overrides(**overrides)
    run.validate()
    return run


@click.group()
def main() -> None:
    """Train, build and query compact quantized retrieval indexes."""


@main.command()
@_with_flags(_PATH_FLAGS)
@_with_flags(_HYPER_FLAGS)
def train(config_file, **kw) -> None:
    """Fit projection head and codebooks on the manifest's train split."""
    run = _resolve(config_file, **kw)
    path, report = ops.run_train(run, progress=ops.stderr_progress)
    click.echo(f"snapshot {path}")
    click.echo(f"best epoch {report.best_epoch} of {len(report.history)}")


@main.command()
@_with_flags(_PATH_FLAGS)
@_with_flags(_HYPER_FLAGS)
def build(config_file, **kw) -> None:
    """Encode the database split into compact codes."""
    run = _resolve(config_file, **kw)
    path = ops.run_build(run)
    click.echo(f"database {path}")


@main.command()
@_with_flags(_PATH_FLAGS)
@_with_flags(_HYPER_FLAGS)
@click.option("--queries", type=click.Path(path_type=Path), default=None,
              help="Feature file to query with (default: manifest query split).")
@click.option("-k", "--top-k", type=int, default=10, help="Results per query.")
@click.option("--results", type=click.Path(path_type=Path), default=None,
              help="Write rankings to this TSV (default: stdout).")
def query(config_file, queries, top_k, results, **kw) -> None:
    """Rank database items for each query row."""
    run = _resolve(config_file, **kw)
    rows = ops.run_query(run, queries=queries, k=top_k, out=results)
    if results is None:
        click.echo("query_id\trank\titem_id\tscore")
        for q, r, i, s in rows:
            click.echo(f"{q}\t{r}\t{i}\t{s:.6f}")
    else:
        click.echo(f"results {results}")


@main.command(name="eval")
@_with_flags(_PATH_FLAGS)
@_with_flags(_HYPER_FLAGS)
@click.option("--r-at", type=int, default=None, help="Ranking depth R (default: manifest).")
@click.option("--denominator", type=click.Choice(["retrieved", "total"]), default="retrieved",
              help="AP normalization: relevant retrieved, or min(R, total relevant).")
@click.option("--eta-sweep", default=None,
              help="Comma-separated clipping values; retrains per value and prints a row each.")
def evaluate(config_file, r_at, denominator, eta_sweep, **kw) -> None:
    """Report mAP@R on the manifest's query split."""
    run = _resolve(config_file, **kw)
    if eta_sweep is not None:
        etas = [int(v) for v in eta_sweep.split(",") if v.strip() != ""]
        rows = ops.run_sweep(run, etas, r_at=r_at)
        click.echo(ops.as_table(rows, ["eta", "mean_ap", "r_at", "seconds"]))
        return
    doc = ops.run_eval(run, r_at=r_at, denominator=denominator)
    click.echo(f"mAP@{doc['r_at']} = {doc['mean_ap']:.4f}  ({doc['n_queries']} queries)")


@main.command()
@click.argument("path", type=click.Path(exists=True, path_type=Path))
def inspect(path) -> None:
    """Identify an artifact file and print its header fields."""
    click.echo(json.dumps(ops.run_inspect(path), indent=2))


@main.command()
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Dataset directory.")
@click.option("--clusters", type=int, default=10)
@click.option("--per-cluster", type=int, default=200)
@click.option("--queries-per-cluster", type=int, default=20)
@click.option("--dim", "d_in", type=int, default=64)
@click.option("--duplicates", type=float, default=0.0,
              help="Fraction of items overwritten by near-copies from other clusters.")
@click.option("--seed", type=int, default=0)
def synth(out, clusters, per_cluster, queries_per_cluster, d_in, duplicates, seed) -> None:
    """Generate a synthetic clustered dataset with a manifest."""
    from .synthetic import ClusterSpec, write_dataset

    spec = ClusterSpec(clusters=clusters, per_cluster=per_cluster,
                       queries_per_cluster=queries_per_cluster, d_in=d_in,
                       duplicate_fraction=duplicates, seed=seed)
    write_dataset(out, spec)
    click.echo(f"manifest {Path(out) / 'manifest.json'}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


def run() -> None:
    try:
        main(standalone_mode=True)
    except (EngineError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


if __name__ == "__main__":
    run()
