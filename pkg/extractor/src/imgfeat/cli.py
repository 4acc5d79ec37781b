"""Command-line entry point: extract one split of one dataset per run."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .backbones import BACKBONES
from .errors import ExtractorError
from .jobs import SPLITS, ExtractionJob, run_extraction


@click.command()
@click.argument("dataset", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--split", type=click.Choice(SPLITS), required=True,
              help="Protocol slot the file will fill; train gets augmented view pairs.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Feature file to write.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Augmentation seed (train split only).")
@click.option("--backbone", type=click.Choice(BACKBONES), default="pixel-proj", show_default=True,
              help="Frozen encoder.")
@click.option("--dim", type=int, default=None, help="Output width (pixel-proj only).")
@click.option("--pairs", type=int, default=1, show_default=True,
              help="View pairs per training item.")
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Backbone checkpoint; skips the torch hub cache probe.")
def main(dataset, split, out, seed, backbone, dim, pairs, weights):
    job = ExtractionJob(dataset=dataset, split=split, out=out, seed=seed,
                        backbone=backbone, dim=dim, pairs=pairs, weights=weights)
    summary = run_extraction(job)
    click.echo(f"wrote {summary.items} items x {summary.views} views x {summary.d_in} dims "
               f"(vocab {summary.vocab}, {summary.file_bytes} bytes) to {summary.out}")


def run() -> None:
    try:
        main(standalone_mode=True)
    except (ExtractorError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


if __name__ == "__main__":
    run()
