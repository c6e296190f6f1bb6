"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 data error, 4 model error.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from .errors import ClaimcheckError, ConfigError, DataError, ModelError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MODEL = 4


def _exit_code(exc: ClaimcheckError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, ModelError):
        return EXIT_MODEL
    if isinstance(exc, DataError):
        return EXIT_DATA
    return 1


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ClaimcheckError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose: bool):
    """Verify body-double identity claims from labeled face-image sets."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path),
              help="run configuration JSON")
@click.option("--descriptor", "descriptor_override", multiple=True,
              help="override the config's descriptor selection "
                   "(preset name or spec JSON path; repeatable)")
@click.option("--workers", type=int, default=None,
              help="override the config's worker count")
@click.option("--assume-aligned", is_flag=True, default=None,
              help="treat images without landmarks as pre-cropped faces")
@handle_errors
def analyze(config_path: Path, descriptor_override, workers,
            assume_aligned):
    """Run the full pipeline: ingest, quality, embeddings, score
    distributions, verdict, and figures for each selected descriptor."""
    from .pipeline import analyze_case, load_run_config

    config = load_run_config(config_path)
    if descriptor_override:
        config.descriptors = list(descriptor_override)
        config.__post_init__()
    if workers is not None:
        config.workers = max(1, workers)
    if assume_aligned:
        config.assume_aligned = True
    index = analyze_case(config)
    for name, info in index["descriptors"].items():
        click.echo(f"{name}: {info['verdict']} ({info['report']})")


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(path_type=Path), help="case manifest JSON")
@click.option("--out", "out_csv", required=True,
              type=click.Path(path_type=Path), help="output CSV path")
@click.option("--sunglasses-classifier", type=click.Path(path_type=Path),
              default=None, help="sunglasses classifier spec JSON")
@click.option("--gender-classifier", type=click.Path(path_type=Path),
              default=None, help="gender classifier spec JSON")
@click.option("--assume-aligned", is_flag=True)
@click.option("--workers", type=int, default=1)
@handle_errors
def quality(manifest_path: Path, out_csv: Path, sunglasses_classifier,
            gender_classifier, assume_aligned: bool, workers: int):
    """Score all eight quality metrics per image and write a CSV."""
    from .pipeline import quality_csv

    classifier_paths = {}
    if sunglasses_classifier:
        classifier_paths["sunglasses"] = sunglasses_classifier
    if gender_classifier:
        classifier_paths["gender"] = gender_classifier
    n = quality_csv(manifest_path, out_csv,
                    classifier_paths=classifier_paths,
                    assume_aligned=assume_aligned, workers=workers)
    click.echo(f"wrote quality scores for {n} images to {out_csv}")


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(path_type=Path),
              help="reference-population manifest JSON")
@click.option("--out", "out_json", required=True,
              type=click.Path(path_type=Path),
              help="calibration cache JSON path")
@click.option("--descriptor", default="baseline",
              help="preset name or descriptor spec JSON path")
@click.option("--assume-aligned", is_flag=True)
@click.option("--workers", type=int, default=1)
@handle_errors
def calibrate(manifest_path: Path, out_json: Path, descriptor: str,
              assume_aligned: bool, workers: int):
    """Compute reference genuine/impostor distributions and cache them
    for reuse across cases."""
    from .pipeline import calibrate as run_calibrate

    info = run_calibrate(manifest_path, out_json, descriptor,
                         assume_aligned=assume_aligned, workers=workers)
    click.echo(json.dumps(info))


if __name__ == "__main__":
    main()
