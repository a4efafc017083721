"""
Command Line Interface

    openset-ids prepare          dedup, downsample, encode and scale the KDD files
    openset-ids train            one-vs-rest SVMs plus Platt and/or W-SVM calibration
    openset-ids evaluate         closed/open accuracy, threshold sweep, cost-of-unknown curve
    openset-ids desk-experiment  capped run with withheld classes, both families
    openset-ids self-check       fast numerical acceptance checks

Options shared by the pipeline commands override values from ``--config``.
Failures print one line ``openset-ids:error:<code>: <message>`` to stderr
and exit with status 2.
"""

import functools
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click

from . import __version__
from .core import workflow
from .core.config import LOG_LEVEL_ENV, RunConfig, load_config
from .core.errors import ConfigError, OpenSetIdsError
from .core.selfcheck import run_self_check
from .utils import report_io

logger = logging.getLogger(__name__)

PROG = "openset-ids"
FAMILY_CHOICE = click.Choice(["platt", "wsvm", "both"])


def _fail(code: str, message: str) -> None:
    click.echo(f"{PROG}:error:{code}: {' '.join(str(message).split())}", err=True)
    sys.exit(2)


class _Group(click.Group):
    """Command group that reports usage errors with the same one-line prefix."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            return super().main(*args, **kwargs)
        except click.ClickException as e:
            _fail("usage", e.format_message())
        except click.Abort:
            _fail("usage", "aborted")


def _configure_logging(level: Optional[str]) -> None:
    name = (level or os.getenv(LOG_LEVEL_ENV) or "INFO").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ConfigError(f"unknown log level {level!r}")
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _parse_thresholds(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"thresholds must be a comma-separated list of numbers, got {text!r}") from e


_RUN_OPTIONS = (
    click.option("--config", "config_path", type=click.Path(path_type=Path), help="YAML run configuration."),
    click.option("--output-dir", type=click.Path(path_type=Path), help="Directory for all outputs."),
    click.option("--train", type=click.Path(path_type=Path), help="Raw KDD training file."),
    click.option("--test", type=click.Path(path_type=Path), help="Raw KDD test file."),
    click.option("--taxonomy", type=click.Path(path_type=Path), help="Exploit-to-metatype table."),
    click.option("--workers", type=int, help="Parallel workers for per-class fits and grid cells."),
    click.option("--seed", type=int, help="Seed for subsampling and fold assignment."),
    click.option("--downsample-factor", type=int, help="Reduction factor for the dominant classes."),
    click.option("--min-class-count", type=int, help="Drop training classes with fewer records."),
    click.option(
        "--paper-literal-scaling/--train-only-scaling",
        default=None,
        help="Fit the min-max scaler on train and test together.",
    ),
    click.option("--log-level", help=f"Logging level (default from {LOG_LEVEL_ENV}, else INFO)."),
)


def run_options(func: Callable) -> Callable:
    for option in reversed(_RUN_OPTIONS):
        func = option(func)
    return func


def _build_config(options: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> RunConfig:
    overrides = {
        "paths": {
            "train": options["train"],
            "test": options["test"],
            "taxonomy": options["taxonomy"],
            "output_dir": options["output_dir"],
        },
        "preprocess": {
            "seed": options["seed"],
            "downsample_factor": options["downsample_factor"],
            "min_class_count": options["min_class_count"],
            "joint_scaling": options["paper_literal_scaling"],
        },
        "workers": options["workers"],
    }
    for section, values in (extra or {}).items():
        overrides.setdefault(section, {}).update(values)
    return load_config(options["config_path"], overrides)


def handle_errors(func: Callable) -> Callable:
    """Map package and OS errors to the one-line error prefix."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            _configure_logging(kwargs.pop("log_level", None))
            return func(*args, **kwargs)
        except OpenSetIdsError as e:
            logger.debug("command failed", exc_info=True)
            _fail(e.code, e.message)
        except OSError as e:
            logger.debug("command failed", exc_info=True)
            where = f"{e.filename}: " if e.filename else ""
            _fail("io", f"{where}{e.strerror or e}")
        except click.ClickException:
            raise
        except Exception as e:
            logger.debug("command failed", exc_info=True)
            _fail("internal", f"{type(e).__name__}: {e}")

    return wrapper


@click.group(name=PROG, cls=_Group)
@click.version_option(__version__, prog_name=PROG)
def main() -> None:
    """Open set intrusion recognition on KDD Cup 1999 connection records."""


@main.command()
@run_options
@handle_errors
def prepare(**options) -> None:
    """Preprocess the raw KDD files into the prepared directory."""
    config = _build_config(options)
    out = workflow.cmd_prepare(config)
    click.echo(f"prepared dataset written to {out}")


@main.command()
@click.option("--family", type=FAMILY_CHOICE, default="both", show_default=True)
@click.option("--grid-search/--no-grid-search", default=None, help="Select C and gamma by cross-validation.")
@click.option("--c", "c_value", type=float, help="SVM regularization C.")
@click.option("--gamma", type=float, help="RBF kernel width gamma.")
@run_options
@handle_errors
def train(family: str, grid_search: Optional[bool], c_value: Optional[float], gamma: Optional[float], **options) -> None:
    """Train recognizer artifacts from the prepared dataset."""
    explicit = c_value is not None or gamma is not None
    if explicit and grid_search:
        raise ConfigError("--grid-search cannot be combined with --c/--gamma")
    kernel = {"c": c_value, "gamma": gamma, "grid_search": False if explicit else grid_search}
    config = _build_config(options, {"kernel": kernel})
    for fam, path in workflow.cmd_train(config, family).items():
        click.echo(f"{fam.value} model written to {path}")


@main.command()
@click.option("--family", type=FAMILY_CHOICE, default="both", show_default=True)
@click.option("--thresholds", help="Comma-separated rejection thresholds, e.g. 0.1,0.2,0.3.")
@click.option("--predictions/--no-predictions", default=None, help="Write per-record JSON-lines predictions.")
@click.option("--per-class-probabilities", is_flag=True, default=None, help="Include per-class probabilities in predictions.")
@run_options
@handle_errors
def evaluate(
    family: str,
    thresholds: Optional[str],
    predictions: Optional[bool],
    per_class_probabilities: Optional[bool],
    **options,
) -> None:
    """Evaluate trained artifacts on the prepared test split."""
    evaluation = {
        "thresholds": _parse_thresholds(thresholds),
        "write_predictions": predictions,
        "per_class_probabilities": per_class_probabilities,
    }
    config = _build_config(options, {"evaluation": evaluation})
    report = workflow.cmd_evaluate(config, family)
    click.echo(report_io.summary_text(report), nl=False)


@main.command("desk-experiment")
@click.option("--per-class-cap", type=int, help="Records kept per class in train and test.")
@click.option("--withhold", multiple=True, help="Training class to withhold (repeatable).")
@click.option("--no-withhold", is_flag=True, help="Withhold no classes.")
@click.option("--thresholds", help="Comma-separated rejection thresholds.")
@click.option("--c", "c_value", type=float, help="SVM regularization C.")
@click.option("--gamma", type=float, help="RBF kernel width gamma.")
@run_options
@handle_errors
def desk_experiment(
    per_class_cap: Optional[int],
    withhold: tuple,
    no_withhold: bool,
    thresholds: Optional[str],
    c_value: Optional[float],
    gamma: Optional[float],
    **options,
) -> None:
    """Capped comparison of both families with classes withheld from training."""
    if no_withhold and withhold:
        raise ConfigError("--withhold cannot be combined with --no-withhold")
    withheld = [] if no_withhold else (list(withhold) or None)
    desk = {"per_class_cap": per_class_cap, "withheld": withheld, "thresholds": _parse_thresholds(thresholds)}
    config = _build_config(options, {"desk": desk, "kernel": {"c": c_value, "gamma": gamma}})
    report = workflow.cmd_desk_experiment(config)
    click.echo(report_io.summary_text(report), nl=False)


@main.command("self-check")
@click.option("--report-dir", type=click.Path(path_type=Path), help="Also verify an emitted report directory.")
@click.option("--log-level", help=f"Logging level (default from {LOG_LEVEL_ENV}, else INFO).")
@handle_errors
def self_check(report_dir: Optional[Path]) -> None:
    """Run the fast numerical checks; exit 1 if any fails."""
    results = run_self_check(report_dir)
    for result in results:
        click.echo(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
    if not all(result.passed for result in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
