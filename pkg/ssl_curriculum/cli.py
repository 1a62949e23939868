"""
Command Line Interface for ssl-curriculum.

This module exposes the experiment commands: permutation-set generation,
pretext pretraining (fixed jitter or curriculum), downstream transfer
evaluation, run comparison and the nearest-neighbour probe.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

import json
import typer
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional
from dotenv import load_dotenv

from ssl_curriculum import commands
from ssl_curriculum.config import RESOLVED_CONFIG_NAME, ExperimentConfig, parse_seeds
from ssl_curriculum.utils import configure_logging


USAGE_ERRORS = ("usage_error", "validation_error")


class Mode(str, Enum):
    """Jitter regimes for pretraining."""
    fixed = "fixed"
    curriculum = "curriculum"


class Difficulty(str, Enum):
    """Difficulty functions for ordering curriculum levels."""
    retention = "retention"
    empirical = "empirical"


class Metric(str, Enum):
    """Distance metrics for neighbour retrieval."""
    euclidean = "euclidean"
    cosine = "cosine"


app = typer.Typer(
    add_completion=True,
    help="ssl-curriculum - curriculum-ordered self-supervised pretraining experiments"
)


def _emit(result: Dict[str, Any]) -> None:
    """Print a command envelope and exit with the matching code."""
    if result.get("success"):
        typer.echo(json.dumps(result["data"], indent=2, default=str))
        return

    error = result.get("error", {})
    typer.echo(f"Error: {error.get('message')}", err=True)
    raise typer.Exit(2 if error.get("type") in USAGE_ERRORS else 1)


def _resolve_config(config_path: Optional[Path], overrides: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.resolve(config_path, overrides)
    except (OSError, ValueError, TypeError) as e:
        typer.echo(f"Configuration Error: {e}", err=True)
        raise typer.Exit(2)


ConfigOption = typer.Option(
    None, "--config", "-c", help="Flat YAML config file (can also be set via SSLC_CONFIG env var)", envvar="SSLC_CONFIG"
)
OutputDirOption = typer.Option(
    None, "--output-dir", "-o", help="Directory for run outputs (can also be set via SSLC_OUTPUT_DIR env var)",
    envvar="SSLC_OUTPUT_DIR"
)


@app.callback()
def main_callback(
    log_level: str = typer.Option(
        "INFO",
        "--log-level",
        help="Log level (DEBUG, INFO, WARNING, ERROR; can also be set via SSLC_LOG_LEVEL env var)",
        envvar="SSLC_LOG_LEVEL"
    )
) -> None:
    """Configure logging for every command."""
    try:
        configure_logging(log_level)
    except ValueError as e:
        typer.echo(f"Configuration Error: {e}", err=True)
        raise typer.Exit(2)


@app.command("gen-perms")
def gen_perms(
    n_patches: int = typer.Option(4, "--n-patches", help="Permutation length (4 for 2x2, 9 for 3x3)"),
    set_size: int = typer.Option(12, "--set-size", help="Number of permutations to select"),
    seed: int = typer.Option(0, "--seed", help="Generation seed"),
    out: Path = typer.Option(..., "--out", help="Destination permutation-set file"),
) -> None:
    """
    Generate a permutation set with high minimum pairwise Hamming distance.
    """
    result = commands.gen_perms(n_patches, set_size, seed, out)
    if result.get("success"):
        typer.echo(f"min pairwise distance: {result['data']['min_pairwise_distance']}")
    _emit(result)


@app.command()
def pretrain(
    config_path: Optional[Path] = ConfigOption,
    output_dir: Optional[str] = OutputDirOption,
    mode: Optional[Mode] = typer.Option(None, "--mode", help="fixed or curriculum"),
    retention: Optional[float] = typer.Option(None, "--retention", help="Fixed-mode jitter retention"),
    schedule_start: Optional[float] = typer.Option(None, "--schedule-start", help="Curriculum start retention"),
    schedule_end: Optional[float] = typer.Option(None, "--schedule-end", help="Curriculum end retention"),
    schedule_step: Optional[float] = typer.Option(None, "--schedule-step", help="Curriculum retention step"),
    epochs_per_level: Optional[int] = typer.Option(None, "--epochs-per-level", help="Epochs at each curriculum level"),
    difficulty: Optional[Difficulty] = typer.Option(None, "--difficulty", help="Level ordering: retention or empirical"),
    probe_epochs: Optional[int] = typer.Option(None, "--probe-epochs", help="Probe epochs for empirical difficulty"),
    preset: Optional[str] = typer.Option(None, "--preset", help="Transform preset: none, normalize, greyscale, jitter, all"),
    normalize: Optional[bool] = typer.Option(None, "--normalize/--no-normalize", help="Per-patch normalization"),
    greyscale_p: Optional[float] = typer.Option(None, "--greyscale-p", help="Random greyscale probability"),
    task_kind: Optional[str] = typer.Option(None, "--task", help="Pretext task: jigsaw or patch_pair"),
    grid_n: Optional[int] = typer.Option(None, "--grid-n", help="Jigsaw grid side"),
    set_size: Optional[int] = typer.Option(None, "--set-size", help="Jigsaw permutation-set size"),
    perm_file: Optional[str] = typer.Option(None, "--perm-file", help="Permutation-set file to use instead of generating one"),
    dataset: Optional[str] = typer.Option(None, "--dataset", help="synthetic, stl10 or folder"),
    dataset_path: Optional[str] = typer.Option(None, "--dataset-path", help="Dataset location for stl10/folder"),
    max_unlabeled: Optional[int] = typer.Option(None, "--max-unlabeled", help="Use only the first N unlabeled images"),
    seeds: Optional[str] = typer.Option(None, "--seeds", help="Comma-separated pretext seeds"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Fixed-mode pretext epochs"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Mini-batch size"),
    learning_rate: Optional[float] = typer.Option(None, "--learning-rate", help="Adam learning rate"),
    num_workers: Optional[int] = typer.Option(None, "--num-workers", help="Data-loading worker processes"),
    condition: Optional[str] = typer.Option(None, "--condition", help="Override the condition label"),
) -> None:
    """
    Pretrain an encoder on a pretext task with fixed jitter or a jitter curriculum.
    """
    schedule_flags = {
        "--schedule-start": schedule_start,
        "--schedule-end": schedule_end,
        "--schedule-step": schedule_step,
        "--epochs-per-level": epochs_per_level,
        "--difficulty": difficulty,
    }
    overrides = {
        "output_dir": output_dir,
        "mode": mode.value if mode else None,
        "retention": retention,
        "schedule_start": schedule_start,
        "schedule_end": schedule_end,
        "schedule_step": schedule_step,
        "epochs_per_level": epochs_per_level,
        "difficulty": difficulty.value if difficulty else None,
        "probe_epochs": probe_epochs,
        "preset": preset,
        "normalize": normalize,
        "greyscale_p": greyscale_p,
        "task_kind": task_kind,
        "grid_n": grid_n,
        "set_size": set_size,
        "perm_file": perm_file,
        "dataset": dataset,
        "dataset_path": dataset_path,
        "max_unlabeled": max_unlabeled,
        "seeds": seeds,
        "pretext_epochs": epochs,
        "batch_size": batch_size,
        "learning_rate": learning_rate,
        "num_workers": num_workers,
        "condition": condition,
    }
    config = _resolve_config(config_path, overrides)

    conflicts = []
    if config.mode == Mode.fixed.value:
        conflicts = [flag for flag, value in schedule_flags.items() if value is not None]
    elif retention is not None:
        conflicts = ["--retention"]
    if conflicts:
        typer.echo(f"Error: {', '.join(conflicts)} conflict(s) with --mode {config.mode}", err=True)
        raise typer.Exit(2)

    _emit(commands.pretrain(config))


@app.command("transfer-eval")
def transfer_eval(
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Pretrained checkpoint.bin"),
    seeds: Optional[str] = typer.Option(None, "--seeds", help="Comma-separated downstream seeds"),
    linear_probe: bool = typer.Option(False, "--linear-probe", help="Freeze the encoder; train the head only"),
    from_scratch: bool = typer.Option(False, "--from-scratch", help="No-pretraining baseline"),
    parallel: bool = typer.Option(False, "--parallel", help="Fine-tune seeds in separate processes"),
    config_path: Optional[Path] = ConfigOption,
    output_dir: Optional[str] = OutputDirOption,
    dataset: Optional[str] = typer.Option(None, "--dataset", help="synthetic, stl10 or folder"),
    dataset_path: Optional[str] = typer.Option(None, "--dataset-path", help="Dataset location for stl10/folder"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Downstream epochs"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Mini-batch size"),
    learning_rate: Optional[float] = typer.Option(None, "--learning-rate", help="Adam learning rate"),
) -> None:
    """
    Fine-tune a pretrained encoder per downstream seed and record test accuracy.

    Without --config, the checkpoint's own config.resolved is used.
    """
    if config_path is None and checkpoint is not None and (checkpoint.parent / RESOLVED_CONFIG_NAME).is_file():
        config_path = checkpoint.parent / RESOLVED_CONFIG_NAME
    overrides = {
        "output_dir": output_dir,
        "dataset": dataset,
        "dataset_path": dataset_path,
        "downstream_epochs": epochs,
        "batch_size": batch_size,
        "learning_rate": learning_rate,
    }
    config = _resolve_config(config_path, overrides)
    try:
        seed_list = parse_seeds(seeds)
    except ValueError as e:
        typer.echo(f"Configuration Error: {e}", err=True)
        raise typer.Exit(2)

    _emit(commands.transfer_eval(
        config,
        checkpoint=checkpoint,
        seeds=seed_list,
        linear_probe=linear_probe,
        from_scratch=from_scratch,
        parallel=parallel,
    ))


@app.command()
def compare(
    runs: Path = typer.Option(..., "--runs", help="Directory holding run directories"),
    out: Path = typer.Option(..., "--out", help="Directory for comparison.csv and plots/"),
) -> None:
    """
    Tabulate and plot downstream accuracy per condition across runs.
    """
    _emit(commands.compare(runs, out))


@app.command()
def neighbors(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Pretrained checkpoint.bin"),
    k: int = typer.Option(5, "--k", help="Neighbours per item"),
    metric: Metric = typer.Option(Metric.euclidean, "--metric", help="euclidean or cosine"),
    n_queries: int = typer.Option(10, "--n-queries", help="Test items whose retrieval ids are written"),
    config_path: Optional[Path] = ConfigOption,
    dataset: Optional[str] = typer.Option(None, "--dataset", help="synthetic, stl10 or folder"),
    dataset_path: Optional[str] = typer.Option(None, "--dataset-path", help="Dataset location for stl10/folder"),
) -> None:
    """
    Compare k-NN class agreement in embedding space against pixel space.

    Without --config, the checkpoint's own config.resolved is used.
    """
    if config_path is None and (checkpoint.parent / RESOLVED_CONFIG_NAME).is_file():
        config_path = checkpoint.parent / RESOLVED_CONFIG_NAME
    config = _resolve_config(config_path, {"dataset": dataset, "dataset_path": dataset_path})

    _emit(commands.neighbors(config, checkpoint, k=k, metric=metric.value, n_queries=n_queries))


def main() -> None:
    """Console entry point: load .env before options read their environment variables."""
    load_dotenv()
    app()


if __name__ == "__main__":
    main()
