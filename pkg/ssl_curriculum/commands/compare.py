"""
Run comparison command.

Collects every run record under a directory and writes the comparison
table and plots.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from ssl_curriculum.commands.common import METRICS_NAME, error_response_for
from ssl_curriculum.config import RESOLVED_CONFIG_NAME, ExperimentConfig
from ssl_curriculum.evaluation import compare_runs
from ssl_curriculum.training import RunRecord
from ssl_curriculum.utils import UsageError, create_success_response, logged_command

logger = logging.getLogger(__name__)


def load_records(runs_dir: Union[str, Path]) -> List[RunRecord]:
    """
    Every metrics file under runs_dir, labelled with its run's condition.

    The condition comes from the run's config.resolved; the directory name is
    used when that file is missing.
    """
    records = []
    for metrics_path in sorted(Path(runs_dir).rglob(METRICS_NAME)):
        run_dir = metrics_path.parent
        condition = run_dir.name
        resolved = run_dir / RESOLVED_CONFIG_NAME
        if resolved.exists():
            config = ExperimentConfig.resolve(resolved)
            condition = config.condition_label()
        records.append(RunRecord.load(metrics_path, condition=condition))
    return records


@logged_command
def compare(runs_dir: Union[str, Path], out: Union[str, Path]) -> Dict[str, Any]:
    """
    Compare all runs under runs_dir.

    Returns:
        Dict containing:
        - success (bool): Whether the comparison was written
        - data (dict): per-condition table, csv path and plot paths
        - error (dict, optional): Error details (format_error on mismatched schemas)
    """
    try:
        runs_dir = Path(runs_dir)
        if not runs_dir.is_dir():
            raise UsageError(f"Runs directory {runs_dir} does not exist")
        records = load_records(runs_dir)
        if not records:
            raise ValueError(f"No {METRICS_NAME} files found under {runs_dir}")

        result = compare_runs(records, out)
        return create_success_response(data=result, metadata={"runs": len(records)})

    except Exception as e:
        return error_response_for(e, "compare")
