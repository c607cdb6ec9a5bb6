"""CSV writers (and the schedule reader) for every artifact the CLI emits.

Floats go through format_float so reruns diff byte-exactly.
"""

import csv
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ScenarioError
from ..filtering.ekf import BeliefHistory
from ..observation.tensor import InfoTensor
from ..phasing.landscape import BudgetRow, Sweep
from ..phasing.search import OptimizeResult
from ..tasking.schedule import ControlTensor
from ..utils.text import format_float

TRAJECTORY_HEADER = ["t", "x", "y", "z", "vx", "vy", "vz"]
SCHEDULE_HEADER = ["step", "observer", "target"]
TENSOR_HEADER = ["observer", "target", "step", "coefficient"]
BUDGET_HEADER = ["phase", "target", "share"]
CONTOUR_HEADER = ["phase_a", "phase_b", "f"]
SEPARABILITY_HEADER = ["fixed_phase", "phase", "f"]
ARGMAX_HEADER = ["fixed_phase", "argmax_phase"]
BELIEF_HEADER = ["step", "target", "trace_P", "trace_Pinv", "det_P"]
# wall time is kept out of every CSV; it lives in the run report
SUMMARY_HEADER = ["x*", "log(f)", "objective", "evaluations", "method", "objective_kind", "heuristic"]
STARTS_HEADER = ["start", "observer", "x0", "x_star", "objective", "iterations", "evaluations", "error"]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def format_vector(values: Optional[Sequence[float]]) -> str:
    if values is None:
        return ""
    return "[" + " ".join(format_float(v) for v in values) + "]"


def _write(path: Path, header: List[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_trajectory(path: Path, epochs: Sequence[float], states: np.ndarray) -> Path:
    return _write(path, TRAJECTORY_HEADER, ([t, *s] for t, s in zip(epochs, states)))


def sweep_header(sweep: Sweep) -> List[str]:
    header = ["phase", "f_opt"]
    if sweep.policy in ("myopic", "both"):
        header.append("f_myop")
    return header + ["log_f_opt", "skipped"]


def write_sweep(path: Path, sweep: Sweep) -> Path:
    """phase,f_opt[,f_myop],log_f_opt,skipped; skipped rows keep their phase and leave values empty."""
    with_myopic = sweep.policy in ("myopic", "both")

    def rows():
        for r in sweep.rows:
            row = [r.phase, r.f_opt]
            if with_myopic:
                row.append(r.f_myop)
            row += [r.log_f_opt, r.skipped]
            yield row

    return _write(path, sweep_header(sweep), rows())


def write_schedule(path: Path, u: ControlTensor) -> Path:
    return _write(path, SCHEDULE_HEADER, u.assignments())


def read_schedule(path: Path, shape: Tuple[int, int, int]) -> ControlTensor:
    """Inverse of write_schedule for a known (M, N, L) shape."""
    M, N, L = shape
    rows = []
    try:
        with open(path, "r", encoding="ascii", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != SCHEDULE_HEADER:
                raise ScenarioError(f"schedule {path}: header must be '{','.join(SCHEDULE_HEADER)}'")
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    step, observer, target = (int(v) for v in row)
                except ValueError:
                    raise ScenarioError(f"schedule {path} line {line_no}: expected three integers") from None
                if not (0 <= step < L and 0 <= observer < M and 0 <= target < N):
                    raise ScenarioError(f"schedule {path} line {line_no}: index out of range for shape {shape}")
                rows.append((step, observer, target))
    except OSError as e:
        raise ScenarioError(f"cannot read schedule {path}: {e}") from e
    return ControlTensor.from_assignments(shape, rows)


def write_info_tensor(path: Path, tensor: InfoTensor) -> Path:
    values = tensor.values
    M, N, L = values.shape
    rows = ((i, j, k, values[i, j, k]) for i in range(M) for j in range(N) for k in range(L))
    return _write(path, TENSOR_HEADER, rows)


def write_budget(path: Path, rows: Sequence[BudgetRow]) -> Path:
    """phase,target,share; skipped phases are omitted."""
    out = ((r.phase, j, share) for r in rows if not r.skipped for j, share in enumerate(r.shares))
    return _write(path, BUDGET_HEADER, out)


def write_contour(path: Path, phases_a: Sequence[float], phases_b: Sequence[float],
                  grid: np.ndarray) -> Path:
    rows = ((a, b, grid[p, q]) for p, a in enumerate(phases_a) for q, b in enumerate(phases_b))
    return _write(path, CONTOUR_HEADER, rows)


def write_separability(path: Path, curves: Dict[float, np.ndarray], phases: Sequence[float]) -> Path:
    rows = ((key, phase, None if np.isnan(v) else v)
            for key, values in curves.items() for phase, v in zip(phases, values))
    return _write(path, SEPARABILITY_HEADER, rows)


def write_argmax(path: Path, argmax: Dict[float, float]) -> Path:
    return _write(path, ARGMAX_HEADER, argmax.items())


def write_result_summary(path: Path, result: OptimizeResult) -> Path:
    row = [format_vector(result.x_star), result.log_objective, result.objective,
           result.evaluations, result.method, result.kind.value, result.heuristic]
    return _write(path, SUMMARY_HEADER, [row])


def write_starts(path: Path, result: OptimizeResult) -> Path:
    rows = ([rec.get("start"), rec.get("observer"), format_vector(rec.get("x0")),
             format_vector(rec.get("x_star")), rec.get("objective"), rec.get("iterations"),
             rec.get("evaluations"), rec.get("error")] for rec in result.starts)
    return _write(path, STARTS_HEADER, rows)


def write_belief_history(path: Path, history: BeliefHistory) -> Path:
    return _write(path, BELIEF_HEADER, history.rows())
