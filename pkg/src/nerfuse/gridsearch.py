"""(lambda, tau) grid sweep with an external train/evaluate hook.

Each grid cell builds a mapping plan, merges the datasets, writes the
merged corpus under the work directory with a content-addressed name (so
parallel cells never collide), and invokes the evaluator command as

    <evaluator argv...> --train <merged corpus path> --test <test path>

The command must print one JSON object ``{"micro_f1": float, ...}`` on
stdout and exit 0.  A failing evaluator marks that cell
``evaluator_failed`` and the sweep continues; only work-directory write
failures abort.

Selection keeps the cells whose F1 stays within the configured tolerance
of the baseline (relative by default: ``f1 >= baseline * (1 - tol)``),
then maximizes the merged-label count; the canonical winner is the one
with the lowest tau, then the lowest lambda.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ._validation import check_choice, check_unit_interval
from .corpus import Corpus, serialize_bio
from .empirical import SimilarityMatrix
from .errors import NerfuseError, ValidationError
from .merge import build_plan, merge_datasets, plan_to_json
from .pathplan import greedy_schedule

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "DEFAULT_TAU_GRID",
    "SearchConfig",
    "TrialRecord",
    "Selection",
    "run_search",
    "run_search_schedule",
    "select_best",
    "trials_to_jsonl",
    "trials_from_jsonl",
    "summary_json",
]

DEFAULT_LAMBDA_GRID = (0.3, 0.4, 0.5, 0.6, 0.7)
DEFAULT_TAU_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

TOLERANCE_MODES = ("relative", "absolute")
_EPS = 1e-12  # slack for float dust in feasibility comparisons


@dataclass(frozen=True)
class SearchConfig:
    baseline_f1: float
    evaluator: tuple[str, ...]
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    tau_grid: tuple[float, ...] = DEFAULT_TAU_GRID
    f1_tolerance: float = 0.02
    tolerance_mode: str = "relative"
    jobs: int = 1
    fallback: bool = False
    unmapped_policy: str = "retain"
    equivalence_band: float = 0.85

    def __post_init__(self):
        if not self.lambda_grid or not self.tau_grid:
            raise ValidationError("lambda and tau grids must be non-empty")
        for v in self.lambda_grid:
            check_unit_interval(v, "lambda grid value")
        for v in self.tau_grid:
            check_unit_interval(v, "tau grid value")
        if self.f1_tolerance < 0:
            raise ValidationError(f"f1_tolerance must be >= 0, got {self.f1_tolerance}")
        check_choice(self.tolerance_mode, "tolerance_mode", TOLERANCE_MODES)
        check_choice(self.unmapped_policy, "unmapped_policy", ("retain", "drop_to_O"))
        if not self.evaluator:
            raise ValidationError("evaluator command must be non-empty")
        if self.jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {self.jobs}")


@dataclass(frozen=True)
class TrialRecord:
    lam: float
    tau: float
    merged_label_count: int
    micro_f1: float | None
    row_increment_abs: int
    status: str  # "ok" | "evaluator_failed"
    detail: str = ""
    train_path: str = ""


@dataclass(frozen=True)
class Selection:
    feasible_bound: float
    winners: tuple[TrialRecord, ...]
    canonical: TrialRecord | None
    no_feasible: bool = False


def _run_evaluator(evaluator, train_path: Path, test_path: Path):
    """Returns (micro_f1, detail); micro_f1 is None on failure."""
    argv = list(evaluator) + ["--train", str(train_path), "--test", str(test_path)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, check=False)
    except OSError as exc:
        return None, f"evaluator could not be spawned: {exc}"
    if proc.returncode != 0:
        return None, f"evaluator exited {proc.returncode}: {proc.stderr.strip()[:200]}"
    try:
        payload = json.loads(proc.stdout)
        micro = float(payload["micro_f1"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        return None, f"evaluator output not parseable: {exc}"
    if not 0.0 <= micro <= 1.0:
        return None, f"evaluator micro_f1 out of range: {micro}"
    return micro, ""


def _write_cell_artifacts(work_dir: Path, lam, tau, merged: Corpus, plan_text: str) -> Path:
    text = serialize_bio(merged)
    digest = hashlib.sha256(f"{lam}:{tau}\n{text}".encode("utf-8")).hexdigest()[:12]
    stem = f"merged_l{lam:g}_t{tau:g}_{digest}"
    try:
        work_dir.mkdir(parents=True, exist_ok=True)
        train_path = work_dir / f"{stem}.bio"
        train_path.write_text(text, encoding="utf-8")
        (work_dir / f"{stem}.plan.json").write_text(plan_text, encoding="utf-8")
    except OSError as exc:
        raise NerfuseError(f"cannot write to work directory {work_dir}: {exc}") from exc
    return train_path


def _sweep(config: SearchConfig, build_cell, test_path, work_dir) -> list[TrialRecord]:
    """Run every grid cell; ``build_cell(lam, tau)`` supplies the merged corpus."""
    work_dir = Path(work_dir)
    test_path = Path(test_path)
    cells = [(lam, tau) for lam in config.lambda_grid for tau in config.tau_grid]

    def run_cell(cell):
        lam, tau = cell
        merged, label_count, increment, plan_text = build_cell(lam, tau)
        train_path = _write_cell_artifacts(work_dir, lam, tau, merged, plan_text)
        micro, detail = _run_evaluator(config.evaluator, train_path, test_path)
        return TrialRecord(
            lam=lam,
            tau=tau,
            merged_label_count=label_count,
            micro_f1=micro,
            row_increment_abs=increment,
            status="ok" if micro is not None else "evaluator_failed",
            detail=detail,
            train_path=str(train_path),
        )

    if config.jobs == 1:
        return [run_cell(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(run_cell, cells))


def run_search(
    config: SearchConfig,
    source: Corpus,
    target: Corpus,
    sem: SimilarityMatrix,
    emp: SimilarityMatrix,
    test_path,
    work_dir,
) -> list[TrialRecord]:
    """Sweep the grid for a single source->target merge with fixed matrices."""

    def build_cell(lam, tau):
        plan = build_plan(
            sem, emp, lam, tau,
            fallback=config.fallback,
            equivalence_band=config.equivalence_band,
        )
        merged, report = merge_datasets(
            source, target, plan, unmapped_policy=config.unmapped_policy
        )
        return merged, report.merged_label_count, report.row_increment_abs, plan_to_json(plan)

    return _sweep(config, build_cell, test_path, work_dir)


def run_search_schedule(
    config: SearchConfig,
    datasets,
    matrix_provider,
    test_path,
    work_dir,
    freeze_schedule: bool = False,
) -> list[TrialRecord]:
    """Sweep the grid over a full multi-dataset greedy merge.

    ``matrix_provider(source: Corpus, target: Corpus) -> (semantic, empirical)``
    must cover intermediates too.  By default the greedy schedule is
    re-derived inside every cell with that cell's plans; with
    ``freeze_schedule`` the order is fixed once from plain concatenation
    intermediates, which is cheaper when the provider retrains models.
    Merged-label counts sum across stages; the row increment is measured
    against the final step's target.
    """
    datasets = list(datasets)
    frozen_steps = None
    if freeze_schedule:
        frozen_steps = greedy_schedule(
            datasets, lambda s, t: matrix_provider(s, t)[1]
        ).steps

    def build_cell(lam, tau):
        state = {"corpus": None, "labels": 0, "last_target_len": 0, "plans": []}

        def merge_pair(source, target, name):
            sem, emp = matrix_provider(source, target)
            plan = build_plan(
                sem, emp, lam, tau,
                fallback=config.fallback,
                equivalence_band=config.equivalence_band,
            )
            merged, report = merge_datasets(
                source, target, plan, new_name=name, unmapped_policy=config.unmapped_policy
            )
            state["corpus"] = merged
            state["labels"] += report.merged_label_count
            state["last_target_len"] = len(target)
            state["plans"].append(plan_to_json(plan))
            return merged

        if frozen_steps is None:
            greedy_schedule(datasets, lambda s, t: matrix_provider(s, t)[1], merger=merge_pair)
        else:
            lookup = {d.name: d for d in datasets}
            for step in frozen_steps:
                merged = merge_pair(lookup[step.source], lookup[step.target], step.intermediate)
                lookup[step.intermediate] = merged
        merged = state["corpus"]
        increment = len(merged) - state["last_target_len"]
        return merged, state["labels"], increment, "\n".join(state["plans"])

    return _sweep(config, build_cell, test_path, work_dir)


def select_best(
    records,
    baseline_f1: float,
    tolerance: float,
    mode: str = "relative",
) -> Selection:
    """Pick the feasible cells with the most merged labels.

    Feasible means status ok and ``micro_f1 >= baseline * (1 - tolerance)``
    (or ``baseline - tolerance`` in absolute mode).  The canonical winner
    has the lowest tau, then the lowest lambda.  An empty feasible set is
    reported explicitly, not raised.
    """
    check_choice(mode, "tolerance mode", TOLERANCE_MODES)
    if tolerance < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    ok = [r for r in records if r.status == "ok" and r.micro_f1 is not None]
    if not ok:
        raise ValidationError("select_best needs at least one ok record")
    if mode == "relative":
        bound = baseline_f1 * (1.0 - tolerance)
    else:
        bound = baseline_f1 - tolerance
    feasible = [r for r in ok if r.micro_f1 >= bound - _EPS]
    if not feasible:
        return Selection(feasible_bound=bound, winners=(), canonical=None, no_feasible=True)
    best_count = max(r.merged_label_count for r in feasible)
    winners = tuple(
        sorted(
            (r for r in feasible if r.merged_label_count == best_count),
            key=lambda r: (r.tau, r.lam),
        )
    )
    return Selection(feasible_bound=bound, winners=winners, canonical=winners[0])


def trials_to_jsonl(records) -> str:
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "lambda": r.lam,
                    "tau": r.tau,
                    "merged_label_count": r.merged_label_count,
                    "micro_f1": r.micro_f1,
                    "row_increment_abs": r.row_increment_abs,
                    "status": r.status,
                    "detail": r.detail,
                    "train_path": r.train_path,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n"


def trials_from_jsonl(text: str) -> list[TrialRecord]:
    records = []
    for line in text.split("\n"):
        if not line.strip():
            continue
        payload = json.loads(line)
        records.append(
            TrialRecord(
                lam=payload["lambda"],
                tau=payload["tau"],
                merged_label_count=payload["merged_label_count"],
                micro_f1=payload["micro_f1"],
                row_increment_abs=payload["row_increment_abs"],
                status=payload["status"],
                detail=payload.get("detail", ""),
                train_path=payload.get("train_path", ""),
            )
        )
    return records


def summary_json(records, selection: Selection) -> str:
    def as_dict(r):
        return {
            "lambda": r.lam,
            "tau": r.tau,
            "merged_label_count": r.merged_label_count,
            "micro_f1": r.micro_f1,
        }

    payload = {
        "trials": len(list(records)),
        "feasible_bound": selection.feasible_bound,
        "no_feasible": selection.no_feasible,
        "winners": [as_dict(r) for r in selection.winners],
        "canonical": as_dict(selection.canonical) if selection.canonical else None,
    }
    return json.dumps(payload, ensure_ascii=False, indent=2)
