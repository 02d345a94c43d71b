"""Detector and episode metrics: accuracy, abstention curves, sweeps.

Offline, a labeled dataset of post-execution observations is replayed
through the detector per strategy and uncertainty method, yielding a report
of detection accuracy plus two abstention views: accuracy as a function of
an uncertainty ceiling (calibration curve) and accuracy after abstaining
from the most-uncertain fraction (selective curve), each summarized by its
area under the curve. Online, episode traces aggregate into success and
human-involvement rates.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .backend import Backend, BackendError
from .core import (
    EpisodeTrace,
    FinalStatus,
    Observation,
    Outcome,
    Subtask,
    TaskSpec,
    VerdictSource,
)
from .detector import DetectionQuery, DetectorConfig, ModelJudgment, detect_once
from .planner import (
    SimEnv,
    TaskBundle,
    SimulatedDetectorBackend,
    make_detector,
    oracle_escalation_channel,
    run_episode_with,
    true_episode_success,
)
from .prompting import StrategyKind
from .uncertainty import GenerationFailure, Method, UncertaintyEstimate


class WrongMethodError(ValueError):
    """The metric is only defined for a different uncertainty method."""


class EmptyAfterExclusionError(ValueError):
    """Nothing left to score once unusable entries are excluded."""


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledSample:
    """One ground-truth-labeled detection case from a dataset file.

    plan carries the full subtask list (with subtask_index locating the
    executed one) so next-step prompts are renderable; single-subtask
    samples leave it empty.
    """

    id: str
    task_id: str
    instruction: str
    description: str
    expected_state: str
    observation: Observation
    label: Outcome
    plan: tuple[str, ...] = ()
    subtask_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "plan", tuple(self.plan))
        if not self.id:
            raise ValueError("sample id empty")
        if self.plan:
            if not 0 <= self.subtask_index < len(self.plan):
                raise ValueError(f"subtask_index {self.subtask_index} outside plan")
            if self.plan[self.subtask_index] != self.description:
                raise ValueError("description does not match the plan entry it indexes")
        elif self.subtask_index != 0:
            raise ValueError("subtask_index must be 0 without a plan")

    def as_query(self) -> DetectionQuery:
        if self.plan:
            subtasks = tuple(
                Subtask(
                    index=i,
                    description=desc,
                    expected_state=self.expected_state
                    if i == self.subtask_index
                    else f"subtask {i} completed",
                )
                for i, desc in enumerate(self.plan)
            )
        else:
            subtasks = (
                Subtask(index=0, description=self.description, expected_state=self.expected_state),
            )
        task = TaskSpec(id=self.task_id, instruction=self.instruction, subtasks=subtasks)
        return DetectionQuery(
            task=task, subtask=subtasks[self.subtask_index], observation=self.observation
        )

    def to_dict(self) -> dict:
        data: dict = {
            "id": self.id,
            "task_id": self.task_id,
            "instruction": self.instruction,
            "description": self.description,
            "expected_state": self.expected_state,
            "observation": self.observation.to_dict(),
            "label": self.label.value,
        }
        if self.plan:
            data["plan"] = list(self.plan)
            data["subtask_index"] = self.subtask_index
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabeledSample":
        return cls(
            id=data["id"],
            task_id=data["task_id"],
            instruction=data["instruction"],
            description=data["description"],
            expected_state=data["expected_state"],
            observation=Observation.from_dict(data["observation"]),
            label=Outcome(data["label"]),
            plan=tuple(data.get("plan", ())),
            subtask_index=data.get("subtask_index", 0),
        )


@dataclass(frozen=True)
class ScoredSample:
    """A sample joined with what the detector said about it."""

    sample_id: str
    label: Outcome
    predicted_outcome: Optional[Outcome]
    estimate: Union[UncertaintyEstimate, GenerationFailure]
    correct: bool
    source: VerdictSource = VerdictSource.MODEL

    def __post_init__(self) -> None:
        if self.predicted_outcome is None:
            if self.correct:
                raise ValueError("correct requires a prediction")
            if not isinstance(self.estimate, GenerationFailure):
                raise ValueError("missing prediction requires a GenerationFailure estimate")
        elif self.correct != (self.predicted_outcome is self.label):
            raise ValueError("correct flag contradicts prediction vs label")

    @classmethod
    def from_judgment(
        cls, sample_id: str, label: Outcome, judgment: ModelJudgment
    ) -> "ScoredSample":
        if judgment.fault is not None:
            return cls(
                sample_id=sample_id,
                label=label,
                predicted_outcome=None,
                estimate=GenerationFailure(reason=judgment.fault),
                correct=False,
            )
        assert judgment.outcome is not None and judgment.estimate is not None
        return cls(
            sample_id=sample_id,
            label=label,
            predicted_outcome=judgment.outcome,
            estimate=judgment.estimate,
            correct=judgment.outcome is label,
        )


@dataclass(frozen=True)
class CurvePoint:
    x: float
    accuracy: float
    retained: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.x <= 1.0:
            raise ValueError(f"x out of range: {self.x}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy out of range: {self.accuracy}")
        if self.retained < 0:
            raise ValueError("retained must be >= 0")


def _numeric_pairs(scored: Sequence[ScoredSample]) -> list[tuple[str, float, bool]]:
    pairs = []
    for s in scored:
        if not isinstance(s.estimate, UncertaintyEstimate):
            raise ValueError(f"sample {s.sample_id!r} has no numeric estimate")
        pairs.append((s.sample_id, s.estimate.value, s.correct))
    return pairs


def _mean(flags: Sequence[bool]) -> float:
    return sum(1 for f in flags if f) / len(flags)


def detection_accuracy(scored: Sequence[ScoredSample]) -> float:
    """Correct fraction over model predictions.

    Human-assisted entries and entries without a usable prediction are
    excluded from both numerator and denominator.
    """
    pool = [
        s
        for s in scored
        if s.source is VerdictSource.MODEL and isinstance(s.estimate, UncertaintyEstimate)
    ]
    if not pool:
        raise EmptyAfterExclusionError("no model-predicted samples to score")
    return _mean([s.correct for s in pool])


def calibration_curve(scored: Sequence[ScoredSample], grid: Optional[int] = 101) -> list[CurvePoint]:
    """Accuracy as a function of a confidence floor.

    At threshold t only samples with uncertainty <= 1 - t count; an empty
    retained set carries the previous accuracy forward. grid=None evaluates
    at the exact breakpoints induced by the data instead of a uniform grid.
    """
    pairs = _numeric_pairs(scored)
    if not pairs:
        raise ValueError("no scored samples")
    if grid is None:
        # Each sample's own uncertainty is the retain limit at its
        # breakpoint, so boundary membership never hinges on 1 - (1 - u)
        # round-tripping exactly.
        limits: dict[float, float] = {0.0: 1.0, 1.0: 0.0}
        for _, u, _ in pairs:
            x = 1.0 - u
            limits[x] = max(limits.get(x, u), u)
        steps = sorted(limits.items())
    else:
        if grid < 2:
            raise ValueError(f"grid must be >= 2, got {grid}")
        steps = [(i / (grid - 1), (grid - 1 - i) / (grid - 1)) for i in range(grid)]
    points: list[CurvePoint] = []
    last_accuracy = 0.0
    for t, limit in steps:
        kept = [ok for _, u, ok in pairs if u <= limit]
        if kept:
            last_accuracy = _mean(kept)
        points.append(CurvePoint(x=t, accuracy=last_accuracy, retained=len(kept)))
    return points


def selective_curve(scored: Sequence[ScoredSample], grid: Optional[int] = 101) -> list[CurvePoint]:
    """Accuracy after abstaining from the most-uncertain fraction.

    Samples are ordered by descending uncertainty (ties broken by sample id)
    and the top floor(alpha * n) are dropped at abstention rate alpha. An
    empty remainder carries the previous accuracy forward. grid=None
    evaluates at every feasible abstention count instead.
    """
    pairs = _numeric_pairs(scored)
    if not pairs:
        raise ValueError("no scored samples")
    ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
    n = len(ordered)
    if grid is None:
        steps = [(k / n, k) for k in range(n + 1)]
    else:
        if grid < 2:
            raise ValueError(f"grid must be >= 2, got {grid}")
        # floor(alpha * n) computed in integers so float rounding cannot
        # shift the abstention count off by one.
        steps = [(i / (grid - 1), (i * n) // (grid - 1)) for i in range(grid)]
    points: list[CurvePoint] = []
    last_accuracy = 0.0
    for alpha, abstain in steps:
        kept = ordered[abstain:]
        if kept:
            last_accuracy = _mean([ok for _, _, ok in kept])
        points.append(CurvePoint(x=alpha, accuracy=last_accuracy, retained=len(kept)))
    return points


def area_under(points: Sequence[CurvePoint]) -> float:
    """Trapezoidal integral over the points' x span."""
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    total = 0.0
    for a, b in zip(points, points[1:]):
        if b.x < a.x:
            raise ValueError("points must be sorted by x")
        total += (b.x - a.x) * (a.accuracy + b.accuracy) / 2.0
    return total


def calibration_auc(scored: Sequence[ScoredSample], grid: Optional[int] = 101) -> float:
    return area_under(calibration_curve(scored, grid))


def selective_auc(scored: Sequence[ScoredSample], grid: Optional[int] = 101) -> float:
    return area_under(selective_curve(scored, grid))


def generation_rate(scored: Sequence[ScoredSample]) -> float:
    """Fraction of self-stated-confidence attempts that parsed."""
    if not scored:
        raise ValueError("no scored samples")
    for s in scored:
        if isinstance(s.estimate, UncertaintyEstimate) and s.estimate.method is not Method.SELF_EXPLAINED:
            raise WrongMethodError(
                f"generation rate is defined for self_explained, got {s.estimate.method.value}"
            )
    parsed = sum(1 for s in scored if isinstance(s.estimate, UncertaintyEstimate))
    return parsed / len(scored)


# ---------------------------------------------------------------------------
# Episode aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeMetrics:
    episodes: int
    total_steps: int
    success_rate: float
    human_involve_rate: float
    detection_accuracy: Optional[float]
    true_success_rate: Optional[float]

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "total_steps": self.total_steps,
            "success_rate": self.success_rate,
            "human_involve_rate": self.human_involve_rate,
            "detection_accuracy": self.detection_accuracy,
            "true_success_rate": self.true_success_rate,
        }


def episode_metrics(
    traces: Sequence[EpisodeTrace], task: Optional[TaskSpec] = None
) -> EpisodeMetrics:
    """Aggregate rates over finished episodes.

    detection_accuracy scores model verdicts against simulator ground truth
    and is None when no step carries both. true_success_rate additionally
    needs the task (to find each trace's final pass) and full ground truth;
    it is None otherwise.
    """
    if not traces:
        raise ValueError("no traces")
    total_steps = sum(len(t.steps) for t in traces)
    human = sum(t.human_queries for t in traces)
    judged = [
        (s.verdict.outcome, s.ground_truth)
        for t in traces
        for s in t.steps
        if s.verdict.source is VerdictSource.MODEL and s.ground_truth is not None
    ]
    accuracy = _mean([v is g for v, g in judged]) if judged else None
    true_rate: Optional[float] = None
    if task is not None:
        try:
            true_rate = _mean([true_episode_success(t, task) for t in traces])
        except ValueError:
            true_rate = None
    return EpisodeMetrics(
        episodes=len(traces),
        total_steps=total_steps,
        success_rate=_mean([t.final_status is FinalStatus.SUCCESS for t in traces]),
        human_involve_rate=(human / total_steps) if total_steps else 0.0,
        detection_accuracy=accuracy,
        true_success_rate=true_rate,
    )


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------


def load_dataset(path: str | Path, manifest_path: Optional[str | Path] = None) -> list[LabeledSample]:
    """Read a JSON-lines dataset, optionally verifying its manifest counts."""
    samples: list[LabeledSample] = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            sample = LabeledSample.from_dict(json.loads(line))
        except (ValueError, KeyError) as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        if sample.id in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate sample id {sample.id!r}")
        seen.add(sample.id)
        samples.append(sample)
    if manifest_path is not None:
        manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        mismatches = verify_manifest(samples, manifest)
        if mismatches:
            raise DatasetError("; ".join(mismatches))
    return samples


def _count(samples: Sequence[LabeledSample], label: Optional[Outcome] = None) -> int:
    return sum(1 for s in samples if label is None or s.label is label)


def verify_manifest(samples: Sequence[LabeledSample], manifest: Mapping) -> list[str]:
    """Compare per-task and total counts against the manifest; list mismatches."""
    mismatches: list[str] = []
    by_task: dict[str, list[LabeledSample]] = {}
    for s in samples:
        by_task.setdefault(s.task_id, []).append(s)
    declared_tasks = manifest.get("tasks", {})
    for task_id, declared in sorted(declared_tasks.items()):
        actual = by_task.get(task_id, [])
        for key, want in (
            ("total", declared.get("total")),
            ("success", declared.get("success")),
            ("failure", declared.get("failure")),
        ):
            if want is None:
                continue
            got = _count(actual, None if key == "total" else Outcome(key))
            if got != want:
                mismatches.append(f"task {task_id!r}: {key} {got} != declared {want}")
    for task_id in sorted(set(by_task) - set(declared_tasks)):
        mismatches.append(f"task {task_id!r} absent from manifest")
    for key, want in (
        ("total", manifest.get("total")),
        ("success", manifest.get("success")),
        ("failure", manifest.get("failure")),
    ):
        if want is None:
            continue
        got = _count(samples, None if key == "total" else Outcome(key))
        if got != want:
            mismatches.append(f"dataset: {key} {got} != declared {want}")
    return mismatches


def dataset_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Offline evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalCell:
    """All metrics for one strategy x method combination."""

    strategy: StrategyKind
    method: Method
    samples: int
    generated: int
    detection_accuracy: Optional[float]
    calibration_auc: Optional[float]
    selective_auc: Optional[float]
    generation_rate: Optional[float]
    calibration_points: tuple[CurvePoint, ...] = ()
    selective_points: tuple[CurvePoint, ...] = ()
    excluded: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        for name in ("detection_accuracy", "calibration_auc", "selective_auc", "generation_rate"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of range: {value}")

    @property
    def key(self) -> str:
        return f"{self.strategy.value}/{self.method.value}"

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "generated": self.generated,
            "detection_accuracy": self.detection_accuracy,
            "calibration_auc": self.calibration_auc,
            "selective_auc": self.selective_auc,
            "generation_rate": self.generation_rate,
            "excluded": [{"sample_id": sid, "error": err} for sid, err in self.excluded],
        }


@dataclass(frozen=True)
class MetricsReport:
    """The full evaluation result: one cell per strategy x method pair."""

    cells: tuple[EvalCell, ...]
    dataset_samples: int
    dataset_success: int
    dataset_failure: int
    grid: Optional[int] = 101
    success_rate: Optional[float] = None
    human_involve_rate: Optional[float] = None

    def cell(self, strategy: StrategyKind, method: Method) -> EvalCell:
        for c in self.cells:
            if c.strategy is strategy and c.method is method:
                return c
        raise KeyError(f"no cell {strategy.value}/{method.value}")

    def to_dict(self) -> dict:
        data: dict = {
            "dataset": {
                "samples": self.dataset_samples,
                "success": self.dataset_success,
                "failure": self.dataset_failure,
            },
            "grid": self.grid,
            "cells": {c.key: c.to_dict() for c in self.cells},
        }
        if self.success_rate is not None:
            data["success_rate"] = self.success_rate
        if self.human_involve_rate is not None:
            data["human_involve_rate"] = self.human_involve_rate
        return data


def serialize_report(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def _score_one(
    sample: LabeledSample, strategy: StrategyKind, method: Method, backend: Backend
) -> Union[ScoredSample, tuple[str, str]]:
    cfg = DetectorConfig(strategy=strategy, method=method, threshold=1.0)
    try:
        judgment = detect_once(sample.as_query(), cfg, backend)
    except BackendError as exc:
        return (sample.id, f"{type(exc).__name__}: {exc}")
    return ScoredSample.from_judgment(sample.id, sample.label, judgment)


def score_samples(
    samples: Sequence[LabeledSample],
    strategy: StrategyKind,
    method: Method,
    backend: Backend,
    max_workers: int = 1,
) -> tuple[list[ScoredSample], list[tuple[str, str]]]:
    """Run the detector over every sample; returns (scored, excluded).

    Backend errors exclude the affected sample instead of aborting the run.
    Results keep the input order regardless of worker count.
    """
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda s: _score_one(s, strategy, method, backend), samples))
    else:
        results = [_score_one(s, strategy, method, backend) for s in samples]
    scored = [r for r in results if isinstance(r, ScoredSample)]
    excluded = [r for r in results if isinstance(r, tuple)]
    return scored, excluded


def run_offline_eval(
    samples: Sequence[LabeledSample],
    strategies: Sequence[StrategyKind],
    methods: Sequence[Method],
    backend: Backend,
    grid: Optional[int] = 101,
    max_workers: int = 1,
) -> MetricsReport:
    """Full strategy x method sweep over a labeled dataset."""
    cells: list[EvalCell] = []
    for strategy in strategies:
        for method in methods:
            scored, excluded = score_samples(samples, strategy, method, backend, max_workers)
            generated = [s for s in scored if isinstance(s.estimate, UncertaintyEstimate)]
            try:
                accuracy: Optional[float] = detection_accuracy(scored)
            except EmptyAfterExclusionError:
                accuracy = None
            cal_points: tuple[CurvePoint, ...] = ()
            cal_auc: Optional[float] = None
            sel_points: tuple[CurvePoint, ...] = ()
            sel_auc: Optional[float] = None
            gen_rate: Optional[float] = None
            if method is Method.SELF_EXPLAINED:
                # Self-stated confidence often fails to materialize, so the
                # parse rate is the headline and curves cover only parsed
                # samples; a confidence floor is not meaningful here.
                gen_rate = generation_rate(scored) if scored else None
            elif generated:
                cal_points = tuple(calibration_curve(generated, grid))
                cal_auc = area_under(cal_points)
            if generated:
                sel_points = tuple(selective_curve(generated, grid))
                sel_auc = area_under(sel_points)
            cells.append(
                EvalCell(
                    strategy=strategy,
                    method=method,
                    samples=len(scored),
                    generated=len(generated),
                    detection_accuracy=accuracy,
                    calibration_auc=cal_auc,
                    selective_auc=sel_auc,
                    generation_rate=gen_rate,
                    calibration_points=cal_points,
                    selective_points=sel_points,
                    excluded=tuple(excluded),
                )
            )
    return MetricsReport(
        cells=tuple(cells),
        dataset_samples=len(samples),
        dataset_success=_count(samples, Outcome.SUCCESS),
        dataset_failure=_count(samples, Outcome.FAILURE),
        grid=grid,
    )


def write_curves_csv(report: MetricsReport, outdir: str | Path) -> list[Path]:
    """One CSV per non-empty curve, columns x,accuracy,retained."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for cell in report.cells:
        for curve_name, points in (
            ("calibration", cell.calibration_points),
            ("selective", cell.selective_points),
        ):
            if not points:
                continue
            path = outdir / f"{cell.strategy.value}_{cell.method.value}_{curve_name}.csv"
            with path.open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["x", "accuracy", "retained"])
                for p in points:
                    writer.writerow([repr(p.x), repr(p.accuracy), p.retained])
            written.append(path)
    return written


def plot_curves(report: MetricsReport, outdir: str | Path) -> list[Path]:
    """Render curve PNGs; requires the optional matplotlib dependency."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError("plotting requires matplotlib; install the 'plots' extra") from exc
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for curve_name, attr, xlabel in (
        ("calibration", "calibration_points", "confidence threshold"),
        ("selective", "selective_points", "abstention rate"),
    ):
        fig, ax = plt.subplots()
        drew = False
        for cell in report.cells:
            points = getattr(cell, attr)
            if not points:
                continue
            ax.plot([p.x for p in points], [p.accuracy for p in points], label=cell.key)
            drew = True
        if not drew:
            plt.close(fig)
            continue
        ax.set_xlabel(xlabel)
        ax.set_ylabel("accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.legend(fontsize=7)
        path = outdir / f"{curve_name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Simulated closed-loop experiments
# ---------------------------------------------------------------------------


def simulate_episodes(
    bundle: TaskBundle,
    threshold: float,
    episodes: int,
    base_seed: int = 0,
    max_retries: int = 3,
    strategy: StrategyKind = StrategyKind.SSC,
    method: Method = Method.TOKEN_PROBABILITY,
    confident_accuracy: float = 0.9,
    uncertain_accuracy: float = 0.55,
    bucket_threshold: float = 0.6,
) -> list[EpisodeTrace]:
    """Run seeded episodes with the dial-a-competence judge and oracle humans.

    Episode i derives its environment and judge seeds from base_seed, so the
    whole experiment is reproducible and episodes are independent.
    """
    if bundle.sim_env is None:
        raise ValueError(f"task {bundle.task.id!r} has no simulated environment")
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    cfg = DetectorConfig(strategy=strategy, method=method, threshold=threshold)
    traces: list[EpisodeTrace] = []
    for i in range(episodes):
        env = SimEnv(replace(bundle.sim_env, rng_seed=base_seed + 2 * i))
        judge = SimulatedDetectorBackend(
            confident_accuracy=confident_accuracy,
            uncertain_accuracy=uncertain_accuracy,
            bucket_threshold=bucket_threshold,
            seed=base_seed + 2 * i + 1,
        )
        detector = make_detector(judge, cfg, oracle_escalation_channel())
        traces.append(run_episode_with(bundle.task, env, detector, max_retries))
    return traces


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    metrics: EpisodeMetrics

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, **self.metrics.to_dict()}


def threshold_sweep(
    bundle: TaskBundle,
    thresholds: Sequence[float],
    episodes: int,
    base_seed: int = 0,
    **kwargs,
) -> list[SweepRow]:
    """Success/involvement tradeoff across gating thresholds, one seeded
    batch of episodes per threshold."""
    rows = []
    for threshold in thresholds:
        traces = simulate_episodes(bundle, threshold, episodes, base_seed, **kwargs)
        rows.append(SweepRow(threshold=threshold, metrics=episode_metrics(traces, bundle.task)))
    return rows
