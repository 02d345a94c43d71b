"""Command line: run episodes, evaluate detectors, sweep thresholds, serve.

Exit codes: 0 success, 1 the episode or run failed, 2 bad configuration.
With --json, failures also emit one machine-readable JSON object on stderr.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import click

from .backend import BackendError, LiveBackend, LiveBackendConfig, ScriptedBackend
from .core import EpisodeTrace, FinalStatus, validate_task_spec
from .detector import ConsoleEscalationChannel, DetectorConfig, EscalationChannel
from .evaluation import (
    DatasetError,
    load_dataset,
    plot_curves,
    run_offline_eval,
    serialize_report,
    threshold_sweep,
    write_curves_csv,
)
from .planner import (
    InvalidTaskError,
    SimEnv,
    SimulatedDetectorBackend,
    TaskBundle,
    bundled_task,
    list_bundled_tasks,
    load_task_bundle,
    make_detector,
    oracle_escalation_channel,
    run_episode_with,
    validate_trace,
)
from .prompting import StrategyKind
from .uncertainty import Method

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_CONFIG = 2

_STRATEGY_CHOICES = [s.value for s in StrategyKind]
_METHOD_CHOICES = [m.value for m in Method]


def _fail(ctx: click.Context, code: int, kind: str, message: str) -> None:
    if ctx.obj and ctx.obj.get("json"):
        click.echo(json.dumps({"error": kind, "message": message}), err=True)
    else:
        click.echo(f"error: {message}", err=True)
    ctx.exit(code)


def _load_task(ref: str) -> TaskBundle:
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        return load_task_bundle(path)
    try:
        return bundled_task(ref)
    except FileNotFoundError:
        raise ValueError(
            f"no task {ref!r}; bundled tasks: {', '.join(list_bundled_tasks())}"
        ) from None


def _parse_thresholds(spec: str) -> list[float]:
    """A single value, or an inclusive start:stop:step grid.

    Steps are parsed as exact decimals so 0:1:0.1 yields precisely 11 values.
    """
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(Fraction(spec))]
    if len(parts) != 3:
        raise ValueError(f"threshold spec must be VALUE or START:STOP:STEP, got {spec!r}")
    start, stop, step = (Fraction(p) for p in parts)
    if step <= 0:
        raise ValueError("threshold step must be > 0")
    if stop < start:
        raise ValueError("threshold stop must be >= start")
    values = []
    v = start
    while v <= stop:
        values.append(float(v))
        v += step
    return values


def _live_backend(endpoint: str, model: str) -> LiveBackend:
    return LiveBackend(LiveBackendConfig(endpoint=endpoint, model_name=model))


@click.group()
@click.option("--json", "json_errors", is_flag=True, help="emit failures as JSON on stderr")
@click.option("-v", "--verbose", is_flag=True, help="log at INFO level")
@click.pass_context
def main(ctx: click.Context, json_errors: bool, verbose: bool) -> None:
    """Closed-loop task planning with an uncertainty-gated failure detector."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    ctx.obj = {"json": json_errors}


@main.command()
@click.option("--task", "task_ref", default="sponge_in_drawer", show_default=True,
              help="bundled task name or path to a task bundle JSON file")
@click.option("--sim", is_flag=True, help="simulate both the robot and the judge")
@click.option("--delta", type=float, default=0.6, show_default=True,
              help="gating threshold; verdicts at or above it go to a human")
@click.option("--retries", type=int, default=3, show_default=True)
@click.option("--strategy", type=click.Choice(_STRATEGY_CHOICES), default="ssc", show_default=True)
@click.option("--method", type=click.Choice(_METHOD_CHOICES), default="token_probability",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--escalation", type=click.Choice(["oracle", "console"]), default=None,
              help="who answers escalations; defaults to oracle under --sim, console otherwise")
@click.option("--endpoint", envvar="LOOPGATE_ENDPOINT", default=None,
              help="chat-completions endpoint for a live judge")
@click.option("--model", envvar="LOOPGATE_MODEL", default="", help="model name for --endpoint")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="write the trace JSON here instead of stdout")
@click.pass_context
def run(ctx: click.Context, task_ref: str, sim: bool, delta: float, retries: int, strategy: str,
        method: str, seed: int, escalation: Optional[str], endpoint: Optional[str], model: str,
        out: Optional[str]) -> None:
    """Run one episode and emit its trace as JSON."""
    try:
        bundle = _load_task(task_ref)
        if bundle.sim_env is None:
            raise ValueError(f"task {bundle.task.id!r} has no simulated environment")
        if not sim and endpoint is None:
            raise ValueError("pass --sim for the built-in judge, or --endpoint for a live one")
        cfg = DetectorConfig(
            strategy=StrategyKind(strategy), method=Method(method), threshold=delta
        )
        env = SimEnv(replace(bundle.sim_env, rng_seed=seed))
        backend = (
            SimulatedDetectorBackend(
                confident_accuracy=0.9, uncertain_accuracy=0.55, seed=seed + 1
            )
            if sim
            else _live_backend(endpoint, model)
        )
        if escalation is None:
            escalation = "oracle" if sim else "console"
        channel: EscalationChannel = (
            oracle_escalation_channel() if escalation == "oracle" else ConsoleEscalationChannel()
        )
        detector = make_detector(backend, cfg, channel)
    except (ValueError, InvalidTaskError, OSError) as exc:
        return _fail(ctx, EXIT_CONFIG, "config", str(exc))

    try:
        trace = run_episode_with(bundle.task, env, detector, retries)
    except BackendError as exc:
        return _fail(ctx, EXIT_RUN_FAILED, "backend", str(exc))

    data = trace.to_dict()
    data["seed"] = seed
    data["threshold"] = delta
    data["max_retries"] = retries
    text = json.dumps(data, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if trace.final_status is not FinalStatus.SUCCESS:
        return _fail(ctx, EXIT_RUN_FAILED, "episode",
                     f"episode ended {trace.final_status.value}")


@main.command()
@click.option("--dataset", required=True, type=click.Path(dir_okay=False))
@click.option("--manifest", type=click.Path(dir_okay=False), default=None)
@click.option("--rules", type=click.Path(dir_okay=False), default=None,
              help="scripted backend rules JSON (offline replay)")
@click.option("--endpoint", envvar="LOOPGATE_ENDPOINT", default=None)
@click.option("--model", envvar="LOOPGATE_MODEL", default="")
@click.option("--strategies", default="ssc,sra,nap", show_default=True)
@click.option("--methods", default="token_probability,entropy,self_explained", show_default=True)
@click.option("--grid", type=int, default=101, show_default=True,
              help="number of curve sample points")
@click.option("--exact", is_flag=True, help="evaluate curves at data breakpoints, not a grid")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="write the report JSON here instead of stdout")
@click.option("--curves-dir", type=click.Path(file_okay=False), default=None)
@click.option("--plot-dir", type=click.Path(file_okay=False), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.pass_context
def eval(ctx: click.Context, dataset: str, manifest: Optional[str], rules: Optional[str],
         endpoint: Optional[str], model: str, strategies: str, methods: str, grid: int,
         exact: bool, out: Optional[str], curves_dir: Optional[str], plot_dir: Optional[str],
         workers: int) -> None:
    """Replay a labeled dataset through the detector and report metrics."""
    try:
        if (rules is None) == (endpoint is None):
            raise ValueError("pass exactly one of --rules or --endpoint")
        samples = load_dataset(dataset, manifest)
        strategy_list = [StrategyKind(s.strip()) for s in strategies.split(",") if s.strip()]
        method_list = [Method(m.strip()) for m in methods.split(",") if m.strip()]
        backend = ScriptedBackend.from_file(rules) if rules else _live_backend(endpoint, model)
    except (ValueError, DatasetError, OSError) as exc:
        return _fail(ctx, EXIT_CONFIG, "config", str(exc))

    try:
        report = run_offline_eval(
            samples, strategy_list, method_list, backend,
            grid=None if exact else grid, max_workers=workers,
        )
    except BackendError as exc:
        return _fail(ctx, EXIT_RUN_FAILED, "backend", str(exc))
    text = serialize_report(report)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if curves_dir:
        write_curves_csv(report, curves_dir)
    if plot_dir:
        plot_curves(report, plot_dir)


@main.command()
@click.option("--task", "task_ref", default="sponge_in_drawer", show_default=True)
@click.option("--delta", "delta_spec", default="0:1:0.1", show_default=True,
              help="threshold value or START:STOP:STEP grid")
@click.option("--episodes", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--retries", type=int, default=3, show_default=True)
@click.option("--strategy", type=click.Choice(_STRATEGY_CHOICES), default="ssc", show_default=True)
@click.option("--method", type=click.Choice(_METHOD_CHOICES), default="token_probability",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="also write the rows as JSON here")
@click.pass_context
def sweep(ctx: click.Context, task_ref: str, delta_spec: str, episodes: int, seed: int,
          retries: int, strategy: str, method: str, out: Optional[str]) -> None:
    """Tabulate the success / human-involvement tradeoff across thresholds."""
    try:
        bundle = _load_task(task_ref)
        thresholds = _parse_thresholds(delta_spec)
        rows = threshold_sweep(
            bundle, thresholds, episodes, base_seed=seed, max_retries=retries,
            strategy=StrategyKind(strategy), method=Method(method),
        )
    except (ValueError, InvalidTaskError, OSError) as exc:
        return _fail(ctx, EXIT_CONFIG, "config", str(exc))

    def cell(value: Optional[float]) -> str:
        return f"{value:12.4f}" if value is not None else f"{'-':>12}"

    header = (f"{'threshold':>9} {'episodes':>8} {'success':>12} {'true_success':>12} "
              f"{'human_rate':>12} {'det_acc':>12} {'steps':>7}")
    click.echo(header)
    for row in rows:
        m = row.metrics
        click.echo(
            f"{row.threshold:9.2f} {m.episodes:8d} {cell(m.success_rate)} "
            f"{cell(m.true_success_rate)} {cell(m.human_involve_rate)} "
            f"{cell(m.detection_accuracy)} {m.total_steps:7d}"
        )
    if out:
        payload = json.dumps([r.to_dict() for r in rows], indent=2) + "\n"
        Path(out).write_text(payload, encoding="utf-8")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", envvar="LOOPGATE_DATA_DIR", default="loopgate_data",
              show_default=True, help="directory for append-only episode traces")
@click.option("--delta", type=float, default=0.6, show_default=True)
@click.option("--retries", type=int, default=3, show_default=True)
@click.option("--strategy", type=click.Choice(_STRATEGY_CHOICES), default="ssc", show_default=True)
@click.option("--method", type=click.Choice(_METHOD_CHOICES), default="token_probability",
              show_default=True)
@click.option("--endpoint", envvar="LOOPGATE_ENDPOINT", default=None,
              help="live judge endpoint; omit to use the simulated judge")
@click.option("--model", envvar="LOOPGATE_MODEL", default="")
@click.option("--console-dir", type=click.Path(file_okay=False), default=None,
              help="static operator console to mount at /console")
@click.pass_context
def serve(ctx: click.Context, host: str, port: int, data_dir: str, delta: float, retries: int,
          strategy: str, method: str, endpoint: Optional[str], model: str,
          console_dir: Optional[str]) -> None:
    """Serve the episode and escalation HTTP API."""
    try:
        import uvicorn

        from .service import create_app, default_service_config

        backend = _live_backend(endpoint, model) if endpoint else None
        probe = backend.probe if backend is not None else None
        if console_dir is None and Path("frontend/dist").is_dir():
            console_dir = "frontend/dist"
        detector = DetectorConfig(
            strategy=StrategyKind(strategy), method=Method(method), threshold=delta
        )
        app = create_app(default_service_config(
            data_dir=data_dir, detector=detector, max_retries=retries,
            backend=backend, probe=probe, console_dir=console_dir,
        ))
    except (ValueError, OSError) as exc:
        return _fail(ctx, EXIT_CONFIG, "config", str(exc))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--task", "task_ref", default=None,
              help="bundled task name or path to a task bundle JSON file")
@click.option("--dataset", type=click.Path(dir_okay=False), default=None)
@click.option("--manifest", type=click.Path(dir_okay=False), default=None)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="episode trace JSON to audit against --task")
@click.option("--retries", type=int, default=None,
              help="retry budget the trace was recorded under")
@click.pass_context
def validate(ctx: click.Context, task_ref: Optional[str], dataset: Optional[str],
             manifest: Optional[str], trace_path: Optional[str], retries: Optional[int]) -> None:
    """Check tasks, datasets, and traces for structural problems."""
    if task_ref is None and dataset is None:
        return _fail(ctx, EXIT_CONFIG, "config", "pass --task and/or --dataset")
    if trace_path is not None and task_ref is None:
        return _fail(ctx, EXIT_CONFIG, "config", "--trace needs --task")
    problems: list[str] = []
    try:
        bundle = None
        if task_ref is not None:
            try:
                bundle = _load_task(task_ref)
            except InvalidTaskError as exc:
                problems.extend(f"task: {p}" for p in exc.problems)
            else:
                problems.extend(f"task: {p}" for p in validate_task_spec(bundle.task))
        if dataset is not None:
            try:
                samples = load_dataset(dataset, manifest)
                click.echo(f"dataset: {len(samples)} samples")
            except DatasetError as exc:
                problems.append(f"dataset: {exc}")
        if trace_path is not None and bundle is not None:
            trace = EpisodeTrace.from_dict(
                json.loads(Path(trace_path).read_text(encoding="utf-8"))
            )
            problems.extend(
                f"trace: {p}" for p in validate_trace(trace, bundle.task, max_retries=retries)
            )
    except (ValueError, OSError) as exc:
        return _fail(ctx, EXIT_CONFIG, "config", str(exc))
    if problems:
        for p in problems:
            click.echo(p, err=True)
        return _fail(ctx, EXIT_CONFIG, "invalid", f"{len(problems)} problem(s) found")
    click.echo("ok")


if __name__ == "__main__":
    main()
