"""Closed-loop task planning with an uncertainty-gated failure detector.

A plan executes one subtask at a time; after each execution a multimodal
model judges success or failure. Judgments whose uncertainty clears the
gating threshold drive the loop directly; the rest are handed to a human
operator. Failures restart the plan from the first subtask within a retry
budget.
"""

from .backend import (
    Backend,
    BackendError,
    BackendReply,
    BackendRequest,
    ChatMessage,
    LiveBackend,
    LiveBackendConfig,
    ScriptedBackend,
    ScriptedRule,
    TokenLogprob,
)
from .core import (
    EpisodeTrace,
    FinalStatus,
    Observation,
    Outcome,
    StepRecord,
    Subtask,
    TaskSpec,
    Verdict,
    VerdictSource,
    validate_task_spec,
)
from .detector import (
    BlockingEscalationQueue,
    CallbackEscalationChannel,
    ConsoleEscalationChannel,
    DetectionQuery,
    DetectorConfig,
    EscalationRequest,
    ModelJudgment,
    detect_once,
    failure_detect,
)
from .evaluation import (
    CurvePoint,
    EpisodeMetrics,
    EvalCell,
    LabeledSample,
    MetricsReport,
    ScoredSample,
    calibration_auc,
    calibration_curve,
    detection_accuracy,
    episode_metrics,
    generation_rate,
    load_dataset,
    run_offline_eval,
    selective_auc,
    selective_curve,
    serialize_report,
    simulate_episodes,
    threshold_sweep,
)
from .planner import (
    EnvState,
    PlannerConfig,
    SimEnv,
    SimEnvConfig,
    SimulatedDetectorBackend,
    TaskBundle,
    TaskEnvironment,
    bundled_task,
    list_bundled_tasks,
    load_task_bundle,
    make_detector,
    oracle_escalation_channel,
    run_episode,
    run_episode_with,
    true_episode_success,
    validate_trace,
)
from .prompting import RenderedPrompt, StrategyKind, parse_reply, render
from .uncertainty import (
    GenerationFailure,
    Method,
    UncertaintyEstimate,
    entropy_uncertainty,
    parse_self_explained,
    self_explained_uncertainty,
    token_probability_uncertainty,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BackendError",
    "BackendReply",
    "BackendRequest",
    "BlockingEscalationQueue",
    "CallbackEscalationChannel",
    "ChatMessage",
    "ConsoleEscalationChannel",
    "CurvePoint",
    "DetectionQuery",
    "DetectorConfig",
    "EnvState",
    "EpisodeMetrics",
    "EpisodeTrace",
    "EscalationRequest",
    "EvalCell",
    "FinalStatus",
    "GenerationFailure",
    "LabeledSample",
    "LiveBackend",
    "LiveBackendConfig",
    "Method",
    "MetricsReport",
    "ModelJudgment",
    "Observation",
    "Outcome",
    "PlannerConfig",
    "RenderedPrompt",
    "ScoredSample",
    "ScriptedBackend",
    "ScriptedRule",
    "SimEnv",
    "SimEnvConfig",
    "SimulatedDetectorBackend",
    "StepRecord",
    "StrategyKind",
    "Subtask",
    "TaskBundle",
    "TaskEnvironment",
    "TaskSpec",
    "TokenLogprob",
    "UncertaintyEstimate",
    "Verdict",
    "VerdictSource",
    "calibration_auc",
    "calibration_curve",
    "detect_once",
    "detection_accuracy",
    "entropy_uncertainty",
    "episode_metrics",
    "failure_detect",
    "generation_rate",
    "list_bundled_tasks",
    "load_dataset",
    "load_task_bundle",
    "bundled_task",
    "make_detector",
    "oracle_escalation_channel",
    "parse_reply",
    "parse_self_explained",
    "render",
    "run_episode",
    "run_episode_with",
    "run_offline_eval",
    "selective_auc",
    "selective_curve",
    "self_explained_uncertainty",
    "serialize_report",
    "simulate_episodes",
    "threshold_sweep",
    "token_probability_uncertainty",
    "true_episode_success",
    "validate_task_spec",
    "validate_trace",
]
