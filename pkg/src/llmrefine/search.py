"""Iterative refinement as local search.

Three acceptance policies share one loop: always-accept, greedy uphill, and
simulated annealing. Under annealing a candidate is accepted with
probability ``min(1, exp(delta / (k * T)))`` where ``delta`` is the score
gain over the current output and ``T`` decays by a fixed proportion per step.
"""

from __future__ import annotations

import enum
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, TypeVar, Union

import numpy as np

from .clients import GREEDY, TOP_K_40, DecodingParams, ModelClientError, ModelRequest
from .feedback import FeedbackReport, InvalidReportError, is_error_free, normalize_score, score_report
from .parse import parse_feedback
from .prompting import (
    FeedbackMode,
    TaskInput,
    build_generation_prompt,
    build_pinpoint_prompt,
    build_refinement_prompt,
)

Generator = Callable[[TaskInput], str]
FeedbackModel = Callable[[TaskInput, str], FeedbackReport]
Refiner = Callable[[TaskInput, str, FeedbackReport, FeedbackMode, DecodingParams], str]


class Policy(str, enum.Enum):
    ALWAYS_ACCEPT = "always_accept"
    GREEDY = "greedy"
    ANNEALING = "annealing"


class Termination(str, enum.Enum):
    ERROR_FREE = "error_free"
    MAX_ITERATIONS = "max_iterations"
    ABORTED = "aborted"


@dataclass(frozen=True)
class SearchConfig:
    """Search hyperparameters.

    ``scale_constant`` is the ``k`` in ``delta / (k * T)``; ``None`` uses
    ``max_iterations`` instead.
    """

    policy: Policy = Policy.ANNEALING
    max_iterations: int = 10
    initial_temperature: float = 0.8
    decay: float = 0.1
    scale_constant: Optional[float] = 4.0
    rng_seed: int = 0
    decoding: DecodingParams = TOP_K_40
    score_space: str = "raw"

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if isinstance(self.decoding, dict):
            object.__setattr__(self, "decoding", DecodingParams(**self.decoding))
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.initial_temperature < 0:
            raise ValueError("initial_temperature must be non-negative")
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError("decay must lie in [0, 1]")
        if self.scale_constant is not None and self.scale_constant <= 0:
            raise ValueError("scale_constant must be positive")
        if self.score_space not in ("raw", "normalized"):
            raise ValueError("score_space is 'raw' or 'normalized'")

    @property
    def scale(self) -> float:
        return float(self.max_iterations if self.scale_constant is None else self.scale_constant)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        return cls(**d)


def accept_probability(score_candidate: float, score_current: float, temperature: float, scale: float) -> float:
    delta = score_candidate - score_current
    if delta >= 0:
        return 1.0
    kt = scale * temperature
    # kt can underflow to 0 for a subnormal temperature; that is the greedy limit too
    if kt <= 0:
        return 0.0
    return math.exp(delta / kt)


def decay_temperature(temperature: float, decay: float) -> float:
    return max(temperature - decay * temperature, 0.0)


def temperature_schedule(initial: float, decay: float, steps: int) -> list[float]:
    out = [initial]
    for _ in range(steps - 1):
        out.append(decay_temperature(out[-1], decay))
    return out


@dataclass(frozen=True)
class Decision:
    accepted: bool
    p_acc: float
    u: Optional[float] = None


def decide(
    policy: Policy,
    score_candidate: float,
    score_current: float,
    temperature: float,
    scale: float,
    rng: np.random.Generator,
) -> Decision:
    policy = Policy(policy)
    if policy is Policy.ALWAYS_ACCEPT:
        return Decision(True, 1.0)
    if policy is Policy.GREEDY:
        better = score_candidate > score_current
        return Decision(better, 1.0 if better else 0.0)
    p = accept_probability(score_candidate, score_current, temperature, scale)
    u = float(rng.random())
    return Decision(u < p, p, u)


@dataclass(frozen=True)
class Step:
    iteration: int
    current: str
    feedback: FeedbackReport
    score: float
    score_normalized: float
    temperature: float
    candidate: Optional[str] = None
    candidate_feedback: Optional[FeedbackReport] = None
    candidate_score: Optional[float] = None
    candidate_score_normalized: Optional[float] = None
    p_acc: Optional[float] = None
    u: Optional[float] = None
    accepted: Optional[bool] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["feedback"] = self.feedback.to_dict()
        if self.candidate_feedback is not None:
            d["candidate_feedback"] = self.candidate_feedback.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Step":
        d = dict(d)
        d.pop("type", None)
        d["feedback"] = FeedbackReport.from_dict(d["feedback"])
        if d.get("candidate_feedback") is not None:
            d["candidate_feedback"] = FeedbackReport.from_dict(d["candidate_feedback"])
        return cls(**d)


@dataclass
class Trajectory:
    task: TaskInput
    config: SearchConfig
    steps: list[Step] = field(default_factory=list)
    final_output: Optional[str] = None
    termination: Optional[Termination] = None
    error: Optional[str] = None
    example_id: Optional[str] = None

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def refinements(self) -> list[Step]:
        return [s for s in self.steps if s.candidate is not None]

    @property
    def initial_score(self) -> Optional[float]:
        return self.steps[0].score if self.steps else None

    @property
    def final_score(self) -> Optional[float]:
        if not self.steps:
            return None
        last = self.steps[-1]
        if last.accepted:
            return last.candidate_score
        return last.score

    def score_curve(self, length: Optional[int] = None, normalized: bool = False) -> list[float]:
        """Score of ``y_i`` for i = 0..length-1, held at its last value after termination."""
        prefix = "score_normalized" if normalized else "score"
        curve = [getattr(s, prefix) for s in self.steps]
        # an aborted run can end right after accepting a candidate
        if self.steps and self.steps[-1].accepted:
            last = self.steps[-1]
            curve.append(last.candidate_score_normalized if normalized else last.candidate_score)
        if length is None:
            return curve
        if not curve:
            return []
        return (curve + [curve[-1]] * length)[:length]

    def corrected_by(self, iteration: int) -> bool:
        """True when an error-free output was reached within ``iteration`` refinements."""
        return self.termination is Termination.ERROR_FREE and self.iterations - 1 <= iteration

    def jsonl_lines(self) -> list[str]:
        header = {
            "type": "header",
            "id": self.example_id,
            "config": self.config.to_dict(),
            "task": self.task.to_dict(),
        }
        result = {
            "type": "result",
            "id": self.example_id,
            "final_output": self.final_output,
            "termination": self.termination.value if self.termination else None,
            "iterations": self.iterations,
            "error": self.error,
        }
        lines = [header] + [{"type": "step", **s.to_dict()} for s in self.steps] + [result]
        return [json.dumps(rec, ensure_ascii=False) for rec in lines]

    def write_jsonl(self, path: Union[str, Path]) -> None:
        Path(path).write_text("\n".join(self.jsonl_lines()) + "\n", encoding="utf-8")

    @classmethod
    def from_jsonl_lines(cls, lines: Iterable[str]) -> "Trajectory":
        traj = None
        for line in lines:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["type"] == "header":
                traj = cls(
                    TaskInput.from_dict(rec["task"]),
                    SearchConfig.from_dict(rec["config"]),
                    example_id=rec.get("id"),
                )
            elif rec["type"] == "step":
                traj.steps.append(Step.from_dict(rec))
            elif rec["type"] == "result":
                traj.final_output = rec["final_output"]
                traj.termination = Termination(rec["termination"]) if rec["termination"] else None
                traj.error = rec.get("error")
        if traj is None:
            raise ValueError("no header line in trajectory file")
        return traj

    @classmethod
    def read_jsonl(cls, path: Union[str, Path]) -> "Trajectory":
        return cls.from_jsonl_lines(Path(path).read_text("utf-8").splitlines())


def _scores(report: FeedbackReport) -> tuple[float, float]:
    raw = score_report(report)
    return raw, normalize_score(raw, report.scheme)


def run_refinement(
    task: TaskInput,
    config: SearchConfig,
    generator: Generator,
    feedback_model: FeedbackModel,
    refiner: Refiner,
    mode: FeedbackMode = FeedbackMode.FINE_GRAINED,
) -> Trajectory:
    """Run one feedback-guided refinement search.

    Each iteration scores the current output, stops if it is error-free,
    otherwise samples a revision, scores it and applies the policy. At most
    ``max_iterations`` revisions are proposed. Model failures abort the run
    and leave the partial record on the trajectory.
    """
    rng = np.random.default_rng(config.rng_seed)
    traj = Trajectory(task, config)
    temperature = config.initial_temperature
    use_norm = config.score_space == "normalized"
    try:
        y = generator(task)
    except ModelClientError as e:
        traj.termination = Termination.ABORTED
        traj.error = f"generation failed: {type(e).__name__}: {e}"
        return traj

    step = None
    try:
        for i in range(config.max_iterations + 1):
            step = None
            f = feedback_model(task, y)
            raw, norm = _scores(f)
            step = Step(i, y, f, raw, norm, temperature)
            if is_error_free(f):
                traj.steps.append(step)
                traj.termination = Termination.ERROR_FREE
                break
            if i == config.max_iterations:
                traj.steps.append(step)
                traj.termination = Termination.MAX_ITERATIONS
                break
            c = refiner(task, y, f, mode, config.decoding)
            step = replace(step, candidate=c)
            fc = feedback_model(task, c)
            c_raw, c_norm = _scores(fc)
            d = decide(
                config.policy,
                c_norm if use_norm else c_raw,
                norm if use_norm else raw,
                temperature,
                config.scale,
                rng,
            )
            step = replace(
                step,
                candidate_feedback=fc,
                candidate_score=c_raw,
                candidate_score_normalized=c_norm,
                p_acc=d.p_acc,
                u=d.u,
                accepted=d.accepted,
            )
            traj.steps.append(step)
            if d.accepted:
                y = c
            temperature = decay_temperature(temperature, config.decay)
    except (ModelClientError, InvalidReportError) as e:
        msg = f"{type(e).__name__}: {e}"
        if step is not None:
            traj.steps.append(replace(step, error=msg))
        traj.termination = Termination.ABORTED
        traj.error = msg
    traj.final_output = y
    return traj


def replay(traj: Trajectory, atol: float = 0.0) -> list[str]:
    """Re-verify every recorded decision and temperature; returns the mismatches."""
    cfg = traj.config
    problems = []
    use_norm = cfg.score_space == "normalized"
    expected_t = cfg.initial_temperature
    y = traj.steps[0].current if traj.steps else None
    for s in traj.steps:
        if abs(s.temperature - expected_t) > atol:
            problems.append(f"step {s.iteration}: temperature {s.temperature} != {expected_t}")
        if s.current != y:
            problems.append(f"step {s.iteration}: current output does not follow previous decision")
        if s.accepted is None:
            continue
        cur = s.score_normalized if use_norm else s.score
        cand = s.candidate_score_normalized if use_norm else s.candidate_score
        if cfg.policy is Policy.ANNEALING:
            p = accept_probability(cand, cur, s.temperature, cfg.scale)
            if abs(p - s.p_acc) > atol:
                problems.append(f"step {s.iteration}: p_acc {s.p_acc} != {p}")
            if s.accepted != (s.u < s.p_acc):
                problems.append(f"step {s.iteration}: accepted={s.accepted} but u={s.u}, p_acc={s.p_acc}")
        elif cfg.policy is Policy.GREEDY:
            if s.accepted != (cand > cur):
                problems.append(f"step {s.iteration}: greedy decision inconsistent with scores")
        elif not s.accepted:
            problems.append(f"step {s.iteration}: always-accept rejected a candidate")
        if s.accepted:
            y = s.candidate
        expected_t = decay_temperature(expected_t, cfg.decay)
    return problems


class PromptedGenerator:
    """Initial output by greedy decoding of the generation prompt."""

    def __init__(self, client, templates=None):
        self.client = client
        self.templates = templates

    def __call__(self, task: TaskInput) -> str:
        kw = {"templates": self.templates} if self.templates else {}
        prompt = build_generation_prompt(task, **kw)
        return self.client.complete(ModelRequest(prompt, GREEDY)).text.strip()


class PromptedFeedbackModel:
    def __init__(self, client, templates=None):
        self.client = client
        self.templates = templates

    def __call__(self, task: TaskInput, candidate: str) -> FeedbackReport:
        kw = {"templates": self.templates} if self.templates else {}
        prompt = build_pinpoint_prompt(task, candidate, **kw)
        text = self.client.complete(ModelRequest(prompt, GREEDY)).text
        return parse_feedback(text, task.scheme, candidate)


class PromptedRefiner:
    def __init__(self, client, templates=None):
        self.client = client
        self.templates = templates

    def __call__(self, task, candidate, feedback, mode, decoding) -> str:
        kw = {"templates": self.templates} if self.templates else {}
        prompt = build_refinement_prompt(task, candidate, feedback, mode, **kw)
        return self.client.complete(ModelRequest(prompt, decoding)).text.strip()


class TrajectorySink:
    """Collects serialized trajectories from concurrent runs into one JSONL file."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, traj: Trajectory) -> None:
        block = "\n".join(traj.jsonl_lines()) + "\n"
        with self._lock, self.path.open("a", encoding="utf-8") as f:
            f.write(block)


T = TypeVar("T")
R = TypeVar("R")


def run_batch(items: Sequence[T], fn: Callable[[T], R], jobs: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` with at most ``jobs`` threads; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
