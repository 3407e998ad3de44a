"""Command-line entry point: ``llmrefine {refine,simulate,score,eval-spans}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .clients import ModelClientError, client_from_mapping
from .feedback import InvalidReportError, TaskScheme, normalize_score, score_report
from .metrics import char_prf_corpus, load_span_records
from .parse import parse_feedback
from .prompting import FeedbackMode, TaskInput, load_templates
from .search import (
    Policy,
    PromptedFeedbackModel,
    PromptedGenerator,
    PromptedRefiner,
    SearchConfig,
    Termination,
    Trajectory,
    run_batch,
    run_refinement,
)
from .sim import PlantedInstance, SimEnvironment, SimParams
from .study import StudyConfig, run_study, summarize

logger = logging.getLogger("llmrefine")


class ConfigError(ValueError):
    pass


@dataclass
class RefineConfig:
    version: int = 1
    search: SearchConfig = field(default_factory=SearchConfig)
    mode: FeedbackMode = FeedbackMode.FINE_GRAINED
    backend: str = "models"
    models: dict = field(default_factory=dict)
    sim: SimParams = field(default_factory=SimParams)
    templates: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RefineConfig":
        try:
            d = dict(d)
            if "search" in d:
                d["search"] = SearchConfig(**d["search"])
            if "sim" in d:
                d["sim"] = SimParams(**d["sim"])
            cfg = cls(**d)
            cfg.mode = FeedbackMode(cfg.mode)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid config: {e}") from e
        if cfg.version != 1:
            raise ConfigError(f"unsupported config version {cfg.version}")
        if cfg.backend not in ("models", "sim"):
            raise ConfigError(f"backend must be 'models' or 'sim', got {cfg.backend!r}")
        if cfg.backend == "models":
            missing = {"generator", "feedback", "refiner"} - set(cfg.models)
            if missing:
                raise ConfigError(f"models section lacks {sorted(missing)}")
            unknown = set(cfg.models) - {"generator", "feedback", "refiner"}
            if unknown:
                raise ConfigError(f"unknown model roles {sorted(unknown)}")
        return cfg


def _read_json(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read {what} {path}: {e}") from e


def _read_jsonl(path: str, what: str) -> list[dict]:
    try:
        lines = Path(path).read_text("utf-8").splitlines()
        return [json.loads(line) for line in lines if line.strip()]
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read {what} {path}: {e}") from e


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _sidecar_log(out: Path, message: str) -> None:
    with (out / "run.log").open("a", encoding="utf-8") as f:
        f.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


def _example_runner(cfg: RefineConfig, templates):
    shared = {}
    if cfg.backend == "models":
        # HTTP clients are shared so their concurrency limit applies corpus-wide;
        # mocks are rebuilt per example so every example replays its script
        for role, spec in cfg.models.items():
            if spec.get("type") == "http":
                shared[role] = client_from_mapping(spec)

    def client(role):
        return shared.get(role) or client_from_mapping(cfg.models[role])

    def run(item):
        index, rec = item
        ex_id = str(rec.get("id", index))
        search = replace(cfg.search, rng_seed=cfg.search.rng_seed + index)
        if rec.get("kind") == "planted":
            if cfg.backend != "sim":
                raise ConfigError(f"example {ex_id}: planted instances need backend 'sim'")
            env = SimEnvironment(PlantedInstance.from_dict(rec["instance"]), cfg.sim, rng_seed=cfg.sim.seed + index)
            task, gen, fb, ref = env.task, env.generator, env.feedback_model, env.refiner
        else:
            task = TaskInput.from_dict(rec)
            gen = PromptedGenerator(client("generator"), templates)
            fb = PromptedFeedbackModel(client("feedback"), templates)
            ref = PromptedRefiner(client("refiner"), templates)
        traj = run_refinement(task, search, gen, fb, ref, cfg.mode)
        traj.example_id = ex_id
        return traj

    return run


def cmd_refine(config_path: str, dataset_path: str, out_path: str, jobs: int = 1,
               seed: Optional[int] = None, policy: Optional[str] = None, mode: Optional[str] = None) -> int:
    raw = _read_json(config_path, "config")
    cfg = RefineConfig.from_dict(raw)
    if seed is not None:
        cfg.search = replace(cfg.search, rng_seed=seed)
    if policy is not None:
        cfg.search = replace(cfg.search, policy=Policy(policy))
    if mode is not None:
        cfg.mode = FeedbackMode(mode)
    templates = load_templates(cfg.templates) if cfg.templates else None
    records = _read_jsonl(dataset_path, "dataset")

    out = Path(out_path)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    _sidecar_log(out, f"refine start: {len(records)} examples, policy={cfg.search.policy.value}")

    runner = _example_runner(cfg, templates)
    errors = []

    def guarded(item):
        try:
            return runner(item)
        except (ConfigError, KeyError, ValueError, ModelClientError) as e:
            errors.append({"index": item[0], "id": item[1].get("id"), "error": f"{type(e).__name__}: {e}"})
            return None

    trajs = run_batch(list(enumerate(records)), guarded, jobs)
    ok = [t for t in trajs if t is not None]
    for t in ok:
        t.write_jsonl(out / "trajectories" / f"{t.example_id}.jsonl")
        if t.termination is Termination.ABORTED:
            errors.append({"id": t.example_id, "error": t.error})
    summary = summarize(ok, cfg.search.max_iterations + 1)
    summary["policy"] = cfg.search.policy.value
    summary["mode"] = cfg.mode.value
    summary["n_failed"] = len(errors)
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    errors.sort(key=lambda e: str(e.get("id")))
    err_path = out / "errors.jsonl"
    if errors:
        err_path.write_text("".join(json.dumps(e, ensure_ascii=False) + "\n" for e in errors), encoding="utf-8")
    elif err_path.exists():
        err_path.unlink()
    _sidecar_log(out, f"refine done: {len(ok)} trajectories, {len(errors)} errors")
    return 1 if errors else 0


def cmd_simulate(params_path: str, out_path: str, seed: Optional[int] = None, jobs: Optional[int] = None) -> int:
    raw = _read_json(params_path, "simulation params")
    try:
        cfg = StudyConfig.from_dict(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid simulation params: {e}") from e
    if seed is not None:
        cfg.seed = seed
    if jobs is not None:
        cfg.jobs = jobs
    result = run_study(cfg)
    Path(out_path).write_text(_dump(result), encoding="utf-8")
    return 0


def score_records(records: Sequence) -> list[dict]:
    out = []
    for rec in records:
        if isinstance(rec, str):
            rec = {"feedback": rec}
        scheme = TaskScheme(rec.get("scheme", "mqm"))
        report = parse_feedback(rec.get("feedback", ""), scheme, rec.get("candidate"))
        row = {"n_spans": len(report.spans), "n_unparsed": len(report.unparsed)}
        try:
            raw = score_report(report)
            row.update(raw=raw, normalized=normalize_score(raw, scheme))
        except InvalidReportError as e:
            row.update(raw=None, normalized=None, error=str(e))
        if "id" in rec:
            row = {"id": rec["id"], **row}
        out.append(row)
    return out


def cmd_score(feedback_jsonl: str, out=None) -> int:
    rows = score_records(_read_jsonl(feedback_jsonl, "feedback file"))
    stream = out or sys.stdout
    for row in rows:
        stream.write(json.dumps(row, ensure_ascii=False) + "\n")
    unparsed = sum(r["n_unparsed"] for r in rows)
    if unparsed:
        logger.warning("%d feedback lines could not be parsed", unparsed)
    return 1 if any("error" in r for r in rows) else 0


def cmd_eval_spans(pred_jsonl: str, gold_jsonl: str, out=None) -> int:
    try:
        pred = load_span_records(Path(pred_jsonl).read_text("utf-8"), "predicted_spans")
        gold = load_span_records(Path(gold_jsonl).read_text("utf-8"), "gold_spans")
    except (OSError, ValueError, KeyError) as e:
        raise ConfigError(f"cannot read span corpus: {e}") from e
    if len(pred) != len(gold):
        raise ConfigError(f"{len(pred)} predicted vs {len(gold)} gold segments")
    for i, ((pt, _), (gt, _)) in enumerate(zip(pred, gold)):
        if pt != gt:
            raise ConfigError(f"segment {i}: predicted and gold texts differ")
    result = char_prf_corpus((p, g, len(t)) for (t, p), (_, g) in zip(pred, gold))
    (out or sys.stdout).write(json.dumps({"segments": len(pred), **result.to_dict()}) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="llmrefine", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("refine", help="run feedback-guided refinement over a dataset")
    r.add_argument("--config", required=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int)
    r.add_argument("--policy", choices=[p.value for p in Policy])
    r.add_argument("--mode", choices=[m.value for m in FeedbackMode])

    s = sub.add_parser("simulate", help="compare search policies in the synthetic environment")
    s.add_argument("--config", required=True, help="simulation params JSON")
    s.add_argument("--out", required=True, help="output JSON file")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int)

    sc = sub.add_parser("score", help="parse and score feedback strings")
    sc.add_argument("feedback_jsonl")

    e = sub.add_parser("eval-spans", help="character-level span P/R/F1")
    e.add_argument("pred_jsonl")
    e.add_argument("gold_jsonl")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "refine":
            return cmd_refine(args.config, args.dataset, args.out, args.jobs, args.seed, args.policy, args.mode)
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.seed, args.jobs)
        if args.command == "score":
            return cmd_score(args.feedback_jsonl)
        return cmd_eval_spans(args.pred_jsonl, args.gold_jsonl)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
