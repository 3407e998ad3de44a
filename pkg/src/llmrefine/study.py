"""Corpus summaries and the seeded policy-comparison study."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .metrics import correction_rate
from .search import Policy, SearchConfig, Termination, Trajectory, run_batch, run_refinement
from .sim import SimEnvironment, SimParams, make_instance


def _mean(xs) -> Optional[float]:
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def summarize(trajectories: Sequence[Trajectory], curve_length: Optional[int] = None) -> dict:
    """Before/after means, correction rates and the mean per-iteration score curve."""
    done = [t for t in trajectories if t.steps]
    if curve_length is None:
        curve_length = max((t.config.max_iterations + 1 for t in done), default=0)
    curves = np.array([t.score_curve(curve_length) for t in done], dtype=float).reshape(len(done), curve_length)
    norm = np.array([t.score_curve(curve_length, normalized=True) for t in done], dtype=float).reshape(len(done), curve_length)
    iters = [t.iterations for t in trajectories if t.termination is Termination.ERROR_FREE]
    return {
        "n": len(trajectories),
        "n_aborted": sum(t.termination is Termination.ABORTED for t in trajectories),
        "n_error_free": len(iters),
        "error_free_iterations": iters,
        "mean_raw_before": _mean(t.initial_score for t in done),
        "mean_raw_after": _mean(t.final_score for t in done),
        "mean_normalized_before": _mean(t.steps[0].score_normalized for t in done),
        "mean_normalized_after": _mean(t.score_curve(normalized=True)[-1] for t in done),
        "correction_rate": correction_rate(trajectories),
        "single_step_correction_rate": correction_rate(trajectories, within=1),
        "score_curve": [float(v) for v in curves.mean(axis=0)] if len(done) else [],
        "normalized_score_curve": [float(v) for v in norm.mean(axis=0)] if len(done) else [],
    }


def is_monotone(traj: Trajectory) -> bool:
    curve = traj.score_curve()
    return all(b >= a for a, b in zip(curve, curve[1:]))


def bootstrap_mean_ci(diffs: np.ndarray, samples: int, seed: int, level: float = 0.95) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(diffs), size=(samples, len(diffs)))
    means = diffs[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


@dataclass
class StudyConfig:
    version: int = 1
    n_instances: int = 500
    seed: int = 0
    n_major: int = 3
    n_minor: int = 4
    length: int = 12
    policies: list = field(default_factory=lambda: [p.value for p in Policy])
    sim: SimParams = field(default_factory=SimParams)
    search: SearchConfig = field(default_factory=SearchConfig)
    bootstrap_samples: int = 2000
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        d = dict(d)
        if "sim" in d:
            d["sim"] = SimParams(**d["sim"])
        if "search" in d:
            d["search"] = SearchConfig(**d["search"])
        cfg = cls(**d)
        if cfg.version != 1:
            raise ValueError(f"unsupported study config version {cfg.version}")
        if cfg.n_instances < 0:
            raise ValueError("n_instances must be non-negative")
        cfg.policies = [Policy(p).value for p in cfg.policies]
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["search"] = self.search.to_dict()
        return d


def run_policy(cfg: StudyConfig, policy: Policy) -> list[Trajectory]:
    def one(i: int) -> Trajectory:
        inst = make_instance(cfg.seed * 1_000_003 + i, cfg.n_major, cfg.n_minor, cfg.length)
        # same environment randomness for every policy: paired comparison
        env = SimEnvironment(inst, cfg.sim, rng_seed=cfg.sim.seed + cfg.seed)
        search = replace(cfg.search, policy=policy, rng_seed=cfg.search.rng_seed + i)
        traj = run_refinement(env.task, search, env.generator, env.feedback_model, env.refiner)
        traj.example_id = f"sim-{i}"
        return traj

    return run_batch(list(range(cfg.n_instances)), one, cfg.jobs)


def run_study(cfg: StudyConfig) -> dict:
    """Run every policy over the same seeded instances and compare them."""
    runs = {p: run_policy(cfg, Policy(p)) for p in cfg.policies}
    length = cfg.search.max_iterations + 1
    table = {}
    for name, trajs in runs.items():
        s = summarize(trajs, length)
        s["monotone_fraction"] = float(np.mean([is_monotone(t) for t in trajs])) if trajs else None
        table[name] = s
    # worker count does not affect results, so it is left out of the record
    recorded = {k: v for k, v in cfg.to_dict().items() if k != "jobs"}
    out = {"config": recorded, "table": table}

    sa, gr = Policy.ANNEALING.value, Policy.GREEDY.value
    if sa in runs and gr in runs and cfg.n_instances > 0:
        diffs = np.array([a.final_score - b.final_score for a, b in zip(runs[sa], runs[gr])], dtype=float)
        lo, hi = bootstrap_mean_ci(diffs, cfg.bootstrap_samples, cfg.seed)
        if lo > 0:
            verdict = "annealing_better"
        elif hi < 0:
            verdict = "greedy_better"
        else:
            verdict = "indistinguishable"
        out["annealing_vs_greedy"] = {
            "mean_gap": float(diffs.mean()),
            "ci95": [lo, hi],
            "verdict": verdict,
        }
    return out
