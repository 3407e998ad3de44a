#!/usr/bin/env python3
"""Replay the five-step Chinese-English refinement example with scripted models.

Annealing accepts the score-neutral revisions and reaches an error-free
translation; greedy with a refiner that only offers those revisions keeps
the initial output for every iteration.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from worked_examples import ZH_TASK, stuck_script, zh_models  # noqa: E402

from llmrefine.parse import render_feedback  # noqa: E402
from llmrefine.search import Policy, SearchConfig, replay, run_refinement  # noqa: E402


def show(title, traj):
    print(f"== {title}: {traj.termination.value} after {traj.iterations} iteration(s)")
    for s in traj.steps:
        fb = render_feedback(s.feedback) or "(no errors)"
        print(f"  i={s.iteration} T={s.temperature:.3f} score={s.score + 0:+.0f}  {s.current}")
        print(f"      feedback: {fb}")
        if s.candidate is not None:
            verdict = "accept" if s.accepted else "reject"
            print(f"      candidate: {s.candidate}  (score {s.candidate_score + 0:+.0f}, p={s.p_acc:.3f}, {verdict})")
    print(f"  final: {traj.final_output}")
    problems = replay(traj)
    print(f"  replay check: {'ok' if not problems else problems}\n")


def main():
    gen, fb, ref = zh_models()
    show("annealing", run_refinement(ZH_TASK, SearchConfig(policy=Policy.ANNEALING), gen, fb, ref))
    gen, fb, ref = zh_models(stuck_script(5))
    show("greedy, stuck refiner", run_refinement(ZH_TASK, SearchConfig(policy=Policy.GREEDY, max_iterations=5), gen, fb, ref))


if __name__ == "__main__":
    main()
