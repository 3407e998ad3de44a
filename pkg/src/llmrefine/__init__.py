"""Feedback-guided iterative refinement of generated text as local search."""

from .feedback import (
    ErrorSpan,
    FeedbackReport,
    Severity,
    TaskScheme,
    is_error_free,
    normalize_score,
    score_report,
)
from .parse import locate_span, parse_feedback, render_feedback
from .prompting import FeedbackMode, TaskInput, build_generation_prompt, build_refinement_prompt
from .search import (
    Policy,
    SearchConfig,
    Termination,
    Trajectory,
    accept_probability,
    decay_temperature,
    decide,
    run_refinement,
)

__version__ = "0.1.0"
