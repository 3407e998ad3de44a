"""Prompt construction for generation, refinement and the pinpoint model.

Templates live in ``data/templates.json`` (``string.Template`` syntax) and
can be replaced wholesale with :func:`load_templates`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template
from typing import Mapping, Optional

from .feedback import FeedbackReport, TaskScheme, is_error_free, normalize_score, score_report
from .parse import render_feedback

LANGUAGE_NAMES = {
    "en": "English",
    "de": "German",
    "zh": "Chinese",
    "ru": "Russian",
    "ja": "Japanese",
    "fr": "French",
    "es": "Spanish",
    "cs": "Czech",
    "uk": "Ukrainian",
    "he": "Hebrew",
}


class TaskKind(str, enum.Enum):
    TRANSLATION = "translation"
    LONG_FORM_QA = "long_form_qa"
    TOPICAL_SUMM = "topical_summ"


class FeedbackMode(str, enum.Enum):
    IMPROVE = "improve"
    SCORE_QE = "score_qe"
    BINARY_QE = "binary_qe"
    FINE_GRAINED = "fine_grained"


@dataclass(frozen=True)
class TaskInput:
    kind: TaskKind
    source_text: str = ""
    src_lang: str = ""
    tgt_lang: str = ""
    passage: str = ""
    question: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        body = self.source_text if self.kind is TaskKind.TRANSLATION else self.passage
        if not body:
            raise ValueError(f"{self.kind.value} task needs non-empty source text")

    @classmethod
    def translation(cls, src_lang: str, tgt_lang: str, source_text: str) -> "TaskInput":
        return cls(TaskKind.TRANSLATION, source_text=source_text, src_lang=src_lang, tgt_lang=tgt_lang)

    @classmethod
    def qa(cls, passage: str, question: str) -> "TaskInput":
        return cls(TaskKind.LONG_FORM_QA, passage=passage, question=question)

    @classmethod
    def summ(cls, passage: str, question: str) -> "TaskInput":
        return cls(TaskKind.TOPICAL_SUMM, passage=passage, question=question)

    @property
    def scheme(self) -> TaskScheme:
        return TaskScheme.SUMM if self.kind is TaskKind.TOPICAL_SUMM else TaskScheme.MQM

    @property
    def source(self) -> str:
        return self.source_text if self.kind is TaskKind.TRANSLATION else self.passage

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is TaskKind.TRANSLATION:
            d.update(src_lang=self.src_lang, tgt_lang=self.tgt_lang, source_text=self.source_text)
        else:
            d.update(passage=self.passage, question=self.question)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaskInput":
        fields = ("source_text", "src_lang", "tgt_lang", "passage", "question")
        return cls(TaskKind(d["kind"]), **{k: d[k] for k in fields if k in d})


def language_name(code: str) -> str:
    return LANGUAGE_NAMES.get(code.lower(), code)


def load_templates(path: Optional[Path] = None) -> dict:
    if path is None:
        text = resources.files("llmrefine").joinpath("data/templates.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return json.loads(text)


DEFAULT_TEMPLATES = load_templates()


def _fields(task: TaskInput, **extra) -> dict:
    d = {
        "source": task.source_text,
        "src_lang": language_name(task.src_lang),
        "tgt_lang": language_name(task.tgt_lang),
        "passage": task.passage,
        "question": task.question,
    }
    d.update(extra)
    return d


def _render(template: str, task: TaskInput, **extra) -> str:
    return Template(template).substitute(_fields(task, **extra))


def build_generation_prompt(task: TaskInput, templates: Mapping = DEFAULT_TEMPLATES) -> str:
    return _render(templates[task.kind.value]["generate"], task)


def build_pinpoint_prompt(task: TaskInput, candidate: str, templates: Mapping = DEFAULT_TEMPLATES) -> str:
    return _render(templates[task.kind.value]["pinpoint"], task, candidate=candidate)


def build_refinement_prompt(
    task: TaskInput,
    candidate: str,
    feedback: Optional[FeedbackReport],
    mode: FeedbackMode,
    templates: Mapping = DEFAULT_TEMPLATES,
) -> str:
    """Refinement prompt for one of the four feedback granularities.

    Score-QE quotes the normalized score rounded to an integer. Fine-grained
    mode refuses error-free feedback, since such candidates are never refined.
    """
    mode = FeedbackMode(mode)
    t = templates[task.kind.value]
    middle = ""
    if mode is FeedbackMode.SCORE_QE:
        if feedback is None:
            raise ValueError("score_qe prompt needs a feedback report")
        score = round(normalize_score(score_report(feedback), feedback.scheme))
        middle = Template(t["score_qe"]).substitute(score=score)
    elif mode is FeedbackMode.BINARY_QE:
        middle = t["binary_qe"]
    elif mode is FeedbackMode.FINE_GRAINED:
        if feedback is None or is_error_free(feedback) or not feedback.spans:
            raise ValueError("fine-grained refinement needs at least one error span")
        middle = " ".join(render_feedback(feedback, quote='"').splitlines()) + " "
    prefix = _render(t["prefix"], task, candidate=candidate)
    return prefix + middle + t["improve"]


def detect_mode(prompt: str, task: TaskInput, candidate: str, templates: Mapping = DEFAULT_TEMPLATES) -> FeedbackMode:
    """Recover the feedback mode a refinement prompt was built with."""
    t = templates[task.kind.value]
    prefix = _render(t["prefix"], task, candidate=candidate)
    if not (prompt.startswith(prefix) and prompt.endswith(t["improve"])):
        raise ValueError("not a refinement prompt for this task and candidate")
    middle = prompt[len(prefix): len(prompt) - len(t["improve"])]
    if not middle:
        return FeedbackMode.IMPROVE
    if middle == t["binary_qe"]:
        return FeedbackMode.BINARY_QE
    head, _, tail = t["score_qe"].partition("$score")
    if middle.startswith(head) and middle.endswith(tail) and middle[len(head): len(middle) - len(tail)].isdigit():
        return FeedbackMode.SCORE_QE
    return FeedbackMode.FINE_GRAINED
