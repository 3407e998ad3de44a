"""Fine-grained feedback types and the error scoring scheme.

Translation and long-form QA use MQM-like penalties (major 5, minor 1,
neutral 0, total clamped at -25). Topical summarization rates a response
1 to 5 according to the severity of its single error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

MQM_FLOOR = -25.0
SUMM_NO_ERROR = 5.0


class TaskScheme(str, enum.Enum):
    MQM = "mqm"
    SUMM = "summ"


class Severity(str, enum.Enum):
    MAJOR = "major"
    MINOR = "minor"
    NEUTRAL = "neutral"
    CRITICAL = "critical"
    MEDIUM = "medium"


MQM_WEIGHTS: Mapping[Severity, float] = {
    Severity.MAJOR: 5.0,
    Severity.MINOR: 1.0,
    Severity.NEUTRAL: 0.0,
}

SUMM_RATINGS: Mapping[Severity, float] = {
    Severity.CRITICAL: 1.0,
    Severity.MAJOR: 2.0,
    Severity.MEDIUM: 3.0,
    Severity.MINOR: 4.0,
}

SCORE_RANGES = {
    TaskScheme.MQM: (MQM_FLOOR, 0.0),
    TaskScheme.SUMM: (1.0, SUMM_NO_ERROR),
}


class InvalidReportError(ValueError):
    pass


class ScoreRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorSpan:
    """One pinpointed defect.

    ``char_range`` is a half-open ``(start, end)`` interval into the
    candidate text. Omissions (content missing from the candidate) have no
    range; their ``span_text`` describes what is missing.
    """

    span_text: str
    category: str
    severity: Severity
    char_range: Optional[tuple[int, int]] = None
    omission: bool = False

    def __post_init__(self):
        object.__setattr__(self, "severity", Severity(self.severity))
        if self.char_range is not None:
            start, end = self.char_range
            if not 0 <= start <= end:
                raise ValueError(f"bad char_range {self.char_range!r}")
            object.__setattr__(self, "char_range", (int(start), int(end)))
            if self.omission:
                raise ValueError("omission errors carry no char_range")

    def key(self) -> tuple[str, str, Severity]:
        return (self.span_text, self.category, self.severity)

    def to_dict(self) -> dict:
        d = {
            "span_text": self.span_text,
            "category": self.category,
            "severity": self.severity.value,
        }
        if self.char_range is not None:
            d["char_range"] = list(self.char_range)
        if self.omission:
            d["omission"] = True
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ErrorSpan":
        rng = d.get("char_range")
        return cls(
            span_text=d["span_text"],
            category=d["category"],
            severity=Severity(str(d["severity"]).lower()),
            char_range=tuple(rng) if rng is not None else None,
            omission=bool(d.get("omission", False)),
        )


@dataclass(frozen=True)
class FeedbackReport:
    """Structured feedback for one candidate.

    ``unparsed`` keeps model output lines the parser could not interpret.
    They carry no penalty but stop the report from counting as error-free.
    """

    spans: tuple[ErrorSpan, ...] = ()
    raw_text: str = ""
    scheme: TaskScheme = TaskScheme.MQM
    unparsed: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        object.__setattr__(self, "unparsed", tuple(self.unparsed))
        object.__setattr__(self, "scheme", TaskScheme(self.scheme))

    def to_dict(self) -> dict:
        d = {
            "spans": [s.to_dict() for s in self.spans],
            "raw_text": self.raw_text,
            "scheme": self.scheme.value,
        }
        if self.unparsed:
            d["unparsed"] = list(self.unparsed)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeedbackReport":
        return cls(
            spans=tuple(ErrorSpan.from_dict(s) for s in d.get("spans", ())),
            raw_text=d.get("raw_text", ""),
            scheme=TaskScheme(d.get("scheme", "mqm")),
            unparsed=tuple(d.get("unparsed", ())),
        )


def score_report(
    report: FeedbackReport,
    weights: Mapping[Severity, float] = MQM_WEIGHTS,
) -> float:
    """Raw quality score of a report; higher is better.

    MQM: minus the summed severity penalties, floored at -25.
    SUMM: the 1-5 rating of the single error, or 5 when there is none.
    """
    if report.scheme is TaskScheme.SUMM:
        if len(report.spans) > 1:
            raise InvalidReportError(
                f"summarization report carries {len(report.spans)} errors, at most one allowed"
            )
        if not report.spans:
            return SUMM_NO_ERROR
        sev = report.spans[0].severity
        if sev not in SUMM_RATINGS:
            raise InvalidReportError(f"severity {sev.value!r} has no summarization rating")
        return SUMM_RATINGS[sev]

    penalty = 0.0
    for span in report.spans:
        if span.severity not in weights:
            raise InvalidReportError(f"severity {span.severity.value!r} has no MQM weight")
        penalty += weights[span.severity]
    return max(MQM_FLOOR, -penalty)


def normalize_score(raw: float, scheme: TaskScheme) -> float:
    """Map a raw score onto 0-100.

    MQM maps [-25, 0] affinely onto [0, 100]. SUMM uses ``100 * raw / 5``
    so a rating of 2 reads as 40.
    """
    scheme = TaskScheme(scheme)
    lo, hi = SCORE_RANGES[scheme]
    if not lo <= raw <= hi:
        raise ScoreRangeError(f"raw score {raw} outside [{lo}, {hi}] for {scheme.value}")
    if scheme is TaskScheme.MQM:
        return 100.0 * (raw - MQM_FLOOR) / -MQM_FLOOR
    return 100.0 * raw / SUMM_NO_ERROR


def is_error_free(report: FeedbackReport) -> bool:
    return not report.spans and not report.unparsed
