"""Converting pinpoint-model feedback text to and from FeedbackReports.

Recognized line shapes::

    'A meal had been waiting' is a major mistranslation error.
    directed by Sam Raimi. in the answer is a Irrelevant error.
    Answer contains a Missing-Answer error, which misses <content> from passage
    This response contains a major coherence error. <explanation>
    Error type: mistranslation Major/minor: major Error location: A meal waited

Several "in the answer" errors may share one line. Lines that fit none of
these are kept on the report as ``unparsed``.
"""

from __future__ import annotations

import re
from typing import Iterable, Optional, Sequence

from .feedback import ErrorSpan, FeedbackReport, Severity, TaskScheme

NO_ERROR_PATTERNS: tuple[str, ...] = (
    r"\bno-error\b",
    r"Error location:\s*None\b",
    r"^\s*no errors?\.?\s*$",
)

_KEYWORDS = {
    TaskScheme.MQM: ("major", "minor", "neutral"),
    TaskScheme.SUMM: ("critical", "major", "medium", "minor"),
}


def _sev_group(scheme: TaskScheme) -> str:
    return "(?:(?P<sev>" + "|".join(_KEYWORDS[scheme]) + ") )?"


def _patterns(scheme: TaskScheme):
    sev = _sev_group(scheme)
    quoted = re.compile(
        r"^\s*(?P<q>['\"])(?P<span>.*)(?P=q) is an? " + sev + r"(?P<cat>.+?) error\.?\s*$",
        re.IGNORECASE,
    )
    in_answer = re.compile(
        r"\s*(?P<span>.+?) in the answer is an? " + sev + r"(?P<cat>.+?) error\.",
        re.IGNORECASE,
    )
    omission = re.compile(
        r"^\s*(?:\w+ )?contains an? " + sev
        + r"(?P<cat>\S+) error, which misses (?P<span>.*) from (?:the )?passage\.?\s*$",
        re.IGNORECASE,
    )
    whole = re.compile(
        r"^\s*This response contains an? " + sev.rstrip("?")
        + r"(?P<cat>.+?) error\.\s*(?P<span>.*?)\s*$",
        re.IGNORECASE,
    )
    labelled = re.compile(
        r"^\s*Error type:\s*(?P<cat>.+?)\s+Major/minor:\s*(?P<sev>\S+)\s+"
        r"Error location:\s*(?P<span>.*?)\s*$",
        re.IGNORECASE,
    )
    return quoted, in_answer, omission, whole, labelled


def infer_severity(category: str, omission: bool) -> Severity:
    """Severity for error lines that state none.

    ``Missing-Major-*`` / ``Missing-Minor-*`` carry their severity in the
    category name. Other omissions are recorded with neutral weight; other
    located errors default to minor.
    """
    low = category.lower()
    if low.startswith("missing-major"):
        return Severity.MAJOR
    if low.startswith("missing-minor"):
        return Severity.MINOR
    return Severity.NEUTRAL if omission else Severity.MINOR


def locate_span(candidate: str, span_text: str) -> Optional[tuple[int, int]]:
    """Half-open interval of the first occurrence of ``span_text``."""
    if not span_text:
        return None
    start = candidate.find(span_text)
    if start < 0:
        return None
    return (start, start + len(span_text))


def _severity(word: Optional[str], category: str, omission: bool) -> Severity:
    if word:
        return Severity(word.lower())
    return infer_severity(category, omission)


def parse_feedback(
    text: str,
    scheme: TaskScheme = TaskScheme.MQM,
    candidate: Optional[str] = None,
    no_error_patterns: Sequence[str] = NO_ERROR_PATTERNS,
) -> FeedbackReport:
    """Parse pinpoint-model output into a report. Never raises on bad input."""
    scheme = TaskScheme(scheme)
    quoted, in_answer, omission, whole, labelled = _patterns(scheme)
    no_error = [re.compile(p, re.IGNORECASE) for p in no_error_patterns]
    spans: list[ErrorSpan] = []
    unparsed: list[str] = []

    def add(span_text: str, category: str, severity: Severity, is_omission: bool = False):
        rng = None
        if not is_omission and candidate is not None:
            rng = locate_span(candidate, span_text)
        spans.append(ErrorSpan(span_text, category, severity, rng, omission=is_omission))

    for line in (text or "").splitlines():
        if not line.strip():
            continue
        if scheme is TaskScheme.SUMM:
            m = whole.match(line)
            if m:
                add(m["span"], m["cat"], Severity(m["sev"].lower()), is_omission=True)
                continue
        m = quoted.match(line)
        if m:
            add(m["span"], m["cat"], _severity(m["sev"], m["cat"], False))
            continue
        m = omission.match(line)
        if m:
            add(m["span"], m["cat"], _severity(m["sev"], m["cat"], True), is_omission=True)
            continue
        found = _match_in_answer(in_answer, line)
        if found:
            for span_text, sev, cat in found:
                add(span_text, cat, _severity(sev, cat, False))
            continue
        if any(p.search(line) for p in no_error):
            continue
        m = labelled.match(line)
        if m and m["sev"].lower() in _KEYWORDS[scheme]:
            add(m["span"], m["cat"], Severity(m["sev"].lower()))
            continue
        unparsed.append(line)

    return FeedbackReport(tuple(spans), text or "", scheme, tuple(unparsed))


def _match_in_answer(pattern: re.Pattern, line: str) -> list[tuple[str, Optional[str], str]]:
    # matches must tile the whole line, otherwise the line is unparsed
    out = []
    pos = 0
    while pos < len(line):
        m = pattern.match(line, pos)
        if not m:
            break
        out.append((m["span"], m["sev"], m["cat"]))
        pos = m.end()
    if line[pos:].strip():
        return []
    return out


def render_span(span: ErrorSpan, scheme: TaskScheme = TaskScheme.MQM, quote: str = "'") -> str:
    sev = span.severity.value
    if TaskScheme(scheme) is TaskScheme.SUMM:
        return f"This response contains a {sev} {span.category} error. {span.span_text}".rstrip()
    if span.omission:
        if infer_severity(span.category, True) is span.severity:
            head = f"Answer contains a {span.category} error"
        else:
            head = f"Answer contains a {sev} {span.category} error"
        return f"{head}, which misses {span.span_text} from passage"
    return f"{quote}{span.span_text}{quote} is a {sev} {span.category} error."


def render_feedback(report: FeedbackReport, quote: str = "'") -> str:
    """Inverse of :func:`parse_feedback`: one line per span; "" when error-free."""
    return "\n".join(render_span(s, report.scheme, quote) for s in report.spans)


def span_multiset(spans: Iterable[ErrorSpan]) -> dict:
    counts: dict = {}
    for s in spans:
        k = (*s.key(), s.omission)
        counts[k] = counts.get(k, 0) + 1
    return counts
