import pytest
from hypothesis import given
from hypothesis import strategies as st

from llmrefine.feedback import (
    ErrorSpan,
    FeedbackReport,
    InvalidReportError,
    ScoreRangeError,
    Severity,
    TaskScheme,
    is_error_free,
    normalize_score,
    score_report,
)


def mqm(*sevs):
    return FeedbackReport(tuple(ErrorSpan(f"s{i}", "x", s) for i, s in enumerate(sevs)), "", TaskScheme.MQM)


MAJOR, MINOR = Severity.MAJOR, Severity.MINOR


@pytest.mark.parametrize(
    "sevs, expected",
    [
        ((MAJOR,), -5.0),
        ((), 0.0),
        ((MINOR, MINOR, MINOR, MINOR, MAJOR), -9.0),
        ((MAJOR,) * 6, -25.0),
        ((MAJOR,) * 4 + (MINOR,) * 6, -25.0),
        ((MAJOR,) * 5, -25.0),
        ((Severity.NEUTRAL, MINOR), -1.0),
    ],
)
def test_score_report_mqm(sevs, expected):
    assert score_report(mqm(*sevs)) == expected


def test_six_major_is_brute_force_sum_then_clamp():
    total = sum(-5 for _ in range(6))
    assert total == -30
    assert score_report(mqm(*(MAJOR,) * 6)) == max(-25, total)


def test_custom_weights():
    weights = {MAJOR: 25.0, MINOR: 1.0, Severity.NEUTRAL: 0.0}
    assert score_report(mqm(MAJOR), weights) == -25.0


@pytest.mark.parametrize(
    "sev, rating", [(Severity.CRITICAL, 1), (MAJOR, 2), (Severity.MEDIUM, 3), (MINOR, 4)]
)
def test_summ_rating(sev, rating):
    r = FeedbackReport((ErrorSpan("why", "coherence", sev),), "", TaskScheme.SUMM)
    assert score_report(r) == rating


def test_summ_no_error_is_five():
    assert score_report(FeedbackReport((), "", TaskScheme.SUMM)) == 5.0


def test_summ_rejects_two_errors():
    r = FeedbackReport((ErrorSpan("a", "x", MAJOR), ErrorSpan("b", "y", MINOR)), "", TaskScheme.SUMM)
    with pytest.raises(InvalidReportError):
        score_report(r)


def test_mqm_rejects_summ_only_severity():
    with pytest.raises(InvalidReportError):
        score_report(mqm(Severity.CRITICAL))


@pytest.mark.parametrize(
    "raw, scheme, expected",
    [(-5, "mqm", 80.0), (-9, "mqm", 64.0), (2, "summ", 40.0), (0, "mqm", 100.0), (-25, "mqm", 0.0), (5, "summ", 100.0)],
)
def test_normalize(raw, scheme, expected):
    assert normalize_score(raw, scheme) == expected


@pytest.mark.parametrize("raw, scheme", [(1, "mqm"), (-25.5, "mqm"), (0, "summ"), (6, "summ")])
def test_normalize_out_of_range(raw, scheme):
    with pytest.raises(ScoreRangeError):
        normalize_score(raw, scheme)


def test_is_error_free():
    assert is_error_free(mqm())
    assert not is_error_free(mqm(MINOR))
    assert not is_error_free(FeedbackReport((), "garbage", TaskScheme.MQM, unparsed=("garbage",)))


def test_char_range_must_be_ordered():
    with pytest.raises(ValueError):
        ErrorSpan("x", "y", MAJOR, (3, 1))


def test_omission_has_no_range():
    with pytest.raises(ValueError):
        ErrorSpan("x", "y", MAJOR, (0, 1), omission=True)


def test_json_round_trip():
    r = FeedbackReport(
        (ErrorSpan("A meal", "mistranslation", MAJOR, (0, 6)), ErrorSpan("gone", "Missing-Answer", Severity.NEUTRAL, omission=True)),
        "raw",
        TaskScheme.MQM,
    )
    d = r.to_dict()
    assert d["spans"][0]["severity"] == "major"
    assert d["spans"][0]["char_range"] == [0, 6]
    assert "char_range" not in d["spans"][1]
    assert FeedbackReport.from_dict(d) == r


mqm_severity = st.sampled_from([MAJOR, MINOR, Severity.NEUTRAL])


@given(st.lists(mqm_severity, max_size=12), mqm_severity)
def test_adding_a_span_never_raises_score(sevs, extra):
    assert score_report(mqm(*sevs, extra)) <= score_report(mqm(*sevs))


@given(st.lists(mqm_severity, max_size=40))
def test_mqm_score_in_range(sevs):
    assert -25.0 <= score_report(mqm(*sevs)) <= 0.0


@given(st.integers(-25, 0), st.integers(-25, 0))
def test_normalize_strictly_increasing(a, b):
    if a < b:
        assert normalize_score(a, "mqm") < normalize_score(b, "mqm")


@given(st.floats(-25, 0), st.floats(-25, 0))
def test_normalize_monotone_on_reals(a, b):
    if a <= b:
        assert normalize_score(a, "mqm") <= normalize_score(b, "mqm")


@given(st.integers(1, 5), st.integers(1, 5))
def test_normalize_summ_increasing(a, b):
    if a < b:
        assert normalize_score(a, "summ") < normalize_score(b, "summ")
