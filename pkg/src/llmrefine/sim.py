"""Synthetic refinement environment with planted errors.

A clean sentence is a sequence of distinct vocabulary words. Major errors
replace a word with an unrelated one; minor errors double its last letter.
The oracle feedback model diffs a candidate against the clean sentence word
by word, and the refiner repairs fed-back errors stochastically while
occasionally introducing new minor ones.

Refiner success depends partly on the current text through a stable hash
(``context_stickiness``): retrying on an unchanged output tends to fail the
same way, while any accepted edit re-rolls the odds. The per-attempt fix
rate averaged over contexts is still ``fix_prob``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .feedback import ErrorSpan, FeedbackReport, Severity, TaskScheme
from .prompting import TaskInput

VOCAB = (
    "apple birch cedar delta ember falcon garden harbor island jungle kettle "
    "lantern meadow needle orchard pepper quarry river saddle timber umbrella "
    "valley willow yarrow zephyr anchor basket candle dragon engine feather "
    "glacier hammer igloo jacket kitten ladder mirror nectar oyster pillow "
    "quiver rocket silver tunnel velvet walnut yogurt badger cobalt dinner "
    "fossil goblet hollow insect jigsaw marble nutmeg parrot rabbit"
).split()

WRONG = (
    "blunder crimson dwindle frolic gossip hiccup jostle muddle nibble "
    "puddle quibble rumble squabble tumble waffle wobble zigzag fiddle "
    "giggle jumble"
).split()

MAJOR_CATEGORY = "mistranslation"
MINOR_CATEGORY = "spelling"


def minor_variant(word: str) -> str:
    return word + word[-1]


@dataclass(frozen=True)
class Corruption:
    slot: int
    char_range: tuple[int, int]
    original_fragment: str
    corrupted_fragment: str
    severity: Severity
    category: str


@dataclass(frozen=True)
class PlantedInstance:
    seed: int
    words: tuple[str, ...]
    corruptions: tuple[Corruption, ...]

    @property
    def clean_text(self) -> str:
        return join_words(self.words)

    @property
    def corrupted_text(self) -> str:
        words = list(self.words)
        for c in self.corruptions:
            words[c.slot] = c.corrupted_fragment
        return join_words(words)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "clean_text": self.clean_text,
            "corrupted_text": self.corrupted_text,
            "corruptions": [
                {**asdict(c), "char_range": list(c.char_range), "severity": c.severity.value}
                for c in self.corruptions
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlantedInstance":
        words = tuple(split_words(d["clean_text"]))
        cors = tuple(
            Corruption(
                slot=c["slot"],
                char_range=tuple(c["char_range"]),
                original_fragment=c["original_fragment"],
                corrupted_fragment=c["corrupted_fragment"],
                severity=Severity(c["severity"]),
                category=c["category"],
            )
            for c in d["corruptions"]
        )
        return cls(int(d["seed"]), words, cors)


def join_words(words: Sequence[str]) -> str:
    return " ".join(words) + "."


def split_words(text: str) -> list[str]:
    return text[:-1].split(" ") if text.endswith(".") else text.split(" ")


def word_offsets(words: Sequence[str]) -> list[tuple[int, int]]:
    out, pos = [], 0
    for w in words:
        out.append((pos, pos + len(w)))
        pos += len(w) + 1
    return out


def make_instance(seed: int, n_major: int, n_minor: int, length: int = 12) -> PlantedInstance:
    if n_major < 0 or n_minor < 0:
        raise ValueError("error counts must be non-negative")
    if n_major + n_minor > length:
        raise ValueError(f"{n_major + n_minor} errors requested but only {length} corruption sites")
    if length > len(VOCAB):
        raise ValueError(f"sentence length {length} exceeds vocabulary size {len(VOCAB)}")
    rng = np.random.default_rng(seed)
    words = tuple(VOCAB[i] for i in rng.choice(len(VOCAB), size=length, replace=False))
    slots = sorted(int(s) for s in rng.choice(length, size=n_major + n_minor, replace=False))
    majors = set(int(s) for s in rng.permutation(slots)[:n_major])
    wrong = list(rng.permutation(WRONG))

    corrupted = list(words)
    plan = []
    for slot in slots:
        if slot in majors:
            frag, sev, cat = wrong.pop(), Severity.MAJOR, MAJOR_CATEGORY
        else:
            frag, sev, cat = minor_variant(words[slot]), Severity.MINOR, MINOR_CATEGORY
        corrupted[slot] = frag
        plan.append((slot, frag, sev, cat))
    offsets = word_offsets(corrupted)
    cors = tuple(
        Corruption(slot, offsets[slot], words[slot], frag, sev, cat) for slot, frag, sev, cat in plan
    )
    return PlantedInstance(seed, words, cors)


@dataclass(frozen=True)
class SimParams:
    detection_prob: float = 1.0
    false_positive_rate: float = 0.0
    fix_prob: float = 0.6
    break_prob: float = 0.1
    context_stickiness: float = 0.8
    seed: int = 0

    def __post_init__(self):
        for name in ("detection_prob", "fix_prob", "break_prob", "context_stickiness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.false_positive_rate < 0:
            raise ValueError("false_positive_rate must be non-negative")


def true_errors(instance: PlantedInstance, candidate: str) -> list[ErrorSpan]:
    """Every word of ``candidate`` that differs from the clean sentence."""
    words = split_words(candidate)
    clean = instance.words
    offsets = word_offsets(words)
    spans = []
    for slot, (w, ref) in enumerate(zip(words, clean)):
        if w == ref:
            continue
        if w == minor_variant(ref):
            sev, cat = Severity.MINOR, MINOR_CATEGORY
        else:
            sev, cat = Severity.MAJOR, MAJOR_CATEGORY
        spans.append(ErrorSpan(w, cat, sev, offsets[slot]))
    if len(words) != len(clean):
        spans.append(ErrorSpan("word count differs from source", "omission", Severity.MAJOR, omission=True))
    return spans


def oracle_feedback(
    instance: PlantedInstance,
    candidate: str,
    params: SimParams,
    rng: np.random.Generator,
) -> FeedbackReport:
    found = [s for s in true_errors(instance, candidate) if params.detection_prob >= 1.0 or rng.random() < params.detection_prob]
    if params.false_positive_rate > 0:
        words = split_words(candidate)
        offsets = word_offsets(words)
        clean_slots = [i for i, (w, ref) in enumerate(zip(words, instance.words)) if w == ref]
        k = min(int(rng.poisson(params.false_positive_rate)), len(clean_slots))
        for slot in sorted(int(s) for s in rng.choice(clean_slots, size=k, replace=False)) if k else ():
            found.append(ErrorSpan(words[slot], "style", Severity.MINOR, offsets[slot]))
        found.sort(key=lambda s: s.char_range or (len(candidate), 0))
    return FeedbackReport(tuple(found), "", TaskScheme.MQM)


def context_uniform(seed: int, text: str, slot: int) -> float:
    """Stable pseudo-uniform in [0, 1) keyed on (seed, text, slot)."""
    h = hashlib.blake2b(f"{seed}\x1f{slot}\x1f{text}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(h, "big") / 2.0**64


def stochastic_refiner(
    instance: PlantedInstance,
    candidate: str,
    feedback: FeedbackReport,
    params: SimParams,
    rng: np.random.Generator,
) -> str:
    words = split_words(candidate)
    if len(words) != len(instance.words):
        return instance.corrupted_text
    offsets = word_offsets(words)
    slot_at = {off: i for i, off in enumerate(offsets)}
    s, p = params.context_stickiness, params.fix_prob
    for span in feedback.spans:
        slot = slot_at.get(span.char_range)
        if slot is None or words[slot] == instance.words[slot]:
            continue
        sticky = 1.0 if context_uniform(instance.seed ^ params.seed, candidate, slot) < p else 0.0
        q = s * sticky + (1.0 - s) * p
        if rng.random() < q:
            words[slot] = instance.words[slot]
    if params.break_prob > 0 and rng.random() < params.break_prob:
        clean = [i for i, (w, ref) in enumerate(zip(words, instance.words)) if w == ref]
        if clean:
            slot = clean[int(rng.integers(len(clean)))]
            words[slot] = minor_variant(words[slot])
    return join_words(words)


@dataclass
class SimEnvironment:
    """Generator, feedback model and refiner bound to one planted instance.

    All three share a single RNG, so a run is reproducible from
    ``(instance, params, rng_seed)``.
    """

    instance: PlantedInstance
    params: SimParams = field(default_factory=SimParams)
    rng_seed: Optional[int] = None

    def __post_init__(self):
        seed = self.params.seed if self.rng_seed is None else self.rng_seed
        self.rng = np.random.default_rng([seed, self.instance.seed])

    @property
    def task(self) -> TaskInput:
        return TaskInput.translation("synthetic", "synthetic", self.instance.clean_text)

    def generator(self, task: TaskInput) -> str:
        return self.instance.corrupted_text

    def feedback_model(self, task: TaskInput, candidate: str) -> FeedbackReport:
        return oracle_feedback(self.instance, candidate, self.params, self.rng)

    def refiner(self, task, candidate, feedback, mode, decoding) -> str:
        return stochastic_refiner(self.instance, candidate, feedback, self.params, self.rng)


def instances_to_jsonl(instances: Sequence[PlantedInstance]) -> str:
    return "".join(json.dumps(i.to_dict(), ensure_ascii=False) + "\n" for i in instances)


def instances_from_jsonl(text: str) -> list[PlantedInstance]:
    return [PlantedInstance.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
