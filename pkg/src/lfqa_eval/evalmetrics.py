"""Detection and correction metrics plus sample-consistency aggregation.

Detection compares predicted erroneous sentence indices against gold ones.
Each prediction lands in exactly one bucket, checked in priority order:
exact (index in gold), adjacent (a gold index is one off), different.
Weighted accuracy combines the buckets with weights 1.0/0.5/0.1 over the
total number of predictions.

Correction works at the record level on flagged/clean verdicts from an
external error scorer: a record flagged before refinement and clean after
counts as corrected (TP); still flagged after is a miss (FN); newly flagged
is an introduced error (FP).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, label_answer
from .feedback import FeedbackSample
from .models import Aspect


@dataclass(frozen=True)
class DetectionWeights:
    exact: float = 1.0
    adjacent: float = 0.5
    different: float = 0.1

    def __post_init__(self):
        if min(self.exact, self.adjacent, self.different) < 0:
            raise ValueError("weights must be non-negative")


DEFAULT_WEIGHTS = DetectionWeights()


@dataclass
class DetectionCounts:
    exact: int = 0
    adjacent: int = 0
    different: int = 0

    @property
    def total_predicted(self) -> int:
        return self.exact + self.adjacent + self.different

    def add(self, other: "DetectionCounts") -> None:
        self.exact += other.exact
        self.adjacent += other.adjacent
        self.different += other.different


def classify_detections(
    predicted: Iterable[int], gold: Iterable[int], n_sentences: int
) -> DetectionCounts:
    """Bucket each predicted index against gold: exact > adjacent > different."""
    predicted = set(predicted)
    gold = set(gold)
    for idx in predicted | gold:
        if not 0 <= idx < n_sentences:
            raise ValueError(f"sentence index {idx} out of range 0..{n_sentences - 1}")
    counts = DetectionCounts()
    for p in predicted:
        if p in gold:
            counts.exact += 1
        elif (p - 1) in gold or (p + 1) in gold:
            counts.adjacent += 1
        else:
            counts.different += 1
    return counts


def weighted_accuracy(
    counts: DetectionCounts, weights: DetectionWeights = DEFAULT_WEIGHTS
) -> float:
    """Weighted fraction of predictions per bucket; undefined with none."""
    if counts.total_predicted == 0:
        raise ValueError("no predictions: weighted accuracy undefined")
    return (
        weights.exact * counts.exact
        + weights.adjacent * counts.adjacent
        + weights.different * counts.different
    ) / counts.total_predicted


# ---------------------------------------------------------------------------
# Correction precision/recall/F1


@dataclass
class CorrectionReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    degenerate: bool  # no record was flagged at baseline

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": self.degenerate,
        }


def correction_prf(
    baseline: Mapping[str, bool], refined: Mapping[str, bool]
) -> CorrectionReport:
    """Score error correction between baseline and refined flag maps.

    TP: flagged at baseline, clean after. FN: flagged in both. FP: clean at
    baseline, flagged after (an introduced error). 0/0 ratios collapse to 0.
    """
    if set(baseline) != set(refined):
        missing = set(baseline) ^ set(refined)
        raise ValueError(f"baseline/refined key sets differ on {len(missing)} ids")
    tp = sum(1 for k, flagged in baseline.items() if flagged and not refined[k])
    fn = sum(1 for k, flagged in baseline.items() if flagged and refined[k])
    fp = sum(1 for k, flagged in baseline.items() if not flagged and refined[k])
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return CorrectionReport(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        degenerate=tp + fn == 0,
    )


# ---------------------------------------------------------------------------
# Error-score reporting (external scorer output)


@dataclass(frozen=True)
class ErrorScoreRecord:
    record_id: str
    error_score: float

    def __post_init__(self):
        if self.error_score < 0:
            raise ValueError("error_score must be non-negative")

    @property
    def flagged(self) -> bool:
        return self.error_score > 0


def error_report(scores: Sequence[ErrorScoreRecord]) -> tuple[float, float]:
    """(% of flagged records, mean error score over all records)."""
    if not scores:
        raise ValueError("no score records")
    flagged = sum(1 for s in scores if s.flagged)
    mean = sum(s.error_score for s in scores) / len(scores)
    return 100.0 * flagged / len(scores), mean


# ---------------------------------------------------------------------------
# Sample-consistency (support) aggregation


VERDICT_MAPPING = {"yes": 1.0, "no": 0.0, "not_applicable": 0.5}
_VERDICT_ALIASES = {"n/a": "not_applicable", "na": "not_applicable"}


def normalize_verdict(raw: str) -> str:
    verdict = raw.strip().lower()
    verdict = _VERDICT_ALIASES.get(verdict, verdict)
    if verdict not in VERDICT_MAPPING:
        raise ValueError(f"unknown verdict '{raw}'")
    return verdict


@dataclass(frozen=True)
class SupportJudgment:
    """Per-sample yes/no/not_applicable verdicts for one sentence."""

    sentence_index: int
    verdicts: tuple[str, ...]

    def __post_init__(self):
        if not self.verdicts:
            raise ValueError("at least one verdict is required")


@dataclass
class SelfCheckReport:
    per_sentence: list[float]
    answer_support: float
    answer_inconsistency: float  # 1 - support, for consumers that rank by error

    def to_dict(self) -> dict:
        return {
            "per_sentence": self.per_sentence,
            "answer_support": self.answer_support,
            "answer_inconsistency": self.answer_inconsistency,
        }


def selfcheck_aggregate(
    judgments: Sequence[SupportJudgment],
    mapping: Mapping[str, float] = VERDICT_MAPPING,
) -> SelfCheckReport:
    """Average mapped verdicts per sentence, then across the answer.

    Both orientations are reported: support (higher = better supported) and
    its complement.
    """
    if not judgments:
        raise ValueError("no judgments")
    per_sentence = []
    for judgment in judgments:
        mapped = [mapping[normalize_verdict(v)] for v in judgment.verdicts]
        per_sentence.append(sum(mapped) / len(mapped))
    support = sum(per_sentence) / len(per_sentence)
    return SelfCheckReport(
        per_sentence=per_sentence,
        answer_support=support,
        answer_inconsistency=1.0 - support,
    )


# ---------------------------------------------------------------------------
# Corpus-level detection evaluation


@dataclass
class DetectionEvalReport:
    counts: DetectionCounts
    weighted_accuracy: float | None
    n_records: int          # records actually evaluated
    misses: int             # records with gold errors but no predictions
    skipped: list[str] = field(default_factory=list)  # ids absent from the corpus

    def to_dict(self) -> dict:
        return {
            "exact": self.counts.exact,
            "adjacent": self.counts.adjacent,
            "different": self.counts.different,
            "total_predicted": self.counts.total_predicted,
            "weighted_accuracy": self.weighted_accuracy,
            "n_records": self.n_records,
            "misses": self.misses,
            "skipped": list(self.skipped),
        }


def detection_eval(
    corpus: Corpus,
    predictions: Mapping[str, FeedbackSample],
    answer_indices: Mapping[str, int] | int = 0,
    weights: DetectionWeights = DEFAULT_WEIGHTS,
    aspect: Aspect = Aspect.COMPLETENESS,
    invert: bool = False,
) -> DetectionEvalReport:
    """Evaluate predicted Incomplete sentences against annotated gold labels.

    Gold labels come from projecting the corpus annotations of ``aspect``
    onto each answer's sentences. ``answer_indices`` selects which answer a
    prediction refers to (a single index for all records or a per-record
    map). Records with gold errors but an empty prediction count as misses
    and stay out of the accuracy denominator. ``invert=True`` classifies
    gold sentences against the predictions instead.
    """
    totals = DetectionCounts()
    misses = 0
    evaluated = 0
    skipped: list[str] = []
    for record_id, sample in predictions.items():
        record = corpus.get(record_id)
        if record is None:
            skipped.append(record_id)
            continue
        idx = (
            answer_indices.get(record_id, 0)
            if isinstance(answer_indices, Mapping)
            else answer_indices
        )
        if not 0 <= idx < len(record.answers):
            raise ValueError(
                f"record '{record_id}': answer index {idx} out of range"
            )
        labeling = label_answer(record, idx, aspect)
        if len(sample.tags) != labeling.n_sentences:
            raise ValueError(
                f"record '{record_id}': prediction has {len(sample.tags)} tags "
                f"but the answer has {labeling.n_sentences} sentences"
            )
        gold = {i for i, err in enumerate(labeling.errors) if err}
        predicted = set(sample.incomplete_indices())
        evaluated += 1
        if gold and not predicted:
            misses += 1
            continue
        if invert:
            predicted, gold = gold, predicted
        totals.add(classify_detections(predicted, gold, labeling.n_sentences))
    accuracy = (
        weighted_accuracy(totals, weights) if totals.total_predicted else None
    )
    return DetectionEvalReport(
        counts=totals,
        weighted_accuracy=accuracy,
        n_records=evaluated,
        misses=misses,
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Pluggable error scorer


def load_error_scores(lines: Iterable[dict]) -> list[ErrorScoreRecord]:
    """Build score records from parsed JSONL objects {record_id, error_score}."""
    scores = []
    for obj in lines:
        if "record_id" not in obj or "error_score" not in obj:
            raise ValueError("score line needs record_id and error_score")
        scores.append(
            ErrorScoreRecord(
                record_id=str(obj["record_id"]),
                error_score=float(obj["error_score"]),
            )
        )
    return scores


def flag_map(scores: Sequence[ErrorScoreRecord]) -> dict[str, bool]:
    flags: dict[str, bool] = {}
    for score in scores:
        if score.record_id in flags:
            raise ValueError(f"duplicate record_id '{score.record_id}' in scores")
        flags[score.record_id] = score.flagged
    return flags


GRADING_PROMPT = (
    "Rate the answer below for errors. Respond with a single non-negative "
    "number: 0 if the answer is free of errors, larger numbers for more "
    "severe errors.\n\nQuestion: {question}\n\nAnswer: {answer}\n\nScore:"
)


def score_with_client(
    items: Sequence[tuple[str, str, str]],
    client,
    *,
    temperature: float = 0.0,
    max_tokens: int = 16,
    prompt_template: str = GRADING_PROMPT,
) -> list[ErrorScoreRecord]:
    """Grade (record_id, question, answer) triples with a generation backend.

    The backend must reply with a leading number; anything else is an error.
    External score files are the primary interface; this is the fallback for
    backends that can grade directly.
    """
    from .genclient import GenerationRequest  # local import to keep deps one-way

    scores = []
    for record_id, question, answer in items:
        prompt = prompt_template.format(question=question, answer=answer)
        result = client.generate(
            GenerationRequest(
                prompt=prompt,
                max_tokens=max_tokens,
                temperature=temperature,
                n_samples=1,
                metadata=record_id,
            )
        )
        text = result.texts[0].strip()
        try:
            value = float(text.split()[0])
        except (IndexError, ValueError):
            raise ValueError(
                f"record '{record_id}': scorer reply is not a number: {text[:40]!r}"
            ) from None
        scores.append(ErrorScoreRecord(record_id=record_id, error_score=value))
    return scores
