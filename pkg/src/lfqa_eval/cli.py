"""Command-line front end.

Subcommands:

- validate      schema-check a corpus file, listing every violation
- stats         span-granularity distribution per aspect + answer-length histogram
- score         per-answer scorecards + per-domain preference/score report
- agreement     per-domain preference agreement (Krippendorff's alpha)
- feedback      sample feedback per answer and keep the most consistent output
- refine        refine answers (improve / generic / eir modes)
- eval-detect   weighted detection accuracy of predictions against a corpus
- eval-correct  error-rate report + correction precision/recall/F1 from score files
- selfcheck     aggregate per-sentence support verdicts over sampled answers

Exit codes: 0 ok, 1 data/config error, 2 usage error, 3 some records failed.

Configuration is a plain-text ``key = value`` file ('#' comments allowed);
command-line flags override file values, which override the defaults.
Credentials are only ever read from the environment variable a backend's
``auth_env`` key names.
"""
from __future__ import annotations

import argparse
import json
import sys
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    Corpus,
    CorpusError,
    classify_granularity,
    load_corpus,
    record_from_dict,
    validate_record,
)
from .evalmetrics import (
    DEFAULT_WEIGHTS,
    DetectionCounts,
    DetectionWeights,
    SupportJudgment,
    correction_prf,
    detection_eval,
    error_report,
    flag_map,
    load_error_scores,
    selfcheck_aggregate,
    weighted_accuracy,
)
from .feedback import FeedbackSample, run_feedback
from .genclient import BackendConfig, GenerationClient, GenerationError
from .models import Aspect, QARecord, SpanGranularity
from .refine import REFINE_TEMPERATURE, RefineMode, refine_answer, run_eir
from .scoring import domain_report, format_aspect_table, format_domain_table, score_record
from .segment import segment_sentences


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration


_SCALAR_KEYS = {
    "n_samples": int,
    "consistency_threshold": float,
    "weight_exact": float,
    "weight_adjacent": float,
    "weight_different": float,
    "workers": int,
}

_BACKEND_KEYS = {
    "kind": str,
    "endpoint_url": str,
    "model_name": str,
    "auth_env": str,
    "timeout": float,
    "max_retries": int,
    "max_in_flight": int,
    "fixture_dir": str,
    "native_n": bool,
    "temperature": float,
    "max_tokens": int,
}

_ROLES = ("feedback", "refine", "scorer")


@dataclass
class CliConfig:
    n_samples: int = 20
    consistency_threshold: float = 0.80
    weights: DetectionWeights = DEFAULT_WEIGHTS
    workers: int = 4
    backends: dict | None = None          # role -> BackendConfig
    temperatures: dict | None = None      # role -> float
    max_tokens: dict | None = None        # role -> int

    def __post_init__(self):
        self.backends = self.backends or {}
        self.temperatures = self.temperatures or {}
        self.max_tokens = self.max_tokens or {}
        if not 0.0 <= self.consistency_threshold <= 1.0:
            raise ConfigError("consistency_threshold must be in [0, 1]")


def _coerce(key: str, raw: str, kind: type):
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}' expects {kind.__name__}, got '{raw}'") from None


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {ln}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | None, overrides: dict | None = None) -> CliConfig:
    """Defaults <- config file <- overrides, rejecting unknown keys."""
    values: dict[str, str] = {}
    if path:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = str(value)

    scalars: dict = {}
    role_settings: dict[str, dict] = defaultdict(dict)
    for key, raw in values.items():
        if key in _SCALAR_KEYS:
            scalars[key] = _coerce(key, raw, _SCALAR_KEYS[key])
            continue
        role, _, sub = key.partition(".")
        if role in _ROLES and sub in _BACKEND_KEYS:
            role_settings[role][sub] = _coerce(key, raw, _BACKEND_KEYS[sub])
            continue
        raise ConfigError(f"unknown config key '{key}'")

    backends: dict[str, BackendConfig] = {}
    temperatures: dict[str, float] = {}
    max_tokens: dict[str, int] = {}
    for role, settings in role_settings.items():
        if "temperature" in settings:
            temperatures[role] = settings.pop("temperature")
        if "max_tokens" in settings:
            max_tokens[role] = settings.pop("max_tokens")
        if settings and "kind" not in settings:
            raise ConfigError(f"backend '{role}' is configured but has no '{role}.kind'")
        if settings:
            backend = BackendConfig(**settings)
            try:
                backend.validate()
            except ValueError as exc:
                raise ConfigError(f"backend '{role}': {exc}") from None
            backends[role] = backend

    weights = DetectionWeights(
        exact=scalars.pop("weight_exact", DEFAULT_WEIGHTS.exact),
        adjacent=scalars.pop("weight_adjacent", DEFAULT_WEIGHTS.adjacent),
        different=scalars.pop("weight_different", DEFAULT_WEIGHTS.different),
    )
    return CliConfig(
        weights=weights,
        backends=backends,
        temperatures=temperatures,
        max_tokens=max_tokens,
        **scalars,
    )


def _apply_backend_flag(config: CliConfig, flag: str | None) -> CliConfig:
    """--backend scripted:DIR points every role at one fixture directory."""
    if not flag:
        return config
    if not flag.startswith("scripted:"):
        raise ConfigError(
            f"--backend expects 'scripted:DIR' (http backends belong in the config file), got '{flag}'"
        )
    fixture_dir = flag[len("scripted:") :]
    if not fixture_dir:
        raise ConfigError("--backend scripted: needs a directory")
    scripted = BackendConfig(kind="scripted", fixture_dir=fixture_dir)
    config.backends = {role: scripted for role in _ROLES}
    return config


def _client_for(config: CliConfig, role: str) -> GenerationClient:
    backend = config.backends.get(role)
    if backend is None:
        raise ConfigError(
            f"no '{role}' backend configured; set {role}.kind in the config "
            "file or pass --backend scripted:DIR"
        )
    return GenerationClient(backend)


def _temperature_for(config: CliConfig, role: str) -> float:
    backend = config.backends.get(role)
    if role in config.temperatures:
        return config.temperatures[role]
    if backend is not None and backend.kind == "scripted":
        return 0.0  # fixtures are keyed by prompt only
    if role == "refine":
        return REFINE_TEMPERATURE
    raise ConfigError(
        f"{role}.temperature is required for http backends (no default)"
    )


# ---------------------------------------------------------------------------
# Small I/O helpers


def _read_jsonl(path: str) -> list[dict]:
    lines = []
    with open(path, encoding="utf-8") as handle:
        for ln, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                lines.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON: {exc.msg}", line=ln) from None
    return lines


def _write_lines(path: str | None, lines: list[str]) -> None:
    if path is None:
        for line in lines:
            print(line)
        return
    with open(path, "w", encoding="utf-8") as handle:
        for line in lines:
            handle.write(line + "\n")


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False)


# ---------------------------------------------------------------------------
# validate


def _cmd_validate(args) -> int:
    problems: list[str] = []
    count = 0
    seen: dict[str, int] = {}
    with open(args.corpus, encoding="utf-8") as handle:
        for ln, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            count += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {ln}: malformed JSON: {exc.msg}")
                continue
            try:
                record = record_from_dict(obj)
            except CorpusError as exc:
                problems.append(f"line {ln}: {exc}")
                continue
            if record.id in seen:
                problems.append(
                    f"line {ln}: duplicate id '{record.id}' (first seen on line {seen[record.id]})"
                )
            else:
                seen[record.id] = ln
            problems.extend(
                f"line {ln}: record '{record.id}': {v}" for v in validate_record(record)
            )
    for problem in problems:
        print(problem, file=sys.stderr)
    if problems:
        print(f"{count} records checked, {len(problems)} violations")
        return 1
    print(f"{count} records OK")
    return 0


# ---------------------------------------------------------------------------
# stats


_LENGTH_BUCKET = 50
_LENGTH_BUCKETS = 10  # final bucket is open-ended


def _length_bucket(words: int) -> str:
    idx = min(words // _LENGTH_BUCKET, _LENGTH_BUCKETS)
    if idx == _LENGTH_BUCKETS:
        return f"{_LENGTH_BUCKET * _LENGTH_BUCKETS}+"
    return f"{idx * _LENGTH_BUCKET}-{(idx + 1) * _LENGTH_BUCKET - 1}"


def span_granularity_stats(corpus: Corpus) -> dict[str, dict]:
    """Per-aspect granularity distribution; whole-answer marks span the text."""
    counts: dict[Aspect, Counter] = {a: Counter() for a in Aspect}
    for record in corpus:
        question_sentences = segment_sentences(record.question)
        answer_sentences = [segment_sentences(a.text) for a in record.answers]
        for ann in record.annotations:
            if ann.targets_question:
                text, sentences = record.question, question_sentences
            else:
                text = record.answers[ann.answer_index].text
                sentences = answer_sentences[ann.answer_index]
            start, end = ann.span if ann.span is not None else (0, len(text))
            granularity = classify_granularity(start, end, sentences, text)
            counts[ann.aspect][granularity] += 1

    rows: dict[str, dict] = {}
    percent_rows = []
    for aspect in Aspect:
        total = sum(counts[aspect].values())
        if total == 0:
            continue
        pct = {
            g.value: 100.0 * counts[aspect][g] / total for g in SpanGranularity
        }
        rows[aspect.value] = {"n_spans": total, **pct}
        percent_rows.append(pct)
    if percent_rows:
        rows["average"] = {
            "n_spans": sum(r["n_spans"] for r in rows.values()),
            **{
                g.value: sum(p[g.value] for p in percent_rows) / len(percent_rows)
                for g in SpanGranularity
            },
        }
    return rows


def answer_length_histogram(corpus: Corpus) -> dict[str, Counter]:
    histogram: dict[str, Counter] = defaultdict(Counter)
    for record in corpus:
        for answer in record.answers:
            histogram[answer.source.value][_length_bucket(len(answer.text.split()))] += 1
    return dict(histogram)


def _cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    spans = span_granularity_stats(corpus)
    lengths = answer_length_histogram(corpus)

    header = f"{'Aspect':<24}{'Spans':>7}{'Phrase':>10}{'Sentence':>10}{'Multi':>10}"
    print(header)
    print("-" * len(header))
    for aspect, row in spans.items():
        print(
            f"{aspect:<24}{row['n_spans']:>7}"
            f"{row['phrase']:>9.2f}%{row['sentence']:>9.2f}%{row['multi_sentence']:>9.2f}%"
        )
    print()
    print(f"{'Answer words':<12}" + "".join(f"{s:>10}" for s in sorted(lengths)))
    buckets = sorted(
        {b for counter in lengths.values() for b in counter},
        key=lambda b: int(b.split("-")[0].rstrip("+")),
    )
    for bucket in buckets:
        print(
            f"{bucket:<12}"
            + "".join(f"{lengths[s].get(bucket, 0):>10}" for s in sorted(lengths))
        )

    if args.out:
        lines = [
            _dump({"kind": "span_granularity", "aspect": aspect, **row})
            for aspect, row in spans.items()
        ]
        lines += [
            _dump(
                {"kind": "answer_length", "source": source, "bucket": bucket, "count": n}
            )
            for source, counter in sorted(lengths.items())
            for bucket, n in sorted(
                counter.items(), key=lambda kv: int(kv[0].split("-")[0].rstrip("+"))
            )
        ]
        _write_lines(args.out, lines)
    return 0


# ---------------------------------------------------------------------------
# score / agreement


def _cmd_score(args) -> int:
    corpus = load_corpus(args.corpus)
    report = domain_report(corpus)
    print(format_domain_table(report))
    print()
    print(format_aspect_table(report))
    if args.out:
        lines = [
            _dump(card.to_dict())
            for record in corpus
            for card in score_record(record)
        ]
        _write_lines(args.out, lines)
    if args.report:
        _write_lines(
            args.report,
            [_dump(row.to_dict()) for row in report.rows + [report.average]],
        )
    return 0


def _cmd_agreement(args) -> int:
    corpus = load_corpus(args.corpus)
    report = domain_report(corpus)
    header = f"{'Category':<14}{'Samples':>8}{'Alpha':>8}"
    print(header)
    print("-" * len(header))
    rows = []
    for row in report.rows + [report.average]:
        alpha = "-" if row.alpha is None else f"{row.alpha:.2f}"
        print(f"{row.domain:<14}{row.n_records:>8}{alpha:>8}")
        rows.append(
            _dump(
                {"domain": row.domain, "n_records": row.n_records, "alpha": row.alpha}
            )
        )
    if args.out:
        _write_lines(args.out, rows)
    return 0


# ---------------------------------------------------------------------------
# batch runner (feedback / refine)


def _select_answers(record: QARecord, selector: str) -> list[int]:
    if selector == "all":
        return list(range(len(record.answers)))
    if selector in ("human", "model"):
        return [i for i, a in enumerate(record.answers) if a.source.value == selector]
    try:
        idx = int(selector)
    except ValueError:
        raise ConfigError(f"--answer must be all, human, model, or an index, got '{selector}'") from None
    return [idx] if 0 <= idx < len(record.answers) else []


def _existing_lines(path: str) -> dict[tuple[str, int], str]:
    done = {}
    if Path(path).exists():
        for obj in _read_jsonl(path):
            done[(str(obj.get("record_id")), int(obj.get("answer_index", 0)))] = _dump(obj)
    return done


def _run_batch(args, config: CliConfig, work) -> int:
    """Run work(record, answer_index) -> output line over the corpus.

    Results are written in corpus order whatever the completion order;
    failures are reported per record and turn the exit code to 3.
    """
    corpus = load_corpus(args.corpus)
    targets = [
        (record, idx)
        for record in corpus
        for idx in _select_answers(record, args.answer)
    ]
    existing = _existing_lines(args.out) if args.resume else {}
    failures: list[str] = []
    futures = {}
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for record, idx in targets:
            key = (record.id, idx)
            if key not in existing:
                futures[key] = pool.submit(work, record, idx)
        lines: list[str] = []
        for record, idx in targets:
            key = (record.id, idx)
            if key in existing:
                lines.append(existing[key])
                continue
            try:
                lines.append(futures[key].result())
            except Exception as exc:  # per-record isolation
                failures.append(f"{record.id}#{idx}: {exc}")
    _write_lines(args.out, lines)
    for failure in failures:
        print(f"failed: {failure}", file=sys.stderr)
    print(
        f"{len(lines)} results written to {args.out or 'stdout'}"
        + (f", {len(failures)} failed" if failures else "")
    )
    return 3 if failures else 0


def _cmd_feedback(args) -> int:
    config = _config_from_args(args)
    client = _client_for(config, "feedback")
    temperature = _temperature_for(config, "feedback")

    def work(record: QARecord, idx: int) -> str:
        result = run_feedback(
            record.question,
            record.answers[idx].text,
            client,
            config.n_samples,
            temperature=temperature,
            max_tokens=config.max_tokens.get("feedback"),
            low_confidence_threshold=config.consistency_threshold,
            metadata=record.id,
        )
        return _dump(
            {"record_id": record.id, "answer_index": idx, **result.to_dict(args.audit)}
        )

    return _run_batch(args, config, work)


def _cmd_refine(args) -> int:
    config = _config_from_args(args)
    mode = {"improve": RefineMode.IMPROVE, "generic": RefineMode.GENERIC, "eir": RefineMode.ERROR_INFORMED}[args.mode]
    refine_client = _client_for(config, "refine")
    refine_temperature = _temperature_for(config, "refine")
    if mode is RefineMode.ERROR_INFORMED:
        feedback_client = _client_for(config, "feedback")
        feedback_temperature = _temperature_for(config, "feedback")

    def work(record: QARecord, idx: int) -> str:
        answer = record.answers[idx].text
        if mode is RefineMode.ERROR_INFORMED:
            result = run_eir(
                record.question,
                answer,
                feedback_client,
                refine_client,
                config.n_samples,
                feedback_temperature=feedback_temperature,
                refine_temperature=refine_temperature,
                feedback_max_tokens=config.max_tokens.get("feedback"),
                refine_max_tokens_override=config.max_tokens.get("refine"),
                low_confidence_threshold=config.consistency_threshold,
                record_id=record.id,
                answer_index=idx,
            )
        else:
            result = refine_answer(
                record.question,
                answer,
                mode,
                None,
                refine_client,
                temperature=refine_temperature,
                max_tokens=config.max_tokens.get("refine"),
                record_id=record.id,
                answer_index=idx,
            )
        return _dump(result.to_dict(audit=args.audit))

    return _run_batch(args, config, work)


# ---------------------------------------------------------------------------
# eval-detect / eval-correct / selfcheck


def _cmd_eval_detect(args) -> int:
    config = _config_from_args(args)
    corpus = load_corpus(args.corpus)
    by_answer: dict[int, dict[str, FeedbackSample]] = defaultdict(dict)
    for obj in _read_jsonl(args.predictions):
        record_id = str(obj.get("record_id"))
        idx = int(obj.get("answer_index", 0))
        tags = obj.get("selected", {}).get("tags") if "selected" in obj else obj.get("tags")
        if not isinstance(tags, list):
            raise CorpusError(f"prediction for '{record_id}' has no tags")
        if record_id in by_answer[idx]:
            raise CorpusError(f"duplicate prediction for '{record_id}' answer {idx}")
        by_answer[idx][record_id] = FeedbackSample(
            tags=[str(t) for t in tags], reasons={}, raw="", parse_ok=True
        )

    totals = DetectionCounts()
    misses = n_records = 0
    skipped: list[str] = []
    for idx, predictions in sorted(by_answer.items()):
        report = detection_eval(
            corpus,
            predictions,
            answer_indices=idx,
            weights=config.weights,
            invert=args.invert,
        )
        totals.add(report.counts)
        misses += report.misses
        n_records += report.n_records
        skipped.extend(report.skipped)

    accuracy = (
        weighted_accuracy(totals, config.weights) if totals.total_predicted else None
    )
    summary = {
        "exact": totals.exact,
        "adjacent": totals.adjacent,
        "different": totals.different,
        "total_predicted": totals.total_predicted,
        "weighted_accuracy": accuracy,
        "n_records": n_records,
        "misses": misses,
        "skipped": skipped,
    }
    total = max(totals.total_predicted, 1)
    print(
        f"exact {totals.exact} ({100 * totals.exact / total:.2f}%)  "
        f"adjacent {totals.adjacent} ({100 * totals.adjacent / total:.2f}%)  "
        f"different {totals.different} ({100 * totals.different / total:.2f}%)"
    )
    print(
        "weighted accuracy: "
        + (f"{accuracy:.4f}" if accuracy is not None else "undefined (no predictions)")
        + f"  misses: {misses}  records: {n_records}"
    )
    if args.out:
        _write_lines(args.out, [_dump(summary)])
    return 0


_CORRECTION_DEFINITIONS = {
    "tp": "record flagged at baseline and clean after refinement",
    "fn": "record flagged at baseline and still flagged after refinement",
    "fp": "record clean at baseline and flagged after refinement",
}


def _cmd_eval_correct(args) -> int:
    baseline = load_error_scores(_read_jsonl(args.baseline))
    refined = load_error_scores(_read_jsonl(args.refined))
    base_pct, base_mean = error_report(baseline)
    ref_pct, ref_mean = error_report(refined)
    correction = correction_prf(flag_map(baseline), flag_map(refined))

    print(f"{'':<10}{'% error samples':>17}{'mean error score':>18}")
    print(f"{'baseline':<10}{base_pct:>16.2f}%{base_mean:>18.4f}")
    print(f"{'refined':<10}{ref_pct:>16.2f}%{ref_mean:>18.4f}")
    print(
        f"correction: precision {correction.precision:.4f}  "
        f"recall {correction.recall:.4f}  f1 {correction.f1:.4f}  "
        f"(tp {correction.tp}, fp {correction.fp}, fn {correction.fn})"
    )
    if correction.degenerate:
        print("warning: no baseline record was flagged; correction scores are degenerate")
    for key, meaning in _CORRECTION_DEFINITIONS.items():
        print(f"  {key}: {meaning}")
    if args.out:
        _write_lines(
            args.out,
            [
                _dump(
                    {
                        "kind": "error_report",
                        "which": "baseline",
                        "pct_error_samples": base_pct,
                        "mean_error_score": base_mean,
                    }
                ),
                _dump(
                    {
                        "kind": "error_report",
                        "which": "refined",
                        "pct_error_samples": ref_pct,
                        "mean_error_score": ref_mean,
                    }
                ),
                _dump(
                    {
                        "kind": "correction",
                        **correction.to_dict(),
                        "definitions": _CORRECTION_DEFINITIONS,
                    }
                ),
            ],
        )
    return 0


def _cmd_selfcheck(args) -> int:
    grouped: dict[str, list[SupportJudgment]] = defaultdict(list)
    order: list[str] = []
    for obj in _read_jsonl(args.judgments):
        record_id = str(obj.get("record_id"))
        verdicts = obj.get("verdicts")
        if not isinstance(verdicts, list) or not verdicts:
            raise CorpusError(f"judgment for '{record_id}' has no verdicts")
        if record_id not in grouped:
            order.append(record_id)
        grouped[record_id].append(
            SupportJudgment(
                sentence_index=int(obj.get("sentence_index", len(grouped[record_id]))),
                verdicts=tuple(str(v) for v in verdicts),
            )
        )

    lines = []
    supports = []
    for record_id in order:
        judgments = sorted(grouped[record_id], key=lambda j: j.sentence_index)
        report = selfcheck_aggregate(judgments)
        supports.append(report.answer_support)
        lines.append(_dump({"record_id": record_id, **report.to_dict()}))
    mean_support = sum(supports) / len(supports) if supports else 0.0
    print(
        f"{len(supports)} records  mean support {mean_support:.4f}  "
        f"mean inconsistency {1 - mean_support:.4f}"
    )
    if args.out:
        _write_lines(args.out, lines)
    else:
        for line in lines:
            print(line)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _config_from_args(args) -> CliConfig:
    overrides = {}
    if getattr(args, "n_samples", None) is not None:
        overrides["n_samples"] = args.n_samples
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    config = load_config(getattr(args, "config", None), overrides)
    return _apply_backend_flag(config, getattr(args, "backend", None))


def _add_batch_options(sub) -> None:
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--backend", help="backend override, e.g. scripted:fixtures/")
    sub.add_argument("--answer", default="all", help="all | human | model | answer index")
    sub.add_argument("--n-samples", dest="n_samples", type=int, help="samples per answer")
    sub.add_argument("--workers", type=int, help="concurrent records")
    sub.add_argument("--resume", action="store_true", help="skip records already in --out")
    sub.add_argument("--audit", action="store_true", help="keep prompts/raw samples in the output")
    sub.add_argument("--out", required=True, help="output JSONL path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfqa-eval",
        description="Span-level error evaluation and refinement for long-form QA",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    sub = subparsers.add_parser("validate", help="schema-check a corpus file")
    sub.add_argument("corpus")
    sub.set_defaults(func=_cmd_validate)

    sub = subparsers.add_parser("stats", help="span-granularity and length statistics")
    sub.add_argument("corpus")
    sub.add_argument("--out", help="output JSONL path")
    sub.set_defaults(func=_cmd_stats)

    sub = subparsers.add_parser("score", help="scorecards and per-domain report")
    sub.add_argument("corpus")
    sub.add_argument("--out", help="scorecards JSONL path")
    sub.add_argument("--report", help="domain report JSONL path")
    sub.set_defaults(func=_cmd_score)

    sub = subparsers.add_parser("agreement", help="per-domain Krippendorff alpha")
    sub.add_argument("corpus")
    sub.add_argument("--out", help="output JSONL path")
    sub.set_defaults(func=_cmd_agreement)

    sub = subparsers.add_parser("feedback", help="consistency-selected feedback per answer")
    sub.add_argument("corpus")
    _add_batch_options(sub)
    sub.set_defaults(func=_cmd_feedback)

    sub = subparsers.add_parser("refine", help="refine answers")
    sub.add_argument("corpus")
    sub.add_argument("--mode", required=True, choices=["improve", "generic", "eir"])
    _add_batch_options(sub)
    sub.set_defaults(func=_cmd_refine)

    sub = subparsers.add_parser("eval-detect", help="detection accuracy of predictions")
    sub.add_argument("corpus")
    sub.add_argument("--predictions", required=True, help="feedback output JSONL")
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--invert", action="store_true", help="classify gold against predictions")
    sub.add_argument("--out", help="summary JSONL path")
    sub.set_defaults(func=_cmd_eval_detect)

    sub = subparsers.add_parser("eval-correct", help="error report + correction P/R/F1")
    sub.add_argument("--baseline", required=True, help="baseline score JSONL")
    sub.add_argument("--refined", required=True, help="refined score JSONL")
    sub.add_argument("--out", help="summary JSONL path")
    sub.set_defaults(func=_cmd_eval_correct)

    sub = subparsers.add_parser("selfcheck", help="aggregate support verdicts")
    sub.add_argument("--judgments", required=True, help="judgments JSONL")
    sub.add_argument("--out", help="output JSONL path")
    sub.set_defaults(func=_cmd_selfcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorpusError, GenerationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
