"""Metric suite: citation precision/recall/F1, rubric scoring, judged aspects,
closed-label accuracy, ROUGE-L, hallucinated-reference detection, and the
benchmark runner that ties them together.
"""

from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from .corpus import normalize_title
from .errors import ContractViolation, DatasetError, JudgeParseError
from .prompting import render_prompt
from .providers import ChatProvider

logger = logging.getLogger(__name__)

MIN_STATEMENT_CHARS = 50

_CITE_GROUP = re.compile(r"\[(\d+(?:\s*,\s*\d+)*)\]")
_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")
_TRAILING_CITES = re.compile(r"(?:\s*\[\d+(?:\s*,\s*\d+)*\])+")


class AttributionLabel(str, Enum):
    ATTRIBUTABLE = "Attributable"
    CONTRADICTORY = "Contradictory"
    EXTRAPOLATORY = "Extrapolatory"


@dataclass
class Statement:
    text: str
    char_len: int
    citations: list[int]
    start: int = 0
    end: int = 0


def parse_citation_markers(text: str) -> list[int]:
    """All bracketed citation markers, in order, including [1][3] and [1, 3] forms."""
    markers = []
    for group in _CITE_GROUP.findall(text):
        markers.extend(int(m) for m in group.split(","))
    return markers


def strip_citation_markers(text: str) -> str:
    stripped = _CITE_GROUP.sub("", text)
    return " ".join(stripped.split())


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Spans of sentence candidates: terminal punctuation and newlines both split.

    Citation groups that directly follow the terminal punctuation are absorbed
    into the preceding sentence.
    """
    spans = []
    offset = 0
    for line in text.split("\n"):
        start = 0
        while start < len(line):
            match = _SENTENCE_END.search(line, start)
            if match is None:
                end = len(line)
            else:
                end = match.end()
                tail = _TRAILING_CITES.match(line, end)
                if tail is not None:
                    end = tail.end()
            segment = line[start:end]
            if segment.strip():
                left = start + (len(segment) - len(segment.lstrip()))
                right = start + len(segment.rstrip())
                spans.append((offset + left, offset + right))
            start = end
        offset += len(line) + 1
    return spans


def segment_statements(answer_text: str, min_chars: int = MIN_STATEMENT_CHARS) -> list[Statement]:
    """Split an answer into citation-worthy statements.

    Sentences whose marker-stripped text is shorter than ``min_chars`` are
    dropped (headers and fragments rarely need citations).
    """
    statements = []
    for start, end in split_sentences(answer_text):
        sentence = answer_text[start:end]
        bare = strip_citation_markers(sentence)
        if len(bare) < min_chars:
            continue
        statements.append(
            Statement(
                text=sentence,
                char_len=len(bare),
                citations=parse_citation_markers(sentence),
                start=start,
                end=end,
            )
        )
    return statements


def judge_attribution(claim: str, reference: str, judge: ChatProvider) -> AttributionLabel:
    """Ask the attribution judge whether the reference supports the claim.

    An answer naming no label, or more than one, fails closed to Extrapolatory.
    """
    prompt = render_prompt("attribution", claim=claim, reference=reference)
    completion = judge.complete([{"role": "user", "content": prompt}], temperature=0.0, max_tokens=16)
    found = [
        label
        for label in AttributionLabel
        if re.search(rf"\b{label.value}\b", completion, flags=re.IGNORECASE)
    ]
    if len(found) == 1:
        return found[0]
    logger.warning("unparseable attribution verdict %r; failing closed", completion.strip())
    return AttributionLabel.EXTRAPOLATORY


class _AttributionMemo:
    """Caches set-level attribution judgments within one answer's evaluation."""

    def __init__(self, passages: Mapping[int, str], judge: ChatProvider):
        self.passages = passages
        self.judge = judge
        self._memo: dict[tuple[str, tuple[int, ...]], bool] = {}

    def supports(self, statement: Statement, markers: list[int]) -> bool:
        key = (statement.text, tuple(sorted(set(markers))))
        if key not in self._memo:
            texts = [self.passages[m] for m in key[1] if m in self.passages]
            if not texts:
                self._memo[key] = False
            else:
                claim = strip_citation_markers(statement.text)
                label = judge_attribution(claim, "\n".join(texts), self.judge)
                self._memo[key] = label is AttributionLabel.ATTRIBUTABLE
        return self._memo[key]


def citation_recall(
    statements: list[Statement], passages: Mapping[int, str], judge: ChatProvider
) -> float:
    """Fraction of statements that cite something and whose cited set supports them."""
    if not statements:
        logger.warning("citation recall over zero statements; returning 0")
        return 0.0
    memo = _AttributionMemo(passages, judge)
    supported = sum(
        1 for s in statements if s.citations and memo.supports(s, s.citations)
    )
    return supported / len(statements)


def citation_precision(
    statements: list[Statement], passages: Mapping[int, str], judge: ChatProvider
) -> float:
    """Fraction of individual citations that are supportive alone or necessary.

    A citation of a supported statement is precise if it supports the
    statement by itself, or if dropping it breaks the full set's support.
    Citations on unsupported statements are never precise. Duplicate markers
    within one statement are counted once.
    """
    memo = _AttributionMemo(passages, judge)
    total = 0
    precise = 0
    for statement in statements:
        markers = sorted(set(statement.citations))
        if not markers:
            continue
        set_supported = memo.supports(statement, markers)
        for marker in markers:
            total += 1
            if not set_supported:
                continue
            if memo.supports(statement, [marker]):
                precise += 1
            elif not memo.supports(statement, [m for m in markers if m != marker]):
                precise += 1
    if total == 0:
        logger.warning("citation precision over zero citations; returning 0")
        return 0.0
    return precise / total


def citation_f1(precision: float, recall: float) -> float:
    if precision < 0 or precision > 1 or recall < 0 or recall > 1:
        raise ValueError("precision and recall must lie in [0, 1]")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass
class CitationScores:
    recall: float
    precision: float
    f1: float
    n_statements: int
    n_citations: int
    flags: list[str] = field(default_factory=list)


def score_citations(
    answer_text: str, passages: Mapping[int, str], judge: ChatProvider
) -> CitationScores:
    statements = segment_statements(answer_text)
    flags = []
    if not statements:
        flags.append("no_statements")
    n_citations = sum(len(set(s.citations)) for s in statements)
    if n_citations == 0:
        flags.append("no_citations")
    recall = citation_recall(statements, passages, judge) if statements else 0.0
    precision = citation_precision(statements, passages, judge)
    return CitationScores(
        recall=recall,
        precision=precision,
        f1=citation_f1(precision, recall),
        n_statements=len(statements),
        n_citations=n_citations,
        flags=flags,
    )


# --- rubric-weighted correctness ---

GENERAL_CRITERIA = ("length", "expertise", "citations", "excerpts")
IMPORTANCE_WEIGHTS = {"must_have": 2.0, "nice_to_have": 1.0}


@dataclass
class RubricIngredient:
    text: str
    importance: str
    quotes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.importance not in IMPORTANCE_WEIGHTS:
            raise ValueError(f"unknown importance {self.importance!r}")


@dataclass
class Rubric:
    ingredients: list[RubricIngredient]
    general_weight: float = 0.4
    annotation_weight: float = 0.6

    def __post_init__(self):
        if abs(self.general_weight + self.annotation_weight - 1.0) > 1e-9:
            raise ValueError("rubric weights must sum to 1")


def parse_rubric(obj: dict) -> Rubric:
    ingredients = [
        RubricIngredient(
            text=item["text"],
            importance=item.get("importance", "must_have"),
            quotes=list(item.get("quotes", [])),
        )
        for item in obj.get("ingredients", [])
    ]
    return Rubric(ingredients=ingredients)


@dataclass
class ScoreBreakdown:
    general_components: dict[str, float]
    general: float
    ingredient_scores: list[float]
    annotation: float
    total: float


def _extract_json(text: str) -> dict | None:
    text = text.strip()
    try:
        obj = json.loads(text)
        if isinstance(obj, dict):
            return obj
    except ValueError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        try:
            obj = json.loads(text[start : end + 1])
            if isinstance(obj, dict):
                return obj
        except ValueError:
            return None
    return None


def _judge_json(judge: ChatProvider, prompt: str, max_tokens: int = 300) -> dict:
    completion = judge.complete([{"role": "user", "content": prompt}], temperature=0.0, max_tokens=max_tokens)
    obj = _extract_json(completion)
    if obj is None:
        raise JudgeParseError(f"judge did not return JSON: {completion[:200]!r}")
    return obj


def _clamp01(value: object) -> float:
    return min(max(float(value), 0.0), 1.0)


def rubric_score(
    answer: str,
    rubric: Rubric,
    judge: ChatProvider,
    *,
    question: str = "",
    general_weights: Mapping[str, float] | None = None,
) -> ScoreBreakdown:
    """Weighted rubric correctness: 0.4 * general criteria + 0.6 * ingredients.

    Must-have ingredients weigh twice nice-to-have ones. The four general
    criteria default to equal weights; pass ``general_weights`` to change the
    balance.
    """
    general_payload = _judge_json(
        judge, render_prompt("rubric_general", question=question, answer=answer)
    )
    try:
        components = {name: _clamp01(general_payload[name]) for name in GENERAL_CRITERIA}
    except (KeyError, TypeError, ValueError) as exc:
        raise JudgeParseError(f"general criteria payload malformed: {exc}") from exc
    weights = dict(general_weights) if general_weights else {name: 1.0 for name in GENERAL_CRITERIA}
    weight_sum = sum(weights.get(name, 0.0) for name in GENERAL_CRITERIA)
    general = (
        sum(components[name] * weights.get(name, 0.0) for name in GENERAL_CRITERIA) / weight_sum
        if weight_sum
        else 0.0
    )

    ingredient_scores = []
    weighted_sum = 0.0
    total_weight = 0.0
    for ingredient in rubric.ingredients:
        payload = _judge_json(
            judge,
            render_prompt(
                "rubric_ingredient",
                ingredient=ingredient.text,
                quotes="\n".join(f"- {q}" for q in ingredient.quotes) or "(none)",
                answer=answer,
            ),
        )
        try:
            score = _clamp01(payload["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise JudgeParseError(f"ingredient payload malformed: {exc}") from exc
        ingredient_scores.append(score)
        weight = IMPORTANCE_WEIGHTS[ingredient.importance]
        weighted_sum += weight * score
        total_weight += weight
    annotation = weighted_sum / total_weight if total_weight else 0.0
    total = rubric.general_weight * general + rubric.annotation_weight * annotation
    return ScoreBreakdown(
        general_components=components,
        general=general,
        ingredient_scores=ingredient_scores,
        annotation=annotation,
        total=total,
    )


# --- judged aspects ---

ASPECTS = ("organization", "coverage", "relevance")


def fine_grained_score(
    question: str,
    answer: str,
    reference_answer: str,
    aspect: str,
    judge: ChatProvider,
) -> int:
    """Five-scale judged score for one writing-quality aspect."""
    if aspect not in ASPECTS:
        raise ValueError(f"unknown aspect {aspect!r}; expected one of {ASPECTS}")
    prompt = render_prompt(
        f"aspect_{aspect}",
        question=question,
        reference_answer=reference_answer,
        answer=answer,
    )
    completion = judge.complete([{"role": "user", "content": prompt}], temperature=0.0, max_tokens=64)
    match = re.search(r"Score:\s*(\d+)", completion, flags=re.IGNORECASE)
    if match is None:
        match = re.search(r"(?<!\d)(\d+)(?!\d)", completion)
    if match is None:
        raise JudgeParseError(f"no score in judge output: {completion[:200]!r}")
    score = int(match.group(1))
    if score < 1 or score > 5:
        logger.warning("aspect score %d out of range; clamping", score)
        score = min(max(score, 1), 5)
    return score


# --- reference metrics ---


def closed_label_accuracy(predictions: list[str], golds: list[str]) -> float:
    """Exact-match rate after case-folding and trimming."""
    if len(predictions) != len(golds):
        raise ContractViolation(
            f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds"
        )
    if not predictions:
        raise ContractViolation("accuracy over an empty list is undefined")
    hits = sum(
        1 for p, g in zip(predictions, golds) if p.strip().casefold() == g.strip().casefold()
    )
    return hits / len(predictions)


def rouge_l(prediction: str, gold: str) -> float:
    """LCS-based F-measure over whitespace tokens."""
    pred_tokens = prediction.split()
    gold_tokens = gold.split()
    if not pred_tokens or not gold_tokens:
        return 0.0
    rows = len(pred_tokens)
    cols = len(gold_tokens)
    table = [[0] * (cols + 1) for _ in range(rows + 1)]
    for i in range(1, rows + 1):
        for j in range(1, cols + 1):
            if pred_tokens[i - 1] == gold_tokens[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    lcs = table[rows][cols]
    if lcs == 0:
        return 0.0
    precision = lcs / rows
    recall = lcs / cols
    return 2 * precision * recall / (precision + recall)


# --- hallucinated references ---


@dataclass
class HallucinationReport:
    total: int
    missing: int
    ratio: float
    missing_titles: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)


def detect_hallucinated_citations(
    reference_titles: list[str], corpus_lookup: Callable[[str], bool]
) -> HallucinationReport:
    """Check generated reference titles against a title lookup.

    ``corpus_lookup`` receives the normalized title (lowercased, punctuation
    stripped, whitespace collapsed) and returns whether it exists.
    """
    if not reference_titles:
        return HallucinationReport(total=0, missing=0, ratio=0.0, flags=["no_titles"])
    missing_titles = [
        title for title in reference_titles if not corpus_lookup(normalize_title(title))
    ]
    return HallucinationReport(
        total=len(reference_titles),
        missing=len(missing_titles),
        ratio=len(missing_titles) / len(reference_titles),
        missing_titles=missing_titles,
    )


def parse_reference_titles(answer_text: str) -> list[str]:
    """Pull paper titles out of a trailing 'References' list in an answer."""
    lines = answer_text.splitlines()
    titles = []
    in_refs = False
    for line in lines:
        if re.match(r"^\s*references?\s*:?\s*$", line, flags=re.IGNORECASE):
            in_refs = True
            continue
        candidate = line.strip()
        if not candidate:
            continue
        item = re.match(r"^(?:\[\d+\]|\d+[.)]|[-*])\s+(.+)$", candidate)
        if in_refs:
            titles.append(item.group(1) if item else candidate)
        elif item and re.match(r"^\[\d+\]", candidate):
            titles.append(item.group(1))
    return titles


# --- benchmark runner ---

TASK_CLOSED = "closed"
TASK_LONGFORM = "longform"
TASK_RUBRIC = "rubric"
TASK_JUDGED = "judged"
TASK_CITE = "cite"

SystemUnderTest = Callable[[dict], dict]


@dataclass
class EvalConfig:
    task: str | None = None
    concurrency: int = 4
    report_path: str | None = None
    general_weights: dict[str, float] | None = None
    aspects: tuple[str, ...] = ASPECTS


def infer_task(record: dict) -> str:
    if "gold_label" in record:
        return TASK_CLOSED
    if "rubric" in record:
        return TASK_RUBRIC
    if "gold_answer" in record:
        return TASK_LONGFORM
    return TASK_CITE


def load_dataset(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except ValueError as exc:
                raise DatasetError(f"bad JSON at {path}:{lineno}: {exc}") from exc
    if not records:
        raise DatasetError(f"dataset {path} is empty")
    return records


def make_constant_system(answer: str) -> SystemUnderTest:
    return lambda record: {"answer": answer, "citations": []}


def make_predictions_system(path: str | Path) -> SystemUnderTest:
    by_id: dict[object, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                by_id[record.get("id")] = record

    def system(record: dict) -> dict:
        output = by_id.get(record.get("id"))
        if output is None:
            raise DatasetError(f"no prediction for instance id {record.get('id')!r}")
        return output

    return system


def _citations_map(output: dict) -> dict[int, str]:
    passages = {}
    for entry in output.get("citations") or []:
        try:
            passages[int(entry["marker"])] = str(entry.get("passage_text", ""))
        except (KeyError, TypeError, ValueError):
            continue
    return passages


def _evaluate_instance(
    record: dict, task: str, system: SystemUnderTest, judges: Mapping[str, ChatProvider],
    config: EvalConfig,
) -> dict:
    output = system(record)
    answer = str(output.get("answer", ""))
    row: dict = {"id": record.get("id"), "answer": answer}

    if task == TASK_CLOSED:
        gold = str(record["gold_label"])
        row["correct"] = float(answer.strip().casefold() == gold.strip().casefold())
    elif task == TASK_LONGFORM and record.get("gold_answer"):
        row["rouge_l"] = rouge_l(answer, str(record["gold_answer"]))
    elif task == TASK_RUBRIC:
        breakdown = rubric_score(
            answer,
            parse_rubric(record["rubric"]),
            _pick_judge(judges, "rubric"),
            question=str(record.get("question", "")),
            general_weights=config.general_weights,
        )
        row["rubric_total"] = breakdown.total
        row["rubric_general"] = breakdown.general
        row["rubric_annotation"] = breakdown.annotation
    elif task == TASK_JUDGED and record.get("gold_answer"):
        for aspect in config.aspects:
            try:
                row[f"aspect_{aspect}"] = float(
                    fine_grained_score(
                        str(record.get("question", "")),
                        answer,
                        str(record["gold_answer"]),
                        aspect,
                        _pick_judge(judges, "aspect"),
                    )
                )
            except JudgeParseError:
                logger.warning("aspect %s unscored for instance %r", aspect, record.get("id"))

    passages = _citations_map(output)
    if passages:
        scores = score_citations(answer, passages, _pick_judge(judges, "attribution"))
        row["citation_recall"] = scores.recall
        row["citation_precision"] = scores.precision
        row["citation_f1"] = scores.f1
        if scores.flags:
            row["citation_flags"] = scores.flags
    return row


def _pick_judge(judges: Mapping[str, ChatProvider], role: str) -> ChatProvider:
    judge = judges.get(role) or judges.get("default")
    if judge is None:
        raise ContractViolation(f"no judge configured for role {role!r}")
    return judge


def run_benchmark(
    dataset_file: str | Path,
    system: SystemUnderTest,
    judges: Mapping[str, ChatProvider],
    config: EvalConfig | None = None,
) -> dict:
    """Evaluate a system over a JSONL dataset and return the report dict.

    Per-instance failures are recorded and skipped; aggregates are arithmetic
    means over the instances that produced each metric.
    """
    config = config or EvalConfig()
    records = load_dataset(dataset_file)
    task = config.task or infer_task(records[0])
    started = time.time()

    rows: list[dict | None] = [None] * len(records)
    failures = 0
    with ThreadPoolExecutor(max_workers=max(config.concurrency, 1)) as executor:
        futures = {
            i: executor.submit(_evaluate_instance, record, task, system, judges, config)
            for i, record in enumerate(records)
        }
        for i, future in futures.items():
            try:
                rows[i] = future.result()
            except Exception as exc:  # per-instance isolation, run continues
                logger.warning("instance %r failed: %s", records[i].get("id"), exc)
                rows[i] = {"id": records[i].get("id"), "error": str(exc)}
                failures += 1

    numeric_keys = sorted(
        {
            key
            for row in rows
            for key, value in row.items()
            if isinstance(value, (int, float)) and not isinstance(value, bool)
        }
    )
    aggregates = {}
    scored_counts = {}
    for key in numeric_keys:
        values = [row[key] for row in rows if key in row and "error" not in row]
        if values:
            aggregates[key] = sum(values) / len(values)
            scored_counts[key] = len(values)
    if task == TASK_CLOSED and "correct" in aggregates:
        aggregates["accuracy"] = aggregates.pop("correct")
        scored_counts["accuracy"] = scored_counts.pop("correct")

    report = {
        "task": task,
        "dataset": str(dataset_file),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started)),
        "duration_s": round(time.time() - started, 3),
        "instance_count": len(records),
        "failures": failures,
        "instances": rows,
        "aggregates": aggregates,
        "scored_counts": scored_counts,
    }
    if config.report_path:
        Path(config.report_path).write_text(
            json.dumps(report, indent=2, ensure_ascii=False), encoding="utf-8"
        )
    return report
