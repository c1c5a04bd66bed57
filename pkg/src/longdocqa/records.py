"""Output record schema, taxonomies, text normalization, answer matching and stats.

The answer-type classifier applies its rules in a fixed, documented order
(see ``infer_answer_type``); the matcher dispatches on the resulting type.
Both are total functions: malformed input degrades to Text / non-match,
never to an exception.
"""
from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import IoFailure, SchemaViolation


class Language(str, Enum):
    ENGLISH = "en"
    ARABIC = "ar"


class QuestionType(str, Enum):
    REASONING = "Reasoning"
    FACTUAL_RECALL = "FactualRecall"
    IMAGE_BASED = "ImageBased"
    PREDICTION_ANALYSIS = "PredictionAnalysis"
    STEP_BY_STEP_EXPLANATION = "StepByStepExplanation"
    CONCEPTUAL_UNDERSTANDING = "ConceptualUnderstanding"
    HYPOTHETICAL_REASONING = "HypotheticalReasoning"
    MULTI_HOP_REASONING = "MultiHopReasoning"
    DATA_RETRIEVAL_OCR = "DataRetrievalOcr"
    EXPERIMENTAL_DESIGN = "ExperimentalDesign"
    ARGUMENTATION = "Argumentation"
    UNANSWERABLE = "Unanswerable"

    @property
    def label(self) -> str:
        """Human-readable label for report tables."""
        return _QUESTION_TYPE_LABELS[self]


_QUESTION_TYPE_LABELS = {
    QuestionType.REASONING: "Reasoning",
    QuestionType.FACTUAL_RECALL: "Factual Recall",
    QuestionType.IMAGE_BASED: "Image-based Question",
    QuestionType.PREDICTION_ANALYSIS: "Prediction Analysis",
    QuestionType.STEP_BY_STEP_EXPLANATION: "Step-by-step Explanation",
    QuestionType.CONCEPTUAL_UNDERSTANDING: "Conceptual Understanding",
    QuestionType.HYPOTHETICAL_REASONING: "Hypothetical Reasoning",
    QuestionType.MULTI_HOP_REASONING: "Multi-hop Reasoning",
    QuestionType.DATA_RETRIEVAL_OCR: "Data Retrieval & OCR",
    QuestionType.EXPERIMENTAL_DESIGN: "Experimental Design",
    QuestionType.ARGUMENTATION: "Argumentation",
    QuestionType.UNANSWERABLE: "Unanswerable",
}


class AnswerType(str, Enum):
    TEXT = "Text"
    INTEGER = "Integer"
    CODE = "Code"
    FLOAT = "Float"
    LIST = "List"
    BOOLEAN = "Boolean"
    ARRAY = "Array"
    JSON = "Json"


class RegionCategory(str, Enum):
    HEADING = "Heading"
    PARAGRAPH = "Paragraph"
    TABLE = "Table"
    FIGURE = "Figure"


@dataclass
class MatchTolerances:
    """Numeric and textual tolerances used by ``match_answer``."""

    abs_tol: float = 1e-6
    rel_tol: float = 1e-2
    text_similarity_threshold: float = 0.85


# ---------------------------------------------------------------------------
# Text normalization
# ---------------------------------------------------------------------------

# Harakat, tanween, shadda, sukun, hamza marks, dagger alif and the Quranic
# annotation range most OCR output carries.
_ARABIC_MARKS = re.compile(r"[ؐ-ًؚ-ٰٟ]")
_TATWEEL = "ـ"
_ALEF_VARIANTS = str.maketrans({"آ": "ا", "أ": "ا",
                                "إ": "ا", "ٱ": "ا"})
_ALEF_MAQSURA = str.maketrans({"ى": "ي"})
_PUNCT = re.compile(r"[^\w\s]+", re.UNICODE)
_WS = re.compile(r"\s+")
_ARABIC_INDIC_DIGITS = str.maketrans("٠١٢٣٤٥٦٧٨٩۰۱۲۳۴۵۶۷۸۹", "01234567890123456789")


def normalize_text(text: str, language: Language | None = None) -> str:
    """Fold text to a canonical comparison form.

    Lowercases, collapses punctuation and whitespace, and applies the Arabic
    folds (diacritics stripped, alef variants to bare alef, alef maqsura to
    ya, tatweel removed). The Arabic rules are no-ops on Latin text, so the
    same fold is applied regardless of ``language``; the parameter is kept
    so callers can record intent. Idempotent.
    """
    del language  # rules are additive and safe for both languages
    s = unicodedata.normalize("NFC", text)
    s = s.lower()
    s = s.replace(_TATWEEL, "")
    s = _ARABIC_MARKS.sub("", s)
    s = s.translate(_ALEF_VARIANTS).translate(_ALEF_MAQSURA)
    s = _PUNCT.sub(" ", s)
    return _WS.sub(" ", s).strip()


def _token_f1(a: str, b: str) -> float:
    ta, tb = a.split(), b.split()
    if not ta or not tb:
        return 1.0 if ta == tb else 0.0
    overlap = sum((Counter(ta) & Counter(tb)).values())
    return 2.0 * overlap / (len(ta) + len(tb))


def text_similarity(a: str, b: str) -> float:
    """Token-level F1 over normalized tokens, in [0, 1]."""
    return _token_f1(normalize_text(a), normalize_text(b))


# ---------------------------------------------------------------------------
# Answer-type inference
# ---------------------------------------------------------------------------

_BOOL_LITERALS = {
    "true": True, "false": False, "yes": True, "no": False,
    # Arabic equivalents, in normalized form (hamza-seated alef already folded)
    "صحيح": True, "خطا": False, "نعم": True, "لا": False, "صح": True,
}

_BULLET_LINE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+\S")
_CODE_FENCE = re.compile(r"```")
# Distinct syntax cues; two or more classify an unfenced answer as Code.
_CODE_SIGNALS = (
    re.compile(r"\bdef\s+\w+\s*\("),
    re.compile(r"\breturn\b"),
    re.compile(r"\b(?:import|from)\s+\w+"),
    re.compile(r"#include\s*<"),
    re.compile(r"\bfunction\s+\w*\s*\("),
    re.compile(r"=>"),
    re.compile(r";\s*$", re.MULTILINE),
    re.compile(r"[{}]"),
    re.compile(r"==|!=|&&|\|\|"),
    re.compile(r"\bfor\s*\(|\bwhile\s*\("),
    re.compile(r"=\s*\["),
    re.compile(r"\bprint\s*\(|\bconsole\.log\s*\("),
)


def _try_json(text: str):
    try:
        return json.loads(text), True
    except (json.JSONDecodeError, ValueError):
        return None, False


def _strip_numeric(text: str) -> str:
    s = text.strip().translate(_ARABIC_INDIC_DIGITS)
    # thousands separators; percent signs are not numbers
    return s.replace(",", "").replace("٬", "")


def parse_int(text: str) -> int | None:
    """Whole-string integer parse; falls back to a lone embedded integer."""
    s = _strip_numeric(text)
    if re.fullmatch(r"[+-]?\d+", s):
        return int(s)
    embedded = re.findall(r"[+-]?\d+", s)
    if len(embedded) == 1 and not re.search(r"\d[.eE]\d|\.\d", s):
        return int(embedded[0])
    return None


def parse_float(text: str) -> float | None:
    """Whole-string float parse; falls back to a lone embedded number.

    Non-finite values (nan, inf) are rejected: they are never meaningful
    QA answers and would poison tolerance comparisons.
    """
    s = _strip_numeric(text)
    try:
        value = float(s)
        return value if math.isfinite(value) else None
    except ValueError:
        pass
    embedded = re.findall(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?", s)
    if len(embedded) == 1:
        try:
            value = float(embedded[0])
            return value if math.isfinite(value) else None
        except ValueError:
            return None
    return None


def _delimiter_items(text: str) -> list[str] | None:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    bullets = [ln for ln in lines if _BULLET_LINE.match(ln)]
    if len(bullets) >= 2:
        return [re.sub(r"^\s*(?:[-*•]|\d+[.)])\s+", "", ln).strip() for ln in bullets]
    parts = [p.strip() for p in re.split(r"[,;؛،]", text) if p.strip()]
    if len(parts) >= 3 and all(_enumeration_item(p) for p in parts):
        return parts
    return None


def _enumeration_item(part: str) -> bool:
    # code-looking fragments (parens, braces, operators) are not list items
    return len(part.split()) <= 6 and not re.search(r"[(){}=<>]", part)


def infer_answer_type(answer_text: str) -> AnswerType:
    """Classify an answer string. Rules are tried in this fixed order:

    1. Json     -- parses as a JSON object
    2. Array    -- parses as a JSON list containing nested lists/objects
    3. List     -- parses as a flat JSON list, or is a bulleted/numbered
                   enumeration (>=2 bullet lines) or a delimiter-separated
                   enumeration (>=3 comma/semicolon-separated items)
    4. Boolean  -- true/false/yes/no literal, incl. Arabic equivalents
    5. Integer  -- whole-string (or lone embedded) integer
    6. Float    -- whole-string (or lone embedded) decimal/scientific number
    7. Code     -- fenced code block, or >=2 distinct code-syntax signals
    8. Text     -- fallback
    """
    text = answer_text.strip()
    if not text:
        return AnswerType.TEXT

    value, ok = _try_json(text)
    if ok and isinstance(value, dict):
        return AnswerType.JSON
    if ok and isinstance(value, list):
        if any(isinstance(el, (list, dict)) for el in value):
            return AnswerType.ARRAY
        return AnswerType.LIST
    if _delimiter_items(text) is not None:
        return AnswerType.LIST
    if normalize_text(text) in _BOOL_LITERALS:
        return AnswerType.BOOLEAN
    stripped = _strip_numeric(text)
    if re.fullmatch(r"[+-]?\d+", stripped):
        return AnswerType.INTEGER
    try:
        if math.isfinite(float(stripped)):
            return AnswerType.FLOAT
    except ValueError:
        pass
    if _CODE_FENCE.search(text) or sum(1 for sig in _CODE_SIGNALS if sig.search(text)) >= 2:
        return AnswerType.CODE
    return AnswerType.TEXT


# ---------------------------------------------------------------------------
# Answer matching
# ---------------------------------------------------------------------------


def _parse_bool(text: str) -> bool | None:
    return _BOOL_LITERALS.get(normalize_text(text))


def _as_elements(text: str) -> list[str] | None:
    """Interpret an answer as a list of element strings."""
    value, ok = _try_json(text.strip())
    if ok and isinstance(value, list):
        return [el if isinstance(el, str) else json.dumps(el, ensure_ascii=False)
                for el in value]
    items = _delimiter_items(text)
    if items is not None:
        return items
    return None


def _match_elements(cand: list[str], gold: list[str], tol: MatchTolerances,
                    ordered: bool, depth: int) -> bool:
    if len(cand) != len(gold):
        return False
    if ordered:
        return all(_match(c, g, infer_answer_type(g), tol, depth + 1)
                   for c, g in zip(cand, gold))
    remaining = list(cand)
    for g in gold:
        gtype = infer_answer_type(g)
        for i, c in enumerate(remaining):
            if _match(c, g, gtype, tol, depth + 1):
                del remaining[i]
                break
        else:
            return False
    return True


def _match(candidate: str, gold: str, answer_type: AnswerType,
           tol: MatchTolerances, depth: int = 0) -> bool:
    if depth > 8:  # degenerate nesting; fall back to text comparison
        answer_type = AnswerType.TEXT

    if answer_type is AnswerType.INTEGER:
        c, g = parse_int(candidate), parse_int(gold)
        return c is not None and g is not None and c == g

    if answer_type is AnswerType.FLOAT:
        c, g = parse_float(candidate), parse_float(gold)
        if c is None or g is None:
            return False
        return abs(c - g) <= max(tol.abs_tol, tol.rel_tol * abs(g))

    if answer_type is AnswerType.BOOLEAN:
        c, g = _parse_bool(candidate), _parse_bool(gold)
        return c is not None and c == g

    if answer_type in (AnswerType.LIST, AnswerType.ARRAY):
        ce, ge = _as_elements(candidate), _as_elements(gold)
        if ce is None or ge is None:
            return _match(candidate, gold, AnswerType.TEXT, tol, depth + 1)
        return _match_elements(ce, ge, tol,
                               ordered=answer_type is AnswerType.ARRAY,
                               depth=depth)

    if answer_type is AnswerType.JSON:
        cv, cok = _try_json(candidate.strip())
        gv, gok = _try_json(gold.strip())
        if not (cok and gok):
            return False
        return cv == gv

    # Text / Code: normalized equality, else token-level similarity
    nc, ng = normalize_text(candidate), normalize_text(gold)
    if nc == ng:
        return True
    return _token_f1(nc, ng) >= tol.text_similarity_threshold


def match_answer(candidate: str, gold: str, answer_type: AnswerType,
                 tolerances: MatchTolerances | None = None) -> bool:
    """Decide whether a candidate answer matches the gold answer.

    Parse failures count as non-matches; this function never raises.
    """
    tol = tolerances or MatchTolerances()
    try:
        return _match(candidate, gold, answer_type, tol)
    except Exception:
        return False


# ---------------------------------------------------------------------------
# QaRecord
# ---------------------------------------------------------------------------

# Stable field order for the JSONL dataset files.
_RECORD_FIELDS = (
    "record_id", "doc_id", "chunk_id", "language", "question", "answer",
    "answer_type", "question_type", "evidence_pages", "evidence_sources",
    "justification", "validation", "iteration_count", "max_iterations_reached",
)


@dataclass
class QaRecord:
    """One validated question tuple; the pipeline's terminal product.

    ``answer_type`` is None for records whose answer was never assigned a
    type (notably Unanswerable questions).
    """

    record_id: str
    doc_id: str
    chunk_id: str
    language: Language
    question: str
    answer: str
    answer_type: AnswerType | None
    question_type: QuestionType
    evidence_pages: list[int]
    evidence_sources: list[tuple[int, RegionCategory]]
    justification: str
    validation: str = "Approved"
    iteration_count: int = 1
    max_iterations_reached: bool = False

    def to_json_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "doc_id": self.doc_id,
            "chunk_id": self.chunk_id,
            "language": self.language.value,
            "question": self.question,
            "answer": self.answer,
            "answer_type": self.answer_type.value if self.answer_type else None,
            "question_type": self.question_type.value,
            "evidence_pages": list(self.evidence_pages),
            "evidence_sources": [[p, c.value] for p, c in self.evidence_sources],
            "justification": self.justification,
            "validation": self.validation,
            "iteration_count": self.iteration_count,
            "max_iterations_reached": self.max_iterations_reached,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "QaRecord":
        missing = [f for f in _RECORD_FIELDS if f not in data]
        if missing:
            raise SchemaViolation(f"missing fields {missing}")
        unknown = [k for k in data if k not in _RECORD_FIELDS]
        if unknown:
            raise SchemaViolation(f"unknown fields {unknown}")
        try:
            answer_type = AnswerType(data["answer_type"]) if data["answer_type"] is not None else None
            sources = [(int(p), RegionCategory(c)) for p, c in data["evidence_sources"]]
            rec = cls(
                record_id=str(data["record_id"]),
                doc_id=str(data["doc_id"]),
                chunk_id=str(data["chunk_id"]),
                language=Language(data["language"]),
                question=str(data["question"]),
                answer=str(data["answer"]),
                answer_type=answer_type,
                question_type=QuestionType(data["question_type"]),
                evidence_pages=[int(p) for p in data["evidence_pages"]],
                evidence_sources=sources,
                justification=str(data["justification"]),
                validation=str(data["validation"]),
                iteration_count=int(data["iteration_count"]),
                max_iterations_reached=bool(data["max_iterations_reached"]),
            )
        except (ValueError, TypeError, KeyError) as exc:
            raise SchemaViolation(str(exc)) from exc
        return rec


def record_violations(record: QaRecord) -> list[str]:
    """Invariant audit for one record; empty list means valid."""
    problems = []
    if not record.question.strip():
        problems.append("question is empty")
    if not record.justification.strip():
        problems.append("justification is empty")
    pages = record.evidence_pages
    if record.question_type is QuestionType.UNANSWERABLE:
        if pages:
            problems.append("Unanswerable record carries evidence pages")
    elif not pages:
        problems.append("evidence_pages is empty for an answerable question")
    if pages != sorted(set(pages)):
        problems.append("evidence_pages not sorted/unique")
    if any(p < 1 for p in pages):
        problems.append("evidence page below 1")
    if record.validation != "Approved":
        problems.append(f"validation is {record.validation!r}, expected 'Approved'")
    if record.iteration_count < 1:
        problems.append("iteration_count below 1")
    return problems


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dumps_record(record: QaRecord) -> str:
    return json.dumps(record.to_json_dict(), ensure_ascii=False, separators=(",", ":"))


def write_records(records: list[QaRecord], path: str | Path) -> None:
    """Write records as line-delimited JSON, one record per line."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(dumps_record(rec))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_records(path: str | Path) -> list[QaRecord]:
    """Read a JSONL dataset; raises SchemaViolation with the 1-based line."""
    path = Path(path)
    records = []
    try:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaViolation(f"invalid JSON: {exc}", line=lineno) from exc
                try:
                    records.append(QaRecord.from_json_dict(data))
                except SchemaViolation as exc:
                    raise SchemaViolation(str(exc), line=lineno) from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return records


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def _rounded_percentages(counts: dict, total: int) -> dict:
    """Percentages to one decimal via largest-remainder, summing to 100.0."""
    if total <= 0:
        return {k: 0.0 for k in counts}
    tenths = {k: c * 1000 / total for k, c in counts.items()}
    floors = {k: int(v) for k, v in tenths.items()}
    leftover = 1000 - sum(floors.values())
    order = sorted(counts, key=lambda k: (tenths[k] - floors[k], counts[k]), reverse=True)
    for k in order[:leftover]:
        floors[k] += 1
    return {k: floors[k] / 10.0 for k in counts}


@dataclass
class StatsReport:
    """Counts and percentages over a dataset.

    Question counts cover every record; answer-type counts cover only
    records carrying a typed answer, so the two totals are reported
    separately and need not agree.
    """

    total_questions: int
    total_typed_answers: int
    question_type_counts: dict[QuestionType, int]
    question_type_percentages: dict[QuestionType, float]
    answer_type_counts: dict[AnswerType, int]
    answer_type_percentages: dict[AnswerType, float]
    language_counts: dict[Language, int]

    def render_text(self) -> str:
        lines = [f"Questions: {self.total_questions}"]
        for lang in Language:
            lines.append(f"  {lang.value}: {self.language_counts.get(lang, 0)}")
        lines.append("")
        lines.append(f"{'Question type':<28}{'count':>8}{'pct':>8}")
        for qt in QuestionType:
            lines.append(f"{qt.label:<28}{self.question_type_counts[qt]:>8}"
                         f"{self.question_type_percentages[qt]:>7.1f}%")
        lines.append("")
        lines.append(f"Typed answers: {self.total_typed_answers}")
        lines.append(f"{'Answer type':<28}{'count':>8}{'pct':>8}")
        for at in AnswerType:
            lines.append(f"{at.value:<28}{self.answer_type_counts[at]:>8}"
                         f"{self.answer_type_percentages[at]:>7.1f}%")
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        return {
            "total_questions": self.total_questions,
            "total_typed_answers": self.total_typed_answers,
            "question_types": {
                qt.value: {"count": self.question_type_counts[qt],
                           "percentage": self.question_type_percentages[qt]}
                for qt in QuestionType
            },
            "answer_types": {
                at.value: {"count": self.answer_type_counts[at],
                           "percentage": self.answer_type_percentages[at]}
                for at in AnswerType
            },
            "languages": {lang.value: self.language_counts.get(lang, 0)
                          for lang in Language},
        }


def dataset_stats(records: list[QaRecord]) -> StatsReport:
    """Exact counts with one-decimal percentages; order-invariant."""
    q_counts = {qt: 0 for qt in QuestionType}
    a_counts = {at: 0 for at in AnswerType}
    lang_counts: dict[Language, int] = {}
    for rec in records:
        q_counts[rec.question_type] += 1
        if rec.answer_type is not None:
            a_counts[rec.answer_type] += 1
        lang_counts[rec.language] = lang_counts.get(rec.language, 0) + 1
    typed_total = sum(a_counts.values())
    return StatsReport(
        total_questions=len(records),
        total_typed_answers=typed_total,
        question_type_counts=q_counts,
        question_type_percentages=_rounded_percentages(q_counts, len(records)),
        answer_type_counts=a_counts,
        answer_type_percentages=_rounded_percentages(a_counts, typed_total),
        language_counts=lang_counts,
    )
