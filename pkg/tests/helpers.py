"""Shared fixture builders used by unit and acceptance tests."""
from __future__ import annotations

from longdocqa.records import (
    AnswerType,
    Language,
    QaRecord,
    QuestionType,
    RegionCategory,
)

# Question-type distribution of the published dataset (totals 6732).
QUESTION_TYPE_COUNTS = {
    QuestionType.REASONING: 4160,
    QuestionType.FACTUAL_RECALL: 271,
    QuestionType.IMAGE_BASED: 412,
    QuestionType.PREDICTION_ANALYSIS: 15,
    QuestionType.STEP_BY_STEP_EXPLANATION: 36,
    QuestionType.CONCEPTUAL_UNDERSTANDING: 272,
    QuestionType.HYPOTHETICAL_REASONING: 798,
    QuestionType.MULTI_HOP_REASONING: 281,
    QuestionType.DATA_RETRIEVAL_OCR: 6,
    QuestionType.EXPERIMENTAL_DESIGN: 21,
    QuestionType.ARGUMENTATION: 6,
    QuestionType.UNANSWERABLE: 454,
}

# Answer-type distribution over the 5085 typed answers. The published
# per-type counts sum to 5093 against a stated total of 5085; the Integer
# count absorbs the 8-answer discrepancy so the fixture total is exact.
ANSWER_TYPE_COUNTS = {
    AnswerType.TEXT: 2826,
    AnswerType.INTEGER: 1161,
    AnswerType.CODE: 624,
    AnswerType.FLOAT: 347,
    AnswerType.LIST: 74,
    AnswerType.BOOLEAN: 31,
    AnswerType.ARRAY: 15,
    AnswerType.JSON: 7,
}


def make_record(i: int, question_type: QuestionType,
                answer_type: AnswerType | None,
                language: Language = Language.ENGLISH) -> QaRecord:
    unanswerable = question_type is QuestionType.UNANSWERABLE
    return QaRecord(
        record_id=f"fix{i:05d}",
        doc_id="fixture-doc",
        chunk_id="fixture-doc-c001",
        language=language,
        question=f"fixture question {i}?",
        answer="cannot be answered from the document" if unanswerable else f"answer {i}",
        answer_type=answer_type,
        question_type=question_type,
        evidence_pages=[] if unanswerable else [1 + i % 5],
        evidence_sources=[] if unanswerable else [(1 + i % 5, RegionCategory.PARAGRAPH)],
        justification=f"fixture justification {i}",
        iteration_count=1,
    )


def make_distribution_fixture() -> list[QaRecord]:
    """6732 records matching the published question/answer distributions."""
    records = []
    i = 0
    for qtype, count in QUESTION_TYPE_COUNTS.items():
        for _ in range(count):
            records.append(make_record(
                i, qtype, None,
                Language.ENGLISH if i % 2 == 0 else Language.ARABIC))
            i += 1
    # assign typed answers to the first 5085 answerable records
    answerable = [r for r in records
                  if r.question_type is not QuestionType.UNANSWERABLE]
    k = 0
    for atype, count in ANSWER_TYPE_COUNTS.items():
        for _ in range(count):
            answerable[k].answer_type = atype
            k += 1
    return records
