"""Dataset-model tests: normalization, type inference, matching, stats, io."""
from __future__ import annotations

import json
import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longdocqa.errors import SchemaViolation
from longdocqa.records import (
    AnswerType,
    Language,
    MatchTolerances,
    QaRecord,
    QuestionType,
    RegionCategory,
    dataset_stats,
    infer_answer_type,
    match_answer,
    normalize_text,
    read_records,
    record_violations,
    write_records,
)

from helpers import make_distribution_fixture, make_record

# ---------------------------------------------------------------------------
# normalize_text
# ---------------------------------------------------------------------------

# (input, expected) rows computed from the documented rule set; the Arabic
# rows are cross-checked below against an independent Unicode-mark oracle.
NORMALIZE_TABLE = [
    ("The Answer.", "the answer"),
    ("  Multiple   Spaces  ", "multiple spaces"),
    ("Hello, World!", "hello world"),
    ("MiXeD CaSe", "mixed case"),
    ("أَحْمَد", "احمد"),
    ("مُحَمَّدٌ", "محمد"),
    ("إِسْلَام", "اسلام"),
    ("آمن", "امن"),
    ("مُسْتَشْفَى", "مستشفي"),
    ("هُدًى", "هدي"),
    ("كِتَـــاب", "كتاب"),
    ("العَرَبِيَّة؟", "العربية"),
]

_ALEF_FOLD = str.maketrans({"آ": "ا", "أ": "ا", "إ": "ا", "ٱ": "ا", "ى": "ي"})


def _mark_strip_oracle(text: str) -> str:
    """Independent fold: drop every nonspacing mark, then apply letter folds."""
    decomposed = unicodedata.normalize("NFD", text)
    no_marks = "".join(ch for ch in decomposed
                       if unicodedata.category(ch) != "Mn")
    folded = unicodedata.normalize("NFC", no_marks)
    folded = folded.replace("ـ", "").translate(_ALEF_FOLD)
    folded = "".join(" " if not (ch.isalnum() or ch.isspace() or ch == "_") else ch
                     for ch in folded.lower())
    return " ".join(folded.split())


@pytest.mark.parametrize("raw,expected", NORMALIZE_TABLE)
def test_normalize_table(raw, expected):
    assert normalize_text(raw) == expected


@pytest.mark.parametrize("raw,expected",
                         [row for row in NORMALIZE_TABLE if any("؀" <= c <= "ۿ" for c in row[0])])
def test_normalize_agrees_with_mark_strip_oracle(raw, expected):
    assert _mark_strip_oracle(raw) == expected


@given(st.text(alphabet=st.characters(codec="utf-8"), max_size=80))
@settings(max_examples=1000, deadline=None)
def test_normalize_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once


@given(st.text(alphabet=st.sampled_from("ابتثجحخدذرزسشصضطظعغفقكلمنهويىأإآةءؤئ"
                                        "ًٌٍَُِّْ"
                                        "ـ .،؟"), max_size=60))
@settings(max_examples=1000, deadline=None)
def test_normalize_idempotent_arabic(text):
    once = normalize_text(text, Language.ARABIC)
    assert normalize_text(once, Language.ARABIC) == once


# ---------------------------------------------------------------------------
# infer_answer_type: rule-order oracle table (fixed before implementation)
# ---------------------------------------------------------------------------

INFER_TABLE = [
    ('{"a": 1}', AnswerType.JSON),
    ("{}", AnswerType.JSON),
    ('{"nested": {"x": 1}}', AnswerType.JSON),
    ("[[1, 2], [3, 4]]", AnswerType.ARRAY),
    ('[{"a": 1}]', AnswerType.ARRAY),
    ("[1, 2, 3]", AnswerType.LIST),
    ('["a", "b"]', AnswerType.LIST),
    ("apples, oranges, bananas", AnswerType.LIST),
    ("- first\n- second", AnswerType.LIST),
    ("1. alpha\n2. beta\n3. gamma", AnswerType.LIST),
    ("true", AnswerType.BOOLEAN),
    ("No", AnswerType.BOOLEAN),
    ("نعم", AnswerType.BOOLEAN),
    ("خطأ", AnswerType.BOOLEAN),
    ("صحيح", AnswerType.BOOLEAN),
    ("42", AnswerType.INTEGER),
    ("-17", AnswerType.INTEGER),
    ("1,169", AnswerType.INTEGER),
    ("٤٢", AnswerType.INTEGER),
    ("3.14", AnswerType.FLOAT),
    ("-0.5", AnswerType.FLOAT),
    ("6.02e23", AnswerType.FLOAT),
    (".75", AnswerType.FLOAT),
    ("```python\nx = 1\n```", AnswerType.CODE),
    ("def f(x): return x * 2", AnswerType.CODE),
    ("for (int i = 0; i < n; i++) { s += i; }", AnswerType.CODE),
    ("The mitochondria is the powerhouse of the cell", AnswerType.TEXT),
    ("Answer: 42 and 17", AnswerType.TEXT),
    ("", AnswerType.TEXT),
    ("yes, it is", AnswerType.TEXT),
]


@pytest.mark.parametrize("text,expected", INFER_TABLE)
def test_infer_answer_type_table(text, expected):
    assert infer_answer_type(text) is expected


@given(st.text(max_size=200))
@settings(max_examples=300, deadline=None)
def test_infer_answer_type_total_and_deterministic(text):
    first = infer_answer_type(text)
    assert isinstance(first, AnswerType)
    assert infer_answer_type(text) is first


# ---------------------------------------------------------------------------
# match_answer: pre-committed 30-case oracle
# ---------------------------------------------------------------------------

# Each expected value was computed by hand from the documented semantics
# (rel_tol=1e-2, abs_tol=1e-6, text threshold 0.85 token F1).
MATCH_TABLE = [
    # integers
    ("42", "42", AnswerType.INTEGER, True),
    ("٤٢", "42", AnswerType.INTEGER, True),
    ("The answer is forty-two", "42", AnswerType.INTEGER, False),
    ("1,169", "1169", AnswerType.INTEGER, True),
    ("The count is 42", "42", AnswerType.INTEGER, True),
    # floats within / outside rel_tol
    ("3.1399", "3.14", AnswerType.FLOAT, True),
    ("3.2", "3.14", AnswerType.FLOAT, False),
    ("2.718e0", "2.718", AnswerType.FLOAT, True),
    ("0.0000005", "0", AnswerType.FLOAT, True),
    ("100.4", "100", AnswerType.FLOAT, True),
    ("102", "100", AnswerType.FLOAT, False),
    # booleans
    ("Yes", "true", AnswerType.BOOLEAN, True),
    ("لا", "no", AnswerType.BOOLEAN, True),
    ("نعم", "false", AnswerType.BOOLEAN, False),
    ("maybe", "true", AnswerType.BOOLEAN, False),
    # text, incl. Arabic-normalized pairs
    ("The Answer.", "the answer", AnswerType.TEXT, True),
    ("أَحْمَد", "احمد", AnswerType.TEXT, True),
    ("The quick brown fox jumps", "quick brown fox jumps high", AnswerType.TEXT, False),
    ("photosynthesis converts light energy into chemical energy",
     "photosynthesis converts light into chemical energy", AnswerType.TEXT, True),
    ("", "", AnswerType.TEXT, True),
    ("entirely different words here", "nothing in common at all", AnswerType.TEXT, False),
    # code
    ("x = 1; y = 2;", "x=1;  y=2;", AnswerType.CODE, True),
    ("def f(x): return x", "def f(y): return y", AnswerType.CODE, False),
    # list ignores order
    ("[1, 2, 3]", "[3, 2, 1]", AnswerType.LIST, True),
    ("apples, oranges, bananas", "bananas, apples, oranges", AnswerType.LIST, True),
    ("[1, 2]", "[1, 2, 3]", AnswerType.LIST, False),
    # array respects order
    ("[1, 2, 3]", "[3, 2, 1]", AnswerType.ARRAY, False),
    ("[[1, 2], [3, 4]]", "[[1,2],[3,4]]", AnswerType.ARRAY, True),
    # structural object equality
    ('{"a": 1, "b": [2, 3]}', '{"b": [2,3], "a": 1}', AnswerType.JSON, True),
    ('{"a": 1}', '{"a": 2}', AnswerType.JSON, False),
]


def test_match_table_is_thirty_cases():
    assert len(MATCH_TABLE) == 30


@pytest.mark.parametrize("candidate,gold,atype,expected", MATCH_TABLE)
def test_match_answer_table(candidate, gold, atype, expected):
    assert match_answer(candidate, gold, atype) is expected


def test_match_float_respects_custom_tolerances():
    tight = MatchTolerances(abs_tol=0.0, rel_tol=1e-5)
    assert not match_answer("3.1399", "3.14", AnswerType.FLOAT, tight)
    assert match_answer("3.1399", "3.14", AnswerType.FLOAT,
                        MatchTolerances(rel_tol=0.01))


# reflexivity: schema-valid value generators per type
_reflexive_values = st.one_of(
    st.integers(-10**9, 10**9).map(lambda n: (str(n), AnswerType.INTEGER)),
    st.floats(allow_nan=False, allow_infinity=False, width=32)
      .map(lambda f: (repr(f), AnswerType.FLOAT)),
    st.sampled_from(["true", "false", "yes", "no", "نعم", "لا"])
      .map(lambda s: (s, AnswerType.BOOLEAN)),
    st.text(max_size=60).map(lambda s: (s, AnswerType.TEXT)),
    st.text(max_size=40).map(lambda s: (f"```\n{s}\n```", AnswerType.CODE)),
    st.lists(st.integers(-100, 100), min_size=1, max_size=6)
      .map(lambda xs: (json.dumps(xs), AnswerType.LIST)),
    st.lists(st.lists(st.integers(-9, 9), min_size=1, max_size=3),
             min_size=1, max_size=4)
      .map(lambda xs: (json.dumps(xs), AnswerType.ARRAY)),
    st.dictionaries(st.text(min_size=1, max_size=8),
                    st.integers(-99, 99), min_size=0, max_size=5)
      .map(lambda d: (json.dumps(d, ensure_ascii=False), AnswerType.JSON)),
)


@given(_reflexive_values)
@settings(max_examples=500, deadline=None)
def test_match_answer_reflexive(value):
    text, atype = value
    assert match_answer(text, text, atype) is True


@given(st.text(max_size=100), st.text(max_size=100),
       st.sampled_from(list(AnswerType)))
@settings(max_examples=300, deadline=None)
def test_match_answer_never_raises(candidate, gold, atype):
    assert match_answer(candidate, gold, atype) in (True, False)


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------


def test_stats_empty():
    report = dataset_stats([])
    assert report.total_questions == 0
    assert report.total_typed_answers == 0
    assert all(c == 0 for c in report.question_type_counts.values())


def test_stats_distribution_fixture():
    records = make_distribution_fixture()
    report = dataset_stats(records)
    assert report.total_questions == 6732
    assert report.question_type_counts[QuestionType.REASONING] == 4160
    assert abs(report.question_type_percentages[QuestionType.REASONING] - 61.8) <= 0.1
    assert abs(report.question_type_percentages[QuestionType.HYPOTHETICAL_REASONING] - 11.9) <= 0.1
    assert report.total_typed_answers == 5085
    assert report.answer_type_counts[AnswerType.TEXT] == 2826
    assert abs(report.answer_type_percentages[AnswerType.TEXT] - 55.6) <= 0.1


def test_stats_percentages_sum_to_100():
    records = make_distribution_fixture()
    report = dataset_stats(records)
    assert abs(sum(report.question_type_percentages.values()) - 100.0) <= 0.1
    assert abs(sum(report.answer_type_percentages.values()) - 100.0) <= 0.1


@given(st.permutations(range(40)))
@settings(max_examples=50, deadline=None)
def test_stats_permutation_invariant(order):
    base = [make_record(i, QuestionType.REASONING if i % 3 else QuestionType.UNANSWERABLE,
                        AnswerType.TEXT if i % 3 else None)
            for i in range(40)]
    shuffled = [base[i] for i in order]
    assert dataset_stats(shuffled) == dataset_stats(base)


def test_stats_render_text_mentions_both_totals():
    report = dataset_stats(make_distribution_fixture())
    text = report.render_text()
    assert "6732" in text and "5085" in text


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_record_strategy = st.builds(
    QaRecord,
    record_id=st.uuids().map(str),
    doc_id=st.text(min_size=1, max_size=12, alphabet="abcdef0123456789"),
    chunk_id=st.text(min_size=1, max_size=16, alphabet="abcdef0123456789-"),
    language=st.sampled_from(list(Language)),
    question=st.text(min_size=1, max_size=60).filter(str.strip),
    answer=st.text(max_size=60),
    answer_type=st.one_of(st.none(), st.sampled_from(list(AnswerType))),
    question_type=st.sampled_from([qt for qt in QuestionType
                                   if qt is not QuestionType.UNANSWERABLE]),
    evidence_pages=st.lists(st.integers(1, 400), min_size=1, max_size=5,
                            unique=True).map(sorted),
    evidence_sources=st.lists(
        st.tuples(st.integers(1, 400), st.sampled_from(list(RegionCategory))),
        min_size=1, max_size=4),
    justification=st.text(min_size=1, max_size=60).filter(str.strip),
    validation=st.just("Approved"),
    iteration_count=st.integers(1, 5),
    max_iterations_reached=st.booleans(),
)


@given(st.lists(_record_strategy, max_size=20))
@settings(max_examples=100, deadline=None)
def test_round_trip_identity(records):
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "ds.jsonl"
        write_records(records, path)
        assert read_records(path) == records


def test_round_trip_arabic_byte_identical(tmp_path):
    rec = make_record(0, QuestionType.REASONING, AnswerType.TEXT,
                      Language.ARABIC)
    rec.question = "ما هي العاصمة؟"
    rec.answer = "الرياض"
    path = tmp_path / "ar.jsonl"
    write_records([rec], path)
    first = path.read_bytes()
    assert "الرياض" in path.read_text(encoding="utf-8")
    write_records(read_records(path), path)
    assert path.read_bytes() == first


def test_read_missing_field_reports_line(tmp_path):
    good = make_record(0, QuestionType.REASONING, AnswerType.TEXT)
    path = tmp_path / "bad.jsonl"
    lines = [json.dumps(good.to_json_dict(), ensure_ascii=False)]
    broken = good.to_json_dict()
    del broken["justification"]
    lines.append(json.dumps(broken, ensure_ascii=False))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(SchemaViolation) as err:
        read_records(path)
    assert err.value.line == 2
    assert "justification" in str(err.value)


def test_read_invalid_json_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("not json\n", encoding="utf-8")
    with pytest.raises(SchemaViolation) as err:
        read_records(path)
    assert err.value.line == 1


# ---------------------------------------------------------------------------
# record invariants
# ---------------------------------------------------------------------------


def test_record_violations_clean():
    assert record_violations(make_record(1, QuestionType.REASONING,
                                         AnswerType.TEXT)) == []


def test_record_violations_unsorted_pages():
    rec = make_record(1, QuestionType.REASONING, AnswerType.TEXT)
    rec.evidence_pages = [5, 2]
    assert any("sorted" in v for v in record_violations(rec))


def test_record_violations_unanswerable_with_evidence():
    rec = make_record(1, QuestionType.UNANSWERABLE, None)
    rec.evidence_pages = [3]
    assert any("Unanswerable" in v for v in record_violations(rec))


def test_record_violations_empty_evidence_answerable():
    rec = make_record(1, QuestionType.REASONING, AnswerType.TEXT)
    rec.evidence_pages = []
    assert any("empty" in v for v in record_violations(rec))
