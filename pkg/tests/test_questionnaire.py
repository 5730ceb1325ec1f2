from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pollsim.questionnaire import (
    DEFAULT_LIKERT_GROUPS,
    Option,
    QuestionnaireError,
    likert_collapse,
    load_questionnaire,
    merge_refusals,
    save_questionnaire,
)


def _write(tmp_path, doc):
    path = tmp_path / "q.json"
    path.write_text(json.dumps(doc))
    return path


def _question_doc(qid="Q1", options=None):
    options = options or [
        {"letter": "A", "text": "Yes"},
        {"letter": "B", "text": "No"},
        {"letter": "C", "text": "DK/RF", "refusal": True},
    ]
    return {"id": qid, "topic": "Economy", "text": "Is it?", "options": options}


class TestLoader:
    def test_desk_instrument_round_trip(self, tmp_path, instrument):
        path = tmp_path / "desk.json"
        save_questionnaire(instrument, path)
        loaded = load_questionnaire(path)
        assert len(loaded) == 5
        assert len(loaded.topics) == 5
        assert loaded.vote_question().id == "VOTE01"
        assert [q.id for q in loaded.voting_subset] == ["VOTE01", "ECON02"]
        assert loaded.get("ECON02").options[0].polarity_score == -1

    def test_duplicate_ids_rejected(self, tmp_path):
        path = _write(tmp_path, {"questions": [_question_doc("Q1"), _question_doc("Q1")]})
        with pytest.raises(QuestionnaireError, match="duplicate question ids"):
            load_questionnaire(path)

    def test_duplicate_letters_rejected(self, tmp_path):
        doc = _question_doc(
            options=[
                {"letter": "A", "text": "Yes"},
                {"letter": "A", "text": "No"},
                {"letter": "C", "text": "DK/RF", "refusal": True},
            ]
        )
        with pytest.raises(QuestionnaireError, match="duplicate option letters"):
            load_questionnaire(_write(tmp_path, {"questions": [doc]}))

    def test_two_refusals_rejected(self, tmp_path):
        doc = _question_doc(
            options=[
                {"letter": "A", "text": "Yes"},
                {"letter": "B", "text": "No"},
                {"letter": "C", "text": "DK/RF", "refusal": True},
                {"letter": "D", "text": "DK/RF", "refusal": True},
            ]
        )
        with pytest.raises(QuestionnaireError, match="exactly one refusal"):
            load_questionnaire(_write(tmp_path, {"questions": [doc]}))

    def test_missing_refusal_rejected(self, tmp_path):
        doc = _question_doc(
            options=[{"letter": "A", "text": "Yes"}, {"letter": "B", "text": "No"}]
        )
        with pytest.raises(QuestionnaireError, match="exactly one refusal"):
            load_questionnaire(_write(tmp_path, {"questions": [doc]}))

    def test_refusal_must_be_last(self, tmp_path):
        doc = _question_doc(
            options=[
                {"letter": "A", "text": "DK/RF", "refusal": True},
                {"letter": "B", "text": "Yes"},
                {"letter": "C", "text": "No"},
            ]
        )
        with pytest.raises(QuestionnaireError, match="last"):
            load_questionnaire(_write(tmp_path, {"questions": [doc]}))

    def test_too_few_substantive_options(self, tmp_path):
        doc = _question_doc(
            options=[
                {"letter": "A", "text": "Yes"},
                {"letter": "B", "text": "DK/RF", "refusal": True},
            ]
        )
        with pytest.raises(QuestionnaireError, match="at least 2 substantive"):
            load_questionnaire(_write(tmp_path, {"questions": [doc]}))

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "q.json"
        path.write_text("")
        with pytest.raises(QuestionnaireError):
            load_questionnaire(path)
        with pytest.raises(QuestionnaireError, match="no questions"):
            load_questionnaire(_write(tmp_path, {"questions": []}))

    def test_every_question_exposes_trailing_refusal(self, instrument):
        for q in instrument:
            refusals = [o for o in q.options if o.is_refusal]
            assert len(refusals) == 1
            assert q.options[-1].is_refusal


class TestMergeRefusals:
    def test_merges_invalid_options(self):
        options = [
            Option("A", "Agree"),
            Option("B", "Disagree"),
            Option("C", "Refused"),
            Option("D", "Don't know"),
        ]
        merged = merge_refusals(options)
        assert [o.text for o in merged] == ["Agree", "Disagree", "DK/RF"]
        assert merged[-1].is_refusal and merged[-1].letter == "C"

    def test_appends_even_without_invalid_options(self):
        merged = merge_refusals([Option("A", "Agree"), Option("B", "Disagree")])
        assert merged[-1].text == "DK/RF"
        assert len(merged) == 3

    def test_idempotent(self):
        options = [
            Option("A", "Agree"),
            Option("B", "Disagree"),
            Option("C", "Haven't thought much about this"),
        ]
        once = merge_refusals(options)
        assert merge_refusals(once) == once


class TestLikertCollapse:
    def test_default_endpoints(self):
        assert likert_collapse(None, 1) == 1
        assert likert_collapse(None, 4) == 2
        assert likert_collapse(None, 7) == 3

    def test_intensity_merge(self):
        # strong and weak agreement land on the same position
        assert likert_collapse(None, 1) == likert_collapse(None, 2)

    def test_custom_spec(self):
        spec = ((1, 2), (3, 5), (6, 7))
        assert likert_collapse(spec, 5) == 2

    def test_out_of_range(self):
        with pytest.raises(QuestionnaireError):
            likert_collapse(None, 0)
        with pytest.raises(QuestionnaireError):
            likert_collapse(None, 8)

    def test_bad_partition_rejected(self):
        with pytest.raises(QuestionnaireError):
            likert_collapse(((1, 3), (5, 5), (6, 7)), 2)  # hole at 4
        with pytest.raises(QuestionnaireError):
            likert_collapse(((1, 3), (4, 4)), 2)  # only two groups

    @given(st.integers(min_value=1, max_value=6))
    def test_monotone(self, raw):
        assert likert_collapse(None, raw) <= likert_collapse(None, raw + 1)

    def test_default_groups_cover_scale(self):
        assert [likert_collapse(DEFAULT_LIKERT_GROUPS, v) for v in range(1, 8)] == [
            1,
            1,
            1,
            2,
            3,
            3,
            3,
        ]
