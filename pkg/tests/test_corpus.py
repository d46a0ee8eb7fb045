import json

import pytest

from speechmark.corpus import (
    COHORTS,
    SplitAssignment,
    UtteranceRecord,
    _largest_remainder_counts,
    load_manifest,
    load_split,
    split_speakers,
)
from speechmark.errors import (
    DuplicateUttId,
    EmptyManifest,
    ParseError,
    UnknownCohort,
)


def rec(utt_id, speaker, cohort="control"):
    return UtteranceRecord(
        utt_id=utt_id,
        speaker_id=speaker,
        cohort=cohort,
        audio_path=f"{utt_id}.wav",
        reference="a e i",
    )


def write_manifest(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


BASE_ROW = {
    "utt_id": "u1",
    "speaker_id": "s1",
    "cohort": "control",
    "audio_path": "u1.wav",
    "reference": "a e",
}


class TestManifest:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest(path, [BASE_ROW, {**BASE_ROW, "utt_id": "u2", "cohort": "manifest"}])
        records = load_manifest(path)
        assert [r.utt_id for r in records] == ["u1", "u2"]
        assert records[1].cohort == "manifest"

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(BASE_ROW) + "\n\n\n")
        assert len(load_manifest(path)) == 1

    def test_parse_error_carries_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(BASE_ROW) + "\n{broken\n")
        with pytest.raises(ParseError) as err:
            load_manifest(path)
        assert err.value.line_no == 2

    def test_missing_field(self, tmp_path):
        path = tmp_path / "m.jsonl"
        row = dict(BASE_ROW)
        del row["reference"]
        write_manifest(path, [row])
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_duplicate_utt_id(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest(path, [BASE_ROW, BASE_ROW])
        with pytest.raises(DuplicateUttId):
            load_manifest(path)

    def test_unknown_cohort(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest(path, [{**BASE_ROW, "cohort": "severe"}])
        with pytest.raises(UnknownCohort):
            load_manifest(path)

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            UtteranceRecord(
                utt_id="u",
                speaker_id="s",
                cohort="control",
                audio_path="u.wav",
                reference="a",
                task="karaoke",
            )


class TestLargestRemainder:
    def test_ten_speakers(self):
        assert _largest_remainder_counts(10) == (7, 1, 2)

    def test_sums(self):
        for n in range(1, 200):
            counts = _largest_remainder_counts(n)
            assert sum(counts) == n
            assert counts[0] >= 1

    def test_small_cohorts(self):
        assert _largest_remainder_counts(1) == (1, 0, 0)
        assert _largest_remainder_counts(2) == (1, 0, 1)

    def test_near_targets(self):
        for n in range(3, 200):
            train, valid, test = _largest_remainder_counts(n)
            assert abs(train - 0.7 * n) <= 1
            assert abs(valid - 0.1 * n) <= 1
            assert abs(test - 0.2 * n) <= 1


class TestSplitSpeakers:
    def test_every_speaker_assigned_once(self):
        records = [rec(f"u{i}", f"s{i % 12}", COHORTS[i % 4]) for i in range(48)]
        assignment = split_speakers(records, seed=3)
        assert set(assignment.by_speaker) == {f"s{i}" for i in range(12)}

    def test_deterministic(self):
        records = [rec(f"u{i}", f"s{i}", COHORTS[i % 4]) for i in range(40)]
        a = split_speakers(records, seed=9)
        b = split_speakers(records, seed=9)
        assert a.by_speaker == b.by_speaker

    def test_seed_changes_assignment(self):
        records = [rec(f"u{i}", f"s{i}") for i in range(30)]
        a = split_speakers(records, seed=1)
        b = split_speakers(records, seed=2)
        assert a.by_speaker != b.by_speaker

    def test_ten_speaker_cohort_counts(self):
        records = [rec(f"u{i}", f"s{i}") for i in range(10)]
        assignment = split_speakers(records, seed=0)
        counts = {"train": 0, "valid": 0, "test": 0}
        for split in assignment.by_speaker.values():
            counts[split] += 1
        assert (counts["train"], counts["valid"], counts["test"]) == (7, 1, 2)

    def test_stratified_per_cohort(self):
        records = [rec(f"u{i}", f"s{i}", COHORTS[i % 4]) for i in range(80)]
        assignment = split_speakers(records, seed=4)
        for cohort in COHORTS:
            fracs = assignment.achieved_fractions[cohort]
            assert abs(fracs["train"] - 0.7) <= 0.06

    def test_empty_manifest(self):
        with pytest.raises(EmptyManifest):
            split_speakers([], seed=0)

    def test_json_roundtrip(self, tmp_path):
        records = [rec(f"u{i}", f"s{i}") for i in range(10)]
        assignment = split_speakers(records, seed=5)
        path = tmp_path / "split.json"
        path.write_text(assignment.to_json())
        loaded = load_split(path)
        assert loaded.by_speaker == assignment.by_speaker
        assert loaded.seed == 5

    def test_split_of(self):
        records = [rec(f"u{i}", f"s{i}") for i in range(5)]
        assignment = split_speakers(records, seed=0)
        assert assignment.split_of(records[0]) == assignment.by_speaker["s0"]
