"""Manifest data model and speaker-independent, cohort-stratified
70/10/20 splitting.

Stratification happens at the speaker level: within each clinical cohort
the speakers are shuffled by a seeded RNG and assigned to
train/valid/test by largest-remainder rounding of the 70/10/20 targets.
Every speaker lands in exactly one split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateUttId, EmptyManifest, ParseError, UnknownCohort

COHORTS = ("control", "pre_hd", "prodromal", "manifest")
TASKS = ("sustained_vowel", "ddk", "prompted", "read")
SPLITS = ("train", "valid", "test")
SPLIT_FRACTIONS = (0.7, 0.1, 0.2)


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    speaker_id: str
    cohort: str
    audio_path: str
    reference: str
    task: str = "read"
    hypothesis: str | None = None

    def __post_init__(self):
        if self.cohort not in COHORTS:
            raise UnknownCohort(f"{self.cohort!r} not in {COHORTS}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class SplitAssignment:
    by_speaker: dict  # speaker_id -> split name
    seed: int
    achieved_fractions: dict  # cohort -> {split: fraction of speakers}

    def split_of(self, record: UtteranceRecord) -> str:
        return self.by_speaker[record.speaker_id]

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "by_speaker": self.by_speaker}, sort_keys=True, indent=2
        )


REQUIRED_FIELDS = ("utt_id", "speaker_id", "cohort", "audio_path", "reference")


def load_manifest(path) -> list:
    """Read a JSONL manifest into validated UtteranceRecords."""
    records = []
    seen = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(row, dict):
                raise ParseError(line_no, "manifest row must be a JSON object")
            missing = [f for f in REQUIRED_FIELDS if f not in row]
            if missing:
                raise ParseError(line_no, f"missing fields: {missing}")
            utt_id = row["utt_id"]
            if utt_id in seen:
                raise DuplicateUttId(utt_id, line_no)
            seen[utt_id] = line_no
            try:
                rec = UtteranceRecord(
                    utt_id=utt_id,
                    speaker_id=row["speaker_id"],
                    cohort=row["cohort"],
                    audio_path=row["audio_path"],
                    reference=row["reference"],
                    task=row.get("task", "read"),
                    hypothesis=row.get("hypothesis"),
                )
            except UnknownCohort:
                raise
            except (TypeError, ValueError) as exc:
                raise ParseError(line_no, str(exc)) from exc
            records.append(rec)
    return records


def _largest_remainder_counts(n: int) -> tuple:
    """Split n speakers into train/valid/test counts.

    Largest-remainder rounding of 70/10/20; cohorts with fewer than 3
    speakers keep at least one in train, remainder going to test then
    valid so the training split never empties.
    """
    if n < 3:
        if n == 1:
            return (1, 0, 0)
        return (1, 0, 1)
    quotas = [n * f for f in SPLIT_FRACTIONS]
    counts = [int(np.floor(q)) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    # stable order on ties: larger remainder first, then train > valid > test
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    return tuple(counts)


def split_speakers(records, seed: int) -> SplitAssignment:
    """Assign every speaker to exactly one of train/valid/test,
    stratified by cohort. Deterministic for a fixed seed."""
    records = list(records)
    if not records:
        raise EmptyManifest("no records to split")

    speakers_by_cohort = {}
    for rec in records:
        speakers_by_cohort.setdefault(rec.cohort, set()).add(rec.speaker_id)

    by_speaker = {}
    achieved = {}
    for cohort in COHORTS:
        speakers = sorted(speakers_by_cohort.get(cohort, ()))
        if not speakers:
            continue
        rng = np.random.default_rng([seed, COHORTS.index(cohort)])
        rng.shuffle(speakers)
        n_train, n_valid, n_test = _largest_remainder_counts(len(speakers))
        for i, spk in enumerate(speakers):
            if i < n_train:
                by_speaker[spk] = "train"
            elif i < n_train + n_valid:
                by_speaker[spk] = "valid"
            else:
                by_speaker[spk] = "test"
        n = len(speakers)
        achieved[cohort] = {
            "train": n_train / n,
            "valid": n_valid / n,
            "test": n_test / n,
        }
    return SplitAssignment(by_speaker=by_speaker, seed=seed, achieved_fractions=achieved)


def load_split(path) -> SplitAssignment:
    with open(path) as fh:
        data = json.load(fh)
    return SplitAssignment(
        by_speaker=data["by_speaker"], seed=data.get("seed", 0), achieved_fractions={}
    )
