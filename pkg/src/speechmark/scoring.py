"""Transcript normalization, edit-distance alignment with S/D/I
decomposition, pooled WER reports, and baseline-vs-variant deltas.

WER is pooled (total errors over total reference words) per group, never
a per-utterance mean. Alignment backtrace tie-breaks substitution over
deletion over insertion so counts are deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import CohortMismatch, EmptyReference

_NON_TOKEN_RE = re.compile(r"[^a-z0-9'\s]+")
_STRAY_APOSTROPHE_RE = re.compile(r"(?<![a-z])'|'(?![a-z])")


@dataclass(frozen=True)
class NormalizedTranscript:
    tokens: tuple

    def __len__(self):
        return len(self.tokens)


def normalize_transcript(text: str) -> NormalizedTranscript:
    """Lowercase, strip punctuation to spaces (keeping apostrophes only
    between letters), collapse whitespace, split into word tokens."""
    s = text.lower()
    s = _NON_TOKEN_RE.sub(" ", s)
    s = _STRAY_APOSTROPHE_RE.sub(" ", s)
    return NormalizedTranscript(tokens=tuple(s.split()))


@dataclass(frozen=True)
class AlignmentResult:
    n_ref: int
    subs: int
    dels: int
    ins: int
    ops: tuple  # (op, ref_token | None, hyp_token | None)

    @property
    def distance(self) -> int:
        return self.subs + self.dels + self.ins


def align(ref: NormalizedTranscript, hyp: NormalizedTranscript) -> AlignmentResult:
    """Minimal unit-cost edit alignment of hyp against ref.

    Backtrace prefers substitution, then deletion, then insertion on
    equal-cost paths.
    """
    r, h = ref.tokens, hyp.tokens
    m, n = len(r), len(h)
    # dp[i][j]: distance between r[:i] and h[:j]
    prev = list(range(n + 1))
    dp = [prev]
    for i in range(1, m + 1):
        row = [i] + [0] * n
        ri = r[i - 1]
        prev_row = dp[i - 1]
        for j in range(1, n + 1):
            diag = prev_row[j - 1] + (ri != h[j - 1])
            up = prev_row[j] + 1
            left = row[j - 1] + 1
            row[j] = diag if diag <= up and diag <= left else (up if up <= left else left)
        dp.append(row)

    ops = []
    subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        cur = dp[i][j]
        if i > 0 and j > 0 and dp[i - 1][j - 1] + (r[i - 1] != h[j - 1]) == cur:
            if r[i - 1] == h[j - 1]:
                ops.append(("match", r[i - 1], h[j - 1]))
            else:
                subs += 1
                ops.append(("sub", r[i - 1], h[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and dp[i - 1][j] + 1 == cur:
            dels += 1
            ops.append(("del", r[i - 1], None))
            i -= 1
        else:
            ins += 1
            ops.append(("ins", None, h[j - 1]))
            j -= 1
    ops.reverse()
    return AlignmentResult(n_ref=m, subs=subs, dels=dels, ins=ins, ops=tuple(ops))


@dataclass(frozen=True)
class ScoreReport:
    """Pooled error rates (% of reference words) and error shares
    (% of total errors) for one (model, cohort) group."""

    model: str
    cohort: str | None  # None = all cohorts pooled
    n_ref: int
    subs: int
    dels: int
    ins: int

    @property
    def wer(self) -> float:
        return 100.0 * (self.subs + self.dels + self.ins) / self.n_ref

    @property
    def sub_rate(self) -> float:
        return 100.0 * self.subs / self.n_ref

    @property
    def del_rate(self) -> float:
        return 100.0 * self.dels / self.n_ref

    @property
    def ins_rate(self) -> float:
        return 100.0 * self.ins / self.n_ref

    @property
    def total_errors(self) -> int:
        return self.subs + self.dels + self.ins

    def _share(self, count: int) -> float:
        return 100.0 * count / self.total_errors if self.total_errors else 0.0

    @property
    def sub_share(self) -> float:
        return self._share(self.subs)

    @property
    def del_share(self) -> float:
        return self._share(self.dels)

    @property
    def ins_share(self) -> float:
        return self._share(self.ins)

    def as_row(self) -> dict:
        """Presentation row with percentages rounded to 2 decimals."""
        return {
            "model": self.model,
            "cohort": self.cohort or "all",
            "n_ref": self.n_ref,
            "wer": round(self.wer, 2),
            "sub_rate": round(self.sub_rate, 2),
            "del_rate": round(self.del_rate, 2),
            "ins_rate": round(self.ins_rate, 2),
            "sub_share": round(self.sub_share, 2),
            "del_share": round(self.del_share, 2),
            "ins_share": round(self.ins_share, 2),
        }


def report_from_counts(model, cohort, n_ref, subs, dels, ins) -> ScoreReport:
    """Pooled report directly from counts (the aggregation used by
    score(); exposed for arithmetic-identity checks)."""
    if n_ref <= 0:
        raise EmptyReference(f"group ({model}, {cohort}) has no reference words")
    return ScoreReport(model=model, cohort=cohort, n_ref=n_ref, subs=subs, dels=dels, ins=ins)


@dataclass(frozen=True)
class ScoredUtterance:
    """One (utterance, model) scoring input."""

    ref: str
    hyp: str
    cohort: str
    model: str


def score(records) -> list:
    """Align every record and emit pooled ScoreReports per model and per
    (model, cohort), sorted by (model, cohort)."""
    pooled = {}
    for rec in records:
        result = align(normalize_transcript(rec.ref), normalize_transcript(rec.hyp))
        for key in ((rec.model, None), (rec.model, rec.cohort)):
            agg = pooled.setdefault(key, [0, 0, 0, 0])
            agg[0] += result.n_ref
            agg[1] += result.subs
            agg[2] += result.dels
            agg[3] += result.ins
    reports = []
    for (model, cohort), (n_ref, subs, dels, ins) in sorted(
        pooled.items(), key=lambda kv: (kv[0][0], kv[0][1] or "")
    ):
        reports.append(report_from_counts(model, cohort, n_ref, subs, dels, ins))
    return reports


@dataclass(frozen=True)
class DeltaRow:
    cohort: str
    d_wer: float
    d_sub: float
    d_del: float
    d_ins: float

    def as_row(self, model: str) -> dict:
        return {
            "model": model,
            "cohort": self.cohort,
            "d_wer": round(self.d_wer, 2),
            "d_sub": round(self.d_sub, 2),
            "d_del": round(self.d_del, 2),
            "d_ins": round(self.d_ins, 2),
        }


def delta_report(baseline_reports, variant_reports) -> list:
    """Per-cohort percentage-point deltas (variant - baseline) of WER and
    the three error-type rates. Rounding happens only at presentation."""
    base = {r.cohort: r for r in baseline_reports if r.cohort is not None}
    var = {r.cohort: r for r in variant_reports if r.cohort is not None}
    if set(base) != set(var):
        raise CohortMismatch(
            f"baseline cohorts {sorted(base)} != variant cohorts {sorted(var)}"
        )
    rows = []
    for cohort in sorted(base):
        b, v = base[cohort], var[cohort]
        rows.append(
            DeltaRow(
                cohort=cohort,
                d_wer=v.wer - b.wer,
                d_sub=v.sub_rate - b.sub_rate,
                d_del=v.del_rate - b.del_rate,
                d_ins=v.ins_rate - b.ins_rate,
            )
        )
    return rows
