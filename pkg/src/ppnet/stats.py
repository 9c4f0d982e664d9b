"""Prescriber profiles, Tukey fences and distribution moments."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ppnet.ingest import ClaimRecord

QUARTILE_METHODS = ("linear", "hinges")
DEFAULT_FENCE_K = 4.5


@dataclass(frozen=True)
class PrescriberProfile:
    prescriber_id: str
    total_prescriptions: int
    distinct_patients: int
    specialty: str = ""

    @property
    def avg_count(self) -> Fraction:
        return Fraction(self.total_prescriptions, self.distinct_patients)


@dataclass(frozen=True)
class FenceResult:
    q1: float
    q3: float
    k: float
    flagged: frozenset[str]
    method: str = "linear"

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @property
    def threshold(self) -> float:
        return self.q3 + self.k * self.iqr

    def to_dict(self) -> dict:
        return {
            "q1": self.q1,
            "q3": self.q3,
            "iqr": self.iqr,
            "k": self.k,
            "threshold": self.threshold,
            "quartile_method": self.method,
            "flagged_count": len(self.flagged),
            "flagged": sorted(self.flagged),
        }


@dataclass(frozen=True)
class MomentSummary:
    """Population moments; ``kurtosis`` is raw (3 for a normal law)."""

    n: int
    mean: float
    sd: float
    skewness: float
    kurtosis: float

    @property
    def excess_kurtosis(self) -> float:
        return self.kurtosis - 3.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "excess_kurtosis": self.excess_kurtosis,
            "convention": "population central moments; raw kurtosis (normal = 3)",
        }


def prescriber_profiles(records: Iterable[ClaimRecord]) -> list[PrescriberProfile]:
    """One profile per prescriber, sorted by id."""
    totals: Counter[str] = Counter()
    patients: dict[str, set[str]] = defaultdict(set)
    specialty: dict[str, str] = {}
    for rec in records:
        totals[rec.prescriber_id] += 1
        patients[rec.prescriber_id].add(rec.patient_id)
        if rec.specialty and rec.prescriber_id not in specialty:
            specialty[rec.prescriber_id] = rec.specialty
    return [
        PrescriberProfile(pid, totals[pid], len(patients[pid]), specialty.get(pid, ""))
        for pid in sorted(totals)
    ]


def _interp(sorted_vals: Sequence[float], rank: float) -> float:
    # rank is 1-based
    lo = math.floor(rank)
    frac = rank - lo
    if frac == 0:
        return float(sorted_vals[lo - 1])
    a, b = sorted_vals[lo - 1], sorted_vals[lo]
    return float(a + (b - a) * frac)


def _median(sorted_vals: Sequence[float]) -> float:
    return _interp(sorted_vals, 1 + 0.5 * (len(sorted_vals) - 1))


def quartiles(values: Iterable[float], method: str = "linear") -> tuple[float, float]:
    """First and third quartile.

    ``"linear"`` interpolates at rank ``1 + p*(n-1)`` of the sorted data.
    ``"hinges"`` returns Tukey's hinges: medians of the lower and upper
    halves, each half including the overall median when n is odd.
    """
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise ValueError("quartiles of an empty sample are undefined")
    if method == "linear":
        return _interp(vals, 1 + 0.25 * (n - 1)), _interp(vals, 1 + 0.75 * (n - 1))
    if method == "hinges":
        half = (n + 1) // 2
        return _median(vals[:half]), _median(vals[n - half:])
    raise ValueError(f"unknown quartile method {method!r}; expected one of {QUARTILE_METHODS}")


def tukey_extreme_outliers(
    values: Mapping[str, float], k: float = DEFAULT_FENCE_K, method: str = "linear"
) -> FenceResult:
    """Flag keys whose value lies strictly above ``Q3 + k*IQR``."""
    if k < 0:
        raise ValueError("fence multiplier must be non-negative")
    q1, q3 = quartiles(values.values(), method)
    threshold = q3 + k * (q3 - q1)
    flagged = frozenset(key for key, v in values.items() if v > threshold)
    return FenceResult(q1=q1, q3=q3, k=k, flagged=flagged, method=method)


def distribution_moments(values: Iterable[float]) -> MomentSummary:
    xs = [float(v) for v in values]
    n = len(xs)
    if n < 2:
        raise ValueError("moments undefined: need at least two values")
    mean = math.fsum(xs) / n
    dev = [x - mean for x in xs]
    m2 = math.fsum(d * d for d in dev) / n
    if m2 == 0:
        raise ValueError("moments undefined: zero variance")
    m3 = math.fsum(d**3 for d in dev) / n
    m4 = math.fsum(d**4 for d in dev) / n
    return MomentSummary(
        n=n,
        mean=mean,
        sd=math.sqrt(m2),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / (m2 * m2),
    )


def specialty_frequency(
    flagged: Iterable[str],
    profiles: Iterable[PrescriberProfile],
    stoplist: Iterable[str] = (),
) -> list[tuple[str, int]]:
    """Specialty tally over flagged prescribers, most frequent first.

    Prescribers without a recorded specialty are not counted.
    """
    by_id = {p.prescriber_id: p.specialty for p in profiles}
    stop = set(stoplist)
    counts = Counter(by_id[pid] for pid in flagged)
    return sorted(
        ((s, c) for s, c in counts.items() if s and s not in stop),
        key=lambda item: (-item[1], item[0]),
    )
