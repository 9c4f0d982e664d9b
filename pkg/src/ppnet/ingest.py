"""Reading, validating and bucketing prescription claims.

The claims CSV has a fixed header::

    prescriber_id,patient_id,drug_name,schedule,specialty,latitude,longitude,dispense_date

Empty strings mean "absent". Unknown extra columns are ignored.
"""

from __future__ import annotations

import csv
import datetime as dt
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, TextIO

SCHEDULES = ("II", "III", "IV")

COLUMNS = (
    "prescriber_id",
    "patient_id",
    "drug_name",
    "schedule",
    "specialty",
    "latitude",
    "longitude",
    "dispense_date",
)
# the parser refuses a header missing any of these
HEADER_REQUIRED = ("prescriber_id", "patient_id", "schedule")
DEFAULT_REQUIRED_FIELDS = ("prescriber_id", "patient_id", "schedule")

# Drug names as listed for the study month. Hydrocodone-acetaminophen is
# listed under IV here although hydrocodone was a Schedule III substance at
# the time (and Schedule II after 2014); the table is reproduced as published.
DRUG_SCHEDULES: dict[str, str] = {
    "Oxycodone-acetaminophen": "II",
    "Oxycodone hcl": "II",
    "Methadone hcl": "II",
    "Morphine sulfate": "II",
    "Hydromorphone hcl": "II",
    "Oxymorphone hcl": "II",
    "Acetaminophen-codeine": "III",
    "Buprenorphine": "III",
    "Buprenorphine-naloxone": "III",
    "Butalbital codeine": "III",
    "Hydrocodone-acetaminophen": "IV",
    "Alprazolam": "IV",
    "Carisoprodol": "IV",
    "Chlordiazepoxide hcl": "IV",
    "Clonazepam": "IV",
    "Clorazepate dipotassium": "IV",
    "Diazepam": "IV",
    "Flurazepam hcl": "IV",
    "Lorazepam": "IV",
    "Midazolam hcl": "IV",
    "Oxazepam": "IV",
    "Pentazocine-naloxone hcl": "IV",
    "Phenobarbital": "IV",
    "Temazepam": "IV",
    "Triazolam": "IV",
    "Zolpidem tartrate": "IV",
}


class ClaimsFormatError(ValueError):
    """The claims source cannot be read at all (e.g. no usable header)."""


@dataclass(frozen=True)
class ClaimRecord:
    prescriber_id: str
    patient_id: str
    drug_name: str = ""
    schedule: str = ""
    specialty: str = ""
    latitude: float | None = None
    longitude: float | None = None
    dispense_date: dt.date | None = None

    @property
    def has_geo(self) -> bool:
        return self.latitude is not None and self.longitude is not None


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    message: str


@dataclass
class IngestReport:
    records_read: int = 0
    records_kept: int = 0
    records_excluded: int = 0
    exclusion_reasons: dict[str, int] = field(default_factory=dict)
    records_missing_geo: int = 0
    # out-of-range coordinates; these records are kept with geo cleared
    records_invalid_geo: int = 0

    def to_dict(self) -> dict:
        return {
            "records_read": self.records_read,
            "records_kept": self.records_kept,
            "records_excluded": self.records_excluded,
            "exclusion_reasons": dict(sorted(self.exclusion_reasons.items())),
            "records_missing_geo": self.records_missing_geo,
            "records_invalid_geo": self.records_invalid_geo,
        }


def _optional_float(text: str) -> float | None:
    text = text.strip()
    return float(text) if text else None


def _optional_date(text: str) -> dt.date | None:
    text = text.strip()
    return dt.date.fromisoformat(text) if text else None


def parse_claims(source: TextIO | Iterable[str]) -> tuple[list[ClaimRecord], list[ParseDiagnostic]]:
    """Parse claims-CSV text into raw records.

    Rows that cannot be parsed (wrong field count, non-numeric coordinates,
    bad dates) are skipped and reported with their 1-based line number.
    Range checks and missing-value policy are left to
    :func:`validate_and_filter`.

    Raises
    ------
    ClaimsFormatError
        If the source is empty or the header lacks a required column.
    """
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ClaimsFormatError("claims source is empty: missing header row") from None
    missing = [c for c in HEADER_REQUIRED if c not in header]
    if missing:
        raise ClaimsFormatError(f"header is missing required column(s): {', '.join(missing)}")
    index = {name: header.index(name) for name in COLUMNS if name in header}

    records: list[ClaimRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            diagnostics.append(
                ParseDiagnostic(line, f"expected {len(header)} fields, found {len(row)}")
            )
            continue
        get = lambda name: row[index[name]].strip() if name in index else ""  # noqa: E731
        try:
            rec = ClaimRecord(
                prescriber_id=get("prescriber_id"),
                patient_id=get("patient_id"),
                drug_name=get("drug_name"),
                schedule=get("schedule"),
                specialty=get("specialty"),
                latitude=_optional_float(get("latitude")),
                longitude=_optional_float(get("longitude")),
                dispense_date=_optional_date(get("dispense_date")),
            )
        except ValueError as exc:
            diagnostics.append(ParseDiagnostic(line, str(exc)))
            continue
        records.append(rec)
    return records, diagnostics


def apply_drug_schedule_map(
    records: Iterable[ClaimRecord], mapping: Mapping[str, str] = DRUG_SCHEDULES
) -> list[ClaimRecord]:
    """Override each record's schedule from ``mapping`` (exact drug-name match)."""
    out = []
    for rec in records:
        sched = mapping.get(rec.drug_name)
        out.append(replace(rec, schedule=sched) if sched is not None else rec)
    return out


def validate_and_filter(
    records: Iterable[ClaimRecord], required_fields: Iterable[str] = DEFAULT_REQUIRED_FIELDS
) -> tuple[list[ClaimRecord], IngestReport]:
    """Drop records with missing required attributes or an unknown schedule.

    Geo fields never cause exclusion. Coordinates outside the valid
    latitude/longitude ranges are cleared on the kept record and counted.
    """
    required = tuple(required_fields)
    bad = set(required) - set(DEFAULT_REQUIRED_FIELDS)
    if bad:
        raise ValueError(f"unsupported required field(s): {sorted(bad)}")

    report = IngestReport()
    reasons: Counter[str] = Counter()
    kept: list[ClaimRecord] = []
    for rec in records:
        report.records_read += 1
        reason = None
        for name in required:
            if not getattr(rec, name):
                reason = f"missing {name}"
                break
        if reason is None and rec.schedule not in SCHEDULES:
            reason = "invalid schedule"
        if reason is not None:
            reasons[reason] += 1
            continue

        lat, lon = rec.latitude, rec.longitude
        if (lat is not None and not -90.0 <= lat <= 90.0) or (
            lon is not None and not -180.0 <= lon <= 180.0
        ):
            report.records_invalid_geo += 1
            rec = replace(rec, latitude=None, longitude=None)
        if not rec.has_geo:
            report.records_missing_geo += 1
        kept.append(rec)

    report.records_kept = len(kept)
    report.records_excluded = sum(reasons.values())
    report.exclusion_reasons = dict(reasons)
    return kept, report


def partition_by_schedule(records: Iterable[ClaimRecord]) -> dict[str, list[ClaimRecord]]:
    buckets: dict[str, list[ClaimRecord]] = {s: [] for s in SCHEDULES}
    for rec in records:
        buckets[rec.schedule].append(rec)
    return buckets
