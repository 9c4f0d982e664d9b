"""Synthetic claims for demos, benchmarks and tests.

Most patients see a single prescriber; a small share "shop" across several,
which is what creates prescriber-prescriber edges. Prescriber popularity is
heavy-tailed so the resulting networks have hubs.
"""

from __future__ import annotations

import csv
import datetime as dt
from typing import TextIO

import numpy as np

from ppnet.ingest import COLUMNS, DRUG_SCHEDULES, ClaimRecord

SPECIALTIES = (
    "General Practitioner",
    "Internist",
    "Dentist",
    "Nurse Practitioner",
    "Physical Medicine and Rehabilitation",
    "Psychiatrist",
    "General Pediatrician",
    "Plastic Surgeon",
    "Orthopedic Surgeon",
    "Emergency Medicine",
)

# rough bounding box of Kentucky
_LAT = (36.5, 39.1)
_LON = (-89.5, -82.0)


def generate_claims(
    n_claims: int = 60_000,
    n_prescribers: int = 5_000,
    n_patients: int = 25_000,
    schedule: str = "IV",
    shop_rate: float = 0.03,
    geo_coverage: float = 0.93,
    seed: int = 0,
) -> list[ClaimRecord]:
    rng = np.random.default_rng(seed)
    if n_patients < n_prescribers:
        raise ValueError("need at least one patient per prescriber")
    popularity = rng.lognormal(0.0, 1.2, n_prescribers)
    popularity /= popularity.sum()

    # every prescriber gets one patient first, the rest follow popularity
    primary = np.concatenate(
        [rng.permutation(n_prescribers), rng.choice(n_prescribers, n_patients - n_prescribers, p=popularity)]
    )
    pairs: list[tuple[int, int]] = []
    for pat in range(n_patients):
        seen = {int(primary[pat])}
        if rng.random() < shop_rate:
            for _ in range(1 + rng.geometric(0.6)):
                seen.add(int(rng.choice(n_prescribers, p=popularity)))
        pairs.extend((pat, pre) for pre in sorted(seen))
    if n_claims < len(pairs):
        raise ValueError(f"need at least {len(pairs)} claims to cover all patient visits")
    extra = rng.integers(0, len(pairs), n_claims - len(pairs))
    multiplicity = np.bincount(extra, minlength=len(pairs)) + 1

    drugs = sorted(d for d, s in DRUG_SCHEDULES.items() if s == schedule) or [""]
    specialty = rng.choice(len(SPECIALTIES), n_prescribers)
    has_geo = rng.random(n_prescribers) < geo_coverage
    lat = rng.uniform(*_LAT, n_prescribers).round(5)
    lon = rng.uniform(*_LON, n_prescribers).round(5)
    day0 = dt.date(2011, 9, 1)

    width_pre = len(str(n_prescribers))
    width_pat = len(str(n_patients))
    records = []
    for (pat, pre), count in zip(pairs, multiplicity.tolist()):
        for _ in range(count):
            records.append(
                ClaimRecord(
                    prescriber_id=f"PR{pre:0{width_pre}d}",
                    patient_id=f"PT{pat:0{width_pat}d}",
                    drug_name=drugs[int(rng.integers(len(drugs)))],
                    schedule=schedule,
                    specialty=SPECIALTIES[specialty[pre]],
                    latitude=float(lat[pre]) if has_geo[pre] else None,
                    longitude=float(lon[pre]) if has_geo[pre] else None,
                    dispense_date=day0 + dt.timedelta(days=int(rng.integers(30))),
                )
            )
    return records


def write_claims_csv(records, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.prescriber_id,
                r.patient_id,
                r.drug_name,
                r.schedule,
                r.specialty,
                "" if r.latitude is None else r.latitude,
                "" if r.longitude is None else r.longitude,
                "" if r.dispense_date is None else r.dispense_date.isoformat(),
            ]
        )
