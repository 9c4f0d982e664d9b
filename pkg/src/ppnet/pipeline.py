"""End-to-end analysis per schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from ppnet import export
from ppnet.graph import (
    WeightedGraph,
    build_bipartite,
    degree_sequence,
    drop_singletons,
    largest_connected_component,
    prescriber_attrs,
    project,
)
from ppnet.ingest import (
    DRUG_SCHEDULES,
    SCHEDULES,
    ClaimRecord,
    IngestReport,
    apply_drug_schedule_map,
    parse_claims,
    partition_by_schedule,
    validate_and_filter,
)
from ppnet.linkcomm import link_communities, node_communities
from ppnet.stats import (
    DEFAULT_FENCE_K,
    QUARTILE_METHODS,
    distribution_moments,
    prescriber_profiles,
    specialty_frequency,
    tukey_extreme_outliers,
)
from ppnet.surrogate import (
    DEFAULT_N_SURROGATES,
    DEFAULT_SWAP_FACTOR,
    DEFAULT_THRESHOLD,
    max_partition_density_statistic,
    surrogate_test,
)

log = logging.getLogger(__name__)

FORMATS = ("graphml", "geojson", "json", "csv")


class ConfigError(ValueError):
    """Invalid pipeline configuration; raised before any work starts."""


@dataclass
class PipelineConfig:
    input_path: str | None = None
    schedules: tuple[str, ...] = SCHEDULES
    fence_k: float = DEFAULT_FENCE_K
    quartile_method: str = "linear"
    stoplist: tuple[str, ...] = ()
    n_s: int = DEFAULT_N_SURROGATES
    swap_q: float = DEFAULT_SWAP_FACTOR
    threshold: float = DEFAULT_THRESHOLD
    seed: int | None = None
    out_dir: str = "out"
    formats: tuple[str, ...] = FORMATS
    use_drug_map: bool = False
    surrogates: bool = True
    workers: int = 1

    def validate(self) -> None:
        if not self.input_path:
            raise ConfigError("an input path is required")
        unknown = [s for s in self.schedules if s not in SCHEDULES]
        if unknown or not self.schedules:
            raise ConfigError(f"unknown schedule(s) {unknown}; expected a subset of {list(SCHEDULES)}")
        if self.fence_k < 0:
            raise ConfigError("fence multiplier must be >= 0")
        if self.quartile_method not in QUARTILE_METHODS:
            raise ConfigError(f"quartile method must be one of {QUARTILE_METHODS}")
        if self.n_s < 2:
            raise ConfigError("number of surrogates must be >= 2")
        if self.swap_q <= 0:
            raise ConfigError("swap factor must be positive")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown format(s) {bad}; expected a subset of {list(FORMATS)}")
        if self.surrogates and self.seed is None:
            raise ConfigError("a seed is required when surrogate testing is enabled")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def echo(self) -> dict:
        """Settings and conventions that determine every reported number."""
        return {
            "input": Path(self.input_path).name if self.input_path else None,
            "schedules": list(self.schedules),
            "fence_k": self.fence_k,
            "quartile_method": self.quartile_method,
            "stoplist": list(self.stoplist),
            "n_s": self.n_s,
            "swap_q": self.swap_q,
            "threshold": self.threshold,
            "seed": self.seed,
            "use_drug_map": self.use_drug_map,
            "surrogates": self.surrogates,
            "conventions": {
                "quartiles": "linear interpolation at rank 1+p(n-1)"
                if self.quartile_method == "linear"
                else "Tukey hinges",
                "fence": "flag value > Q3 + k*IQR on total/distinct-patient ratio",
                "moments": "population central moments over non-singleton PPN degrees",
                "kurtosis": "raw (normal = 3); excess reported alongside",
                "sigma_surr": "population (1/n_s)",
                "edge_weights": "distinct shared patients; ignored by degrees, communities and surrogates",
                "surrogates": "double edge swaps from the observed LCC, swap_q*|E| attempts, connectivity kept",
            },
        }


def load_records(config: PipelineConfig) -> tuple[list[ClaimRecord], IngestReport, list]:
    with open(config.input_path, encoding="utf-8", newline="") as fh:
        raw, diagnostics = parse_claims(fh)
    if config.use_drug_map:
        raw = apply_drug_schedule_map(raw, DRUG_SCHEDULES)
    kept, report = validate_and_filter(raw)
    for d in diagnostics:
        log.warning("line %d skipped: %s", d.line, d.message)
    return kept, report, diagnostics


@dataclass
class ScheduleArtifacts:
    """Intermediate objects for one schedule, kept for export."""

    ppn: WeightedGraph
    lcc: WeightedGraph | None
    partition: object = None
    frequency: list = field(default_factory=list)


def analyze_schedule(
    schedule: str, records: list[ClaimRecord], config: PipelineConfig
) -> tuple[dict, ScheduleArtifacts]:
    notices: list[str] = []
    report: dict = {"schedule": schedule, "prescriptions": len(records)}

    bip = build_bipartite(records)
    ppn = project(bip, "prescriber", prescriber_attrs(records)).with_degrees()
    report.update(
        prescribers=len(bip.prescriber_nodes),
        patients=len(bip.patient_nodes),
        ppn_nodes=ppn.number_of_nodes(),
        ppn_edges=ppn.number_of_edges(),
        ppn_total_weight=sum(w for _, _, w in ppn.edges()),
        singletons=sum(1 for d in degree_sequence(ppn) if d == 0),
    )
    if not records:
        notices.append(f"schedule {schedule} has no records")
        log.warning("schedule %s has no records", schedule)

    core = drop_singletons(ppn)
    try:
        report["degree_moments"] = distribution_moments(degree_sequence(core)).to_dict()
    except ValueError as exc:
        report["degree_moments"] = None
        notices.append(f"degree moments skipped: {exc}")

    profiles = prescriber_profiles(records)
    if profiles:
        fence = tukey_extreme_outliers(
            {p.prescriber_id: float(p.avg_count) for p in profiles}, config.fence_k, config.quartile_method
        )
        report["fence"] = fence.to_dict()
        freq = specialty_frequency(fence.flagged, profiles, config.stoplist)
    else:
        report["fence"] = None
        freq = []
    report["specialty_frequency"] = [list(item) for item in freq]

    lcc = largest_connected_component(ppn) if ppn.number_of_nodes() else None
    report["lcc_nodes"] = lcc.number_of_nodes() if lcc else 0
    report["lcc_edges"] = lcc.number_of_edges() if lcc else 0

    partition = None
    report["communities"] = None
    report["surrogate"] = None
    if lcc is None or lcc.number_of_edges() == 0:
        notices.append("largest connected component has no edges: community and surrogate stages skipped")
    else:
        cut, partition, d_max = link_communities(lcc)
        memberships = node_communities(partition)
        report["communities"] = {
            "count": len(partition),
            "overlap_nodes": sum(1 for cs in memberships.values() if len(cs) > 1),
            "cut_similarity": cut,
            "d_max": d_max,
        }
        if not config.surrogates:
            notices.append("surrogate testing disabled")
        else:
            res = surrogate_test(
                lcc,
                max_partition_density_statistic,
                n_s=config.n_s,
                seed=config.seed,
                swap_factor=config.swap_q,
                threshold=config.threshold,
                workers=config.workers,
            )
            report["surrogate"] = res.to_dict()
    report["notices"] = notices
    return report, ScheduleArtifacts(ppn, lcc, partition, freq)


def communities_dict(partition) -> dict:
    members = node_communities(partition)
    return {
        "d_max": partition.density,
        "communities": [[list(e) for e in group] for group in partition.communities],
        "node_memberships": {n: sorted(cs) for n, cs in sorted(members.items())},
    }


def write_schedule_outputs(schedule: str, report: dict, art: ScheduleArtifacts, config: PipelineConfig) -> None:
    out = export.ensure_dir(config.out_dir)
    formats = set(config.formats)
    if "graphml" in formats:
        export.export_graphml(art.ppn, out / f"ppn_{schedule}.graphml")
        if art.lcc is not None:
            export.export_graphml(art.lcc, out / f"lcc_{schedule}.graphml")
    if "geojson" in formats:
        try:
            report["geojson"] = export.export_geojson(art.ppn, out / f"ppn_{schedule}.geojson")
        except ValueError as exc:
            report["geojson"] = None
            report["notices"].append(f"geojson skipped: {exc}")
    if "csv" in formats:
        export.export_frequency_csv(art.frequency, out / f"specialty_{schedule}.csv")
    if "json" in formats and art.partition is not None:
        export.write_json(communities_dict(art.partition), out / f"communities_{schedule}.json")


def run_pipeline(config: PipelineConfig) -> list[dict]:
    """Run every stage for each configured schedule and write the outputs."""
    config.validate()
    records, ingest, diagnostics = load_records(config)
    buckets = partition_by_schedule(records)
    ingest_summary = ingest.to_dict()
    ingest_summary["parse_diagnostics"] = [f"line {d.line}: {d.message}" for d in diagnostics]

    reports = []
    for schedule in config.schedules:
        log.info("schedule %s: %d records", schedule, len(buckets[schedule]))
        report, art = analyze_schedule(schedule, buckets[schedule], config)
        report["ingest"] = ingest_summary
        write_schedule_outputs(schedule, report, art, config)
        reports.append(report)

    out = export.ensure_dir(config.out_dir)
    if "json" in config.formats:
        export.export_report(reports, "json", out / "report.json", config.echo())
    if "csv" in config.formats:
        export.export_report(reports, "csv", out / "report.csv")
    return reports
