"""Command line interface.

Every flag can also be given in a ``key=value`` config file passed with
``--config``; flags on the command line win. Exit codes: 0 success,
1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ppnet import export
from ppnet.graph import (
    build_bipartite,
    degree_sequence,
    drop_singletons,
    largest_connected_component,
    prescriber_attrs,
    project,
)
from ppnet.ingest import ClaimsFormatError, partition_by_schedule
from ppnet.linkcomm import link_communities
from ppnet.pipeline import (
    FORMATS,
    ConfigError,
    PipelineConfig,
    communities_dict,
    load_records,
    run_pipeline,
)
from ppnet.stats import distribution_moments, prescriber_profiles, specialty_frequency, tukey_extreme_outliers
from ppnet.surrogate import max_partition_density_statistic, surrogate_test

log = logging.getLogger("ppnet")

# config-file key -> (argparse dest, converter)
_CONFIG_KEYS = {
    "input": ("input", str),
    "schedules": ("schedules", str),
    "seed": ("seed", int),
    "ns": ("ns", int),
    "fence_k": ("fence_k", float),
    "swap_q": ("swap_q", float),
    "threshold": ("threshold", float),
    "stoplist": ("stoplist", str),
    "out": ("out", str),
    "formats": ("formats", str),
    "quartile_method": ("quartile_method", str),
    "use_drug_map": ("use_drug_map", lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
    "no_surrogates": ("no_surrogates", lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
    "workers": ("workers", int),
    "graph": ("graph", str),
}


def read_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            dest, conv = _CONFIG_KEYS[key]
            try:
                values[dest] = conv(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _split(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(s.strip() for s in text.split(",") if s.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file mirroring the flags")
    common.add_argument("--input", help="claims CSV")
    common.add_argument("--schedules", help="comma list from II,III,IV (default all)")
    common.add_argument("--seed", type=int)
    common.add_argument("--ns", type=int, help="number of surrogates (default 99)")
    common.add_argument("--fence-k", type=float, help="Tukey fence multiplier (default 4.5)")
    common.add_argument("--swap-q", type=float, help="swap attempts per edge (default 10)")
    common.add_argument("--threshold", type=float, help="rejection threshold on S (default 2)")
    common.add_argument("--stoplist", help="comma list of specialties left out of frequency tables")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--formats", help=f"comma list from {','.join(FORMATS)}")
    common.add_argument("--quartile-method", choices=("linear", "hinges"))
    common.add_argument("--use-drug-map", action="store_true", default=None,
                        help="take schedules from the built-in drug table")
    common.add_argument("--no-surrogates", action="store_true", default=None)
    common.add_argument("--workers", type=int, help="processes for the surrogate loop")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ppnet", description="Prescriber-prescriber network analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="parse and validate claims, print the ingest report")
    sub.add_parser("build", parents=[common], help="write PPN and LCC GraphML per schedule")
    sub.add_parser("stats", parents=[common], help="prescriber profiles and degree moments")
    sub.add_parser("outliers", parents=[common], help="Tukey extreme outliers and specialty frequencies")
    p = sub.add_parser("communities", parents=[common], help="link communities of a GraphML graph")
    p.add_argument("--graph", help="GraphML file (e.g. lcc_II.graphml from `build`)")
    p = sub.add_parser("surrogate", parents=[common], help="surrogate test of maximum partition density")
    p.add_argument("--graph", help="GraphML file of a connected graph")
    sub.add_parser("export", parents=[common], help="write GraphML and GeoJSON per schedule")
    sub.add_parser("run", parents=[common], help="full pipeline")
    return parser


def resolve(args: argparse.Namespace) -> tuple[PipelineConfig, dict]:
    """Merge defaults, config file and flags into a validated-ready config."""
    merged: dict = {}
    if args.config:
        merged.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command", "verbose"):
            merged[key] = value
    cfg = PipelineConfig()
    if "input" in merged:
        cfg.input_path = merged["input"]
    if "schedules" in merged:
        cfg.schedules = _split(merged["schedules"])
    if "seed" in merged:
        cfg.seed = merged["seed"]
    if "ns" in merged:
        cfg.n_s = merged["ns"]
    if "fence_k" in merged:
        cfg.fence_k = merged["fence_k"]
    if "swap_q" in merged:
        cfg.swap_q = merged["swap_q"]
    if "threshold" in merged:
        cfg.threshold = merged["threshold"]
    if "stoplist" in merged:
        cfg.stoplist = _split(merged["stoplist"])
    if "out" in merged:
        cfg.out_dir = merged["out"]
    if "formats" in merged:
        cfg.formats = _split(merged["formats"])
    if "quartile_method" in merged:
        cfg.quartile_method = merged["quartile_method"]
    if merged.get("use_drug_map"):
        cfg.use_drug_map = True
    if merged.get("no_surrogates"):
        cfg.surrogates = False
    if "workers" in merged:
        cfg.workers = merged["workers"]
    return cfg, merged


def _print(obj) -> None:
    print(json.dumps(export._json_safe(obj), indent=2))


def _graph_arg(merged: dict):
    path = merged.get("graph")
    if not path:
        raise ConfigError("--graph is required")
    if not Path(path).is_file():
        raise ConfigError(f"graph file not found: {path}")
    return export.read_graphml(path)


def _schedule_buckets(cfg: PipelineConfig):
    records, ingest, diagnostics = load_records(cfg)
    return partition_by_schedule(records), ingest, diagnostics


def cmd_validate(cfg: PipelineConfig, merged: dict) -> int:
    _, ingest, diagnostics = _schedule_buckets(cfg)
    out = ingest.to_dict()
    out["parse_diagnostics"] = [{"line": d.line, "message": d.message} for d in diagnostics]
    _print(out)
    return 0


def cmd_build(cfg: PipelineConfig, merged: dict) -> int:
    buckets, _, _ = _schedule_buckets(cfg)
    out = export.ensure_dir(cfg.out_dir)
    summary = {}
    for s in cfg.schedules:
        recs = buckets[s]
        ppn = project(build_bipartite(recs), "prescriber", prescriber_attrs(recs))
        export.export_graphml(ppn, out / f"ppn_{s}.graphml")
        entry = {"ppn_nodes": ppn.number_of_nodes(), "ppn_edges": ppn.number_of_edges()}
        if ppn.number_of_nodes():
            lcc = largest_connected_component(ppn)
            export.export_graphml(lcc, out / f"lcc_{s}.graphml")
            entry.update(lcc_nodes=lcc.number_of_nodes(), lcc_edges=lcc.number_of_edges())
        summary[s] = entry
    _print(summary)
    return 0


def cmd_stats(cfg: PipelineConfig, merged: dict) -> int:
    buckets, _, _ = _schedule_buckets(cfg)
    out = export.ensure_dir(cfg.out_dir)
    summary = {}
    for s in cfg.schedules:
        recs = buckets[s]
        profiles = prescriber_profiles(recs)
        with open(out / f"profiles_{s}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["prescriber_id", "total_prescriptions", "distinct_patients", "avg_count", "specialty"])
            for p in profiles:
                writer.writerow(
                    [p.prescriber_id, p.total_prescriptions, p.distinct_patients, repr(float(p.avg_count)), p.specialty]
                )
        core = drop_singletons(project(build_bipartite(recs)))
        try:
            moments = distribution_moments(degree_sequence(core)).to_dict()
        except ValueError as exc:
            moments = {"error": str(exc)}
        summary[s] = {"prescribers": len(profiles), "degree_moments": moments}
    _print(summary)
    return 0


def cmd_outliers(cfg: PipelineConfig, merged: dict) -> int:
    buckets, _, _ = _schedule_buckets(cfg)
    out = export.ensure_dir(cfg.out_dir)
    summary = {}
    for s in cfg.schedules:
        profiles = prescriber_profiles(buckets[s])
        if not profiles:
            summary[s] = None
            continue
        fence = tukey_extreme_outliers(
            {p.prescriber_id: float(p.avg_count) for p in profiles}, cfg.fence_k, cfg.quartile_method
        )
        freq = specialty_frequency(fence.flagged, profiles, cfg.stoplist)
        export.export_frequency_csv(freq, out / f"specialty_{s}.csv")
        summary[s] = fence.to_dict() | {"specialty_frequency": freq}
    _print(summary)
    return 0


def cmd_communities(cfg: PipelineConfig, merged: dict) -> int:
    graph = _graph_arg(merged)
    _, partition, _ = link_communities(graph)
    _print(communities_dict(partition))
    return 0


def cmd_surrogate(cfg: PipelineConfig, merged: dict) -> int:
    graph = _graph_arg(merged)
    if cfg.seed is None:
        raise ConfigError("--seed is required for surrogate testing")
    if cfg.n_s < 2:
        raise ConfigError("--ns must be >= 2")
    res = surrogate_test(
        graph,
        max_partition_density_statistic,
        n_s=cfg.n_s,
        seed=cfg.seed,
        swap_factor=cfg.swap_q,
        threshold=cfg.threshold,
        workers=cfg.workers,
    )
    _print(res.to_dict())
    return 0


def cmd_export(cfg: PipelineConfig, merged: dict) -> int:
    buckets, _, _ = _schedule_buckets(cfg)
    out = export.ensure_dir(cfg.out_dir)
    summary = {}
    for s in cfg.schedules:
        recs = buckets[s]
        ppn = project(build_bipartite(recs), "prescriber", prescriber_attrs(recs))
        entry = {}
        if "graphml" in cfg.formats:
            export.export_graphml(ppn, out / f"ppn_{s}.graphml")
        if "geojson" in cfg.formats:
            try:
                entry["geojson"] = export.export_geojson(ppn, out / f"ppn_{s}.geojson")
            except ValueError as exc:
                entry["geojson"] = {"skipped": str(exc)}
        summary[s] = entry
    _print(summary)
    return 0


def cmd_run(cfg: PipelineConfig, merged: dict) -> int:
    reports = run_pipeline(cfg)
    _print(
        {
            r["schedule"]: {
                "ppn": [r["ppn_nodes"], r["ppn_edges"]],
                "lcc": [r["lcc_nodes"], r["lcc_edges"]],
                "flagged": r["fence"]["flagged_count"] if r["fence"] else 0,
                "S": r["surrogate"]["S"] if r["surrogate"] else None,
            }
            for r in reports
        }
    )
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "build": cmd_build,
    "stats": cmd_stats,
    "outliers": cmd_outliers,
    "communities": cmd_communities,
    "surrogate": cmd_surrogate,
    "export": cmd_export,
    "run": cmd_run,
}

# commands that read the claims file
_NEEDS_INPUT = {"validate", "build", "stats", "outliers", "export", "run"}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg, merged = resolve(args)
        if args.command in _NEEDS_INPUT:
            if args.command != "run":
                # only `run` needs a seed up front
                cfg.surrogates = False
            cfg.validate()
        return COMMANDS[args.command](cfg, merged)
    except (ConfigError, ClaimsFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
