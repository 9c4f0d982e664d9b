"""GraphML, GeoJSON and report serialisation.

Everything here writes with a fixed ordering so reruns produce identical
bytes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import xml.etree.ElementTree as ET
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

from ppnet.graph import NodeAttr, WeightedGraph

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"

_NODE_KEYS = (
    ("d0", "specialty", "string"),
    ("d1", "latitude", "double"),
    ("d2", "longitude", "double"),
    ("d3", "degree", "int"),
)
_EDGE_KEYS = (("d4", "weight", "int"),)


def _write_text(path: str | os.PathLike, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def graphml_string(graph: WeightedGraph) -> str:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<graphml xmlns="{GRAPHML_NS}">',
    ]
    for kid, name, typ in _NODE_KEYS:
        lines.append(f'  <key id="{kid}" for="node" attr.name="{name}" attr.type="{typ}"/>')
    for kid, name, typ in _EDGE_KEYS:
        lines.append(f'  <key id="{kid}" for="edge" attr.name="{name}" attr.type="{typ}"/>')
    lines.append('  <graph id="G" edgedefault="undirected">')
    for n in graph.nodes():
        a = graph.attr(n)
        lines.append(f"    <node id={quoteattr(n)}>")
        if a.specialty:
            lines.append(f'      <data key="d0">{escape(a.specialty)}</data>')
        if a.has_geo:
            lines.append(f'      <data key="d1">{a.latitude!r}</data>')
            lines.append(f'      <data key="d2">{a.longitude!r}</data>')
        lines.append(f'      <data key="d3">{graph.degree(n)}</data>')
        lines.append("    </node>")
    for u, v, w in graph.edges():
        lines.append(f"    <edge source={quoteattr(u)} target={quoteattr(v)}>")
        lines.append(f'      <data key="d4">{w}</data>')
        lines.append("    </edge>")
    lines.append("  </graph>")
    lines.append("</graphml>")
    return "\n".join(lines) + "\n"


def export_graphml(graph: WeightedGraph, path: str | os.PathLike) -> None:
    """Write ``graph`` with node keys specialty/latitude/longitude/degree and edge key weight."""
    _write_text(path, graphml_string(graph))


def read_graphml(path: str | os.PathLike) -> WeightedGraph:
    """Read a GraphML file written by :func:`export_graphml`.

    Edges without a weight get weight 1; unknown keys are ignored.
    """
    root = ET.parse(path).getroot()
    ns = {"g": GRAPHML_NS} if root.tag.startswith("{") else {}
    pre = "g:" if ns else ""
    keys = {}
    for k in root.findall(f"{pre}key", ns):
        keys[k.get("id")] = k.get("attr.name")
    graph_el = root.find(f"{pre}graph", ns)
    if graph_el is None:
        raise ValueError(f"{path}: no <graph> element")

    def data(el) -> dict[str, str]:
        return {keys.get(d.get("key"), d.get("key")): (d.text or "") for d in el.findall(f"{pre}data", ns)}

    nodes, attrs = [], {}
    for el in graph_el.findall(f"{pre}node", ns):
        nid = el.get("id")
        d = data(el)
        lat = float(d["latitude"]) if d.get("latitude") else None
        lon = float(d["longitude"]) if d.get("longitude") else None
        nodes.append(nid)
        attrs[nid] = NodeAttr(specialty=d.get("specialty", ""), latitude=lat, longitude=lon)
    edges = []
    for el in graph_el.findall(f"{pre}edge", ns):
        d = data(el)
        edges.append((el.get("source"), el.get("target"), int(float(d.get("weight", 1)))))
    return WeightedGraph(nodes, edges, attrs)


def geojson_dict(graph: WeightedGraph) -> tuple[dict, dict]:
    """FeatureCollection of geo-located non-singleton nodes and their edges.

    Returns ``(collection, counts)``. Coordinates are ``[longitude, latitude]``.
    """
    located = {n for n in graph.nodes() if graph.degree(n) > 0 and graph.attr(n).has_geo}
    if not located:
        raise ValueError("no geo-located non-singleton nodes to export")
    features = []
    for n in sorted(located):
        a = graph.attr(n)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [a.longitude, a.latitude]},
                "properties": {"id": n, "degree": graph.degree(n), "specialty": a.specialty},
            }
        )
    omitted = 0
    for u, v, w in graph.edges():
        if u in located and v in located:
            au, av = graph.attr(u), graph.attr(v)
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "LineString",
                        "coordinates": [[au.longitude, au.latitude], [av.longitude, av.latitude]],
                    },
                    "properties": {"source": u, "target": v, "weight": w},
                }
            )
        else:
            omitted += 1
    counts = {
        "points": len(located),
        "lines": graph.number_of_edges() - omitted,
        "nodes_without_geo": sum(1 for n in graph.nodes() if graph.degree(n) > 0) - len(located),
        "edges_omitted": omitted,
    }
    return {"type": "FeatureCollection", "features": features}, counts


def export_geojson(graph: WeightedGraph, path: str | os.PathLike) -> dict:
    collection, counts = geojson_dict(graph)
    _write_text(path, json.dumps(collection, indent=1) + "\n")
    return counts


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_json(obj, path: str | os.PathLike) -> None:
    _write_text(path, json.dumps(_json_safe(obj), indent=2) + "\n")


REPORT_COLUMNS = (
    "schedule",
    "prescriptions",
    "prescribers",
    "patients",
    "ppn_nodes",
    "ppn_edges",
    "ppn_total_weight",
    "singletons",
    "lcc_nodes",
    "lcc_edges",
    "degree_n",
    "degree_mean",
    "degree_sd",
    "degree_skewness",
    "degree_kurtosis",
    "degree_excess_kurtosis",
    "fence_q1",
    "fence_q3",
    "fence_k",
    "fence_threshold",
    "quartile_method",
    "flagged_count",
    "flagged_ids",
    "specialty_frequency",
    "community_count",
    "overlap_nodes",
    "cut_similarity",
    "d_max",
    "m_orig",
    "mu_surr",
    "sigma_surr",
    "S",
    "rejected",
    "n_s",
    "swap_factor",
    "seed",
    "sigma_convention",
    "moment_convention",
    "notices",
)


def _flat(report: dict) -> dict:
    row = {c: "" for c in REPORT_COLUMNS}
    for key in ("schedule", "prescriptions", "prescribers", "patients", "ppn_nodes", "ppn_edges",
                "ppn_total_weight", "singletons", "lcc_nodes", "lcc_edges"):
        row[key] = report.get(key, "")
    mom = report.get("degree_moments")
    if mom:
        for k in ("n", "mean", "sd", "skewness", "kurtosis", "excess_kurtosis"):
            row[f"degree_{k}"] = mom[k]
        row["moment_convention"] = mom["convention"]
    fence = report.get("fence")
    if fence:
        row.update(
            fence_q1=fence["q1"],
            fence_q3=fence["q3"],
            fence_k=fence["k"],
            fence_threshold=fence["threshold"],
            quartile_method=fence["quartile_method"],
            flagged_count=fence["flagged_count"],
            flagged_ids=";".join(fence["flagged"]),
        )
    row["specialty_frequency"] = ";".join(f"{s}:{c}" for s, c in report.get("specialty_frequency", []))
    comm = report.get("communities")
    if comm:
        row.update(
            community_count=comm["count"],
            overlap_nodes=comm["overlap_nodes"],
            cut_similarity=comm["cut_similarity"],
            d_max=comm["d_max"],
        )
    sur = report.get("surrogate")
    if sur:
        row.update(
            m_orig=sur["m_orig"],
            mu_surr=sur["mu_surr"],
            sigma_surr=sur["sigma_surr"],
            S=sur["S"],
            rejected=sur["rejected"],
            n_s=sur["n_s"],
            swap_factor=sur["swap_factor"],
            seed=sur["seed"],
            sigma_convention=sur["sigma_convention"],
        )
    row["notices"] = " | ".join(report.get("notices", []))
    return row


def export_report(reports: list[dict], fmt: str, path: str | os.PathLike, config: dict | None = None) -> None:
    """Serialise schedule reports as one JSON document or one CSV row per schedule."""
    if not reports:
        raise ValueError("no reports to export")
    if fmt == "json":
        write_json({"config": config or {}, "schedules": reports}, path)
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for rep in reports:
                writer.writerow(_json_safe(_flat(rep)))
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def export_frequency_csv(freq: list[tuple[str, int]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["specialty", "count"])
        writer.writerows(freq)


def ensure_dir(path: str | os.PathLike) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
