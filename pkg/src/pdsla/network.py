"""Pairwise Granger networks around one node, and edge-list export.

JSON export schema (``"schema": 1``)::

    {"schema": 1,
     "edges": [{"from": str, "to": str, "p_value": float | null,
                "statistic": float | null, "selected_count": int | null,
                "p_adjusted": float | null, "error": str | null}, ...]}
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

from pdsla.errors import PdslaError, UsageError
from pdsla.lags import LagConfig
from pdsla.panel import Panel
from pdsla.pds import pds_la_test

JSON_SCHEMA_VERSION = 1
FORMATS = ("csv", "json", "dot")


@dataclass
class NetworkEdge:
    """Directed edge ``from -> to``; failed tests keep ``error`` and have no p-value."""

    source: str
    target: str
    p_value: Optional[float]
    statistic: Optional[float]
    selected_count: Optional[int]
    p_adjusted: Optional[float] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.source == self.target:
            raise UsageError(f"self-edge {self.source!r} -> {self.target!r} is not allowed")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["from"] = d.pop("source")
        d["to"] = d.pop("target")
        return {k: d[k] for k in ("from", "to", "p_value", "statistic", "selected_count", "p_adjusted", "error")}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkEdge":
        return cls(d["from"], d["to"], d["p_value"], d["statistic"], d["selected_count"],
                   d.get("p_adjusted"), d.get("error"))


def _sort_key(edge: NetworkEdge):
    return (edge.p_value is None, edge.p_value if edge.p_value is not None else math.inf, edge.source, edge.target)


def _edge(panel, caused, causing, cfg, variant, **kw) -> NetworkEdge:
    try:
        res = pds_la_test(panel, caused, causing, cfg, variant, **kw)
    except PdslaError as exc:
        return NetworkEdge(causing, caused, None, None, None, error=f"{type(exc).__name__}: {exc}")
    return NetworkEdge(causing, caused, res.p_value, res.statistic, res.selected.union_size)


def _edge_task(args):
    panel, caused, causing, cfg, variant, kw = args
    return _edge(panel, caused, causing, cfg, variant, **kw)


def _pairs(panel: Panel, node, direction: str, cfg, variant, workers: int = 1, **kw):
    name = panel.names[panel.index(node)]
    tasks = []
    for other in panel.names:
        if other == name:
            continue
        caused, causing = (name, other) if direction == "to" else (other, name)
        tasks.append((panel, caused, causing, cfg, variant, kw))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            edges = list(pool.map(_edge_task, tasks))
    else:
        edges = [_edge_task(t) for t in tasks]
    return sorted(edges, key=_sort_key)


def network_to(panel: Panel, target, cfg: LagConfig, variant: str = "lm-f", workers: int = 1, **kw) -> list:
    """Edges ``other -> target`` for every other column, conditioning on the full panel.

    Always returns ``K - 1`` edges sorted by p-value; a pair whose test fails
    keeps its slot with ``error`` set. Extra keywords go to :func:`pds_la_test`.
    """
    return _pairs(panel, target, "to", cfg, variant, workers, **kw)


def network_from(panel: Panel, source, cfg: LagConfig, variant: str = "lm-f", workers: int = 1, **kw) -> list:
    """Edges ``source -> other`` for every other column."""
    return _pairs(panel, source, "from", cfg, variant, workers, **kw)


def holm_adjust(edges: Sequence[NetworkEdge]) -> list:
    """Holm step-down adjusted p-values, stored on copies of the edges."""
    ok = [e for e in edges if e.p_value is not None]
    order = sorted(range(len(ok)), key=lambda i: ok[i].p_value)
    m = len(ok)
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * ok[i].p_value))
        adjusted[i] = running
    out = []
    it = iter(adjusted)
    for e in edges:
        new = NetworkEdge(**asdict(e))
        if e.p_value is not None:
            new.p_adjusted = next(it)
        out.append(new)
    return out


def _significant(edge: NetworkEdge, alpha: float) -> bool:
    p = edge.p_adjusted if edge.p_adjusted is not None else edge.p_value
    return p is not None and p <= alpha


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def edges_to_dot(edges: Sequence[NetworkEdge], alpha_filter: float = 0.05, name: str = "granger") -> str:
    lines = [f"digraph {_dot_id(name)} {{"]
    for e in edges:
        if _significant(e, alpha_filter):
            lines.append(f'  {_dot_id(e.source)} -> {_dot_id(e.target)} [label="{e.p_value:.3g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_edges(edges: Sequence[NetworkEdge], path, fmt: str = "csv", alpha_filter: float = 0.05,
                 sectors: Optional[dict] = None) -> Path:
    """Write edges; DOT keeps only edges with p-value <= ``alpha_filter``, CSV/JSON keep all.

    ``sectors`` maps variable names to a group label, added as a CSV column
    (for the counterpart node of each edge).
    """
    if fmt not in FORMATS:
        raise UsageError(f"format must be one of {FORMATS}")
    path = Path(path)
    if fmt == "dot":
        path.write_text(edges_to_dot(edges, alpha_filter))
    elif fmt == "json":
        payload = {"schema": JSON_SCHEMA_VERSION, "edges": [e.to_dict() for e in edges]}
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        with path.open("w", newline="") as fh:
            fields = ["from", "to", "p_value", "statistic", "selected_count", "p_adjusted", "error"]
            if sectors is not None:
                fields.append("sector")
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for e in edges:
                row = e.to_dict()
                if sectors is not None:
                    row["sector"] = sectors.get(e.source, sectors.get(e.target, ""))
                writer.writerow(row)
    return path


def read_edges_json(path) -> list:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != JSON_SCHEMA_VERSION:
        raise UsageError(f"unsupported edge schema {payload.get('schema')!r}")
    return [NetworkEdge.from_dict(d) for d in payload["edges"]]
