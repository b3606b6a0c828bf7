"""Comparison tables, sweep aggregation and the JSON report schemas."""
from __future__ import annotations

import json
import statistics
from typing import Iterable, Sequence

from .compiler import Comparison

COMPILE_REPORT_SCHEMA = {
    "type": "object",
    "required": ["config", "shuttles", "fidelity", "makespan_s", "compile_time_s", "gates", "qubits"],
    "properties": {
        "config": {"type": "object"},
        "shuttles": {"type": "integer", "minimum": 0},
        "fidelity": {"type": "number", "minimum": 0, "maximum": 1},
        "makespan_s": {"type": "number", "minimum": 0},
        "compile_time_s": {"type": ["number", "null"], "minimum": 0},
        "gates": {"type": "integer", "minimum": 0},
        "qubits": {"type": "integer", "minimum": 0},
        "reorders": {"type": "integer", "minimum": 0},
        "rebalances": {"type": "integer", "minimum": 0},
        "seed": {"type": ["integer", "null"]},
        "benchmark": {"type": "string"},
    },
}

_STAT = {
    "type": ["object", "null"],
    "required": ["mean", "sd", "n"],
    "properties": {"mean": {"type": "number"}, "sd": {"type": "number"}, "n": {"type": "integer"}},
}

SWEEP_ROW_SCHEMA = {
    "type": "object",
    "required": ["benchmark", "group", "qubits", "gates_2q", "seed", "results"],
    "properties": {
        "benchmark": {"type": "string"},
        "group": {"type": "string"},
        "qubits": {"type": "integer"},
        "gates_2q": {"type": "integer"},
        "seed": {"type": ["integer", "null"]},
        "error": {"type": "string"},
        "results": {"type": "object", "additionalProperties": COMPILE_REPORT_SCHEMA},
        "deltas": {"type": "object"},
    },
}

SWEEP_AGGREGATE_SCHEMA = {
    "type": "object",
    "required": ["configs", "baseline", "groups"],
    "properties": {
        "configs": {"type": "array", "items": {"type": "string"}},
        "baseline": {"type": "string"},
        "groups": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["circuits", "qubits", "gates_2q", "shuttles"],
                "properties": {
                    "circuits": {"type": "integer"},
                    "failed": {"type": "integer"},
                    "qubits": _STAT,
                    "gates_2q": _STAT,
                    "shuttles": {"type": "object", "additionalProperties": _STAT},
                    "fidelity": {"type": "object", "additionalProperties": _STAT},
                    "compile_time_s": {"type": "object", "additionalProperties": _STAT},
                    "delta_shuttles": {"type": "object", "additionalProperties": _STAT},
                    "pct_delta": {"type": "object", "additionalProperties": _STAT},
                },
            },
        },
    },
}


def mean_sd(values: Sequence[float]) -> dict | None:
    if not values:
        return None
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": statistics.fmean(values), "sd": sd, "n": len(values)}


def cell(stat: dict | None, fmt: str = "{:.0f}", pct: bool = False) -> str:
    """Render ``mean (sd)`` like the random-circuit rows of a results table; bare mean when n == 1."""
    if stat is None:
        return "-"
    suffix = "%" if pct else ""
    if stat["n"] == 1:
        return fmt.format(stat["mean"]) + suffix
    return f"{fmt.format(stat['mean'])}{suffix} ({fmt.format(stat['sd'])})"


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def comparison_row(cmp: Comparison, circuit_qubits: int, gates_2q: int, omit_timing: bool = False,
                   seed: int | None = None, group: str | None = None) -> dict:
    results = {}
    for label, r in zip(cmp.labels, cmp.results):
        rep = r.report(omit_timing)
        rep["benchmark"] = cmp.name
        rep["seed"] = seed
        results[label] = rep
    deltas = {}
    for d in cmp.deltas():
        d = dict(d)
        if omit_timing:
            d["compile_time_delta_s"] = None
        deltas[d.pop("config")] = d
    return {
        "benchmark": cmp.name,
        "group": group or cmp.name,
        "qubits": circuit_qubits,
        "gates_2q": gates_2q,
        "seed": seed,
        "results": results,
        "deltas": deltas,
    }


def aggregate(rows: Iterable[dict], labels: Sequence[str]) -> dict:
    rows = list(rows)
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["group"], []).append(row)
    if len(groups) > 1:
        groups["all"] = rows
    out = {}
    for name, members in groups.items():
        ok = [r for r in members if "error" not in r]
        entry = {
            "circuits": len(members),
            "failed": len(members) - len(ok),
            "qubits": mean_sd([r["qubits"] for r in ok]),
            "gates_2q": mean_sd([r["gates_2q"] for r in ok]),
            "shuttles": {}, "fidelity": {}, "compile_time_s": {},
            "delta_shuttles": {}, "pct_delta": {},
        }
        for label in labels:
            res = [r["results"][label] for r in ok]
            entry["shuttles"][label] = mean_sd([x["shuttles"] for x in res])
            entry["fidelity"][label] = mean_sd([x["fidelity"] for x in res])
            times = [x["compile_time_s"] for x in res]
            entry["compile_time_s"][label] = None if None in times else mean_sd(times)
        for label in labels[1:]:
            entry["delta_shuttles"][label] = mean_sd([r["deltas"][label]["delta_shuttles"] for r in ok])
            entry["pct_delta"][label] = mean_sd([r["deltas"][label]["pct_delta"] for r in ok])
        out[name] = entry
    return {"configs": list(labels), "baseline": labels[0], "groups": out}


def _fmt_ratio(value: float | None) -> str:
    return "-" if value is None else f"{value:.4g}x"


def format_rows_table(rows: Sequence[dict], labels: Sequence[str]) -> str:
    """One line per circuit: Benchmark, Qubits, 2Q gates, per-config shuttles, then deltas vs the first config."""
    head = ["Benchmark", "Qubits", "2Q gates"] + list(labels)
    for label in labels[1:]:
        tag = f" [{label}]" if len(labels) > 2 else ""
        head += [f"Δ(↓){tag}", f"%Δ{tag}", f"Fid ratio{tag}"]
    head += [f"t[{label}] (s)" for label in labels]
    body = []
    for r in rows:
        if "error" in r:
            body.append([r["benchmark"], str(r["qubits"]), str(r["gates_2q"]), "ERROR: " + r["error"]])
            continue
        line = [r["benchmark"], str(r["qubits"]), str(r["gates_2q"])]
        line += [str(r["results"][label]["shuttles"]) for label in labels]
        for label in labels[1:]:
            d = r["deltas"][label]
            line += [str(d["delta_shuttles"]), f"{d['pct_delta']:.2f}%", _fmt_ratio(d["fidelity_ratio"])]
        for label in labels:
            t = r["results"][label]["compile_time_s"]
            line.append("-" if t is None else f"{t:.3f}")
        body.append(line)
    return _render(head, body)


def format_aggregate_table(agg: dict) -> str:
    labels = agg["configs"]
    head = ["Group", "Circuits", "Qubits", "2Q gates"] + list(labels)
    for label in labels[1:]:
        tag = f" [{label}]" if len(labels) > 2 else ""
        head += [f"Δ(↓){tag}", f"%Δ{tag}"]
    head += [f"t[{label}] (s)" for label in labels]
    body = []
    for name, g in agg["groups"].items():
        line = [name, str(g["circuits"]), cell(g["qubits"]), cell(g["gates_2q"])]
        line += [cell(g["shuttles"][label]) for label in labels]
        for label in labels[1:]:
            line += [cell(g["delta_shuttles"][label]), cell(g["pct_delta"][label], "{:.2f}", pct=True)]
        line += [cell(g["compile_time_s"][label], "{:.3f}") for label in labels]
        body.append(line)
    return _render(head, body)


def _render(head: list[str], body: list[list[str]]) -> str:
    widths = [len(h) for h in head]
    for line in body:
        for i, c in enumerate(line[:len(widths)]):
            widths[i] = max(widths[i], len(c))
    fmt = lambda cols: "  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()
    out = [fmt(head), fmt(["-" * w for w in widths])]
    out += [fmt(line) if len(line) == len(head) else "  ".join(line) for line in body]
    return "\n".join(out) + "\n"
