"""CSV and JSON report writers with embedded job configuration.

Every file starts with a '#'-prefixed JSON line carrying the full job
configuration, so each artifact is replayable on its own.  Floats are
written with repr, which round-trips bit-exactly and keeps repeated runs
byte-identical.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping

import numpy as np

from .game import GameSpec, GameTrace

TRACE_FIELDS = ("t", "gap", "entropy_of_policy", "l1_error_to_ref_NE")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def config_line(job: Mapping) -> str:
    return "# " + json.dumps(dict(job), sort_keys=True, default=str)


def write_csv(path, fieldnames: Iterable[str], rows: Iterable[Mapping], job: Mapping) -> None:
    """Write rows as CSV under a '#'-prefixed JSON config header."""
    fieldnames = list(fieldnames)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_line(job) + "\n")
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(name)) for name in fieldnames) + "\n")


def read_csv(path) -> tuple[dict, list[dict]]:
    """Read back a config-headed CSV; values stay strings."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise ValueError(f"{path}: missing config header line")
        job = json.loads(header[2:])
        names = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append(dict(zip(names, parts)))
    return job, rows


def trace_rows(trace: GameTrace) -> list[dict]:
    return [
        {
            "t": t,
            "gap": trace.gap[t],
            "entropy_of_policy": trace.entropy[t],
            "l1_error_to_ref_NE": trace.l1_error[t],
        }
        for t in range(len(trace))
    ]


def write_trace(trace: GameTrace, spec: GameSpec, path, job: Mapping) -> None:
    """Trace CSV plus a JSON sidecar with the final state."""
    write_csv(path, TRACE_FIELDS, trace_rows(trace), job)
    sidecar = {
        "seed": trace.seed,
        "mode": trace.mode,
        "iterations": len(trace) - 1,
        "final_policy": [repr(float(v)) for v in trace.policies[-1]],
        "final_target": [repr(float(v)) for v in trace.targets[-1]],
        "final_gap": repr(float(trace.gap[-1])),
        "final_l1_error": repr(float(trace.l1_error[-1])),
        "traces": list(spec.traces),
        "answers": list(spec.answers),
    }
    side_path = str(path).rsplit(".", 1)[0] + ".final.json"
    with open(side_path, "w", encoding="utf-8") as fh:
        json.dump({"job": dict(job), "state": sidecar}, fh, indent=2, default=str)
        fh.write("\n")
