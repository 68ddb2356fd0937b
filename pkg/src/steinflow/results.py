"""Trace and summary files.

``trace.csv`` (schema ``steinflow.trace/1``) starts with one ``#`` comment line
naming the schema, then a header row::

    iter, mksd, ksd_h=<h_1> ... ksd_h=<h_m>, w_h=<h_1> ... w_h=<h_m>, <metrics...>

Floats are written with ``repr`` so parsing recovers them exactly; metrics
not evaluated at an iteration are left empty. ``summary.json`` (schema
``steinflow.summary/1``) holds the config, seed and final report. Wall-clock
times are not written so reruns are byte-identical.
"""

import csv
import json
import os

import numpy as np

from steinflow.dynamics import IterationRecord, RunTrace

TRACE_SCHEMA = "steinflow.trace/1"
SUMMARY_SCHEMA = "steinflow.summary/1"
AGGREGATE_SCHEMA = "steinflow.aggregate/1"


def trace_header(trace, metric_names=None):
    metric_names = trace.metric_names() if metric_names is None else metric_names
    return (
        ["iter", "mksd"]
        + [f"ksd_h={h}" for h in trace.kernel_labels]
        + [f"w_h={h}" for h in trace.kernel_labels]
        + list(metric_names)
    )


def write_trace(trace, path):
    metric_names = trace.metric_names()
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {TRACE_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_header(trace, metric_names))
        for r in trace.records:
            metrics = [repr(float(r.metrics[k])) if k in r.metrics else "" for k in metric_names]
            writer.writerow(
                [r.iteration, repr(float(r.mksd))]
                + [repr(float(v)) for v in r.ksd]
                + [repr(float(v)) for v in r.weights]
                + metrics
            )


def read_trace(path):
    """Parse a trace file back into a :class:`RunTrace` (elapsed times are zero)."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# schema: {TRACE_SCHEMA}":
            raise ValueError(f"unsupported trace schema line {first!r}")
        rows = list(csv.reader(fh))
    header = rows[0]
    labels = [c[len("ksd_h="):] for c in header if c.startswith("ksd_h=")]
    m = len(labels)
    metric_names = header[2 + 2 * m :]
    trace = RunTrace(labels)
    for row in rows[1:]:
        metrics = {k: float(v) for k, v in zip(metric_names, row[2 + 2 * m :]) if v != ""}
        trace.append(
            IterationRecord(
                int(row[0]),
                np.array([float(v) for v in row[2 + m : 2 + 2 * m]]),
                np.array([float(v) for v in row[2 : 2 + m]]),
                float(row[1]),
                0.0,
                metrics=metrics,
            )
        )
    return trace


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_results(trace, report, directory, config=None, seed=None, particles=None):
    """Write ``trace.csv``, ``summary.json`` and optionally ``particles.csv``."""
    os.makedirs(directory, exist_ok=True)
    write_trace(trace, os.path.join(directory, "trace.csv"))
    summary = {
        "schema": SUMMARY_SCHEMA,
        "seed": seed,
        "config": config,
        "report": report.as_dict() if report is not None else {},
        "iterations": len(trace),
        "bandwidths": list(trace.kernel_labels),
        "final_weights": [float(v) for v in trace.records[-1].weights] if len(trace) else [],
        "uniform_fallback_iterations": [r.iteration for r in trace.records if r.degenerate],
    }
    _dump_json(summary, os.path.join(directory, "summary.json"))
    if particles is not None:
        np.savetxt(os.path.join(directory, "particles.csv"), particles, delimiter=",", fmt="%.17g")
    return directory


def emit_aggregate(summary, directory):
    os.makedirs(directory, exist_ok=True)
    _dump_json({"schema": AGGREGATE_SCHEMA, **summary}, os.path.join(directory, "aggregate.json"))
