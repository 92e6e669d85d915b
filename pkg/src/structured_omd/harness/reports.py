"""Serialization of run records: CSV and JSON emitters, JSON loader.

CSV floats carry 17 significant digits and JSON floats use the shortest
round-trip representation, so loading a report reproduces the values
exactly and reruns with the same seed are byte-identical.
"""

import json

from .config import ConfigError
from .runner import RunRecord

CSV_HEADER = "trial,round,regret,bound"
SWEEP_HEADER = "space,N,T,trial,final_regret,bound,bound_satisfied"


def _float_repr(x):
    return "%.17g" % float(x)


def _csv_lines(record):
    lines = [CSV_HEADER]
    for trial, curve in enumerate(record.regrets):
        for t in range(curve.shape[0]):
            lines.append("%d,%d,%s,%s" % (
                trial, t + 1, _float_repr(curve[t]), _float_repr(record.bound[t])))
    return lines


def _json_text(record):
    return json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n"


def render_report(record, format="csv"):
    """Render record as CSV or JSON text."""
    if format == "csv":
        return "\n".join(_csv_lines(record)) + "\n"
    if format == "json":
        return _json_text(record)
    raise ConfigError("format must be csv or json")


def emit_report(record, path, format="csv"):
    """Write record to path; format is "csv" or "json"."""
    text = render_report(record, format)
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError("cannot write %s: %s" % (path, exc)) from None


def load_record(path):
    """Read a JSON report back into a RunRecord."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc)) from None
    except ValueError as exc:
        raise ConfigError("bad JSON in %s: %s" % (path, exc)) from None
    return RunRecord.from_dict(data)


def emit_sweep(rows, path):
    """Write sweep rows (space, N, T, trial, final, bound, ok) as CSV."""
    lines = [SWEEP_HEADER]
    for space, N, T, trial, final, bound, ok in rows:
        lines.append("%s,%d,%d,%d,%s,%s,%s" % (
            space, N, T, trial, _float_repr(final), _float_repr(bound),
            "true" if ok else "false"))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ConfigError("cannot write %s: %s" % (path, exc)) from None


def emit_lower_bound(summary, path):
    """Write a lower-bound summary dict as JSON."""
    try:
        with open(path, "w") as fh:
            fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigError("cannot write %s: %s" % (path, exc)) from None
