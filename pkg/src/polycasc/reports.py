"""Deterministic report serialization.

JSON is emitted with sorted keys and repr-exact floats, so identical
studies produce identical bytes no matter how the work was scheduled.
Wall-clock metadata is deliberately kept out of reports (it goes to the
run_meta.json sidecar instead).
"""

import json

import numpy as np


def _coerce(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_coerce) + "\n"


def write_json(path, payload):
    with open(path, "w") as fh:
        fh.write(json_text(payload))


def write_csv(path, header, rows):
    """rows: iterables of cells; floats written with repr for exactness."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(c) for c in row) + "\n")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)
