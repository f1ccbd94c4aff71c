"""Plain-text serialization of receiver records.

Floats are written with ``repr`` (shortest round-trip form), so reading a file
back reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .forward import ScatterRecord

CSV_COLUMNS = ["x", "y", "z", "re", "im"]


def _meta_line(key, value):
    return f"# {key} = {value!r}\n"


def record_to_csv(rec: ScatterRecord) -> str:
    buf = io.StringIO()
    buf.write(_meta_line("delta", float(rec.delta)))
    buf.write(_meta_line("seed", rec.seed))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p, v in zip(rec.receivers, rec.values):
        w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                    repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def record_from_csv(text: str) -> ScatterRecord:
    meta = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {header}")
    data = np.array([[float(c) for c in row] for row in reader]).reshape(-1, 5)
    seed = meta.get("seed", "None")
    return ScatterRecord(
        receivers=data[:, :3],
        values=data[:, 3] + 1j * data[:, 4],
        delta=float(meta.get("delta", "0.0")),
        seed=None if seed == "None" else int(seed),
    )


def record_to_text(rec: ScatterRecord) -> str:
    doc = dict(
        delta=float(rec.delta),
        seed=rec.seed,
        receivers=[[float(c) for c in p] for p in rec.receivers],
        re=[float(v) for v in rec.values.real],
        im=[float(v) for v in rec.values.imag],
    )
    return json.dumps(doc, indent=1) + "\n"


def record_from_text(text: str) -> ScatterRecord:
    doc = json.loads(text)
    return ScatterRecord(
        receivers=np.array(doc["receivers"], dtype=float).reshape(-1, 3),
        values=np.array(doc["re"]) + 1j * np.array(doc["im"]),
        delta=float(doc["delta"]),
        seed=doc["seed"],
    )
