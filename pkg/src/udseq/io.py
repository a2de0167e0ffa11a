"""JSON/CSV formats, run configuration and report emission.

Weights are JSON numbers (floats stay floats, integers become exact) or
strings ``"p/q"`` (exact).  Exact weights are always written as ``"p/q"``
so that reading back gives the same ``Fraction``; floats are written with
``repr`` and round-trip bit for bit.

A measure, sequence or kernel names its space either inline (a space
object) or by label; labels resolve against the spaces passed by the caller.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .core import DiscreteMeasure, MetricSpace, PointSequence
from .errors import InputError, MetricAxiomError, UdseqError

_RATIONAL = re.compile(r"^-?[0-9]+(/[0-9]+)?$")

WEIGHT = {
    "oneOf": [
        {"type": "number", "minimum": 0},
        {"type": "string", "pattern": "^[0-9]+(/[0-9]*[1-9][0-9]*)?$"},
    ]
}
NUMBER_ROWS = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
SPACE = {
    "type": "object",
    "properties": {
        "label": {"type": "string"},
        "points": {"type": "array", "items": {"type": "string"}},
        "dist": NUMBER_ROWS,
        "coords": NUMBER_ROWS,
        "metric": {"const": "euclidean"},
    },
    "oneOf": [{"required": ["dist"]}, {"required": ["coords"]}],
    "additionalProperties": False,
}
SPACE_REF = {"oneOf": [{"type": "string"}, SPACE]}
ATOMS = {
    "type": "array",
    "items": {
        "type": "array",
        "prefixItems": [{"type": "integer", "minimum": 0}, WEIGHT],
        "minItems": 2,
        "maxItems": 2,
    },
}
MEASURE = {
    "type": "object",
    "properties": {"space": SPACE_REF, "atoms": ATOMS, "probability": {"type": "boolean"}},
    "required": ["atoms"],
    "additionalProperties": False,
}
SEQUENCE = {
    "type": "object",
    "properties": {"space": SPACE_REF, "ids": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
    "required": ["ids"],
    "additionalProperties": False,
}
INDEX_LISTS = {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}}
DECOMPOSITION = {
    "type": "object",
    "properties": {
        "space": SPACE,
        "target": MEASURE,
        "pieces": INDEX_LISTS,
        "approximators": {"type": "array", "items": {"type": "array", "items": MEASURE}},
        "measures": {"type": "array", "items": MEASURE},
        "horizon": {"type": "integer", "minimum": 1},
    },
    "required": ["space", "pieces"],
    "additionalProperties": False,
}
KERNEL = {
    "type": "object",
    "properties": {
        "domain": SPACE,
        "codomain": SPACE,
        "map": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "integer", "minimum": 0}, MEASURE],
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "pieces": INDEX_LISTS,
    },
    "required": ["domain", "codomain", "map"],
    "additionalProperties": False,
}
SCHEMAS = {
    "space": SPACE,
    "measure": MEASURE,
    "sequence": SEQUENCE,
    "decomposition": DECOMPOSITION,
    "kernel": KERNEL,
}


def json_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "$"


def schema_violations(doc, kind: str) -> list:
    """``(json path, message)`` for each schema violation, sorted by path."""
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    found = [(json_path(e.absolute_path), e.message) for e in validator.iter_errors(doc)]
    return sorted(found)


def _validate(doc, kind: str, where: str = "") -> None:
    found = schema_violations(doc, kind)
    if found:
        head = "; ".join(f"{p}: {m}" for p, m in found[:3])
        raise InputError(f"{where or kind}: schema violation at {head}", violations=found)


def parse_weight(w):
    if isinstance(w, bool):
        raise InputError(f"weight {w!r} is not a number")
    if isinstance(w, int):
        return Fraction(w)
    if isinstance(w, float):
        return w
    if isinstance(w, str) and _RATIONAL.match(w):
        return Fraction(w)
    raise InputError(f"cannot read weight {w!r}")


def format_weight(w):
    if isinstance(w, Fraction):
        return f"{w.numerator}/{w.denominator}"
    return float(w)


# ---------------------------------------------------------------------------
# spaces, measures, sequences


def space_from_json(doc: dict, where: str = "space") -> MetricSpace:
    _validate(doc, "space", where)
    label = doc.get("label", "")
    points = doc.get("points")
    try:
        if "coords" in doc:
            s = MetricSpace.euclidean(np.asarray(doc["coords"], dtype=float), points=points, label=label)
        else:
            s = MetricSpace.from_matrix(np.asarray(doc["dist"], dtype=float), points=points, label=label)
    except UdseqError as e:
        raise InputError(f"{where}: {e}") from e
    except ValueError as e:
        raise InputError(f"{where}: {e}", violations=[(where, str(e))]) from e
    if s.violations:
        raise MetricAxiomError(
            f"{where}: metric axioms fail ({len(s.violations)} violations, first: {s.violations[0].detail})",
            violations=[(where, v.detail) for v in s.violations],
        )
    return s


def space_to_json(s: MetricSpace) -> dict:
    doc = {"label": s.label, "points": list(s.points)}
    if s.coords is not None:
        doc["coords"] = np.asarray(s.coords).tolist()
        doc["metric"] = "euclidean"
    else:
        doc["dist"] = s.dist.tolist()
    return doc


def _resolve_space(ref, spaces: Sequence[MetricSpace], where: str) -> MetricSpace:
    if ref is None:
        if len(spaces) == 1:
            return spaces[0]
        raise InputError(f"{where}: no space given and none implied")
    if isinstance(ref, dict):
        return space_from_json(ref, f"{where}.space")
    for s in spaces:
        if s.label == ref:
            return s
    raise InputError(f"{where}: unknown space label {ref!r}", violations=[(f"{where}.space", "unknown label")])


def measure_from_json(doc: dict, spaces: Sequence[MetricSpace] = (), where: str = "measure") -> DiscreteMeasure:
    _validate(doc, "measure", where)
    space = _resolve_space(doc.get("space"), spaces, where)
    atoms = [(p, parse_weight(w)) for p, w in doc["atoms"]]
    problems = [(f"{where}.atoms[{k}][0]", f"id {p} outside space of size {len(space)}") for k, (p, _) in enumerate(atoms) if p >= len(space)]
    seen = {}
    for k, (p, _) in enumerate(atoms):
        if p in seen:
            problems.append((f"{where}.atoms[{k}][0]", f"duplicate id {p}"))
        seen[p] = k
    if problems:
        raise InputError(f"{where}: {problems[0][1]}", violations=problems)
    m = DiscreteMeasure(space, tuple(atoms))
    if doc.get("probability") and not m.is_probability():
        raise InputError(f"{where}: declared probability but mass is {m.mass}", violations=[(where, "mass")])
    return m


def measure_to_json(m: DiscreteMeasure, inline_space: bool = True) -> dict:
    return {
        "space": space_to_json(m.space) if inline_space else m.space.label,
        "atoms": [[p, format_weight(w)] for p, w in m.atoms],
    }


def sequence_from_json(doc: dict, spaces: Sequence[MetricSpace] = (), where: str = "sequence") -> PointSequence:
    _validate(doc, "sequence", where)
    space = _resolve_space(doc.get("space"), spaces, where)
    bad = [(f"{where}.ids[{k}]", f"id {p} outside space") for k, p in enumerate(doc["ids"]) if p >= len(space)]
    if bad:
        raise InputError(f"{where}: {bad[0][1]}", violations=bad)
    return PointSequence(space, tuple(doc["ids"]))


def sequence_to_json(seq: PointSequence, inline_space: bool = True) -> dict:
    return {"space": space_to_json(seq.space) if inline_space else seq.space.label, "ids": list(seq.ids)}


# ---------------------------------------------------------------------------
# decompositions and kernels


def decomposition_from_json(doc: dict, where: str = "decomposition"):
    from .glue import PieceDecomposition

    _validate(doc, "decomposition", where)
    space = space_from_json(doc["space"], f"{where}.space")
    target = measure_from_json(doc["target"], [space], f"{where}.target") if "target" in doc else None
    approx = tuple(
        tuple(measure_from_json(m, [space], f"{where}.approximators[{j}][{k}]") for k, m in enumerate(row))
        for j, row in enumerate(doc.get("approximators", ()))
    )
    measures = tuple(measure_from_json(m, [space], f"{where}.measures[{k}]") for k, m in enumerate(doc.get("measures", ())))
    try:
        if target is not None and not approx and "horizon" in doc:
            return PieceDecomposition.from_target(space, target, doc["pieces"], doc["horizon"])
        return PieceDecomposition(space, tuple(doc["pieces"]), target, approx, measures)
    except UdseqError as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"{where}: {e}", violations=[(where, str(e))]) from e


def decomposition_to_json(decomp) -> dict:
    doc = {"space": space_to_json(decomp.space), "pieces": [sorted(p) for p in decomp.pieces]}
    label = decomp.space.label
    if decomp.target is not None:
        doc["target"] = measure_to_json(decomp.target, inline_space=False) | {"space": label}
    if decomp.approximators:
        doc["approximators"] = [[measure_to_json(m, inline_space=False) for m in row] for row in decomp.approximators]
    if decomp.measures:
        doc["measures"] = [measure_to_json(m, inline_space=False) for m in decomp.measures]
    return doc


def kernel_from_json(doc: dict, where: str = "kernel"):
    from .product import Kernel

    _validate(doc, "kernel", where)
    x = space_from_json(doc["domain"], f"{where}.domain")
    y = space_from_json(doc["codomain"], f"{where}.codomain")
    values = [None] * len(x)
    for k, (p, m) in enumerate(doc["map"]):
        if p >= len(x):
            raise InputError(f"{where}.map[{k}][0]: id {p} outside the domain", violations=[(f"{where}.map[{k}][0]", "range")])
        values[p] = measure_from_json(m, [y], f"{where}.map[{k}][1]")
    try:
        return Kernel.from_values(x, y, values, doc.get("pieces", ()))
    except UdseqError as e:
        raise InputError(f"{where}: {e}", violations=[(where, str(e))]) from e


def kernel_to_json(k) -> dict:
    return {
        "domain": space_to_json(k.domain),
        "codomain": space_to_json(k.codomain),
        "map": [[x, measure_to_json(m, inline_space=False)] for x, m in enumerate(k.map) if m is not None],
        "pieces": [sorted(p) for p in k.pieces],
    }


# ---------------------------------------------------------------------------
# files


def read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})", violations=[("$", e.msg)]) from e


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    if str(path) == "-":
        print(text, end="")
        return
    Path(path).write_text(text)


def write_json(path, doc) -> None:
    write_text(path, dumps(doc))


def load(path, kind: str, spaces: Sequence[MetricSpace] = ()):
    """Read and validate one input file of the given kind."""
    doc = read_json(path)
    where = Path(path).name
    if kind == "space":
        return space_from_json(doc, where)
    if kind == "measure":
        return measure_from_json(doc, spaces, where)
    if kind == "sequence":
        return sequence_from_json(doc, spaces, where)
    if kind == "decomposition":
        return decomposition_from_json(doc, where)
    if kind == "kernel":
        return kernel_from_json(doc, where)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# reports


def to_jsonable(v):
    if isinstance(v, Fraction):
        return format_weight(v)
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (frozenset, set)):
        return sorted(to_jsonable(x) for x in v)
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [to_jsonable(x) for x in v.tolist()]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def from_jsonable(v):
    """Inverse of :func:`to_jsonable` for report summaries: ``"p/q"`` strings become fractions."""
    if isinstance(v, str) and "/" in v and _RATIONAL.match(v):
        return Fraction(v)
    if isinstance(v, dict):
        return {k: from_jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [from_jsonable(x) for x in v]
    return v


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return format_weight(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        return f"{v:.12f}"
    return str(v)


def csv_text(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells for {len(columns)} columns")
        w.writerow([format_cell(v) for v in row])
    return buf.getvalue()


# proof constants reported alongside verdicts
CONSTANTS = {
    "glue_convergence": {"factor": 4, "statement": "|int f dmu - int f dnu_n| <= 4 eps for n >= m (gluing lemma)"},
    "glue_tightness": {"factor": 3, "statement": "sup_n nu_n(X \\ K) <= 3 eps (gluing lemma)"},
    "product_marginal": {"factor": 3, "statement": "|int psi dnu_n - int psi dnu| <= 3 eps past N (product theorem)"},
    "product_convergence": {"factor": 6, "statement": "|int f dmu - int f dmu_n| <= 6 eps past N (product theorem)"},
}


def emit_report(
    csv_path,
    columns: Sequence[str],
    rows: Sequence[Sequence],
    summary: Optional[dict] = None,
    summary_path=None,
) -> str:
    """Write the CSV (header only when ``rows`` is empty) and optionally a JSON summary; returns the CSV text."""
    text = csv_text(columns, rows)
    if csv_path is not None:
        try:
            write_text(csv_path, text)
        except OSError as e:
            raise OSError(f"cannot write report {csv_path}: {e.strerror or e}") from e
    if summary is not None and summary_path is not None:
        write_json(summary_path, summary)
    return text


def read_summary(path) -> dict:
    return from_jsonable(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# run configuration


def worker_count() -> int:
    """Worker cap from ``UDSEQ_THREADS`` (default: CPU count)."""
    raw = os.environ.get("UDSEQ_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError as e:
            raise InputError(f"UDSEQ_THREADS must be a positive integer, got {raw!r}") from e
        if n < 1:
            raise InputError(f"UDSEQ_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)
    horizon: int = 1
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise InputError(f"horizon must be >= 1, got {self.horizon}")
        for name, tol in self.tolerances.items():
            if not tol > 0:
                raise InputError(f"tolerance {name} must be positive, got {tol}")

    def describe(self) -> dict:
        return {
            "command": self.command,
            "options": dict(sorted(self.options.items())),
            "horizon": self.horizon,
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
            "outputs": dict(sorted(self.outputs.items())),
        }
