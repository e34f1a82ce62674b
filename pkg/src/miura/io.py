"""Potential JSON files and deterministic CSV/JSON output."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .grid import Grid
from .potential import Atom, Potential


class InputError(ValueError):
    """Raised for malformed or inconsistent input files."""


class _GridModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    a: float
    b: float
    n: int = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError("need finite a < b")
        return self


class _AtomModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    x: float
    w: float


class PotentialFile(BaseModel):
    model_config = ConfigDict(extra="forbid")
    grid: _GridModel
    f: Optional[list[float]] = None
    g: Optional[list[float]] = None
    atoms: list[_AtomModel] = []
    label: Optional[Any] = None

    @field_validator("f", "g")
    @classmethod
    def _finite(cls, v):
        if v is not None and not all(math.isfinite(t) for t in v):
            raise ValueError("samples must be finite")
        return v


def _format_validation(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def potential_from_dict(data: dict) -> Potential:
    try:
        spec = PotentialFile.model_validate(data)
    except ValidationError as err:
        raise InputError(f"schema violation: {_format_validation(err)}") from None
    grid = Grid(spec.grid.a, spec.grid.b, spec.grid.n)
    for name in ("f", "g"):
        arr = getattr(spec, name)
        if arr is not None and len(arr) != grid.n + 1:
            raise InputError(f"{name}: expected {grid.n + 1} samples, got {len(arr)}")
    atoms = []
    for i, atom in enumerate(spec.atoms):
        k = int(round((atom.x - grid.a) / grid.h))
        node = float(grid.x[min(max(k, 0), grid.n)])
        if abs(node - atom.x) > grid.h / 10:
            raise InputError(f"atoms.{i}: x={atom.x} is {abs(node - atom.x):.3g} from the nearest node "
                             f"(tolerance h/10 = {grid.h / 10:.3g})")
        atoms.append(Atom(node, atom.w))
    try:
        return Potential.from_parts(grid, f=spec.f, g=spec.g, atoms=atoms, label=spec.label)
    except ValueError as err:
        raise InputError(str(err)) from None


def parse_potential(path: Union[str, Path]) -> Potential:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise InputError(f"cannot read {path}: {err}") from None
    return potential_from_dict(data)


def potential_to_dict(q: Potential) -> dict:
    return {
        "grid": {"a": q.grid.a, "b": q.grid.b, "n": q.grid.n},
        "f": [float(v) for v in q.f.values],
        "g": [float(v) for v in q.g.values],
        "atoms": [{"x": a.x, "w": a.w} for a in q.atoms],
        "label": q.label,
    }


def write_potential(q: Potential, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(potential_to_dict(q)))


def fmt(v) -> str:
    """17 significant digits, enough to round-trip any double."""
    if isinstance(v, str):
        return v
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
