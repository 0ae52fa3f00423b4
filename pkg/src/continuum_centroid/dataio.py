"""Curve files, label sidecars, model documents and configuration files.

Curve CSV layout::

    id,label,t_1,t_2,...,t_{M+1}      <- header: grid values after two tag cells
    c001,0,0.13,0.22,...               <- one curve per row; label may be empty

A bare header holding only the grid values is accepted as well.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .classify import FittedClassifier, Kind
from .errors import DataFormatError, InvalidInputError
from .splines import TimeGrid


@dataclass(frozen=True, eq=False)
class CurveSet:
    grid: TimeGrid
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: Optional[List[str]] = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", values)
        if values.shape[1] != self.grid.M + 1:
            raise InvalidInputError(
                f"rows have {values.shape[1]} values but the grid has {self.grid.M + 1} points")
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (values.shape[0],) or not np.all((y == 0) | (y == 1)):
                raise InvalidInputError("labels must be a 0/1 vector, one per curve")
            object.__setattr__(self, "labels", y.astype(int))
        if self.ids is not None and len(self.ids) != values.shape[0]:
            raise InvalidInputError("ids must have one entry per curve")

    @property
    def N(self) -> int:
        return self.values.shape[0]

    def subset(self, idx) -> "CurveSet":
        idx = np.asarray(idx)
        return CurveSet(
            self.grid,
            self.values[idx],
            None if self.labels is None else self.labels[idx],
            None if self.ids is None else [self.ids[i] for i in idx],
        )

    def with_labels(self, labels) -> "CurveSet":
        return CurveSet(self.grid, self.values, labels, self.ids)

    def row_ids(self) -> List[str]:
        return self.ids if self.ids is not None else [str(i + 1) for i in range(self.N)]


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataFormatError(f"row {row}, column {col}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise DataFormatError(f"row {row}, column {col}: non-finite value {cell!r}")
    return v


def load_csv(path) -> CurveSet:
    """Read a curve file; errors name the 1-based row and column."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a grid row and at least one curve")
    header = rows[0]
    if header[0].strip().lower() == "id":
        grid_cells, first_col = header[2:], 3
        width = len(header)
    else:
        grid_cells, first_col = header, 1
        width = len(header) + 2
    grid_vals = [_parse_float(c, 1, first_col + j) for j, c in enumerate(grid_cells)]
    if len(grid_vals) < 2:
        raise DataFormatError("row 1: grid needs at least two points")
    if np.any(np.diff(grid_vals) <= 0):
        raise DataFormatError("row 1: grid values must be strictly increasing")
    try:
        grid = TimeGrid.from_points(grid_vals)
    except InvalidInputError as exc:
        raise DataFormatError(f"row 1: {exc}") from None

    ids, labels, values = [], [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != width:
            raise DataFormatError(f"row {i}: expected {width} cells, found {len(r)}")
        ids.append(r[0].strip())
        lab = r[1].strip()
        if lab == "":
            labels.append(None)
        elif lab in ("0", "1", "0.0", "1.0"):
            labels.append(int(float(lab)))
        else:
            raise DataFormatError(f"row {i}, column 2: label must be 0, 1 or empty, got {lab!r}")
        values.append([_parse_float(c, i, j) for j, c in enumerate(r[2:], start=3)])

    present = [v is not None for v in labels]
    if any(present) and not all(present):
        missing = present.index(False) + 2
        raise DataFormatError(f"row {missing}, column 2: label missing while others are set")
    y = np.array(labels, dtype=int) if all(present) else None
    return CurveSet(grid, np.array(values, dtype=float), y, ids)


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def save_csv(curves: CurveSet, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"] + [format_float(t) for t in curves.grid.points])
        labels = curves.labels
        for i, rid in enumerate(curves.row_ids()):
            lab = "" if labels is None else str(int(labels[i]))
            w.writerow([rid, lab] + [format_float(v) for v in curves.values[i]])


def threshold_labels(curves: CurveSet, sidecar, column: str, threshold: float) -> CurveSet:
    """Label curves 1 when ``column`` in the sidecar CSV is below ``threshold``.

    The sidecar needs an ``id`` column matching the curve ids.
    """
    with Path(sidecar).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise DataFormatError(f"{sidecar}: row 1: missing 'id' column")
        if column not in reader.fieldnames:
            raise DataFormatError(f"{sidecar}: row 1: missing column {column!r}")
        lookup = {}
        for i, row in enumerate(reader, start=2):
            lookup[row["id"].strip()] = _parse_float(row[column], i,
                                                     reader.fieldnames.index(column) + 1)
    ids = curves.row_ids()
    missing = [rid for rid in ids if rid not in lookup]
    if missing:
        raise DataFormatError(f"{sidecar}: no entry for curve id {missing[0]!r}")
    y = np.array([1 if lookup[rid] < threshold else 0 for rid in ids], dtype=int)
    return curves.with_labels(y)


def save_model(clf: FittedClassifier, path) -> None:
    Path(path).write_text(json.dumps(clf.to_dict(), indent=2) + "\n")


def load_model(path) -> FittedClassifier:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from None
    try:
        return FittedClassifier.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: invalid model document ({exc})") from None


# --- configuration -----------------------------------------------------------

def parse_config(text: str) -> Dict[str, str]:
    """Parse ``section.key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"config line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DataFormatError(f"config line {n}: empty key")
        out[key] = value
    return out


def _floats(s: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in s.replace(",", " ").split())


@dataclass
class ExperimentConfig:
    """Settings for ``simulate`` / ``eval`` runs; CLI flags override these."""

    classifiers: Tuple[str, ...] = ("ccc-l", "ccc-q", "plcc", "pcc")
    alphas: Optional[Tuple[float, ...]] = None
    p_upper: Optional[int] = None
    seed: int = 0
    folds: int = 5
    train_fraction: float = 0.8
    repeats: int = 200
    theta_grid: Optional[Tuple[float, ...]] = None
    derivative: int = 0
    threads: int = 1
    design: str = "i"
    rho: float = 1.0
    pi0: float = 0.5
    n: int = 200
    output: Optional[str] = None

    _KEYS = {
        "run.classifiers": ("classifiers", lambda s: tuple(
            c.strip().lower() for c in s.replace(",", " ").split())),
        "run.threads": ("threads", int),
        "run.seed": ("seed", int),
        "tuning.seed": ("seed", int),
        "tuning.alphas": ("alphas", _floats),
        "tuning.p_upper": ("p_upper", int),
        "tuning.folds": ("folds", int),
        "split.fraction": ("train_fraction", float),
        "split.repeats": ("repeats", int),
        "smoothing.theta_grid": ("theta_grid", _floats),
        "data.derivative": ("derivative", int),
        "simulation.design": ("design", lambda s: s.strip().lower()),
        "simulation.rho": ("rho", float),
        "simulation.pi0": ("pi0", float),
        "simulation.n": ("n", int),
        "simulation.replicates": ("repeats", int),
        "output.path": ("output", str),
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidInputError("split fraction must lie in (0, 1)")
        if self.repeats < 1:
            raise InvalidInputError("repeats must be >= 1")
        for c in self.classifiers:
            if c != "majority":
                Kind(c)

    def update(self, **kw) -> "ExperimentConfig":
        for k, v in kw.items():
            if v is not None:
                setattr(self, k, v)
        self.validate()
        return self

    @classmethod
    def from_mapping(cls, mapping: Dict[str, str]) -> "ExperimentConfig":
        kw = {}
        for key, raw in mapping.items():
            if key not in cls._KEYS:
                raise DataFormatError(f"unknown config key {key!r}")
            name, conv = cls._KEYS[key]
            try:
                kw[name] = conv(raw)
            except ValueError as exc:
                raise DataFormatError(f"config key {key!r}: {exc}") from None
        try:
            return cls(**kw)
        except ValueError as exc:
            raise DataFormatError(f"config: {exc}") from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(parse_config(Path(path).read_text()))
