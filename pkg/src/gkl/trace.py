"""Per-iteration run records and their CSV form."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["RunTrace", "TraceFormatError", "write_trace_csv", "read_trace_csv"]

SCALAR_COLUMNS = (
    "nu",
    "sigma",
    "residual_at_selected",
    "max_residual",
    "criterion_value",
    "coefficient",
    "partial_native_norm",
)


class TraceFormatError(ValueError):
    """A trace file could not be parsed."""


@dataclass
class RunTrace:
    """Diagnostics of one greedy run, one row per state ``n = 0, 1, ...``.

    Row ``n`` describes the interpolant built from ``n`` points: ``sigma`` is
    the largest power function value over the candidates, ``max_residual`` the
    largest absolute residual and ``partial_native_norm`` the squared native
    norm of the interpolant.  ``selected_index`` is the point added in this
    step, with ``nu = P_n(x_{n+1})``, ``residual_at_selected = |r_n(x_{n+1})|``
    and ``coefficient = r_n(x_{n+1}) / P_n(x_{n+1})``.

    The last row is terminal: ``selected_index`` is -1 and ``coefficient`` is
    NaN.  If the rule still proposed a point before the run stopped, ``nu``,
    ``residual_at_selected`` and ``criterion_value`` describe that proposal,
    otherwise they are NaN too.
    """

    selected_index: np.ndarray
    coords: np.ndarray
    nu: np.ndarray
    sigma: np.ndarray
    residual_at_selected: np.ndarray
    max_residual: np.ndarray
    criterion_value: np.ndarray
    coefficient: np.ndarray
    partial_native_norm: np.ndarray
    meta: dict = field(default_factory=dict)
    state: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.selected_index = np.asarray(self.selected_index, dtype=int)
        self.coords = np.asarray(self.coords, dtype=float).reshape(len(self.selected_index), -1)
        for name in SCALAR_COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
            if getattr(self, name).shape != self.selected_index.shape:
                raise ValueError(f"column {name} has the wrong length")

    def __len__(self) -> int:
        return self.selected_index.size

    @property
    def n(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def n_selected(self) -> int:
        return int(np.count_nonzero(self.selected_index >= 0))

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def stop_reason(self) -> str | None:
        return self.meta.get("stop_reason")

    def column(self, name: str) -> np.ndarray:
        if name == "n":
            return self.n.astype(float)
        if name in SCALAR_COLUMNS or name == "selected_index":
            return np.asarray(getattr(self, name), dtype=float)
        if name.startswith("x_"):
            return self.coords[:, int(name[2:]) - 1]
        raise KeyError(f"unknown trace column {name!r}")

    @property
    def columns(self) -> list[str]:
        return (
            ["n", "selected_index"]
            + [f"x_{i + 1}" for i in range(self.dim)]
            + list(SCALAR_COLUMNS)
        )


def _fmt(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.16e}"


def _meta_value(value) -> str:
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def write_trace_csv(trace: RunTrace, path=None) -> str:
    """Serialize ``trace``; header metadata goes into leading ``# key=value`` lines.

    Returns the CSV text and writes it to ``path`` when given.
    """
    buf = io.StringIO()
    for key in sorted(trace.meta):
        buf.write(f"# {key}={_meta_value(trace.meta[key])}\n")
    buf.write(",".join(trace.columns) + "\n")
    for i in range(len(trace)):
        fields = [str(i), str(int(trace.selected_index[i]))]
        fields += [_fmt(v) for v in trace.coords[i]]
        fields += [_fmt(float(getattr(trace, c)[i])) for c in SCALAR_COLUMNS]
        buf.write(",".join(fields) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(Path(path), "w", newline="\n") as fh:
            fh.write(text)
    return text


def _parse_meta(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_trace_csv(path) -> RunTrace:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    except UnicodeDecodeError as exc:
        raise TraceFormatError(f"{path}: not a text file") from exc

    meta = {}
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise TraceFormatError(f"{path}: bad metadata line {line!r}")
            meta[key.strip()] = _parse_meta(value.strip())
        elif line.strip():
            body.append(line)
    if not body:
        raise TraceFormatError(f"{path}: no header row")
    header = body[0].split(",")
    dim = sum(1 for h in header if h.startswith("x_"))
    expected = ["n", "selected_index"] + [f"x_{i + 1}" for i in range(dim)] + list(SCALAR_COLUMNS)
    if header != expected:
        raise TraceFormatError(f"{path}: unexpected columns {header}")
    try:
        rows = np.array([[float(v) for v in line.split(",")] for line in body[1:]], dtype=float)
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc
    if rows.size == 0:
        raise TraceFormatError(f"{path}: no data rows")
    if rows.ndim != 2 or rows.shape[1] != len(header):
        raise TraceFormatError(f"{path}: ragged rows")
    if not np.array_equal(rows[:, 0], np.arange(rows.shape[0])):
        raise TraceFormatError(f"{path}: rows are not numbered 0..N")
    cols = {name: rows[:, j] for j, name in enumerate(header)}
    return RunTrace(
        selected_index=cols["selected_index"].astype(int),
        coords=rows[:, 2 : 2 + dim],
        meta=meta,
        **{name: cols[name] for name in SCALAR_COLUMNS},
    )
