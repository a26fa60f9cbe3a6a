"""CSV tables <-> fixed-length token sequences.

Categorical columns map each distinct string to its index in the sorted list
of categories (the empty string is an ordinary category, so missing
categorical cells survive a roundtrip).  Numeric columns are quantile-binned;
bins are right-open except the last, and decode to the per-bin median.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, SchemaError

DEFAULT_BINS = 32
CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass
class Column:
    name: str
    kind: str
    categories: list[str] = field(default_factory=list)
    bin_edges: list[float] = field(default_factory=list)
    bin_representatives: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if not self.categories or len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: categories must be nonempty and unique")
            self._index = {c: i for i, c in enumerate(self.categories)}
        elif self.kind == NUMERIC:
            edges = np.asarray(self.bin_edges, dtype=float)
            reps = np.asarray(self.bin_representatives, dtype=float)
            if edges.size < 2 or np.any(np.diff(edges) <= 0):
                # a single distinct value gives the degenerate edges [v, v]
                if not (edges.size == 2 and edges[0] == edges[1]):
                    raise SchemaError(f"column {self.name!r}: bin edges must be strictly increasing")
            if reps.size != max(edges.size - 1, 1):
                raise SchemaError(f"column {self.name!r}: need one representative per bin")
            if np.any(reps < edges[0]) or np.any(reps > edges[-1]):
                raise SchemaError(f"column {self.name!r}: representatives outside the bin range")
        else:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")

    @property
    def vocab_size(self) -> int:
        if self.kind == CATEGORICAL:
            return len(self.categories)
        return len(self.bin_representatives)

    def encode_cell(self, cell: str) -> int:
        if self.kind == CATEGORICAL:
            try:
                return self._index[cell]
            except KeyError:
                raise InvalidInputError(f"column {self.name!r}: unseen category {cell!r}") from None
        value = _parse_float(cell, self.name)
        return int(bin_index(np.asarray(self.bin_edges), np.array([value]))[0])

    def decode_token(self, token: int) -> str:
        if not 0 <= token < self.vocab_size:
            raise InvalidInputError(f"column {self.name!r}: token {token} out of range")
        if self.kind == CATEGORICAL:
            return self.categories[token]
        return format_number(self.bin_representatives[token])

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "vocab_size": self.vocab_size}
        if self.kind == CATEGORICAL:
            d["categories"] = list(self.categories)
        else:
            d["bin_edges"] = list(self.bin_edges)
            d["bin_representatives"] = list(self.bin_representatives)
        return d


@dataclass
class TableSchema:
    columns: list[Column]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def vocab_sizes(self) -> tuple[int, ...]:
        return tuple(c.vocab_size for c in self.columns)

    def __len__(self):
        return len(self.columns)

    def to_dict(self) -> dict:
        return {"columns": [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "TableSchema":
        try:
            cols = []
            for c in d["columns"]:
                col = Column(
                    c["name"],
                    c["kind"],
                    list(c.get("categories", [])),
                    [float(e) for e in c.get("bin_edges", [])],
                    [float(r) for r in c.get("bin_representatives", [])],
                )
                if "vocab_size" in c and c["vocab_size"] != col.vocab_size:
                    raise SchemaError(f"column {col.name!r}: vocab_size mismatch")
                cols.append(col)
        except (KeyError, TypeError) as e:
            raise SchemaError(f"malformed schema: {e}") from None
        return cls(cols)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TableSchema":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "TableSchema":
        return cls.from_json(Path(path).read_text())


@dataclass
class EncodedDataset:
    schema: TableSchema
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1, len(self.schema))
        if np.any(self.rows < 0) or np.any(self.rows >= np.asarray(self.schema.vocab_sizes)):
            raise InvalidInputError("token index outside its column's vocabulary")

    def __len__(self):
        return self.rows.shape[0]


def format_number(x: float) -> str:
    """Shortest string that parses back to ``x``; integral values drop ``.0``."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _parse_float(cell: str, name: str) -> float:
    try:
        v = float(cell)
    except (TypeError, ValueError):
        raise InvalidInputError(f"column {name!r}: malformed numeric value {cell!r}") from None
    if not math.isfinite(v):
        raise InvalidInputError(f"column {name!r}: non-finite numeric value {cell!r}")
    return v


def _is_number(cell: str) -> bool:
    try:
        return math.isfinite(float(cell))
    except ValueError:
        return False


def bin_index(edges: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Right-open bins ``[e_k, e_{k+1})``; the last bin is closed.

    Values outside the fitted range are clipped into the end bins.
    """
    n_bins = max(edges.size - 1, 1)
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, n_bins - 1)


def _numeric_column(name: str, values: np.ndarray, numeric_bins: int) -> Column:
    levels = np.arange(numeric_bins + 1) / numeric_bins
    edges = np.unique(np.quantile(values, levels, method="lower"))
    if edges.size == 1:
        v = float(edges[0])
        return Column(name, NUMERIC, bin_edges=[v, v], bin_representatives=[v])
    # every edge is a data value sitting in its own bin, so no bin is empty,
    # and a bin's median lies between its smallest and largest member
    idx = bin_index(edges, values)
    reps = [float(np.median(values[idx == k])) for k in range(edges.size - 1)]
    return Column(name, NUMERIC, bin_edges=edges.tolist(), bin_representatives=reps)


def infer_schema(header, rows, numeric_bins: int = DEFAULT_BINS, rng=None) -> TableSchema:
    """Infer column kinds, categories and quantile bins from string rows.

    A column is numeric iff every non-empty cell parses as a finite real.
    ``rng`` is accepted for interface symmetry and unused: inference is
    deterministic.
    """
    if numeric_bins < 1:
        raise ValueError("numeric_bins must be >= 1")
    header = list(header)
    if not header:
        raise InvalidInputError("table has no header")
    if len(set(header)) != len(header):
        raise InvalidInputError("duplicate column names in header")
    rows = [list(r) for r in rows]
    if not rows:
        raise InvalidInputError("table has no data rows")
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise InvalidInputError(f"row {i + 1} has {len(r)} cells, expected {len(header)}")
    columns = []
    for j, name in enumerate(header):
        cells = [r[j] for r in rows]
        nonempty = [c for c in cells if c.strip() != ""]
        if nonempty and all(_is_number(c) for c in nonempty):
            if len(nonempty) != len(cells):
                raise InvalidInputError(f"numeric column {name!r} has missing cells")
            values = np.array([float(c) for c in cells])
            columns.append(_numeric_column(name, values, numeric_bins))
        else:
            columns.append(Column(name, CATEGORICAL, categories=sorted(set(cells))))
    return TableSchema(columns)


def encode(rows, schema: TableSchema) -> EncodedDataset:
    rows = [list(r) for r in rows]
    if any(len(r) != len(schema) for r in rows):
        raise InvalidInputError(f"rows must have {len(schema)} cells")
    out = np.empty((len(rows), len(schema)), dtype=np.int64)
    for j, col in enumerate(schema.columns):
        cells = [r[j] for r in rows]
        if col.kind == NUMERIC:
            values = np.array([_parse_float(c, col.name) for c in cells])
            out[:, j] = bin_index(np.asarray(col.bin_edges), values)
        else:
            out[:, j] = [col.encode_cell(c) for c in cells]
    return EncodedDataset(schema, out)


def decode(ds: EncodedDataset) -> list[list[str]]:
    cols = ds.schema.columns
    return [[col.decode_token(int(tok)) for col, tok in zip(cols, row)] for row in ds.rows]


def read_csv(path_or_file) -> tuple[list[str], list[list[str]]]:
    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, newline="", encoding="utf-8") as f:
            return read_csv(f)
    reader = csv.reader(path_or_file)
    try:
        header = next(reader)
    except StopIteration:
        raise InvalidInputError("empty CSV: header row required") from None
    return header, [r for r in reader if r]


def write_csv(path_or_file, header, rows) -> None:
    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", newline="", encoding="utf-8") as f:
            return write_csv(f, header, rows)
    w = csv.writer(path_or_file, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def to_csv_string(header, rows) -> str:
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()
