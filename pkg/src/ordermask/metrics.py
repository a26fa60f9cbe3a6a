"""Fidelity scores between a real and a synthetic table.

Shape compares each column's marginal: ``1 - TV`` for categorical columns,
``1 - KS`` on raw values for numeric ones.  Trend compares pairwise
associations, scoring each pair as ``1 - |a_real - a_synth| / 2``.
Association measures: Pearson's r (numeric/numeric), Cramér's V without bias
correction (categorical/categorical) and the correlation ratio eta
(categorical/numeric).  A constant column has association 0 with everything.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import stats
from scipy.stats.contingency import association

from .errors import InvalidInputError, SchemaError
from .tabular import CATEGORICAL, TableSchema


def _columns(rows, schema: TableSchema, label: str) -> list[np.ndarray]:
    """Per-column arrays: float values for numeric, category codes otherwise."""
    rows = [list(r) for r in rows]
    if not rows:
        raise InvalidInputError(f"{label} table is empty")
    if any(len(r) != len(schema) for r in rows):
        raise SchemaError(f"{label} table rows must have {len(schema)} cells")
    out = []
    for j, col in enumerate(schema.columns):
        cells = [r[j] for r in rows]
        if col.kind == CATEGORICAL:
            index = {c: i for i, c in enumerate(col.categories)}
            try:
                out.append(np.array([index[c] for c in cells]))
            except KeyError as e:
                raise SchemaError(f"{label} table: column {col.name!r} has unknown category {e.args[0]!r}") from None
        else:
            try:
                out.append(np.array([float(c) for c in cells]))
            except ValueError:
                raise SchemaError(f"{label} table: column {col.name!r} has non-numeric cells") from None
    return out


def _column_shape(real: np.ndarray, synth: np.ndarray, categorical: bool, vocab: int) -> float:
    if categorical:
        p = np.bincount(real, minlength=vocab) / real.size
        q = np.bincount(synth, minlength=vocab) / synth.size
        return 1.0 - 0.5 * float(np.abs(p - q).sum())
    return 1.0 - float(stats.ks_2samp(real, synth).statistic)


def shape_scores(real_rows, synth_rows, schema: TableSchema) -> dict[str, float]:
    real = _columns(real_rows, schema, "real")
    synth = _columns(synth_rows, schema, "synthetic")
    return {
        col.name: _column_shape(r, s, col.kind == CATEGORICAL, col.vocab_size)
        for col, r, s in zip(schema.columns, real, synth)
    }


def shape_score(real_rows, synth_rows, schema: TableSchema) -> float:
    """Mean per-column marginal similarity, in [0, 1]."""
    return float(np.mean(list(shape_scores(real_rows, synth_rows, schema).values())))


def _constant(x: np.ndarray) -> bool:
    return x.size == 0 or bool(np.all(x == x[0]))


def _correlation_ratio(codes: np.ndarray, values: np.ndarray) -> float:
    total = np.sum((values - values.mean()) ** 2)
    counts = np.bincount(codes)
    sums = np.bincount(codes, weights=values)
    nz = counts > 0
    between = np.sum(sums[nz] ** 2 / counts[nz]) - values.sum() ** 2 / values.size
    return float(np.sqrt(np.clip(between / total, 0.0, 1.0)))


def pair_association(a: np.ndarray, b: np.ndarray, a_cat: bool, b_cat: bool) -> float:
    if _constant(a) or _constant(b):
        return 0.0
    if a_cat and b_cat:
        # relabel to observed categories so the table has no empty margins
        _, ai = np.unique(a, return_inverse=True)
        _, bi = np.unique(b, return_inverse=True)
        table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
        np.add.at(table, (ai, bi), 1)
        return float(association(table, method="cramer"))
    if a_cat:
        return _correlation_ratio(np.unique(a, return_inverse=True)[1], b)
    if b_cat:
        return _correlation_ratio(np.unique(b, return_inverse=True)[1], a)
    return float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0))


def trend_scores(real_rows, synth_rows, schema: TableSchema) -> dict[str, float]:
    if len(schema) < 2:
        raise InvalidInputError("trend needs at least two columns")
    real = _columns(real_rows, schema, "real")
    synth = _columns(synth_rows, schema, "synthetic")
    cat = [c.kind == CATEGORICAL for c in schema.columns]
    out = {}
    for i, j in itertools.combinations(range(len(schema)), 2):
        ar = pair_association(real[i], real[j], cat[i], cat[j])
        as_ = pair_association(synth[i], synth[j], cat[i], cat[j])
        out[f"{schema.columns[i].name}|{schema.columns[j].name}"] = 1.0 - abs(ar - as_) / 2.0
    return out


def trend_score(real_rows, synth_rows, schema: TableSchema) -> float:
    """Mean pairwise association agreement, in [0, 1]."""
    return float(np.mean(list(trend_scores(real_rows, synth_rows, schema).values())))


def evaluate(real_rows, synth_rows, schema: TableSchema) -> dict:
    per_column = shape_scores(real_rows, synth_rows, schema)
    out = {"shape": float(np.mean(list(per_column.values()))), "per_column": per_column}
    if len(schema) >= 2:
        per_pair = trend_scores(real_rows, synth_rows, schema)
        out["trend"] = float(np.mean(list(per_pair.values())))
        out["per_pair"] = per_pair
    else:
        out["trend"] = None
        out["per_pair"] = {}
    return out
