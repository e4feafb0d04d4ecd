"""Minimal column-named numeric table with CSV round-tripping."""
from __future__ import annotations

import csv
import io

import numpy as np


class DatasetError(ValueError):
    pass


class Dataset:
    """Row-major float table with named columns.

    Parameters
    ----------
    columns : sequence of str
    values : array_like, shape (n, len(columns))
    """

    def __init__(self, columns, values):
        self.columns = tuple(columns)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise DatasetError("values must be (n, len(columns))")
        if len(set(self.columns)) != len(self.columns):
            raise DatasetError("duplicate column names")
        self.values = values
        self._index = {c: i for i, c in enumerate(self.columns)}

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"Dataset(n={len(self)}, columns={list(self.columns)})"

    def __getitem__(self, name):
        return self.column(name)

    def column(self, name):
        try:
            return self.values[:, self._index[name]]
        except KeyError:
            raise DatasetError(f"no column {name!r}") from None

    def matrix(self, names):
        if not names:
            return np.empty((len(self), 0))
        return self.values[:, [self._index[c] for c in names]]

    def take(self, idx):
        return Dataset(self.columns, self.values[idx])

    def with_column(self, name, data):
        data = np.asarray(data, dtype=np.float64).reshape(-1, 1)
        if name in self._index:
            vals = self.values.copy()
            vals[:, self._index[name]] = data[:, 0]
            return Dataset(self.columns, vals)
        return Dataset(self.columns + (name,), np.hstack([self.values, data]))

    def select(self, names):
        return Dataset(names, self.matrix(list(names)))

    # ------------------------------------------------------------------ CSV
    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.values:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_text, is_text=False):
        if is_text:
            fh = io.StringIO(path_or_text)
        else:
            fh = open(path_or_text, encoding="utf-8", newline="")
        with fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetError("CSV has no header row") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DatasetError(f"line {lineno}: expected {len(header)} fields")
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise DatasetError(f"line {lineno}: non-numeric or missing value") from None
        vals = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
        if np.isnan(vals).any():
            raise DatasetError("missing values are not allowed")
        return cls(header, vals)


def _fmt(v):
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))
