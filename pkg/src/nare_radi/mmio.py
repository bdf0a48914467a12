"""File I/O: Matrix Market ingestion, convergence CSV logs, key-value config."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

CSV_HEADER = ("iter", "dim", "nu", "alpha_re", "alpha_im", "beta_re", "beta_im",
              "t_shift_s", "t_solve_s", "t_other_s")


class MatrixMarketError(ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


_FIELDS = {"real", "integer", "pattern", "double"}
_SYMMETRY = {"general", "symmetric", "skew-symmetric"}


def read_matrix_market(path):
    """Read a coordinate (sparse) or array (dense) Matrix Market file.

    Symmetric and skew-symmetric storage is expanded; pattern entries become
    ones.  Errors carry the offending line number.
    """
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError(1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise MatrixMarketError(1, "malformed header")
    layout, kind, symmetry = (h.lower() for h in head[2:])
    if layout not in {"coordinate", "array"}:
        raise MatrixMarketError(1, f"unsupported layout {layout!r}")
    if kind not in _FIELDS or symmetry not in _SYMMETRY:
        raise MatrixMarketError(1, f"unsupported field/symmetry {kind} {symmetry}")
    if kind == "pattern" and layout == "array":
        raise MatrixMarketError(1, "pattern field requires coordinate layout")

    body = [(i + 1, ln) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError(len(lines), "missing size line")
    lineno, size = body[0]
    try:
        dims = [int(tok) for tok in size.split()]
    except ValueError:
        raise MatrixMarketError(lineno, "size line must be integers") from None
    entries = body[1:]

    def num(tok, ln):
        try:
            return float(tok)
        except ValueError:
            raise MatrixMarketError(ln, f"bad number {tok!r}") from None

    if layout == "array":
        if len(dims) != 2:
            raise MatrixMarketError(lineno, "array size line needs rows and cols")
        rows, cols = dims
        vals = [num(ln.split()[0], i) for i, ln in entries]
        if symmetry == "general":
            if len(vals) != rows * cols:
                raise MatrixMarketError(lineno, f"expected {rows * cols} values, got {len(vals)}")
            return np.array(vals, dtype=float).reshape((cols, rows)).T
        if rows != cols:
            raise MatrixMarketError(lineno, "symmetric array must be square")
        out = np.zeros((rows, cols))
        k = 0
        skew = symmetry == "skew-symmetric"
        for j in range(cols):
            for i in range(j + 1 if skew else j, rows):
                if k >= len(vals):
                    raise MatrixMarketError(lineno, "too few values")
                out[i, j] = vals[k]
                out[j, i] = -vals[k] if skew else vals[k]
                k += 1
        return out

    if len(dims) != 3:
        raise MatrixMarketError(lineno, "coordinate size line needs rows, cols, nnz")
    rows, cols, nnz = dims
    if len(entries) != nnz:
        raise MatrixMarketError(lineno, f"expected {nnz} entries, got {len(entries)}")
    ri, ci, vv = [], [], []
    for ln, text in entries:
        tok = text.split()
        want = 2 if kind == "pattern" else 3
        if len(tok) < want:
            raise MatrixMarketError(ln, "entry has too few fields")
        try:
            i, j = int(tok[0]) - 1, int(tok[1]) - 1
        except ValueError:
            raise MatrixMarketError(ln, "indices must be integers") from None
        if not (0 <= i < rows and 0 <= j < cols):
            raise MatrixMarketError(ln, f"index ({i + 1}, {j + 1}) out of range")
        v = 1.0 if kind == "pattern" else num(tok[2], ln)
        ri.append(i)
        ci.append(j)
        vv.append(v)
        if symmetry != "general" and i != j:
            ri.append(j)
            ci.append(i)
            vv.append(-v if symmetry == "skew-symmetric" else v)
    return sp.csc_matrix((vv, (ri, ci)), shape=(rows, cols))


def write_matrix_market(path, mat, comment=""):
    """Write sparse matrices in coordinate and dense ones in array layout."""
    if sp.issparse(mat):
        scipy.io.mmwrite(str(path), sp.coo_matrix(mat), comment=comment, precision=17)
        return
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        # scipy's writer does not return on zero-row arrays
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix array real general\n%\n")
            fh.write(f"{mat.shape[0]} {mat.shape[1]}\n")
        return
    scipy.io.mmwrite(str(path), mat, comment=comment, precision=17)


# -- convergence logs ------------------------------------------------------------------


def _g17(x):
    return format(float(x), ".17g")


def write_convergence_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            a = complex(r.shift.alpha) if r.shift is not None else complex("nan")
            b = complex(r.shift.beta) if r.shift is not None else complex("nan")
            w.writerow([r.iter, r.dim, _g17(r.nu), _g17(a.real), _g17(a.imag),
                        _g17(b.real), _g17(b.imag), _g17(r.t_shift_s),
                        _g17(r.t_solve_s), _g17(r.t_other_s)])


def read_convergence_csv(path):
    """Rows as dicts with ``iter``/``dim`` ints and float values otherwise."""
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected header {rd.fieldnames}")
        out = []
        for row in rd:
            out.append({k: int(v) if k in ("iter", "dim") else float(v) for k, v in row.items()})
        return out


# -- configuration ---------------------------------------------------------------------


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Keys are normalized to lower case with dashes mapped to underscores.
    Values stay strings; callers convert them.
    """
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ValueError(f"{path}:{lineno}: empty key")
            out[key.lower().replace("-", "_")] = value
    return out


def write_config(path, values):
    with open(path, "w") as fh:
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")
