"""Dense complex linear algebra primitives.

Inversion goes through an LU factorisation with partial pivoting and the
Hermitian eigensolver through LAPACK's Householder tridiagonal reduction, both
via scipy/numpy. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from fourfold_rmt.constants import HERMITIAN_TOL


def as_square(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a 2-d complex array, raising if it is not square or not finite."""
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr.astype(complex, copy=False)


def hermitian_defect(a) -> float:
    """max |a - a^H|, the distance from Hermiticity in the max norm."""
    arr = np.asarray(a)
    return float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0


def invert_shifted(h, z: complex) -> np.ndarray:
    """Resolvent ``(h - z I)^{-1}``.

    ``z`` must be off the real axis; for Hermitian ``h`` this guarantees the
    shifted matrix is invertible.
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("Im z must be nonzero")
    h = as_square(h, "H")
    n = h.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    shifted = h - z * np.eye(n)
    lu, piv = sla.lu_factor(shifted, check_finite=False)
    return sla.lu_solve((lu, piv), np.eye(n, dtype=complex), check_finite=False)


def hermitian_eigenvalues(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix."""
    h = as_square(h, "H")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    defect = hermitian_defect(h)
    if defect > tol * scale:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")
    if h.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(h)


def hermitian_eigh(h, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian matrix, eigenvalues ascending."""
    h = as_square(h, "H")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if hermitian_defect(h) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigh(h)


def inf_operator_norm(a) -> float:
    """The l^inf -> l^inf operator norm: largest absolute row sum."""
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"matrix must be square, got shape {arr.shape}")
    if arr.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(arr), axis=1)))


def write_matrix_csv(path, a) -> Path:
    """Write a square matrix as CSV.

    Layout: a header row ``n``, a row holding the dimension, then ``n`` rows of
    ``re,im`` pairs (``2n`` fields each). Values use 17 significant digits.
    """
    arr = as_square(a)
    n = arr.shape[0]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n"])
        w.writerow([n])
        for row in arr:
            fields = []
            for v in row:
                fields.append(f"{v.real:.17g}")
                fields.append(f"{v.imag:.17g}")
            w.writerow(fields)
    return path


def read_matrix_csv(path) -> np.ndarray:
    """Inverse of :func:`write_matrix_csv`."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0] != ["n"]:
        raise ValueError("matrix CSV must start with a header row 'n'")
    n = int(rows[1][0])
    body = rows[2:]
    if len(body) != n:
        raise ValueError(f"expected {n} matrix rows, found {len(body)}")
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(body):
        if len(row) != 2 * n:
            raise ValueError(f"row {i} has {len(row)} fields, expected {2 * n}")
        vals = np.array(row, dtype=float)
        out[i] = vals[0::2] + 1j * vals[1::2]
    return out
