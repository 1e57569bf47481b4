"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array


def check_count_matrix(X, allow_empty_rows: bool = False) -> sp.csr_matrix:
    """Return ``X`` as a CSR matrix of nonnegative integer counts."""
    X = check_array(X, accept_sparse="csr", dtype=None, ensure_min_samples=1)
    X = sp.csr_matrix(X)
    data = X.data
    if data.size and (np.any(data < 0) or not np.all(np.isfinite(data))):
        raise ValueError("count matrix must hold nonnegative finite values")
    if data.size and np.any(data != np.round(data)):
        raise ValueError("count matrix must hold integer counts")
    X = X.astype(np.int64)
    X.eliminate_zeros()
    if not allow_empty_rows and np.any(np.diff(X.indptr) == 0):
        raise ValueError("every document needs at least one token")
    return X


def check_targets(y, n_samples: int, kind: str = "auto") -> tuple[np.ndarray, str]:
    """Validate a target vector and resolve its kind ("real" or "binary")."""
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n_samples:
        raise ValueError(f"y has {y.shape[0]} entries, X has {n_samples} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    is_binary = bool(np.all((y == 0) | (y == 1)))
    if kind == "auto":
        kind = "binary" if is_binary else "real"
    elif kind == "binary" and not is_binary:
        raise ValueError("binary targets must be 0 or 1")
    elif kind not in ("real", "binary"):
        raise ValueError(f"unknown target kind {kind!r}")
    return y, kind
