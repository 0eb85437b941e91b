"""Nonnegative matrix factorization backed by the nmfkit C++ core.

V may be a 2-d numpy array or a scipy.sparse matrix. Sparse results come back
as scipy.sparse.csr_matrix when scipy is importable.
"""

import numpy as np

from . import _core
from ._core import (
    NmfkitError,
    connectivity,
    cophenetic,
    dispersion,
    feature_scores,
    hoyer_sparseness,
    select_features,
)

__all__ = [
    "NmfkitError",
    "factorize",
    "summarize",
    "rss",
    "evar",
    "distance",
    "hoyer_sparseness",
    "feature_scores",
    "select_features",
    "connectivity",
    "cophenetic",
    "dispersion",
    "rank_sweep",
    "synth",
    "read_matrix",
    "write_matrix",
]


def _pack(v):
    if hasattr(v, "tocsr") and not isinstance(v, np.ndarray):
        c = v.tocsr()
        c.sum_duplicates()
        c.sort_indices()
        return (c.shape, c.indptr.astype(np.int64), c.indices.astype(np.int64), c.data.astype(np.float64))
    return np.asarray(v, dtype=np.float64)


def _unpack(v):
    if not isinstance(v, tuple):
        return v
    shape, indptr, indices, data = v
    try:
        from scipy.sparse import csr_matrix
    except ImportError:
        return v
    return csr_matrix((data, indices, indptr), shape=shape)


def factorize(v, method, rank, **kwargs):
    """Fit V ~ W H. Returns a dict with w, h, n_iter, final_objective, objective_trace."""
    return _core.factorize(_pack(v), method, rank, **kwargs)


def summarize(v, w, h, method="nmf-eu", theta=None, axis="columns"):
    return _core.summarize(_pack(v), w, h, method, theta, axis)


def rss(v, w, h):
    return _core.rss(_pack(v), w, h)


def evar(v, w, h):
    return _core.evar(_pack(v), w, h)


def distance(v, w, h, metric="euclidean"):
    return _core.distance(_pack(v), w, h, metric)


def rank_sweep(v, ranks, runs=10, **kwargs):
    """Consensus statistics per candidate rank plus the recommended rank."""
    return _core.rank_sweep(_pack(v), list(ranks), runs, **kwargs)


def synth(rows, cols, rank, noise=0.0, density=1.0, seed=0):
    """Block-structured test data. Returns (V, W_true, H_true)."""
    v, w, h = _core.synth(rows, cols, rank, noise, density, seed)
    return _unpack(v), w, h


def read_matrix(path, allow_negative=False):
    return _unpack(_core.read_matrix(str(path), allow_negative))


def write_matrix(v, path, format="mtx"):
    _core.write_matrix(_pack(v), str(path), format)
