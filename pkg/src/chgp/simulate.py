"""Exact, seeded sampling of Gaussian-process realizations."""

import numpy as np

from .errors import DomainError
from .gp import factorize, kernel_matrix

__all__ = ["stream", "replicate_generator", "sample_gp", "sample_from_factor"]


def stream(seed, *key):
    """Philox generator keyed by ``SeedSequence(seed, spawn_key=key)``.

    Streams with different keys are independent, and each depends only on
    ``(seed, key)``, so work items can be drawn in any order or batching.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replicate_generator(seed, index):
    """Generator of replicate ``index`` under ``seed``."""
    return stream(seed, index)


def sample_from_factor(lower, n_reps, seed, mean_b=0.0, nugget_tau2=0.0, first_index=0):
    """Rows ``b + L w + sqrt(tau2) e`` for replicates ``first_index, ...``."""
    n = lower.shape[0]
    out = np.empty((n_reps, n))
    tau = np.sqrt(nugget_tau2)
    for r in range(n_reps):
        rng = replicate_generator(seed, first_index + r)
        w = rng.standard_normal(n)
        e = rng.standard_normal(n)
        out[r] = mean_b + lower @ w + tau * e
    return out


def sample_gp(model, locs, n_reps, seed, first_index=0):
    """Draw ``n_reps`` realizations of ``model`` at ``locs``.

    Parameters
    ----------
    model : GPModel
    locs : Locations
    n_reps : int
    seed : int
    first_index : int
        Index of the first replicate; drawing replicates ``[0, 10)`` in one
        call or as ``[0, 4)`` and ``[4, 10)`` gives identical rows.

    Returns
    -------
    ndarray, shape (n_reps, n)
    """
    if n_reps < 0:
        raise DomainError("n_reps must be nonnegative")
    k = kernel_matrix(model.kernel, locs)
    lower = factorize(k).lower
    return sample_from_factor(lower, n_reps, seed, model.mean_b, model.nugget_tau2, first_index)
