import numpy as np

RANK_RTOL = 1e-10


def singular_values(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(a, rtol=RANK_RTOL):
    """Count singular values above rtol * largest (an all-zero matrix has rank 0)."""
    s = singular_values(a)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def nullity(a, rtol=RANK_RTOL):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return a.shape[1] - numerical_rank(a, rtol)


def null_space(a, rtol=RANK_RTOL):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    r = numerical_rank(a, rtol)
    _, _, vt = np.linalg.svd(a)
    return vt[r:].T
