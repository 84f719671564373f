"""Random correlation matrices from hyperspherical Cholesky angles."""

from __future__ import annotations

import numpy as np


def random_correlation(p: int, rng: np.random.Generator) -> np.ndarray:
    """Sample a p x p correlation matrix.

    The lower-triangular Cholesky factor is parameterised by angles
    theta_ij in (0, pi). The angle in column j (1-based) has density
    proportional to sin(theta)^(p - j), which makes the resulting matrix
    uniform over the space of correlation matrices. Rows and columns are
    then permuted at random so no index is privileged.
    """
    if p < 1:
        raise ValueError("dimension must be >= 1")
    if p == 1:
        return np.ones((1, 1))
    B = np.zeros((p, p))
    B[0, 0] = 1.0
    for i in range(1, p):
        remaining = 1.0
        for j in range(i):
            k = p - (j + 1)
            # cos(theta) for density sin^k is a symmetric Beta on [-1, 1]
            c = 2.0 * rng.beta((k + 1) / 2.0, (k + 1) / 2.0) - 1.0
            B[i, j] = c * remaining
            remaining *= np.sqrt(max(0.0, 1.0 - c * c))
        B[i, i] = remaining
    C = B @ B.T
    perm = rng.permutation(p)
    C = C[np.ix_(perm, perm)]
    C = (C + C.T) / 2.0
    np.fill_diagonal(C, 1.0)
    return C
