"""Column-wise orthonormal DCT-II used to decorrelate coefficients across beats."""

import numpy as np
from scipy.fft import dct, idct


def transform_columns(c):
    """B[:, n] = dct(C[:, n]) with the orthonormal type-II transform."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    return dct(c, type=2, norm="ortho", axis=0)


def inverse_transform_columns(b):
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return idct(b, type=2, norm="ortho", axis=0)
