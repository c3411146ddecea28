"""Streaming reductions over path chunks.

Within a chunk numpy's pairwise summation does the work; across chunks the
partial results are folded with compensated (Kahan) addition in the fixed
chunk order chosen by the runner.  Nothing here depends on thread count, so
a run's statistics are reproducible byte for byte.
"""

import math

import numpy as np


class KahanSum:
    """Compensated running sum of scalars or fixed-shape arrays."""

    def __init__(self, shape=()):
        self._s = np.zeros(shape, dtype=np.float64)
        self._c = np.zeros(shape, dtype=np.float64)

    def add(self, x):
        y = np.asarray(x, dtype=np.float64) - self._c
        t = self._s + y
        self._c = (t - self._s) - y
        self._s = t

    @property
    def value(self):
        if self._s.ndim == 0:
            return float(self._s)
        return self._s.copy()


class MeanSE:
    """Mean and standard error of scalar samples fed in chunks."""

    def __init__(self):
        self._sum = KahanSum()
        self._sumsq = KahanSum()
        self.n = 0

    def add(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return
        self._sum.add(values.sum())
        self._sumsq.add(np.square(values).sum())
        self.n += values.size

    @property
    def mean(self):
        if self.n == 0:
            raise ValueError("no samples")
        return self._sum.value / self.n

    @property
    def variance(self):
        if self.n < 2:
            return 0.0
        m = self.mean
        v = (self._sumsq.value - self.n * m * m) / (self.n - 1)
        return max(v, 0.0)  # compensate rounding on near-constant samples

    @property
    def se(self):
        if self.n == 0:
            raise ValueError("no samples")
        return math.sqrt(self.variance / self.n)


class CurveMean:
    """Columnwise mean of (paths x times) matrices fed in chunks."""

    def __init__(self, n_cols):
        self._sum = KahanSum((int(n_cols),))
        self.n = 0

    def add(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[0] == 0:
            return
        self._sum.add(matrix.sum(axis=0))
        self.n += matrix.shape[0]

    @property
    def mean(self):
        if self.n == 0:
            raise ValueError("no samples")
        return self._sum.value / self.n


class MaxAbs:
    """Largest absolute value seen, with its count of contributions."""

    def __init__(self):
        self.value = 0.0
        self.n = 0

    def add(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return
        self.value = max(self.value, float(np.abs(values).max()))
        self.n += values.size
