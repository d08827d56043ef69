"""Streaming mean/covariance accumulation with associative merging.

Single-pass updates follow the numerically stable recurrence on the
running mean and centered second-moment matrix; two accumulators merge
exactly, so chunked, batched and parallel accumulation all reproduce
the two-pass result to roundoff.
"""

from __future__ import annotations

import numpy as np


class RunningMoments:
    """Streaming first and second moments of d-dimensional observations."""

    def __init__(self, dim):
        self.dim = int(dim)
        self.count = 0
        self._mean = np.zeros(self.dim)
        self._m2 = np.zeros((self.dim, self.dim))

    def update(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        self.count += 1
        delta = x - self._mean
        self._mean += delta / self.count
        self._m2 += np.outer(delta, x - self._mean)

    def update_batch(self, rows):
        """Ingest a block of shape (m, dim) via an exact merge."""
        rows = np.asarray(rows, dtype=float).reshape(-1, self.dim)
        m = rows.shape[0]
        if m == 0:
            return
        other = RunningMoments(self.dim)
        other.count = m
        other._mean = rows.mean(axis=0)
        centered = rows - other._mean
        other._m2 = centered.T @ centered
        self.merge(other)

    def state(self):
        """Picklable snapshot (count, mean, m2) for cross-process merging."""
        return self.count, self._mean.copy(), self._m2.copy()

    @classmethod
    def from_state(cls, state):
        count, mean, m2 = state
        out = cls(mean.shape[0])
        out.count = int(count)
        out._mean = np.array(mean, dtype=float)
        out._m2 = np.array(m2, dtype=float)
        return out

    def merge(self, other: "RunningMoments"):
        """Fold another accumulator into this one; associative and exact."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in moment merge")
        if other.count == 0:
            return
        if self.count == 0:
            self.count = other.count
            self._mean = other._mean.copy()
            self._m2 = other._m2.copy()
            return
        total = self.count + other.count
        delta = other._mean - self._mean
        self._mean = self._mean + delta * (other.count / total)
        self._m2 = self._m2 + other._m2 + np.outer(delta, delta) * (
            self.count * other.count / total
        )
        self.count = total

    @property
    def mean(self):
        if self.count == 0:
            raise ValueError("no observations accumulated")
        return self._mean.copy()

    @property
    def covariance(self):
        """Sample covariance with the 1/(count - 1) normalizer."""
        if self.count < 2:
            raise ValueError("need at least two observations for a covariance")
        return self._m2 / (self.count - 1)

    @property
    def variance(self):
        return np.diag(self.covariance).copy()
