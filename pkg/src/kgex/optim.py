"""Adam with lazy (touched-rows-only) sparse updates for embedding tables."""

from __future__ import annotations

import numpy as np


class SparseAdam:
    """Standard Adam; moment rows are read and written only for touched rows.

    Bias correction uses a single global step counter, advanced once per
    `step` call regardless of which rows the call touches.
    """

    def __init__(
        self,
        shape: tuple[int, int],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if lr < 0:
            raise ValueError("learning rate must be >= 0")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def begin_step(self) -> None:
        self.t += 1

    def apply(self, params: np.ndarray, rows: np.ndarray, grads: np.ndarray) -> None:
        """Update `params[rows]` in place from per-row gradients.

        Call `begin_step` once per optimization step before applying to each
        table, so tables sharing the step share the bias correction.
        """
        if self.t < 1:
            raise RuntimeError("begin_step must be called before apply")
        if len(rows) == 0:
            return
        m = self.beta1 * self.m[rows] + (1.0 - self.beta1) * grads
        v = self.beta2 * self.v[rows] + (1.0 - self.beta2) * (grads * grads)
        self.m[rows] = m
        self.v[rows] = v
        m_hat = m / (1.0 - self.beta1**self.t)
        v_hat = v / (1.0 - self.beta2**self.t)
        params[rows] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(
    state: SparseAdam, params: np.ndarray, rows: np.ndarray, grads: np.ndarray
) -> None:
    """One full optimization step over a single table's touched rows."""
    state.begin_step()
    state.apply(params, np.asarray(rows, dtype=np.int64), grads)
