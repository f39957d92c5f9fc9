"""Central-difference gradient verification.

Checks run in double precision with h = 1e-5.  The error metric per
entry is |fd - an| / max(|fd|, |an|, 0.01), so near-zero gradients are
judged on an absolute scale.
"""

from __future__ import annotations

import numpy as np


def finite_difference(loss_fn, array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``array``.

    ``array`` is perturbed in place and restored; ``loss_fn`` must read it.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = array[idx]
        array[idx] = orig + h
        lp = loss_fn()
        array[idx] = orig - h
        lm = loss_fn()
        array[idx] = orig
        grad[idx] = (lp - lm) / (2.0 * h)
    return grad


def relative_error(fd: np.ndarray, an: np.ndarray, floor: float = 1e-2) -> float:
    scale = np.maximum(np.maximum(np.abs(fd), np.abs(an)), floor)
    return float(np.max(np.abs(fd - an) / scale))


def max_grad_error(loss_fn, store, analytic: dict, h: float = 1e-5,
                   names=None) -> float:
    """Largest relative error over the chosen parameters.

    ``analytic`` maps parameter names to gradients from one backward
    pass taken before calling this.
    """
    worst = 0.0
    for name in (names or store.names):
        fd = finite_difference(loss_fn, store.params[name], h)
        worst = max(worst, relative_error(fd, np.asarray(analytic[name],
                                                         dtype=np.float64)))
    return worst
