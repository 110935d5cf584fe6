"""The closed catalog of test functions used by experiments.

Every function maps momentum and position blocks of shape (..., d) to values
of shape (...); the batch axes are whatever the caller needs (realizations,
quadrature grids).  The catalog is closed so configuration files and CSV
columns always refer to a known, spelled-out observable.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import CapabilityError

Array = np.ndarray
TestFunction = Callable[[Array, Array], Array]


def cos_sum(p: Array, q: Array) -> Array:
    """cos(sum p_i + sum q_i); bounded, sensitive to the law's mean and spread."""
    return np.cos(np.sum(p, axis=-1) + np.sum(q, axis=-1))


def exp_negsq(p: Array, q: Array) -> Array:
    """exp(-|p|^2/2 - |q|^2/2); bounded, concentrates near the origin."""
    return np.exp(-0.5 * np.sum(p * p, axis=-1) - 0.5 * np.sum(q * q, axis=-1))


def sin_sumsq(p: Array, q: Array) -> Array:
    """sin(|p|^2 + |q|^2); bounded, oscillatory in the radius."""
    return np.sin(np.sum(p * p, axis=-1) + np.sum(q * q, axis=-1))


TEST_FUNCTIONS: dict[str, TestFunction] = {
    "cos_sum": cos_sum,
    "exp_negsq": exp_negsq,
    "sin_sumsq": sin_sumsq,
}


def get_test_function(name: str) -> TestFunction:
    """Look up a catalog function by name; unknown names are refused."""
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise CapabilityError(
            f"unknown test function {name!r}; catalog: {sorted(TEST_FUNCTIONS)}"
        ) from None
