"""Small input-validation helpers shared by the estimator and CLI."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataError


def check_graph(g) -> None:
    from .graph import TemporalGraph

    if not isinstance(g, TemporalGraph):
        raise DataError(f"expected a TemporalGraph, got {type(g).__name__}")


def check_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        raise ConfigError(f"{type(est).__name__} is not fitted yet; call fit first")


def check_fraction(x, name: str) -> float:
    x = float(x)
    if not 0 < x < 1:
        raise ConfigError(f"{name} must be in (0, 1), got {x}")
    return x


def check_positive_int(x, name: str) -> int:
    if int(x) != x or x < 1:
        raise ConfigError(f"{name} must be a positive integer, got {x!r}")
    return int(x)


def check_square_symmetric(A: np.ndarray, name: str = "matrix") -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"{name} must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise DataError(f"{name} must be symmetric")
