"""Convergence-order bookkeeping for refinement studies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Residuals below this (relative to the data scale) count as exactly zero.
ZERO_RESIDUAL = 1e-11


@dataclass
class ConvergenceResult:
    label: str
    values: list  # residual sizes per level, coarse to fine
    orders: list  # observed orders between consecutive levels
    exact: bool  # every level at round-off: identity holds identically
    limit: float = 0.0  # max of the extrapolated limit field (0 when unknown)
    size: float = 0.0  # max of the coarsest field, for judging ``limit``

    @property
    def ratios(self):
        return [2.0**p if math.isfinite(p) else math.inf for p in self.orders]

    @property
    def order(self) -> float:
        return self.orders[-1] if self.orders else math.nan

    @property
    def vanishes(self) -> bool:
        """Extrapolated limit is small next to the data, so the fields tend
        to zero rather than to some other value."""
        return self.exact or self.limit <= 0.05 * max(self.size, ZERO_RESIDUAL)

    def passed(self, min_order=1.8, require_limit=True) -> bool:
        """Order reached; with ``require_limit`` the fields must also tend
        to zero (off for studies whose limit is some other, fixed error)."""
        if self.exact:
            return True
        ok = bool(self.orders) and self.order >= min_order
        return ok and (self.vanishes or not require_limit)

    def summary(self) -> str:
        vals = " ".join(f"{v:.3e}" for v in self.values)
        if self.exact:
            return f"{self.label}: {vals} (identically zero)"
        ords = " ".join(f"{p:.2f}" for p in self.orders)
        return f"{self.label}: {vals} orders {ords} limit {self.limit:.2e}"


def observed_orders(values, factor=2.0):
    out = []
    for a, b in zip(values[:-1], values[1:]):
        if b == 0.0:
            out.append(math.inf if a > 0 else math.nan)
        else:
            out.append(math.log(a / b, factor) if a > 0 else -math.inf)
    return out


def error_study(label, values, factor=2.0, scale=1.0) -> ConvergenceResult:
    """Orders from residuals whose exact value is zero."""
    values = [float(v) for v in values]
    exact = all(v <= ZERO_RESIDUAL * max(scale, 1.0) for v in values)
    return ConvergenceResult(label, values, observed_orders(values, factor), exact, 0.0, values[0])


def richardson_study(label, fields, factor=2.0, scale=1.0, floor=0.0) -> ConvergenceResult:
    """Three-or-more level study from sampled fields on a common point set.

    Orders come from successive differences, so an unknown limit (for
    instance a spatial error that does not depend on the refined
    parameter) drops out. ``floor`` is an extra round-off allowance, for
    instance ``eps * |Q| / dt`` when the fields contain difference quotients.
    """
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(fields[:-1], fields[1:])]
    exact = all(d <= max(ZERO_RESIDUAL * max(scale, 1.0), floor) for d in diffs)
    orders = observed_orders(diffs, factor)
    limit = 0.0
    if len(fields) >= 3 and not exact:
        p = orders[-1]
        q = factor**p - 1 if math.isfinite(p) and p > 0 else math.inf
        limit = float(np.max(np.abs(fields[-1] + (fields[-1] - fields[-2]) / q)))
    size = float(np.max(np.abs(fields[0])))
    return ConvergenceResult(label, diffs, orders, exact, limit, size)


def coarse_samples(field, factor: int, levels_up: int, grid_ndim: int):
    """Restrict a fine-grid field to the nodes of a grid ``factor**levels_up``
    times coarser (nested lattices)."""
    step = factor**levels_up
    sl = tuple(slice(None, None, step) for _ in range(grid_ndim))
    return field[sl]
