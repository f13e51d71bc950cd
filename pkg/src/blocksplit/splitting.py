"""Blockwise forward-backward and Douglas-Rachford maps and their constants.

A splitting map bundles the coupling f, the separable term h, blockwise
steps, and a subset scheme.  Applying outcome i updates exactly the blocks
in subset i, each computed from the unmodified input (all blocks of a
subset see the same x).  The full-block map T1 updates every block and is
the reference operator for residuals and certification regardless of
whether the scheme contains the full subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockspace import (
    BlockLayout,
    BlockProbabilities,
    BlockSubsetScheme,
    block_probabilities,
    weighted_sq,
)
from .errors import DimensionMismatch, EmptyResolvent
from .operators import (
    SeparableTerm,
    SmoothCoupling,
    reflector,
    resolvent_partial_smooth,
    resolvent_separable,
)

FLAVORS = ("fb", "dr")


@dataclass
class SplittingMap:
    """Stochastic blockwise splitting operator family {T_i}."""

    flavor: str
    coupling: SmoothCoupling
    term: SeparableTerm
    steps: np.ndarray
    scheme: BlockSubsetScheme
    layout: BlockLayout

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be one of {FLAVORS}, got {self.flavor!r}")
        m = self.layout.num_blocks
        self.steps = np.broadcast_to(np.asarray(self.steps, dtype=float), (m,)).copy()
        if np.any(self.steps <= 0):
            raise ValueError(f"steps must be positive, got {self.steps}")
        if self.coupling.layout.block_dims != self.layout.block_dims:
            raise DimensionMismatch("coupling layout differs from map layout")
        if self.term.layout.block_dims != self.layout.block_dims:
            raise DimensionMismatch("term layout differs from map layout")
        if self.scheme.max_block_index() >= m:
            raise DimensionMismatch("scheme references blocks outside the layout")
        if self.flavor == "fb" and self.coupling.gradient is None:
            raise EmptyResolvent("forward-backward needs a coupling gradient oracle")

    @property
    def probabilities(self) -> BlockProbabilities:
        return block_probabilities(self.scheme, self.layout)


def apply_fb_block(m: SplittingMap, j: int, x: np.ndarray) -> np.ndarray:
    """Block j of the forward-backward update: prox after a partial gradient step."""
    x = m.layout.check(x)
    t = m.steps[j]
    g = m.layout.block(m.coupling.gradient(x), j)
    v = m.layout.block(x, j) - t * g
    return resolvent_separable(m.term, j, v, t)


def apply_dr_block(m: SplittingMap, j: int, x: np.ndarray) -> np.ndarray:
    """Block j of the Douglas-Rachford update.

    Reflects block j through h_j, resolves the partial linearization of f
    at the reflected point, and averages the double reflection with x_j.
    """
    x = m.layout.check(x)
    t = m.steps[j]
    xj = m.layout.block(x, j)
    yj = reflector(resolvent_separable(m.term, j, xj, t), xj)
    y = m.layout.embed(yj, j, x)
    u = resolvent_partial_smooth(m.coupling, j, y, t)
    return 0.5 * (reflector(u, yj) + xj)


def _block_update(m: SplittingMap, j: int, x: np.ndarray) -> np.ndarray:
    if m.flavor == "fb":
        return apply_fb_block(m, j, x)
    return apply_dr_block(m, j, x)


def apply_T(m: SplittingMap, i: int, x: np.ndarray) -> np.ndarray:
    """Apply outcome i: update the blocks of subset i, keep the rest."""
    if not 0 <= i < m.scheme.num_outcomes:
        raise DimensionMismatch(f"outcome {i} out of range for {m.scheme.num_outcomes} subsets")
    x = m.layout.check(x)
    out = np.array(x, copy=True)
    for j in m.scheme.subsets[i]:
        out[..., m.layout.slice_of(j)] = _block_update(m, j, x)
    return out


def apply_full(m: SplittingMap, x: np.ndarray) -> np.ndarray:
    """The full-block map T1: every block updated from the same input."""
    x = m.layout.check(x)
    out = np.array(x, copy=True)
    for j in range(m.layout.num_blocks):
        out[..., m.layout.slice_of(j)] = _block_update(m, j, x)
    return out


def transport_discrepancy(x, y, Tx, Ty) -> float | np.ndarray:
    """Squared difference of displacements, ||(x - Tx) - (y - Ty)||^2.

    Algebraically equal to the six-term expansion
    ||Tx-x||^2 + ||Ty-y||^2 + ||Tx-Ty||^2 + ||x-y||^2 - ||Tx-y||^2 - ||x-Ty||^2.
    """
    x, y, Tx, Ty = (np.asarray(a, dtype=float) for a in (x, y, Tx, Ty))
    d = (x - Tx) - (y - Ty)
    val = np.sum(d * d, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def transport_discrepancy_six_term(x, y, Tx, Ty) -> float | np.ndarray:
    """Six-term expansion of the transport discrepancy (cross-check route)."""
    x, y, Tx, Ty = (np.asarray(a, dtype=float) for a in (x, y, Tx, Ty))

    def sq(a):
        return np.sum(a * a, axis=-1)

    val = sq(Tx - x) + sq(Ty - y) + sq(Tx - Ty) + sq(x - y) - sq(Tx - y) - sq(x - Ty)
    return float(val) if np.ndim(val) == 0 else val


def weighted_transport_discrepancy(x, y, Tx, Ty, p: BlockProbabilities) -> float | np.ndarray:
    """Transport discrepancy in the selection-weighted norm."""
    x, y, Tx, Ty = (np.asarray(a, dtype=float) for a in (x, y, Tx, Ty))
    return weighted_sq((x - Tx) - (y - Ty), p)


@dataclass(frozen=True)
class RegularityConstants:
    """An almost-alpha-firmly-nonexpansive certificate (alpha, violation)."""

    alpha: float
    violation: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.violation < 0:
            raise ValueError(f"violation must be nonnegative, got {self.violation}")

    @property
    def transport_weight(self) -> float:
        """Coefficient (1 - alpha)/alpha multiplying the discrepancy term."""
        return (1.0 - self.alpha) / self.alpha


def composite_constants(m: SplittingMap, alpha_bar: float = 0.5) -> RegularityConstants:
    """Worst-case constants of the full-block map from the ingredient constants.

    DR: alpha = 2/3 and violation tau_f + tau_h + tau_f tau_h (zero when both
    ingredients are convex).  FB: alpha = 2 / (1 + 1/max(1/2, alpha_gd)) where
    alpha_gd = alpha_bar is the target constant of the gradient map, and the
    violation composes the gradient-map violation with the term's
    submonotonicity the same multiplicative way.
    """
    from .operators import gd_violation_bound

    tau_h = 0.0 if m.term.convex else m.term.tau_max
    if m.flavor == "dr":
        tau_f = 0.0 if m.coupling.convex else m.coupling.tau_max
        eps = tau_f + tau_h + tau_f * tau_h
        return RegularityConstants(2.0 / 3.0, eps)
    eps_gd = gd_violation_bound(m.coupling, m.steps, alpha_bar)
    alpha = 2.0 / (1.0 + 1.0 / max(0.5, alpha_bar))
    eps = eps_gd + tau_h + eps_gd * tau_h
    return RegularityConstants(alpha, eps)


def expectation_constants(c: RegularityConstants, p: BlockProbabilities) -> RegularityConstants:
    """Constants transferred to the induced expectation inequality: (alpha, p_max * eps)."""
    return RegularityConstants(c.alpha, p.p_max * c.violation)


def expected_weighted_sq_distance(m: SplittingMap, x: np.ndarray, y: np.ndarray) -> float | np.ndarray:
    """E ||T_xi x - T_xi y||_p^2 as the exact finite sum over the scheme."""
    p = m.probabilities
    total = 0.0
    for i, q in enumerate(m.scheme.probs):
        total = total + q * weighted_sq(apply_T(m, i, x) - apply_T(m, i, y), p)
    return total


def expected_weighted_psi(m: SplittingMap, x: np.ndarray, y: np.ndarray) -> float | np.ndarray:
    """E psi_p(x, y, T_xi x, T_xi y) as the exact finite sum over the scheme."""
    p = m.probabilities
    total = 0.0
    for i, q in enumerate(m.scheme.probs):
        Tx, Ty = apply_T(m, i, x), apply_T(m, i, y)
        total = total + q * weighted_transport_discrepancy(x, y, Tx, Ty, p)
    return total
