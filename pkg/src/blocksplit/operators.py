"""Smooth couplings, separable terms, resolvents, and step-size bounds.

A problem is min f(x) + sum_j h_j(x_j) where f couples the blocks smoothly
and each h_j acts on its own block through a proximal oracle.  Oracles are
vectorized: they accept a single vector or a batch with the vector on the
trailing axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .blockspace import BlockLayout
from .errors import DimensionMismatch, EmptyResolvent, InnerSolveDiverged, NotPSD


@dataclass
class SmoothCoupling:
    """Blockwise-smooth coupling term f.

    ``gradient`` maps (..., d) -> (..., d).  ``lipschitz[j]`` is a blockwise
    gradient Lipschitz constant: on any pair,
    sum_j ||grad_j f(x) - grad_j f(y)||^2 <= sum_j L_j^2 ||x_j - y_j||^2.
    ``hypomono[j]`` bounds how far the block-j partial functions sit from
    monotone (0 for convex f).  ``hessian_block`` returns the constant
    block-diagonal Hessian piece for quadratics, enabling closed-form
    partial resolvents.  ``partial_resolvent`` overrides the smooth inner
    solve entirely (used by the diagonal-indicator coupling, which has no
    gradient and only supports reflection-based updates).
    """

    layout: BlockLayout
    gradient: Callable[[np.ndarray], np.ndarray] | None
    lipschitz: np.ndarray
    hypomono: np.ndarray
    convex: bool
    value: Callable[[np.ndarray], np.ndarray] | None = None
    hessian_block: Callable[[int], np.ndarray] | None = None
    partial_resolvent: Callable[[np.ndarray, int, float], np.ndarray] | None = None

    def __post_init__(self):
        m = self.layout.num_blocks
        self.lipschitz = np.broadcast_to(np.asarray(self.lipschitz, dtype=float), (m,)).copy()
        self.hypomono = np.broadcast_to(np.asarray(self.hypomono, dtype=float), (m,)).copy()
        if np.any(self.lipschitz < 0) or np.any(self.hypomono < 0):
            raise ValueError("lipschitz and hypomono constants must be nonnegative")

    def partial_gradient(self, x: np.ndarray, j: int) -> np.ndarray:
        if self.gradient is None:
            raise EmptyResolvent("coupling has no gradient oracle")
        return self.layout.block(self.gradient(self.layout.check(x)), j)

    @property
    def tau_max(self) -> float:
        return float(np.max(self.hypomono))

    @property
    def lipschitz_max(self) -> float:
        return float(np.max(self.lipschitz))


@dataclass
class BlockFunction:
    """One separable piece h_j with its proximal oracle.

    ``prox(v, lam)`` returns argmin_u h_j(u) + ||u - v||^2 / (2 lam),
    vectorized over leading axes of ``v``.
    """

    prox: Callable[[np.ndarray, float], np.ndarray]
    tau: float = 0.0
    convex: bool = True
    value: Callable[[np.ndarray], np.ndarray] | None = None
    kind: str = "custom"


@dataclass
class SeparableTerm:
    """Blockwise separable term h(x) = sum_j h_j(x_j)."""

    layout: BlockLayout
    blocks: list[BlockFunction]

    def __post_init__(self):
        if len(self.blocks) != self.layout.num_blocks:
            raise DimensionMismatch(
                f"{len(self.blocks)} block functions for {self.layout.num_blocks} blocks"
            )

    @property
    def tau_max(self) -> float:
        return max(b.tau for b in self.blocks)

    @property
    def convex(self) -> bool:
        return all(b.convex for b in self.blocks)


def resolvent_separable(term: SeparableTerm, j: int, v: np.ndarray, lam: float) -> np.ndarray:
    """Resolvent of lam * dh_j at v (the proximal point of h_j)."""
    if lam <= 0:
        raise ValueError(f"step must be positive, got {lam}")
    out = term.blocks[j].prox(np.asarray(v, dtype=float), float(lam))
    if out is None:
        raise EmptyResolvent(f"block {j} resolvent empty at given point")
    return np.asarray(out, dtype=float)


def reflector(resolved: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reflection 2*J(x) - x given the already-resolved point J(x)."""
    return 2.0 * resolved - x


def resolvent_partial_smooth(
    coupling: SmoothCoupling,
    j: int,
    x: np.ndarray,
    lam: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> np.ndarray:
    """Resolvent of the block-j partial linearization of f.

    Solves y + lam * grad_j f(x with block j replaced by y) = x_j for y.
    Quadratic couplings (constant block Hessian) solve in closed form;
    otherwise a fixed-point iteration runs until the residual drops below
    ``tol`` (absolute, per batch element) and raises InnerSolveDiverged
    after ``max_iter`` sweeps.
    """
    if lam <= 0:
        raise ValueError(f"step must be positive, got {lam}")
    x = coupling.layout.check(x)
    if coupling.partial_resolvent is not None:
        return coupling.partial_resolvent(x, j, float(lam))
    if coupling.gradient is None:
        raise EmptyResolvent("coupling has neither gradient nor partial resolvent oracle")
    sl = coupling.layout.slice_of(j)
    xj = x[..., sl]
    gj = coupling.layout.block(coupling.gradient(x), j)

    if coupling.hessian_block is not None:
        # grad_j at the modified point is gj + A_jj (y - x_j) exactly
        A = np.asarray(coupling.hessian_block(j), dtype=float)
        d = coupling.layout.block_dims[j]
        M = np.eye(d) + lam * A
        rhs = xj - lam * (gj - xj @ A.T)
        y = np.linalg.solve(M, rhs[..., None])[..., 0] if rhs.ndim > 1 else np.linalg.solve(M, rhs)
        return y

    y = np.array(xj, copy=True)
    xmod = np.array(x, copy=True)
    for _ in range(max_iter):
        xmod[..., sl] = y
        g = coupling.layout.block(coupling.gradient(xmod), j)
        eq_resid = np.max(np.linalg.norm(y + lam * g - xj, axis=-1))
        if eq_resid <= tol:
            return y
        y = xj - lam * g
    raise InnerSolveDiverged(
        f"partial resolvent fixed point on block {j} not within {tol} after {max_iter} iterations"
    )


def gradient_descent_map(coupling: SmoothCoupling, steps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Blockwise gradient step x - (t_j grad_j f(x))_j."""
    x = coupling.layout.check(x)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), (coupling.layout.num_blocks,))
    if coupling.gradient is None:
        raise EmptyResolvent("coupling has no gradient oracle")
    t_coord = coupling.layout.coordinate_weights(steps)
    return x - t_coord * coupling.gradient(x)


@dataclass(frozen=True)
class StepBounds:
    """Admissible blockwise step intervals (0, upper_j) for a target constant."""

    per_block: tuple[float, ...]
    global_convex: float | None

    def admits(self, steps: np.ndarray) -> bool:
        steps = np.asarray(steps, dtype=float)
        return bool(np.all(steps > 0) and np.all(steps < np.asarray(self.per_block)))


def gd_step_bound(coupling: SmoothCoupling, alpha_bar: float) -> StepBounds:
    """Step ranges making the blockwise gradient map a-alpha-fne with constant alpha_bar.

    Per block the upper end is (alpha_bar * sqrt(tau_j^2 + L_j^2) - alpha_bar * tau_j) / L_j^2.
    For convex couplings the classical global range t < 2 alpha_bar / L_max is
    also reported (no violation inside it).
    """
    if not 0 < alpha_bar < 1:
        raise ValueError(f"alpha_bar must lie in (0,1), got {alpha_bar}")
    uppers = []
    for tau, L in zip(coupling.hypomono, coupling.lipschitz):
        if L == 0:
            uppers.append(np.inf)
        else:
            uppers.append(float(alpha_bar * (np.hypot(tau, L) - tau) / L**2))
    global_bound = None
    if coupling.convex:
        Lbar = coupling.lipschitz_max
        global_bound = np.inf if Lbar == 0 else float(2 * alpha_bar / Lbar)
    return StepBounds(tuple(uppers), global_bound)


def gd_violation_bound(coupling: SmoothCoupling, steps: np.ndarray, alpha_bar: float) -> float:
    """Worst-case a-alpha-fne violation of the blockwise gradient map.

    max_j (2 t_j tau_j + t_j^2 L_j^2 / alpha_bar); zero for a convex
    coupling run at a common step inside the global bound.
    """
    if not 0 < alpha_bar < 1:
        raise ValueError(f"alpha_bar must lie in (0,1), got {alpha_bar}")
    m = coupling.layout.num_blocks
    steps = np.broadcast_to(np.asarray(steps, dtype=float), (m,))
    if np.any(steps <= 0):
        raise ValueError(f"steps must be positive, got {steps}")
    if coupling.convex and np.all(steps == steps[0]):
        Lbar = coupling.lipschitz_max
        if Lbar == 0 or steps[0] < 2 * alpha_bar / Lbar:
            return 0.0
    per_block = 2 * steps * coupling.hypomono + steps**2 * coupling.lipschitz**2 / alpha_bar
    return float(np.max(per_block))


def estimate_submonotonicity(
    oracle: Callable[[np.ndarray], np.ndarray],
    pairs: np.ndarray,
    lam: float,
) -> float:
    """Smallest tau >= 0 consistent with scaled submonotonicity on sampled pairs.

    With z = lam * oracle(u) and w = lam * oracle(v), each pair requires
    -(tau/2) ||(u+z) - (v+w)||^2 <= <z - w, u - v>.  Returns the max over
    pairs of the implied lower bounds (inf when the normalization vanishes
    while the inner product is negative).
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 3 or pairs.shape[1] != 2:
        raise DimensionMismatch("pairs must have shape (n, 2, d)")
    u, v = pairs[:, 0, :], pairs[:, 1, :]
    z = lam * np.asarray(oracle(u), dtype=float)
    w = lam * np.asarray(oracle(v), dtype=float)
    ip = np.sum((z - w) * (u - v), axis=-1)
    den = np.sum(((u + z) - (v + w)) ** 2, axis=-1)
    tau_hat = 0.0
    for ipk, denk in zip(ip, den):
        if ipk >= 0:
            continue
        if denk <= 0:
            return float("inf")
        tau_hat = max(tau_hat, -2.0 * ipk / denk)
    return float(tau_hat)


# ---------------------------------------------------------------------------
# Separable-term gallery.  Constructors return BlockFunction instances; build
# a SeparableTerm by listing one per block.
# ---------------------------------------------------------------------------


def h_zero() -> BlockFunction:
    """h = 0; the resolvent is the identity."""
    return BlockFunction(prox=lambda v, lam: v, tau=0.0, convex=True,
                         value=lambda v: np.zeros(v.shape[:-1]), kind="zero")


def h_quadratic(coeff: float = 1.0) -> BlockFunction:
    """h(u) = coeff * ||u||^2 with coeff > 0; prox is a rescaling."""
    if coeff <= 0:
        raise NotPSD(f"quadratic block coefficient must be positive, got {coeff}")
    return BlockFunction(
        prox=lambda v, lam: v / (1.0 + 2.0 * lam * coeff),
        tau=0.0,
        convex=True,
        value=lambda v: coeff * np.sum(v * v, axis=-1),
        kind="quadratic",
    )


def h_l1(weight: float = 1.0) -> BlockFunction:
    """h(u) = weight * ||u||_1; prox is soft thresholding."""
    if weight < 0:
        raise ValueError(f"l1 weight must be nonnegative, got {weight}")

    def prox(v, lam):
        s = lam * weight
        return np.sign(v) * np.maximum(np.abs(v) - s, 0.0)

    return BlockFunction(prox=prox, tau=0.0, convex=True,
                         value=lambda v: weight * np.sum(np.abs(v), axis=-1), kind="l1")


def h_indicator_box(lo, hi) -> BlockFunction:
    """Indicator of the box [lo, hi]; prox clips coordinatewise."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box lower bound exceeds upper bound")

    def value(v):
        inside = np.all((v >= lo - 1e-12) & (v <= hi + 1e-12), axis=-1)
        return np.where(inside, 0.0, np.inf)

    return BlockFunction(prox=lambda v, lam: np.clip(v, lo, hi), tau=0.0,
                         convex=True, value=value, kind="indicator_box")


def h_indicator_point(z) -> BlockFunction:
    """Indicator of the singleton {z}; prox is constant."""
    z = np.asarray(z, dtype=float)

    def prox(v, lam):
        return np.broadcast_to(z, v.shape).copy()

    return BlockFunction(prox=prox, tau=0.0, convex=True, kind="indicator_point")


def h_indicator_ball(center, radius: float) -> BlockFunction:
    """Indicator of a Euclidean ball; prox is radial projection."""
    center = np.asarray(center, dtype=float)
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")

    def prox(v, lam):
        d = v - center
        nrm = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(nrm > radius, radius / np.where(nrm == 0, 1.0, nrm), 1.0)
        return center + scale * d

    return BlockFunction(prox=prox, tau=0.0, convex=True, kind="indicator_ball")


SEPARABLE_GALLERY: dict[str, Callable[..., BlockFunction]] = {
    "zero": h_zero,
    "quadratic": h_quadratic,
    "l1": h_l1,
    "indicator_box": h_indicator_box,
    "indicator_point": h_indicator_point,
    "indicator_ball": h_indicator_ball,
}


# ---------------------------------------------------------------------------
# Coupling gallery.
# ---------------------------------------------------------------------------


def coupling_zero(layout: BlockLayout) -> SmoothCoupling:
    """f = 0."""
    return SmoothCoupling(
        layout=layout,
        gradient=lambda x: np.zeros_like(x),
        lipschitz=np.zeros(layout.num_blocks),
        hypomono=np.zeros(layout.num_blocks),
        convex=True,
        value=lambda x: np.zeros(x.shape[:-1]),
        hessian_block=lambda j: np.zeros((layout.block_dims[j],) * 2),
    )


def coupling_quadratic(layout: BlockLayout, Q: np.ndarray, b: np.ndarray | None = None,
                       convex: bool | None = None) -> SmoothCoupling:
    """f(x) = x'Qx/2 + b'x with symmetric Q.

    Blockwise Lipschitz constants: exact diagonal-block norms when Q is
    block diagonal for the layout, otherwise the global operator norm for
    every block (the blockwise inequality requires constants at least that
    strong for dense Q).  Hypomonotonicity is |most negative eigenvalue|.
    """
    Q = np.asarray(Q, dtype=float)
    d = layout.total_dim
    if Q.shape != (d, d):
        raise DimensionMismatch(f"Q has shape {Q.shape}, layout expects ({d}, {d})")
    if not np.allclose(Q, Q.T, atol=1e-12):
        raise ValueError("Q must be symmetric")
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    if b.shape != (d,):
        raise DimensionMismatch(f"b has shape {b.shape}, expected ({d},)")

    eigs = np.linalg.eigvalsh(Q)
    lam_min = float(eigs[0])
    is_psd = lam_min >= -1e-12
    if convex is None:
        convex = is_psd
    elif convex and not is_psd:
        raise NotPSD(f"Q declared convex but has eigenvalue {lam_min}")

    off_diag = Q.copy()
    for j in range(layout.num_blocks):
        sl = layout.slice_of(j)
        off_diag[sl, sl] = 0.0
    block_diagonal = np.allclose(off_diag, 0.0, atol=1e-14)
    if block_diagonal:
        L = np.array([
            np.linalg.norm(Q[layout.slice_of(j), layout.slice_of(j)], 2)
            for j in range(layout.num_blocks)
        ])
    else:
        L = np.full(layout.num_blocks, np.linalg.norm(Q, 2))
    tau = 0.0 if convex else max(0.0, -lam_min)

    def hessian_block(j):
        sl = layout.slice_of(j)
        return Q[sl, sl]

    return SmoothCoupling(
        layout=layout,
        gradient=lambda x: x @ Q.T + b,
        lipschitz=L,
        hypomono=np.full(layout.num_blocks, tau),
        convex=bool(convex),
        value=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, Q, x) + x @ b,
        hessian_block=hessian_block,
    )


def coupling_diagonal_sqdist(layout: BlockLayout) -> SmoothCoupling:
    """f(x) = dist(x, diagonal)^2 / 2 on a product of m equal blocks.

    grad_j f(x) = x_j - mean_k x_k; convex with blockwise L_j = 1.
    """
    dims = set(layout.block_dims)
    if len(dims) != 1:
        raise DimensionMismatch(f"diagonal coupling needs equal block dims, got {layout.block_dims}")
    m = layout.num_blocks
    d = layout.block_dims[0]

    def gradient(x):
        blocks = x.reshape(x.shape[:-1] + (m, d))
        mean = blocks.mean(axis=-2, keepdims=True)
        return (blocks - mean).reshape(x.shape)

    def value(x):
        blocks = x.reshape(x.shape[:-1] + (m, d))
        mean = blocks.mean(axis=-2, keepdims=True)
        return 0.5 * np.sum((blocks - mean) ** 2, axis=(-2, -1))

    return SmoothCoupling(
        layout=layout,
        gradient=gradient,
        lipschitz=np.ones(m),
        hypomono=np.zeros(m),
        convex=True,
        value=value,
        hessian_block=lambda j: (1.0 - 1.0 / m) * np.eye(d),
    )


def coupling_diagonal_indicator(layout: BlockLayout, agreement_tol: float = 1e-9) -> SmoothCoupling:
    """Indicator of the diagonal, for reflection-based updates only.

    The block-j partial resolvent forces block j to the common value of the
    remaining blocks; it is empty when those blocks disagree.  There is no
    gradient oracle, so forward-backward flavors must reject this coupling.
    """
    dims = set(layout.block_dims)
    if len(dims) != 1:
        raise DimensionMismatch(f"diagonal coupling needs equal block dims, got {layout.block_dims}")
    m = layout.num_blocks
    d = layout.block_dims[0]

    def partial_resolvent(x, j, lam):
        blocks = x.reshape(x.shape[:-1] + (m, d))
        others = np.delete(blocks, j, axis=-2)
        ref = others[..., 0, :]
        if others.shape[-2] > 1:
            spread = np.max(np.abs(others - ref[..., None, :]))
            if spread > agreement_tol:
                raise EmptyResolvent(
                    f"remaining blocks disagree by {spread:.3e}; diagonal partial resolvent empty"
                )
        return ref.copy()

    return SmoothCoupling(
        layout=layout,
        gradient=None,
        lipschitz=np.zeros(m),
        hypomono=np.zeros(m),
        convex=True,
        partial_resolvent=partial_resolvent,
    )
