"""Block structure of the product space, sampling schemes, and weighted norms.

The ambient space is a product of m Euclidean blocks.  Vectors are plain
1-D numpy arrays; a :class:`BlockLayout` knows how to slice them into
blocks and is the single authority on dimensional bookkeeping.  Blocks are
indexed from 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, UncoveredBlock


@dataclass(frozen=True)
class BlockLayout:
    """Partition of R^d into contiguous blocks of the given sizes."""

    block_dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.block_dims) == 0:
            raise DimensionMismatch("layout needs at least one block")
        if any(int(d) <= 0 for d in self.block_dims):
            raise DimensionMismatch(f"block dims must be positive, got {self.block_dims}")
        object.__setattr__(self, "block_dims", tuple(int(d) for d in self.block_dims))

    @property
    def num_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for d in self.block_dims:
            out.append(acc)
            acc += d
        return tuple(out)

    def slice_of(self, j: int) -> slice:
        if not 0 <= j < self.num_blocks:
            raise DimensionMismatch(f"block index {j} out of range for {self.num_blocks} blocks")
        off = self.offsets[j]
        return slice(off, off + self.block_dims[j])

    def check(self, x: np.ndarray) -> np.ndarray:
        """Validate the trailing axis of ``x`` against the layout."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.total_dim:
            raise DimensionMismatch(
                f"vector has trailing dim {x.shape[-1]}, layout expects {self.total_dim}"
            )
        return x

    def block(self, x: np.ndarray, j: int) -> np.ndarray:
        """View of block j along the trailing axis."""
        return x[..., self.slice_of(j)]

    def embed(self, block_value: np.ndarray, j: int, base: np.ndarray) -> np.ndarray:
        """Copy of ``base`` with block j replaced by ``block_value``."""
        base = self.check(base)
        out = np.array(base, copy=True)
        sl = self.slice_of(j)
        block_value = np.asarray(block_value, dtype=float)
        if block_value.shape[-1] != self.block_dims[j]:
            raise DimensionMismatch(
                f"block value has dim {block_value.shape[-1]}, block {j} expects {self.block_dims[j]}"
            )
        out[..., sl] = block_value
        return out

    def coordinate_weights(self, per_block: np.ndarray) -> np.ndarray:
        """Expand one scalar per block to one scalar per coordinate."""
        per_block = np.asarray(per_block, dtype=float)
        if per_block.shape != (self.num_blocks,):
            raise DimensionMismatch(
                f"expected {self.num_blocks} per-block values, got shape {per_block.shape}"
            )
        return np.repeat(per_block, self.block_dims)


def embed_block(block_value: np.ndarray, j: int, base: np.ndarray, layout: BlockLayout) -> np.ndarray:
    """Embed a block value into ``base`` at position j (copy, others kept)."""
    return layout.embed(block_value, j, base)


@dataclass(frozen=True)
class BlockSubsetScheme:
    """Finite family of block subsets with selection probabilities.

    ``subsets[i]`` is the tuple of block indices updated when outcome i is
    drawn; ``probs[i]`` is its probability.  Every block must appear in at
    least one subset of positive probability so that the induced per-block
    rates are nonzero.
    """

    subsets: tuple[tuple[int, ...], ...]
    probs: tuple[float, ...]
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        subsets = tuple(tuple(sorted(set(int(j) for j in s))) for s in self.subsets)
        probs = tuple(float(q) for q in self.probs)
        if len(subsets) == 0:
            raise UncoveredBlock("scheme needs at least one subset")
        if len(subsets) != len(probs):
            raise DimensionMismatch(
                f"{len(subsets)} subsets but {len(probs)} probabilities"
            )
        if any(len(s) == 0 for s in subsets):
            raise UncoveredBlock("empty subset in scheme")
        if any(q < 0 for q in probs):
            raise ValueError(f"negative probability in {probs}")
        total = sum(probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cum", np.cumsum(np.asarray(probs)))

    @property
    def num_outcomes(self) -> int:
        return len(self.subsets)

    def max_block_index(self) -> int:
        return max(max(s) for s in self.subsets)


@dataclass(frozen=True)
class BlockProbabilities:
    """Per-block selection probabilities p_j of a scheme, with the layout.

    Each p_j lies in (0, 1]; the weighted norm divides block j's
    contribution by p_j, so rarely updated blocks weigh more.
    """

    probs: np.ndarray
    layout: BlockLayout

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.layout.num_blocks,):
            raise DimensionMismatch(
                f"expected {self.layout.num_blocks} block probabilities, got shape {probs.shape}"
            )
        if np.any(probs <= 0):
            raise UncoveredBlock(f"nonpositive block probability in {probs}")
        if np.any(probs > 1 + 1e-12):
            raise ValueError(f"block probability above 1 in {probs}")
        object.__setattr__(self, "probs", probs)

    @property
    def p_max(self) -> float:
        return float(np.max(self.probs))

    def coordinate_inverse(self) -> np.ndarray:
        """1/p_j expanded to coordinates, for weighted inner products."""
        return self.layout.coordinate_weights(1.0 / self.probs)


def block_probabilities(scheme: BlockSubsetScheme, layout: BlockLayout) -> BlockProbabilities:
    """Per-block selection probabilities p_j = sum of probs of subsets containing j.

    Raises UncoveredBlock if some block is never selected (p_j = 0), since
    the weighted norm and every convergence statement need p_j > 0.
    """
    m = layout.num_blocks
    if scheme.max_block_index() >= m:
        raise DimensionMismatch(
            f"scheme references block {scheme.max_block_index()}, layout has {m} blocks"
        )
    p = np.zeros(m)
    for subset, q in zip(scheme.subsets, scheme.probs):
        for j in subset:
            p[j] += q
    if np.any(p <= 0):
        missing = [j for j in range(m) if p[j] <= 0]
        raise UncoveredBlock(f"blocks {missing} have zero selection probability")
    # guard against accumulation drift above 1
    p = np.minimum(p, 1.0)
    return BlockProbabilities(p, layout)


def weighted_norm(z: np.ndarray, p: BlockProbabilities) -> float | np.ndarray:
    """Selection-weighted norm: sqrt(sum_j ||z_j||^2 / p_j).

    Accepts a single vector or a batch with the vector on the trailing axis.
    """
    z = p.layout.check(z)
    w = p.coordinate_inverse()
    val = np.sqrt(np.sum(w * z * z, axis=-1))
    return float(val) if np.ndim(val) == 0 else val


def weighted_sq(z: np.ndarray, p: BlockProbabilities) -> float | np.ndarray:
    """Squared selection-weighted norm (no rounding through sqrt)."""
    z = p.layout.check(z)
    w = p.coordinate_inverse()
    val = np.sum(w * z * z, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def sample_subset(scheme: BlockSubsetScheme, rng: np.random.Generator) -> int:
    """Draw a subset index according to the scheme's probabilities."""
    u = rng.random()
    return int(np.searchsorted(scheme._cum, u, side="right").clip(0, scheme.num_outcomes - 1))


def chain_rng(master_seed: int, chain_id: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one chain.

    Stream 0 draws the initial state, stream 1 drives the index sequence,
    so initial conditions are independent of every selection draw.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(chain_id), int(stream)))
    return np.random.default_rng(ss)
