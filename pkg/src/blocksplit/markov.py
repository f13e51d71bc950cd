"""Particle ensembles for the induced Markov chain, diagnostics, and file output.

Each chain owns two generator streams derived from (master_seed, chain_id):
stream 0 draws the initial state, stream 1 drives the subset draws, so the
initial ensemble is independent of every selection and the whole run is
reproducible bitwise from (config, seed).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .blockspace import chain_rng, sample_subset
from .errors import DimensionMismatch
from .splitting import SplittingMap, apply_T, apply_full


@dataclass
class Chain:
    """One particle: its state, selection stream, and id."""

    state: np.ndarray
    rng: np.random.Generator
    id: int


@dataclass
class Ensemble:
    """N independent chains advanced in lockstep."""

    states: np.ndarray  # (N, dim)
    rngs: list[np.random.Generator]
    master_seed: int
    k: int = 0

    def __post_init__(self):
        if self.states.ndim != 2:
            raise DimensionMismatch(f"states must be (N, dim), got {self.states.shape}")
        if len(self.rngs) != self.states.shape[0]:
            raise DimensionMismatch("one rng per chain required")

    @property
    def num_chains(self) -> int:
        return self.states.shape[0]

    @property
    def chains(self) -> list[Chain]:
        return [Chain(self.states[i], self.rngs[i], i) for i in range(self.num_chains)]


def init_ensemble(
    m: SplittingMap,
    initial_sampler: Callable[[np.random.Generator], np.ndarray],
    num_chains: int,
    master_seed: int,
) -> Ensemble:
    """Draw N i.i.d. initial states, one init stream per chain.

    Chain i's initial draw uses stream (master_seed, i, 0) and its subset
    draws use (master_seed, i, 1); adding chains never perturbs existing ones.
    """
    if num_chains <= 0:
        raise ValueError(f"need at least one chain, got {num_chains}")
    dim = m.layout.total_dim
    states = np.empty((num_chains, dim))
    rngs = []
    for i in range(num_chains):
        x0 = np.asarray(initial_sampler(chain_rng(master_seed, i, stream=0)), dtype=float)
        if x0.shape != (dim,):
            raise DimensionMismatch(f"initial sampler returned shape {x0.shape}, expected ({dim},)")
        states[i] = x0
        rngs.append(chain_rng(master_seed, i, stream=1))
    return Ensemble(states=states, rngs=rngs, master_seed=master_seed)


def sbi_step(ensemble: Ensemble, m: SplittingMap, executor=None, num_chunks: int = 1) -> None:
    """Advance every chain by one random blockwise update, in place.

    Chains drawing the same subset are updated as one batched call; each
    chain's draw comes from its own stream, so the result is independent of
    the grouping and of how many worker threads process the chunks.
    """
    draws = np.fromiter(
        (sample_subset(m.scheme, rng) for rng in ensemble.rngs),
        dtype=np.int64,
        count=ensemble.num_chains,
    )

    def advance(rows: np.ndarray) -> None:
        for i in range(m.scheme.num_outcomes):
            sel = rows[draws[rows] == i]
            if sel.size == 0:
                continue
            ensemble.states[sel] = apply_T(m, i, ensemble.states[sel])

    if executor is None or num_chunks <= 1:
        advance(np.arange(ensemble.num_chains))
    else:
        chunks = np.array_split(np.arange(ensemble.num_chains), num_chunks)
        list(executor.map(advance, [c for c in chunks if c.size]))
    ensemble.k += 1


def empirical_residual_psi(ensemble: Ensemble, m: SplittingMap) -> float:
    """Root-mean-square full-block residual, sqrt(mean ||x - T1 x||^2).

    In the consistent case this equals the certified upper bound on the
    invariant discrepancy of the empirical measure.
    """
    r = ensemble.states - apply_full(m, ensemble.states)
    return float(np.sqrt(np.mean(np.sum(r * r, axis=-1))))


@dataclass
class DiagnosticRecord:
    """Per-iteration summary row of a run."""

    k: int
    mean_residual: float
    psi_upper: float
    dw_step: float | None
    d_target: float | None
    block_means: np.ndarray


@dataclass
class RunResult:
    records: list[DiagnosticRecord]
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


def run(
    ensemble: Ensemble,
    m: SplittingMap,
    iterations: int,
    snapshot_every: int = 0,
    dw_step_every: int = 0,
    target_distance: Callable[[np.ndarray], float] | None = None,
    step_distance: Callable[[np.ndarray, np.ndarray], float] | None = None,
    threads: int = 1,
) -> RunResult:
    """Advance the ensemble K iterations, recording diagnostics each step.

    ``snapshot_every`` > 0 stores particle copies at k = 0, multiples, and K.
    ``dw_step_every`` > 0 evaluates ``step_distance`` between consecutive
    clouds on that stride (an exact transport solve, so it costs).
    ``target_distance`` maps a cloud to its distance from the declared
    target and fills the d_target column.  ``threads`` > 1 splits the
    ensemble across a thread pool; results are bitwise independent of the
    thread count because every chain owns its streams.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be nonnegative, got {iterations}")
    records: list[DiagnosticRecord] = []
    snapshots: dict[int, np.ndarray] = {}
    executor = None
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        executor = ThreadPoolExecutor(max_workers=threads)

    def record_now(dw: float | None):
        records.append(
            DiagnosticRecord(
                k=ensemble.k,
                mean_residual=float(
                    np.mean(np.linalg.norm(ensemble.states - apply_full(m, ensemble.states), axis=-1))
                ),
                psi_upper=empirical_residual_psi(ensemble, m),
                dw_step=dw,
                d_target=None if target_distance is None else float(target_distance(ensemble.states)),
                block_means=np.array(
                    [np.mean(m.layout.block(ensemble.states, j)) for j in range(m.layout.num_blocks)]
                ),
            )
        )

    def want_snapshot(k: int) -> bool:
        if snapshot_every <= 0:
            return k == 0 or k == iterations
        return k == 0 or k == iterations or k % snapshot_every == 0

    try:
        record_now(None)
        if want_snapshot(0):
            snapshots[0] = ensemble.states.copy()
        for step in range(iterations):
            want_dw = dw_step_every > 0 and step_distance is not None and (step + 1) % dw_step_every == 0
            prev = ensemble.states.copy() if want_dw else None
            sbi_step(ensemble, m, executor=executor, num_chunks=threads)
            dw = float(step_distance(prev, ensemble.states)) if want_dw else None
            record_now(dw)
            if want_snapshot(ensemble.k):
                snapshots[ensemble.k] = ensemble.states.copy()
    finally:
        if executor is not None:
            executor.shutdown()
    return RunResult(records=records, snapshots=snapshots)


# ---------------------------------------------------------------------------
# File formats.  Trajectory: plain CSV, floats at 17 significant digits, no
# timestamps, so identical (config, seed) runs produce identical bytes.
# Snapshot: one JSON header line, then one CSV row of coordinates per chain.
# ---------------------------------------------------------------------------


def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def trajectory_header(num_blocks: int) -> list[str]:
    return ["k", "mean_residual", "psi_upper", "dw_step", "d_target"] + [
        f"block{j}_mean" for j in range(num_blocks)
    ]


def write_trajectory_csv(path, records: Sequence[DiagnosticRecord]) -> None:
    """Write diagnostics as CSV; empty cells mark values not computed."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        num_blocks = len(records[0].block_means) if records else 0
        w.writerow(trajectory_header(num_blocks))
        for r in records:
            w.writerow(
                [r.k, _fmt(r.mean_residual), _fmt(r.psi_upper), _fmt(r.dw_step), _fmt(r.d_target)]
                + [_fmt(v) for v in r.block_means]
            )


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Read a trajectory CSV into named columns (NaN for empty cells)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols: dict[str, np.ndarray] = {}
    for idx, name in enumerate(header):
        vals = [row[idx] if idx < len(row) else "" for row in body]
        cols[name] = np.array([float(v) if v != "" else np.nan for v in vals])
    return cols


def write_snapshot(path, states: np.ndarray, k: int, seed: int) -> None:
    """Particle dump: JSON header line (n, dim, k, seed), then CSV rows."""
    states = np.asarray(states, dtype=float)
    header = {"n": int(states.shape[0]), "dim": int(states.shape[1]), "k": int(k), "seed": int(seed)}
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(fh)
        for row in states:
            w.writerow([_fmt(v) for v in row])


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    """Read a snapshot file back as (header, states)."""
    with open(path, newline="") as fh:
        header = json.loads(fh.readline())
        rows = list(csv.reader(fh))
    states = np.array([[float(v) for v in row] for row in rows], dtype=float)
    if states.size == 0:
        states = states.reshape(0, header.get("dim", 0))
    if states.shape != (header["n"], header["dim"]):
        raise DimensionMismatch(
            f"snapshot body shape {states.shape} does not match header {header}"
        )
    return header, states


def point_sampler(x0) -> Callable[[np.random.Generator], np.ndarray]:
    """Initial sampler concentrated at one point."""
    x0 = np.asarray(x0, dtype=float)

    def sample(rng: np.random.Generator) -> np.ndarray:
        return x0.copy()

    return sample


def uniform_box_sampler(lo, hi) -> Callable[[np.random.Generator], np.ndarray]:
    """Initial sampler uniform over a box (lo, hi coordinatewise)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ValueError("box bounds must have equal shape with lo <= hi")

    def sample(rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(lo, hi)

    return sample
