"""Ensemble simulation, diagnostics, and run file formats."""

import numpy as np
import pytest

from blocksplit.blockspace import BlockSubsetScheme
from blocksplit.errors import DimensionMismatch
from blocksplit.markov import (
    DiagnosticRecord,
    empirical_residual_psi,
    init_ensemble,
    point_sampler,
    read_snapshot,
    read_trajectory_csv,
    run,
    sbi_step,
    uniform_box_sampler,
    write_snapshot,
    write_trajectory_csv,
)
from blocksplit.problems import counterexample2d
from blocksplit.splitting import apply_T, apply_full

SINGLETONS = BlockSubsetScheme(((0,), (1,)), (0.5, 0.5))


def _map(t=0.25):
    return counterexample2d(t).build_map("fb", SINGLETONS)


def test_init_ensemble_reproducible():
    m = _map()
    sampler = uniform_box_sampler([-1.0, -1.0], [1.0, 1.0])
    a = init_ensemble(m, sampler, 16, master_seed=42)
    b = init_ensemble(m, sampler, 16, master_seed=42)
    np.testing.assert_array_equal(a.states, b.states)
    c = init_ensemble(m, sampler, 16, master_seed=43)
    assert not np.allclose(a.states, c.states)


def test_init_ensemble_chains_independent():
    m = _map()
    sampler = uniform_box_sampler([-1.0, -1.0], [1.0, 1.0])
    e = init_ensemble(m, sampler, 8, master_seed=0)
    assert e.states.shape == (8, 2)
    # no two chains share an initial state
    assert len({tuple(row) for row in np.round(e.states, 12)}) == 8


def test_sbi_step_matches_manual_replay():
    # replay each chain with its own index stream: grouping by outcome in
    # sbi_step must not change what any single chain sees
    from blocksplit.blockspace import chain_rng, sample_subset

    m = _map()
    e = init_ensemble(m, point_sampler(np.array([1.0, 2.0])), 12, master_seed=9)
    manual_states = e.states.copy()
    manual_rngs = [chain_rng(9, cid, 1) for cid in range(12)]
    for step in range(5):
        for cid in range(12):
            i = sample_subset(m.scheme, manual_rngs[cid])
            manual_states[cid] = apply_T(m, i, manual_states[cid])
        sbi_step(e, m)
    np.testing.assert_allclose(e.states, manual_states, atol=1e-14)
    assert e.k == 5


def test_sbi_step_thread_count_invariance():
    from concurrent.futures import ThreadPoolExecutor

    m = _map()
    e1 = init_ensemble(m, uniform_box_sampler([-2, -2], [2, 2]), 20, master_seed=5)
    e2 = init_ensemble(m, uniform_box_sampler([-2, -2], [2, 2]), 20, master_seed=5)
    with ThreadPoolExecutor(max_workers=4) as ex:
        for _ in range(10):
            sbi_step(e1, m)
            sbi_step(e2, m, executor=ex, num_chunks=4)
    np.testing.assert_array_equal(e1.states, e2.states)


def test_empirical_residual_psi_hand_value():
    m = _map()
    e = init_ensemble(m, point_sampler(np.array([1.0, 2.0])), 3, master_seed=0)
    # T1(1,2) = (-0.5, 1/3); residual (1.5, 5/3)
    expected = np.sqrt(1.5**2 + (5.0 / 3.0) ** 2)
    assert empirical_residual_psi(e, m) == pytest.approx(expected)


def test_run_records_and_snapshots():
    m = _map()
    e = init_ensemble(m, uniform_box_sampler([-1, -1], [1, 1]), 10, master_seed=1)
    result = run(e, m, 20, snapshot_every=7)
    ks = [r.k for r in result.records]
    assert ks == list(range(21))
    assert sorted(result.snapshots) == [0, 7, 14, 20]
    assert result.snapshots[0].shape == (10, 2)
    # diagnostics decrease toward the fixed point at the origin
    assert result.records[-1].mean_residual < result.records[0].mean_residual


def test_run_distance_callbacks():
    m = _map()
    e = init_ensemble(m, uniform_box_sampler([-1, -1], [1, 1]), 10, master_seed=1)
    result = run(
        e,
        m,
        10,
        dw_step_every=3,
        target_distance=lambda states: float(np.mean(np.linalg.norm(states, axis=-1))),
        step_distance=lambda a, b: float(np.max(np.linalg.norm(a - b, axis=-1))),
    )
    dw = [r.dw_step for r in result.records]
    assert dw[0] is None
    assert all(dw[k] is not None for k in (3, 6, 9))
    assert all(dw[k] is None for k in (1, 2, 4, 5, 7, 8, 10))
    assert all(r.d_target is not None for r in result.records)


def test_run_threads_match_serial():
    m = _map()
    e1 = init_ensemble(m, uniform_box_sampler([-1, -1], [1, 1]), 30, master_seed=3)
    e2 = init_ensemble(m, uniform_box_sampler([-1, -1], [1, 1]), 30, master_seed=3)
    r1 = run(e1, m, 15)
    r2 = run(e2, m, 15, threads=3)
    np.testing.assert_array_equal(e1.states, e2.states)
    for a, b in zip(r1.records, r2.records):
        assert a.mean_residual == b.mean_residual


def test_trajectory_csv_round_trip(tmp_path):
    records = [
        DiagnosticRecord(0, 1.0, 2.0, None, 0.5, np.array([0.1, 0.2])),
        DiagnosticRecord(1, 0.5, 1.0, 0.25, 0.4, np.array([0.05, 0.1])),
    ]
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, records)
    cols = read_trajectory_csv(path)
    np.testing.assert_array_equal(cols["k"], [0, 1])
    np.testing.assert_allclose(cols["mean_residual"], [1.0, 0.5])
    assert np.isnan(cols["dw_step"][0])
    assert cols["dw_step"][1] == pytest.approx(0.25)
    np.testing.assert_allclose(cols["block0_mean"], [0.1, 0.05])
    np.testing.assert_allclose(cols["block1_mean"], [0.2, 0.1])


def test_trajectory_csv_no_timestamp_and_full_precision(tmp_path):
    # byte content must be a pure function of the records
    v = 1.0 / 3.0
    records = [DiagnosticRecord(0, v, v, None, None, np.array([v]))]
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, records)
    text = path.read_text()
    assert format(v, ".17g") in text
    assert "20" not in text.split("\n")[0]  # header carries no dates
    cols = read_trajectory_csv(path)
    assert cols["mean_residual"][0] == v  # exact round trip through 17 digits


def test_snapshot_round_trip(tmp_path):
    states = np.random.default_rng(0).normal(size=(5, 3))
    path = tmp_path / "snap.csv"
    write_snapshot(path, states, k=12, seed=99)
    header, loaded = read_snapshot(path)
    assert header["k"] == 12
    assert header["seed"] == 99
    assert header["n"] == 5
    np.testing.assert_array_equal(loaded, states)


def test_snapshot_detects_corruption(tmp_path):
    states = np.zeros((2, 2))
    path = tmp_path / "snap.csv"
    write_snapshot(path, states, k=0, seed=0)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop one row
    with pytest.raises(DimensionMismatch):
        read_snapshot(path)


def test_samplers():
    rng = np.random.default_rng(0)
    p = point_sampler(np.array([1.0, 2.0]))
    np.testing.assert_array_equal(p(rng), [1.0, 2.0])
    u = uniform_box_sampler([0.0, 10.0], [1.0, 11.0])
    draw = u(rng)
    assert 0.0 <= draw[0] <= 1.0
    assert 10.0 <= draw[1] <= 11.0
