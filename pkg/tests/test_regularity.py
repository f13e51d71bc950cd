"""Certification sweeps: pointwise, in expectation, paracontraction, identities."""

import numpy as np
import pytest

from blocksplit.blockspace import BlockSubsetScheme
from blocksplit.errors import InvalidFixedPoints
from blocksplit.problems import counterexample2d
from blocksplit.regularity import (
    Region,
    certify_aafne_in_expectation,
    certify_paracontraction_in_expectation,
    certify_pointwise_aafne,
    verify_expectation_identities,
)
from blocksplit.splitting import apply_T, transport_discrepancy

SINGLETONS = BlockSubsetScheme(((0,), (1,)), (0.5, 0.5))


def test_region_validation_and_sampling():
    r = Region(np.array([-1.0, 2.0]), np.array([1.0, 2.0]))
    assert r.dim == 2
    xs = r.sample(np.random.default_rng(0), 100)
    assert np.all(xs[:, 0] >= -1.0) and np.all(xs[:, 0] <= 1.0)
    # degenerate coordinate is pinned: the affine restriction to a line
    np.testing.assert_array_equal(xs[:, 1], np.full(100, 2.0))
    with pytest.raises(ValueError):
        Region(np.array([1.0]), np.array([0.0]))


def test_pointwise_scaling_map_passes_at_half():
    # T = x/2 is firmly nonexpansive: passes alpha = 1/2 with no violation
    region = Region(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
    report = certify_pointwise_aafne(
        lambda x: 0.5 * x, region, alpha=0.5, violation=0.0, num_pairs=500, seed=0
    )
    assert report.passed
    assert report.margin <= 1e-10


def test_pointwise_scaling_map_fails_below_half():
    # at alpha = 0.2 the transport weight overshoots: margin = 0.25 ||x-y||^2
    region = Region(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
    report = certify_pointwise_aafne(
        lambda x: 0.5 * x, region, alpha=0.2, violation=0.0, num_pairs=500, seed=0
    )
    assert not report.passed
    # adversarial refinement drives the witness pair toward opposite corners
    assert report.margin == pytest.approx(0.25 * 200.0, rel=1e-6)


def test_pointwise_identity_passes_any_alpha():
    region = Region(np.array([-1.0]), np.array([1.0]))
    for alpha in (0.1, 0.5, 0.9):
        report = certify_pointwise_aafne(
            lambda x: x, region, alpha=alpha, violation=0.0, num_pairs=100, seed=1
        )
        assert report.passed


def test_pointwise_witness_replays():
    m = counterexample2d(0.25).build_map("fb", SINGLETONS)
    region = Region(np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
    T = lambda x: apply_T(m, 0, x)
    report = certify_pointwise_aafne(T, region, 0.5, 0.0, 200, seed=2)
    assert not report.passed
    x, y = report.witness_x, report.witness_y
    Tx, Ty = T(x), T(y)

    def sq(a):
        return float(np.sum(a * a))

    replayed = sq(Tx - Ty) - sq(x - y) + 1.0 * transport_discrepancy(x, y, Tx, Ty)
    assert replayed == pytest.approx(report.margin, rel=1e-12)


def test_pointwise_violation_loosens_the_test():
    # a 2x expansion fails with violation 0 but passes with violation 3.1
    # at alpha close to 1 (transport term negligible): ||2x-2y||^2 = 4 d
    region = Region(np.array([-1.0]), np.array([1.0]))
    fail = certify_pointwise_aafne(lambda x: 2.0 * x, region, 0.999, 0.0, 200, seed=3)
    assert not fail.passed
    # psi for T = 2x: ||(x-2x)-(y-2y)||^2 = d, so margin = 4d - (1+eps)d + w d
    ok = certify_pointwise_aafne(lambda x: 2.0 * x, region, 0.999, 3.1, 200, seed=3)
    assert ok.passed


def test_expectation_certificate_counterexample():
    # blockwise updates certify (2/3, 0) in the weighted expectation sense
    # even though each individual block map fails pointwise
    m = counterexample2d(0.25).build_map("fb", SINGLETONS)
    region = Region(np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
    report = certify_aafne_in_expectation(m, region, 2.0 / 3.0, 0.0, 1000, seed=4)
    assert report.passed
    assert report.margin <= 1e-10


def test_expectation_certificate_detects_wrong_alpha():
    # alpha far below the true constant inflates the transport weight
    m = counterexample2d(0.45).build_map("fb", SINGLETONS)
    region = Region(np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
    report = certify_aafne_in_expectation(
        m, region, 0.05, 0.0, 1000, seed=5, adversarial=True
    )
    assert not report.passed


def test_paracontraction_counterexample():
    m = counterexample2d(0.25).build_map("fb", SINGLETONS)
    region = Region(np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
    report = certify_paracontraction_in_expectation(
        m, np.array([[0.0, 0.0]]), region, 2000, seed=6
    )
    assert report.passed
    assert report.margin < 0.0
    assert report.details["num_eligible"] > 0


def test_paracontraction_rejects_moving_points():
    m = counterexample2d(0.25).build_map("fb", SINGLETONS)
    region = Region(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    with pytest.raises(InvalidFixedPoints):
        certify_paracontraction_in_expectation(
            m, np.array([[1.0, 1.0]]), region, 100, seed=7
        )


def test_expectation_identities_hold():
    for t in (0.1, 0.25, 0.45):
        m = counterexample2d(t).build_map("fb", SINGLETONS)
        region = Region(np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
        report = verify_expectation_identities(m, region, 500, seed=8)
        assert report.passed
        assert report.margin <= 1e-9


def test_expectation_identities_uneven_scheme():
    scheme = BlockSubsetScheme(((0,), (1,), (0, 1)), (0.25, 0.35, 0.4))
    m = counterexample2d(0.2).build_map("fb", scheme)
    region = Region(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
    report = verify_expectation_identities(m, region, 500, seed=9)
    assert report.passed


def test_report_to_dict_is_json_ready():
    import json

    region = Region(np.array([-1.0]), np.array([1.0]))
    report = certify_pointwise_aafne(lambda x: 0.5 * x, region, 0.5, 0.0, 50, seed=10)
    json.dumps(report.to_dict())
