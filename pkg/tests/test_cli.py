"""Config validation and the four CLI commands end to end."""

import json

import numpy as np
import pytest

from blocksplit.cli import main
from blocksplit.config import build_problem, load_config, parse_config
from blocksplit.errors import ConfigError


def base_config(**overrides):
    doc = {
        "schema_version": 1,
        "problem": {"id": "counterexample2d", "params": {"t": 0.25}},
        "flavor": "fb",
        "scheme": {"subsets": [[0], [1]], "probs": [0.5, 0.5]},
        "steps": [0.25, 0.25],
        "seed": 7,
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# ---------------------------------------------------------------------------
# Config parsing.
# ---------------------------------------------------------------------------


def test_parse_config_happy_path():
    cfg = parse_config(base_config())
    assert cfg.problem_id == "counterexample2d"
    assert cfg.flavor == "fb"
    assert cfg.seed == 7
    assert cfg.threads == 1
    assert cfg.scheme.subsets == ((0,), (1,))
    np.testing.assert_allclose(cfg.steps, [0.25, 0.25])


@pytest.mark.parametrize(
    "mutation",
    [
        {"schema_version": 2},
        {"flavor": "admm"},
        {"scheme": {"subsets": [[0]], "probs": [0.5]}},
        {"seed": -1},
        {"threads": 0},
        {"run": {"num_chains": 0, "iterations": 5}},
        {"run": {"num_chains": 5, "iterations": 5, "init": {"kind": "gaussian"}}},
        {"certify": {"property": "magic"}},
        {"certify": {"property": "pointwise_aafne", "target": {"kind": "sideways"}}},
        {"rate": {"gauge": {"kind": "tabulated"}}},
        {"problem": {"id": "unknown_problem"}},
    ],
)
def test_parse_config_rejects(mutation):
    with pytest.raises(ConfigError):
        parse_config(base_config(**mutation))


def test_parse_config_error_names_field():
    try:
        parse_config(base_config(flavor="admm"))
    except ConfigError as e:
        assert "config.flavor" in str(e)


def test_build_problem_dispatch():
    assert build_problem("counterexample2d", {"t": 0.1}).problem_id == "counterexample2d"
    prob = build_problem(
        "feasibility",
        {"sets": [{"kind": "point", "point": [0.0]}, {"kind": "point", "point": [1.0]}]},
    )
    assert prob.problem_id == "feasibility"
    prob = build_problem(
        "quadratic_l1", {"Q": [[1.0]], "b": [-1.0], "l1_weights": [0.5]}
    )
    assert prob.target_point[0] == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        build_problem("feasibility", {"sets": [{"kind": "nope"}]})


def test_resolved_config_is_json_ready():
    cfg = parse_config(base_config(run={"num_chains": 4, "iterations": 2}))
    json.dumps(cfg.resolved())


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


# ---------------------------------------------------------------------------
# CLI commands through main(argv).
# ---------------------------------------------------------------------------


def run_config(tmp_path, out_name="out", **run_overrides):
    run = {
        "num_chains": 20,
        "iterations": 30,
        "snapshot_every": 15,
        "dw_step_every": 5,
        "init": {"kind": "uniform_box", "lo": [-2.0, -2.0], "hi": [2.0, 2.0]},
    }
    run.update(run_overrides)
    return base_config(run=run, output_dir=str(tmp_path / out_name))


def test_cli_run_writes_outputs(tmp_path, capsys):
    path = write_config(tmp_path, run_config(tmp_path))
    assert main(["run", "--config", path]) == 0
    out = tmp_path / "out"
    for name in ("trajectory.csv", "summary.json", "final_measure.csv",
                 "snapshot_000000.csv", "snapshot_000015.csv", "snapshot_000030.csv"):
        assert (out / name).exists(), name
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 7
    assert summary["config"]["problem"]["id"] == "counterexample2d"
    assert summary["verdicts"]["fejer_d_target"]["passed"] is True
    assert "run complete" in capsys.readouterr().out


def test_cli_run_seed_override_changes_draws(tmp_path):
    path = write_config(tmp_path, run_config(tmp_path, "a"))
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b"), "--seed", "8"])
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a != b


def test_cli_run_identical_bytes_same_seed(tmp_path):
    path = write_config(tmp_path, run_config(tmp_path, "a"))
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (
        tmp_path / "b" / "trajectory.csv"
    ).read_bytes()
    assert (tmp_path / "a" / "final_measure.csv").read_bytes() == (
        tmp_path / "b" / "final_measure.csv"
    ).read_bytes()


def test_cli_run_strict_steps_gate(tmp_path, capsys):
    # t = 0.25 sits outside the per-block admissible range 1/8 for the
    # counterexample; strict mode must refuse to run
    doc = run_config(tmp_path, strict_steps=True)
    path = write_config(tmp_path, doc)
    assert main(["run", "--config", path]) == 2
    assert "config.steps" in capsys.readouterr().err
    doc["steps"] = [0.1, 0.1]
    path = write_config(tmp_path, doc, "ok.json")
    assert main(["run", "--config", path]) == 0


def test_cli_certify_pass_and_fail(tmp_path, capsys):
    passing = base_config(
        certify={"property": "aafne_in_expectation", "alpha": 2.0 / 3.0, "num_pairs": 500},
        output_dir=str(tmp_path / "pass"),
    )
    assert main(["certify", "--config", write_config(tmp_path, passing, "p.json")]) == 0
    assert "PASS" in capsys.readouterr().out
    report = json.loads((tmp_path / "pass" / "certify_report.json").read_text())
    assert report["report"]["passed"] is True

    failing = base_config(
        certify={
            "property": "pointwise_aafne",
            "target": {"kind": "subset", "index": 0},
            "alpha": 0.5,
            "num_pairs": 500,
        },
        output_dir=str(tmp_path / "fail"),
    )
    assert main(["certify", "--config", write_config(tmp_path, failing, "f.json")]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_certify_paracontraction_needs_fixed_points(tmp_path, capsys):
    doc = base_config(
        problem={
            "id": "feasibility",
            "params": {
                "sets": [
                    {"kind": "point", "point": [0.0]},
                    {"kind": "point", "point": [2.0]},
                ]
            },
        },
        steps=[0.5, 0.5],
        certify={"property": "paracontraction_in_expectation", "num_pairs": 100},
        output_dir=str(tmp_path / "o"),
    )
    assert main(["certify", "--config", write_config(tmp_path, doc)]) == 2
    assert "fixed points" in capsys.readouterr().err


def test_cli_rate(tmp_path, capsys):
    # long enough that the step distances genuinely vanish, so the
    # asymptotic-regularity gate has something real to certify
    path = write_config(tmp_path, run_config(tmp_path, iterations=200))
    main(["run", "--config", path])
    traj = str(tmp_path / "out" / "trajectory.csv")
    assert main(["rate", "--trajectory", traj, "--out", str(tmp_path / "rate")]) == 0
    report = json.loads((tmp_path / "rate" / "rate_report.json").read_text())
    assert report["report"]["fejer"]["passed"] is True
    assert report["report"]["fit"]["c_hat"] < 1.0
    capsys.readouterr()
    # an inadmissible column name is a usage error
    assert main(["rate", "--trajectory", traj, "--column", "nope",
                 "--out", str(tmp_path / "rate")]) == 2


def test_cli_rate_gauge_failure_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, run_config(tmp_path))
    main(["run", "--config", path])
    traj = str(tmp_path / "out" / "trajectory.csv")
    # an aggressive gauge (factor near 0) cannot hold step to step
    code = main(["rate", "--trajectory", traj, "--kappa", "1.001", "--tau", "1.0",
                 "--out", str(tmp_path / "rate")])
    assert code == 1
    assert "FAIL gauge" in capsys.readouterr().out


def test_cli_transport(tmp_path, capsys):
    path = write_config(tmp_path, run_config(tmp_path))
    main(["run", "--config", path])
    capsys.readouterr()
    mfile = str(tmp_path / "out" / "final_measure.csv")
    assert main(["transport", mfile, mfile]) == 0
    assert float(capsys.readouterr().out.strip()) == 0.0
    assert main(["transport", mfile, mfile, "--probs", "0.5,0.5",
                 "--plan", str(tmp_path / "plan.csv")]) == 0
    assert (tmp_path / "plan.csv").exists()


def test_cli_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert "config error" in capsys.readouterr().err
    doc = base_config()  # no run section
    assert main(["run", "--config", write_config(tmp_path, doc)]) == 2
    assert "config.run" in capsys.readouterr().err
