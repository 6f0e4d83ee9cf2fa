import numpy as np
import pytest

from corrbandit import cli
from corrbandit.environments import realization_hash
from corrbandit.errors import ConfigError
from corrbandit.experiment import (ExperimentConfig, build_instance, curve_to_csv, emit_csv,
                                   env_rng, parse_csv, report_oracle, run_experiment)


def test_correlated_ucb_halves_regret_on_binary_a():
    cfg = ExperimentConfig(environment="binary-a", policies=("ucb", "c-ucb"), horizon=5000, trials=100)
    res = run_experiment(cfg)
    assert res.curve.final("c-ucb") < 0.5 * res.curve.final("ucb")


def test_csv_is_byte_identical_on_rerun(tmp_path):
    cfg = ExperimentConfig(policies=("ucb", "c-ts", "ts-beta"), horizon=300, trials=1, seed=42)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(cfg).curve, a, 7)
    emit_csv(run_experiment(cfg).curve, b, 7)
    assert a.read_bytes() == b.read_bytes()


def test_single_arm_environment_has_zero_regret(tmp_path):
    f = tmp_path / "one.txt"
    f.write_text("K 1\nB 1\nvalues 1 0 1\n0 : 0.3\n1 : 0.7\n")
    cfg = ExperimentConfig(environment="tabular", env_file=str(f), pseudo="constant",
                           policies=("ucb", "c-ucb", "c-ts"), horizon=50, trials=3)
    res = run_experiment(cfg)
    assert np.all(res.curve.mean == 0) and np.all(res.curve.std == 0)


def test_csv_line_counts_and_round_trip():
    cfg = ExperimentConfig(policies=("ucb", "c-ucb"), horizon=3, trials=2)
    curve = run_experiment(cfg).curve
    text = curve_to_csv(curve, 1)
    assert len(text.splitlines()) == 4
    assert text.splitlines()[0] == "t,ucb_mean,ucb_std,c-ucb_mean,c-ucb_std"
    back = parse_csv(text, curve.trials)
    np.testing.assert_array_equal(back.t, curve.t)
    np.testing.assert_array_equal(back.mean, curve.mean)
    np.testing.assert_array_equal(back.std, curve.std)
    assert back.policies == curve.policies

    cfg = ExperimentConfig(policies=("ucb", "c-ucb"), horizon=100, trials=2)
    assert len(curve_to_csv(run_experiment(cfg).curve, 10).splitlines()) == 11


def test_final_row_always_kept():
    cfg = ExperimentConfig(policies=("ucb",), horizon=105, trials=1)
    rows = curve_to_csv(run_experiment(cfg).curve, 10).splitlines()
    assert rows[-1].startswith("105,") and rows[-2].startswith("100,")


def test_same_realizations_across_policies():
    cfg = ExperimentConfig(environment="ternary", policies=("ucb", "c-ts"), horizon=200, trials=5, seed=9)
    res = run_experiment(cfg)
    inst = build_instance(cfg)
    for i, h in enumerate(res.realization_hashes):
        assert h == realization_hash(inst.env.realize(200, env_rng(9, i)))
    solo = run_experiment(ExperimentConfig(environment="ternary", policies=("c-ts",), horizon=200,
                                           trials=5, seed=9))
    assert solo.realization_hashes == res.realization_hashes
    # each policy's outcome does not depend on which other policies ran
    np.testing.assert_array_equal(solo.final_regret["c-ts"], res.final_regret["c-ts"])


def test_streamed_aggregates_match_retained_finals():
    cfg = ExperimentConfig(policies=("ucb", "c-ucb", "ts"), horizon=400, trials=37)
    res = run_experiment(cfg)
    for p, name in enumerate(res.curve.policies):
        finals = res.final_regret[name]
        assert abs(res.curve.mean[p, -1] - finals.mean()) <= 1e-9
        assert abs(res.curve.std[p, -1] - finals.std()) <= 1e-9
        assert np.all(np.diff(res.curve.mean[p]) >= 0)
        assert np.all(res.curve.std[p] >= 0)
        assert np.all(res.pulls[name].sum(axis=1) == 400)


def test_thread_cap_does_not_change_results(monkeypatch):
    cfg = ExperimentConfig(policies=("ucb", "c-ts"), horizon=2000, trials=60)
    monkeypatch.setenv("CORRBANDIT_THREADS", "1")
    a = run_experiment(cfg)
    monkeypatch.setenv("CORRBANDIT_THREADS", "4")
    b = run_experiment(cfg)
    np.testing.assert_array_equal(a.curve.mean, b.curve.mean)
    np.testing.assert_array_equal(a.curve.std, b.curve.std)


@pytest.mark.parametrize("kw,field", [
    ({"horizon": 1}, "horizon"),
    ({"trials": 0}, "trials"),
    ({"beta": 0.0}, "beta"),
    ({"policies": ("ucb", "kl-ucb")}, "kl-ucb"),
    ({"pseudo": "guess"}, "pseudo"),
])
def test_config_errors_name_the_field(kw, field):
    cfg = ExperimentConfig(**kw)
    with pytest.raises(ConfigError, match=field):
        run_experiment(cfg)


def test_config_file_parsing(tmp_path):
    f = tmp_path / "exp.cfg"
    f.write_text("environment = binary-b  # fixture\npolicies = ucb, c-ts\nhorizon = 700\nbeta = 0.5\n")
    cfg = ExperimentConfig.load(f)
    assert cfg.environment == "binary-b" and cfg.policies == ("ucb", "c-ts")
    assert cfg.horizon == 700 and cfg.beta == 0.5
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_text("colour = red\n")
    with pytest.raises(ConfigError, match="horizon"):
        ExperimentConfig.from_text("horizon = lots\n")


def test_latent_config_keys():
    cfg = ExperimentConfig.from_text(
        "environment = latent\nlatent_beta = 1.5 5\nlatent_scale = 0 6\n"
        "latent_arms = linear 2 0 1; square 1 3 0 1\npseudo = latent-grid\nbins = 100\ngrid_n = 401\n")
    inst = build_instance(cfg)
    np.testing.assert_allclose(inst.env.true_means(), [2.769, 3.461], atol=1e-3)


def test_report_oracle():
    for env, C in (("binary-a", 1), ("binary-b", 2), ("ternary", 2)):
        report, c_emp = report_oracle(ExperimentConfig(environment=env, oracle_t=3000))
        assert report.C == C
        assert c_emp == C


# -- CLI -----------------------------------------------------------------------

def test_cli_run_writes_csv(tmp_path):
    out = tmp_path / "curve.csv"
    code = cli.main(["run", "--environment", "binary-a", "--policies", "ucb,c-ucb", "--horizon", "200",
                     "--trials", "3", "--stride", "50", "--output", str(out)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5


def test_cli_config_file_and_set_override(tmp_path):
    f = tmp_path / "exp.cfg"
    f.write_text("policies = ucb\nhorizon = 100\ntrials = 2\n")
    out = tmp_path / "c.csv"
    assert cli.main(["run", "--config", str(f), "--set", "horizon=40", "--stride", "1",
                     "--output", str(out)]) == 0
    assert out.read_text().splitlines()[-1].startswith("40,")


def test_cli_oracle_and_bounds(capsys):
    assert cli.main(["oracle", "--environment", "ternary", "--oracle-t", "500"]) == 0
    out = capsys.readouterr().out
    assert "C = 2" in out and "3 0.200000 1.240000" in out
    assert cli.main(["bounds", "--environment", "binary-b", "--T", "1000"]) == 0
    assert "competitive" in capsys.readouterr().out
    assert cli.main(["bounds", "--K", "2", "--T", "100", "--delta-min", "0.2", "--pseudo-gap", "0.08"]) == 0
    assert "t0=" in capsys.readouterr().out
    assert cli.main(["bounds", "--K", "2", "--T", "100"]) == 2


def test_cli_build_pseudo_round_trips(tmp_path):
    from corrbandit.core import PseudoRewardTable
    from corrbandit.environments import ternary_env
    from corrbandit.pseudo import from_joint_exact
    env_file = tmp_path / "env.txt"
    env_file.write_text(ternary_env().to_text())
    out = tmp_path / "table.txt"
    assert cli.main(["build-pseudo", "--environment", "tabular", "--env-file", str(env_file),
                     "--pseudo", "exact", "--output", str(out)]) == 0
    assert PseudoRewardTable.load(out) == from_joint_exact(ternary_env())


def test_cli_ingest(tmp_path, capsys):
    from corrbandit import data
    f = tmp_path / "r.csv"
    data.write_ratings(data.synthetic_corpus(40, 6, seed=0), f)
    assert cli.main(["ingest", "--ratings", str(f), "--top-n", "3", "--out-dir", str(tmp_path / "split")]) == 0
    assert (tmp_path / "split" / "train.csv").exists()
    assert capsys.readouterr().out.startswith("records ")


def test_cli_exit_codes(tmp_path):
    assert cli.main(["run", "--policies", "nope"]) == 2
    assert cli.main(["run", "--environment", "tabular", "--env-file", str(tmp_path / "missing.txt")]) == 3
    assert cli.main(["ingest", "--ratings", str(tmp_path / "missing.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("u,i,9\n")
    assert cli.main(["ingest", "--ratings", str(bad)]) == 3
    assert cli.main(["run", "--environment", "ternary", "--policies", "c-ts-beta", "--horizon", "10",
                     "--trials", "1"]) == 4
