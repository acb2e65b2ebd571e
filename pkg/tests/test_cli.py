import json

import numpy as np
import pytest
import yaml

from orbitbayes import acceptance, cli
from orbitbayes import config as cfgmod
from orbitbayes.batch import read_csv
from orbitbayes.errors import ConfigError


def write_config(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


# configuration

def test_missing_seed_exit_code_names_field(tmp_path, capsys):
    assert cli.main(["sample", "--out", str(tmp_path)]) == cli.EXIT_INVALID
    diag = stderr_json(capsys)
    assert diag["error"] == "ConfigError" and "seed" in diag["message"]


def test_missing_seed_in_config_file(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", {"model": {"kind": "vspherical", "n": 3}})
    assert cli.main(["density", "--config", cfg]) == cli.EXIT_INVALID
    assert "seed" in stderr_json(capsys)["message"]


@pytest.mark.parametrize("data", [
    {"seed": 1, "unknown": 3},
    {"seed": 1, "model": {"kind": "torus"}},
    {"seed": 1, "sampling": {"count": 0}},
    {"seed": -4},
    {"seed": 1, "quadrature": {"rtol": 0.5}},
    {"seed": 1, "model": {"kind": "pca", "n": 4, "k": 2, "Lambda0": [1.0, 1.0]}},
])
def test_invalid_config_exit_2(tmp_path, data):
    cfg = write_config(tmp_path / "c.yaml", data)
    assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_INVALID


def test_unreadable_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("seed: [1, 2\n")
    assert cli.main(["sample", "--config", str(p)]) == cli.EXIT_INVALID


def test_scientific_notation_without_dot(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {"seed": 1})
    p = tmp_path / "c2.yaml"
    p.write_text(open(cfg).read() + "quadrature: {rtol: 1e-9}\n")
    assert cfgmod.load(str(p)).quadrature.rtol == 1e-9


def test_flags_override_file_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cfgmod.OUT_ENV, str(tmp_path / "env"))
    cfg = write_config(tmp_path / "c.yaml", {"seed": 5, "out": str(tmp_path / "file")})
    assert cfgmod.load(cfg).out_dir() == tmp_path / "file"
    assert cfgmod.load(cfg, {"out": str(tmp_path / "flag")}).out_dir() == tmp_path / "flag"
    assert cfgmod.load(None, {"seed": 5}).out_dir() == tmp_path / "env"
    assert cfgmod.load(cfg, {"seed": 9}).seed == 9
    assert cfgmod.load(cfg, {"tolerance": 1e-6}).quadrature.rtol == 1e-6


def test_hash_ignores_output_location():
    a = cfgmod.load(None, {"seed": 1, "out": "x", "threads": 1})
    b = cfgmod.load(None, {"seed": 1, "out": "y", "threads": 4})
    c = cfgmod.load(None, {"seed": 2})
    assert a.hash() == b.hash() != c.hash()


def test_from_dict_rejects_missing_seed():
    with pytest.raises(ConfigError, match="seed"):
        cfgmod.from_dict({})


# subcommands

def test_null_robustness_default_config(tmp_path):
    assert cli.main(["null-robustness", "--seed", "3", "--out", str(tmp_path)]) == cli.EXIT_OK
    rep = json.loads((tmp_path / "robustness.json").read_text())
    assert 0 < rep["pvalue"] <= 1
    assert rep["meta"]["seed"] == 3 and len(rep["meta"]["config_hash"]) == 64
    assert (tmp_path / "robustness.csv").read_text().startswith("# ")


def test_sample_is_reproducible_and_tagged(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {"seed": 11, "sampling": {"count": 200},
                                             "model": {"kind": "vspherical", "n": 3, "v": "lq",
                                                       "q": 1.5}})
    for out in ("a", "b"):
        assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / out)]) == 0
    for name in ("samples.csv", "samples.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header, draws = read_csv(tmp_path / "a" / "samples.csv")
    assert draws.shape == (200, 3)
    assert header["seed"] == 11 and header["config_hash"] == cfgmod.load(cfg).hash()


def test_density_table(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {"seed": 2, "density": {"points": 5}})
    assert cli.main(["density", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "density.csv").read_text().splitlines()
    assert json.loads(lines[0][2:])["seed"] == 2
    assert lines[1] == "x_1,x_2,density"
    assert len(lines) == 2 + 24  # 5 x 5 grid without the location itself


def test_marginal_equivalence_vspherical(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {"seed": 4, "equivalence": {"grid_points": 5,
                                                                        "multiplier": 1.0}})
    assert cli.main(["marginal-equivalence", "--config", cfg, "--out", str(tmp_path),
                     "--threads", "2"]) == 0
    rep = json.loads((tmp_path / "equivalence.json").read_text())
    assert rep["spread_1"] < 1e-4 and rep["spread_2"] < 1e-4
    assert rep["meta"]["seed"] == 4


def test_non_integrable_prior_is_numerical_failure(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", {"seed": 4, "equivalence": {"grid_points": 2,
                                                                        "multiplier": 3.0}})
    code = cli.main(["marginal-equivalence", "--config", cfg, "--out", str(tmp_path)])
    assert code == cli.EXIT_NUMERIC
    assert stderr_json(capsys)["error"] == "IntegrabilityError"


def test_affine_config_with_landmarks(tmp_path):
    fig = tmp_path / "fig.csv"
    fig.write_text("x,y\n0.0,0.0\n1.0,0.1\n0.2,1.0\n1.1,1.3\n0.5,0.4\n")
    cfg = write_config(tmp_path / "c.yaml", {
        "seed": 6, "model": {"kind": "affine-shape", "n": 4, "k": 2},
        "sampling": {"mc_draws": 50_000}, "landmarks": [str(fig)]})
    assert cli.main(["affine-config", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "affine_config.json").read_text())
    assert rep["exact_constant"] == pytest.approx(0.0506605918211689, rel=1e-12)
    assert rep["rel_error"] < 0.05
    assert len(rep["landmarks"]) == 1 and rep["landmarks"][0]["density"] > 0


def test_affine_config_wrong_landmark_count(tmp_path):
    fig = tmp_path / "fig.csv"
    fig.write_text("0,0\n1,0\n0,1\n1,1\n")
    cfg = write_config(tmp_path / "c.yaml", {
        "seed": 6, "model": {"kind": "affine-shape", "n": 4, "k": 2},
        "sampling": {"mc_draws": 10_000}, "landmarks": [str(fig)]})
    assert cli.main(["affine-config", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_INVALID


def test_pca_kernel_table(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", {
        "seed": 8, "model": {"kind": "pca", "n": 5, "k": 2, "Lambda0": [3.0, 1.0]},
        "generators": ["gaussian"], "density": {"points": 8}})
    assert cli.main(["pca-kernel", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "pca_kernel.csv").read_text().splitlines()
    assert lines[1].startswith("theta,kernel,log_kernel")
    assert len(lines) == 2 + 8


def test_selftest_failure_exit_code(tmp_path, monkeypatch):
    failed = acceptance.CriterionResult(1, "stub", False, {}, 5.0, 0.0)
    monkeypatch.setattr(acceptance, "run_suite", lambda seed, numbers=None: [failed])
    assert cli.main(["selftest", "--seed", "1", "--out", str(tmp_path)]) == cli.EXIT_STATISTIC
    assert json.loads((tmp_path / "selftest.json").read_text())["passed"] is False


def test_selftest_subset(tmp_path):
    assert cli.main(["selftest", "--seed", "1", "--out", str(tmp_path), "--only", "1", "8"]) == 0
    rep = json.loads((tmp_path / "selftest.json").read_text())
    assert [c["number"] for c in rep["criteria"]] == [1, 8]


def test_module_entry_point_parser():
    parser = cli.build_parser()
    args = parser.parse_args(["selftest", "--seed", "7", "--threads", "2", "--tolerance", "1e-9"])
    assert args.command == "selftest" and args.seed == 7 and args.tolerance == 1e-9
    with pytest.raises(SystemExit):
        parser.parse_args(["nonsense"])


def test_landmark_paths_resolve_against_config(tmp_path):
    (tmp_path / "figs").mkdir()
    cfg = write_config(tmp_path / "c.yaml", {"seed": 1, "landmarks": ["figs/a.csv"]})
    assert cfgmod.load(cfg).landmarks == [str(tmp_path / "figs" / "a.csv")]
