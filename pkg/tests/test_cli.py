import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nakano_lab import cli
from nakano_lab.config import ConfigError, from_dict


@pytest.fixture
def run_cli(tmp_path):
    def _run(command, cfg, *flags):
        cfg_path = tmp_path / "cfg.json"
        out = tmp_path / "report.json"
        cfg_path.write_text(json.dumps(cfg))
        if out.exists():
            out.unlink()
        code = cli.main([command, "--config", str(cfg_path), "--out", str(out), *flags])
        report = json.loads(out.read_text()) if out.exists() else None
        return code, report

    return _run


def statuses(report):
    return [a["status"] for a in report["assertions"]]


class TestCheck:
    def test_ample_positive(self, run_cli):
        code, rep = run_cli("check", {"degrees": [1, 2], "k": 2})
        assert code == 0
        row = rep["results"]["rows"][0]
        assert row["verdict"] == "POSITIVE_DEFINITE"
        assert rep["results"]["total_positivity"]["verdict"] == "POSITIVE_DEFINITE"

    def test_equivariant_values(self, run_cli):
        code, rep = run_cli("check", {"degrees": [1, 1], "k": 1})
        assert code == 0
        np.testing.assert_allclose(rep["results"]["rows"][0]["eigenvalues"], [3, 3], atol=1e-3)
        assert all(u >= 0 for u in rep["results"]["rows"][0]["eigenvalue_uncertainty"])

    def test_flat_semidefinite(self, run_cli):
        code, rep = run_cli("check", {"degrees": [0, 0], "k": 0})
        assert code == 0
        assert rep["results"]["rows"][0]["verdict"] == "SEMIDEFINITE_WITHIN_MARGIN"

    def test_not_nef_reports_only(self, run_cli):
        code, rep = run_cli("check", {"degrees": [-1, 2], "k": 1})
        assert code == 0
        assert rep["results"]["total_positivity"]["verdict"] == "INDEFINITE"

    def test_assertion_failure(self, run_cli):
        code, rep = run_cli("check", {"degrees": [1, 1], "k": 1, "tolerances": {"min_lambda": 10.0}})
        assert code == 5
        assert "fail" in statuses(rep)

    def test_product_base(self, run_cli):
        code, rep = run_cli("check", {"base": "P1xP1", "degrees": [[1, 1], [1, 1]], "k": 1})
        assert code == 0
        assert rep["results"]["rows"][0]["griffiths_min"] >= rep["results"]["rows"][0]["lambda_min"] - 1e-9


def test_scan_k(run_cli, tmp_path):
    code, rep = run_cli("scan-k", {"degrees": [1, 1], "k_range": [0, 3]}, "--csv", str(tmp_path / "t.csv"))
    assert code == 0
    lams = [r["lambda_min"] for r in rep["results"]["rows"]]
    np.testing.assert_allclose(lams, [2, 3, 4, 5], atol=1e-3)
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["k"]) for r in rows] == [0, 1, 2, 3]
    assert set(rows[0]) == {"k", "lambda_min", "uncertainty"}


def test_scan_k_flat(run_cli):
    code, rep = run_cli("scan-k", {"degrees": [0, 0], "k_range": [0, 2]})
    assert code == 0
    assert rep["results"]["slope"] == pytest.approx(0.0, abs=1e-12)
    assert all(abs(r["lambda_min"]) < 1e-12 for r in rep["results"]["rows"])


def test_scan_k_insufficient_resolution(run_cli):
    # absurd slope floor right at the measured slope forces an undecidable margin
    code, rep = run_cli("scan-k", {"degrees": [1, 1], "k_range": [0, 2], "tolerances": {"min_slope": 1.0}})
    assert code == 4
    assert "insufficient-resolution" in statuses(rep)


class TestNefLimit:
    def test_boundary(self, run_cli):
        code, rep = run_cli("nef-limit", {"degrees": [0, 1], "k": 1})
        assert code == 0
        row = rep["results"]["rows"][0]
        assert -1e-4 <= row["lambda_min"] < row["comparison_lambda_min"]
        assert row["comparison_lambda_min"] == pytest.approx(3.0, abs=1e-3)

    def test_flat(self, run_cli):
        code, rep = run_cli("nef-limit", {"degrees": [0, 0], "k": 2})
        assert code == 0
        assert abs(rep["results"]["rows"][0]["lambda_min"]) <= 1e-4

    def test_not_nef_control(self, run_cli):
        code, rep = run_cli("nef-limit", {"degrees": [-1, 2], "k": 1})
        assert code == 0
        assert rep["assertions"] == []


class TestDecompose:
    def test_equal_weights(self, run_cli):
        code, rep = run_cli("decompose", {"degrees": [1, 1], "k": 1})
        assert code == 0
        row = rep["results"]["rows"][0]
        assert row["residual_norm_ratio"] <= 1e-6 and row["harmonicity_sup"] <= 1e-8

    def test_unequal(self, run_cli):
        code, rep = run_cli("decompose", {"degrees": [1, 2], "k": 1})
        assert code == 0
        assert rep["results"]["rows"][0]["residual_norm_ratio"] <= 1e-3

    def test_perturbed_no_assert(self, run_cli):
        code, rep = run_cli("decompose", {"degrees": [1, 2], "k": 1, "perturbations": ["Re(z)", None]})
        assert code == 0
        assert rep["assertions"] == []
        assert rep["results"]["rows"][0]["asserted"] is False
        assert any("no-assert" in n for n in rep["notes"])

    def test_harmonicity_command(self, run_cli):
        code, rep = run_cli("harmonicity", {"degrees": [1, 1], "k": 1})
        assert code == 0
        assert rep["results"]["rows"][0]["harmonicity_sup"] <= 1e-8


class TestCohomology:
    def test_ample(self, run_cli):
        code, rep = run_cli("cohomology", {"degrees": [1, 2], "lambda_bound": 4})
        assert code == 0
        assert all(r["h11"] == 0 for r in rep["results"]["rows"] if r["height"] >= 1)
        assert rep["results"]["control"]["h11"] == 1

    def test_det_power(self, run_cli):
        code, rep = run_cli("cohomology", {"degrees": [3, 3], "lambda_bound": 1})
        row = next(r for r in rep["results"]["rows"] if r["lambda"] == [1, 1])
        assert row["degrees"] == [18] and row["h11"] == 0


def test_oracle_compare(run_cli):
    code, rep = run_cli("oracle-compare", {"degrees": [1, 1], "k_range": [0, 3]})
    assert code == 0
    assert all(s == "pass" for s in statuses(rep))


class TestErrors:
    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["check", "--config", str(p)]) == 2

    def test_command_mismatch(self, run_cli):
        code, rep = run_cli("check", {"command": "scan-k", "degrees": [1, 1]})
        assert code == 2 and rep is None

    @pytest.mark.parametrize(
        "cfg",
        [
            {"degrees": [[1, 2], [1]]},
            {"base": "P2"},
            {"k": -1},
            {"perturbations": ["sin(z)", None]},
            {"stencil": {"step": 5.0}},
            {"tolerances": {"bogus": 1}},
            {"xi": [0.1, 0.2, 0.3]},
        ],
    )
    def test_config_errors(self, run_cli, cfg):
        code, _ = run_cli("check", cfg)
        assert code == 2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure(self, run_cli):
        # e^phi overflows, the Gram matrix degenerates and cannot be inverted
        code, rep = run_cli("check", {"degrees": [1, 2], "k": 1, "perturbations": ["1e6*|z|^2", None], "xi": 1.0})
        assert code == 3
        assert rep["status"] == "numerical-failure"
        assert "DomainError" in rep["notes"][0]

    def test_harmonicity_rank_checked(self, run_cli):
        code, _ = run_cli("harmonicity", {"degrees": [1, 1, 1], "k": 1})
        assert code == 2


def test_flags_override(run_cli):
    code, rep = run_cli("check", {"degrees": [1, 1], "k": 0}, "--quadrature", "32", "--angular", "12",
                        "--step", "0.002", "--tol", "1e-5")
    assert code == 0
    r = rep["config"]["resolution"]
    assert (r["radial_order"], r["angular_order"], r["step"]) == (32, 12, 0.002)
    assert rep["config"]["tolerances"]["margin"] == 1e-5


def test_deterministic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"degrees": [1, 2], "k": 1, "perturbations": ["0.2*Im(z^2)", None],
                               "xi": [0.1, 0.05]}))
    outs = []
    for n in range(2):
        out = tmp_path / f"r{n}.json"
        assert cli.main(["decompose", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_timings_opt_in(run_cli):
    _, plain = run_cli("cohomology", {"degrees": [1, 1], "lambda_bound": 1})
    _, timed = run_cli("cohomology", {"degrees": [1, 1], "lambda_bound": 1}, "--timings")
    assert "timings" not in plain and "wall_seconds" in timed["timings"]


def test_from_dict_xi_forms():
    assert from_dict({"command": "check", "xi": 0.5}).base_point == (0.5,)
    assert from_dict({"command": "check", "xi": [0.5, 0.25]}).base_point == (0.5 + 0.25j,)
    assert from_dict({"command": "check", "xi": ["0.1-0.2j"]}).base_point == (0.1 - 0.2j,)
    cfg = from_dict({"command": "check", "base": "P1xP1", "degrees": [[1, 1], [1, 2]], "xi": [[0, 1], 0.5]})
    assert cfg.base_point == (1j, 0.5)
    with pytest.raises(ConfigError):
        from_dict({"command": "nope"})


def test_report_every_number_has_uncertainty(run_cli):
    _, rep = run_cli("check", {"degrees": [1, 2], "k": 1})
    row = rep["results"]["rows"][0]
    for key in ("eigenvalues", "lambda_min", "griffiths_min"):
        unc_key = "eigenvalue_uncertainty" if key == "eigenvalues" else f"{key}_uncertainty"
        assert unc_key in row


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_pass(path, tmp_path):
    command = json.loads(path.read_text())["command"]
    assert cli.main([command, "--config", str(path), "--out", str(tmp_path / "r.json")]) == 0
