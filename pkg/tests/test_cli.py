import json
import math
import subprocess
import sys

import numpy as np
import pytest

from psdbounds import cli
from psdbounds.cones import coordinate_family, write_conefam, witness_matrix
from psdbounds.linalg import write_symmat


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def schema():
    import importlib.resources as resources

    with resources.files("psdbounds").joinpath("schema/output.schema.json").open() as fh:
        return json.load(fh)


def check_schema(doc, schema):
    import jsonschema

    jsonschema.validate(doc, schema)


class TestBoundsEval:
    def test_delta_star(self, capsys, schema):
        code, out, _ = run_cli(
            ["bounds", "eval", "--formula", "delta_star", "--params", "eps=0"], capsys
        )
        assert code == 0
        doc = last_json(out)
        check_schema(doc, schema)
        assert abs(doc["value"] - 0.137) <= 0.001

    def test_named_scalar_formulas(self, capsys):
        for formula, params, expected in (
            ("zeta", "delta=0.2", 4.0),
            ("binary_entropy", "p=0.5", math.log(2)),
            ("cubic_root", "p=-3,q=2", 2.0),
            ("maximal", "v=1,c=1,N=3", max(math.sqrt(2 * math.log(3)), 2 * math.log(3))),
        ):
            code, out, _ = run_cli(
                ["bounds", "eval", "--formula", formula, "--params", params], capsys
            )
            assert code == 0
            assert abs(last_json(out)["value"] - expected) < 1e-9

    def test_domain_error_exit_code_and_reason(self, capsys):
        code, _, err = run_cli(
            ["bounds", "eval", "--formula", "zeta", "--params", "delta=0"], capsys
        )
        assert code == 2
        reason = json.loads(err.strip())
        assert reason["error"]["kind"] == "usage"

    def test_unknown_formula(self, capsys):
        code, _, err = run_cli(["bounds", "eval", "--formula", "nope"], capsys)
        assert code == 2

    def test_config_file_with_params_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("delta=0.5\n# comment line\n")
        code, out, _ = run_cli(
            ["bounds", "eval", "--formula", "zeta", "--config", str(cfg)], capsys
        )
        assert code == 0 and last_json(out)["value"] == 1.0
        code, out, _ = run_cli(
            [
                "bounds",
                "eval",
                "--formula",
                "zeta",
                "--config",
                str(cfg),
                "--params",
                "delta=0.2",
            ],
            capsys,
        )
        assert code == 0 and last_json(out)["value"] == 4.0


class TestBoundsCurve:
    def test_curve_csv_layout(self, tmp_path, capsys):
        out = tmp_path / "psi.csv"
        code, _, _ = run_cli(
            ["bounds", "curve", "--formula", "psi", "--grid", "0.1:0.9:9", "--out", str(out)],
            capsys,
        )
        assert code == 0
        lines = out.read_text().splitlines()
        header = [ln for ln in lines if ln.startswith("#")]
        data = [ln for ln in lines if not ln.startswith("#")]
        assert any(ln.startswith("# rerun=") for ln in header)
        assert data[0] == "abscissa,value,flag"
        assert len(data) == 10
        values = [float(row.split(",")[1]) for row in data[1:]]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_inf_flag_in_csv(self, tmp_path, capsys):
        out = tmp_path / "zeta.csv"
        run_cli(
            ["bounds", "curve", "--formula", "zeta", "--grid", "0:1:3", "--out", str(out)],
            capsys,
        )
        rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        assert rows[1].endswith(",inf") and rows[1].split(",")[1] == "inf"


class TestWidthsEstimate:
    def test_base_psd_scalar_mean_near_zero(self, capsys, schema):
        code, out, _ = run_cli(
            [
                "widths", "estimate", "--kind", "base-psd", "--n", "1",
                "--trials", "1000", "--seed", "7",
            ],
            capsys,
        )
        assert code == 0
        doc = last_json(out)
        check_schema(doc, schema)
        est = doc["estimate"]
        assert abs(est["mean"]) <= 3 * est["std_error"]

    def test_csv_reproduces_bit_exactly(self, tmp_path, capsys):
        out = tmp_path / "w.csv"
        argv = [
            "widths", "estimate", "--kind", "base-psd", "--n", "5",
            "--trials", "64", "--seed", "11", "--format", "csv", "--out", str(out),
        ]
        assert cli.main(argv) == 0
        capsys.readouterr()
        first = out.read_bytes()
        rerun_line = next(
            ln for ln in first.decode().splitlines() if ln.startswith("# rerun=")
        )
        import shlex

        rerun_argv = shlex.split(rerun_line.removeprefix("# rerun="))[1:]
        assert cli.main(rerun_argv) == 0
        capsys.readouterr()
        assert out.read_bytes() == first

    def test_sparse_dual_and_family_kinds_agree(self, tmp_path, capsys):
        fam_path = tmp_path / "coord.conefam"
        write_conefam(coordinate_family(6, 2), fam_path)
        code, out, _ = run_cli(
            [
                "widths", "estimate", "--kind", "sparse-dual", "--n", "6", "--k", "2",
                "--trials", "50", "--seed", "3",
            ],
            capsys,
        )
        sparse = last_json(out)["estimate"]
        code, out, _ = run_cli(
            [
                "widths", "estimate", "--kind", "general-dual", "--family", str(fam_path),
                "--trials", "50", "--seed", "3",
            ],
            capsys,
        )
        general = last_json(out)["estimate"]
        assert general["N"] == 15
        assert abs(sparse["mean"] - general["mean"]) < 1e-9

    def test_oracle_kind(self, capsys):
        code, out, _ = run_cli(
            [
                "widths", "estimate", "--kind", "oracle:l2-ball", "--n", "9",
                "--trials", "20000", "--seed", "5",
            ],
            capsys,
        )
        assert code == 0
        assert 2.85 <= last_json(out)["estimate"]["mean"] <= 2.98

    def test_missing_k_is_usage_error(self, capsys):
        code, _, err = run_cli(
            ["widths", "estimate", "--kind", "sparse-dual", "--n", "6", "--trials", "10"],
            capsys,
        )
        assert code == 2


class TestConesCommands:
    def test_member_roundtrip_through_files(self, tmp_path, capsys, schema):
        w_path = tmp_path / "w.symmat"
        write_symmat(witness_matrix(6, 3), w_path)
        code, out, _ = run_cli(
            ["cones", "member", "--matrix", str(w_path), "--sparse-k", "3"], capsys
        )
        doc = last_json(out)
        check_schema(doc, schema)
        assert code == 0 and doc["member"] is True and doc["certain"] is True
        code, out, _ = run_cli(
            ["cones", "member", "--matrix", str(w_path), "--sparse-k", "4"], capsys
        )
        assert last_json(out)["member"] is False

    def test_member_with_family_file(self, tmp_path, capsys):
        w_path = tmp_path / "w.symmat"
        write_symmat(witness_matrix(6, 3), w_path)
        fam_path = tmp_path / "fam.conefam"
        write_conefam(coordinate_family(6, 3), fam_path)
        code, out, _ = run_cli(
            ["cones", "member", "--matrix", str(w_path), "--family", str(fam_path)], capsys
        )
        assert code == 0 and last_json(out)["member"] is True

    def test_member_requires_exactly_one_mode(self, tmp_path, capsys):
        w_path = tmp_path / "w.symmat"
        write_symmat(witness_matrix(6, 3), w_path)
        code, _, _ = run_cli(["cones", "member", "--matrix", str(w_path)], capsys)
        assert code == 2

    def test_cap_exceeded_suggests_refutation(self, tmp_path, capsys):
        w_path = tmp_path / "big.symmat"
        write_symmat(witness_matrix(40, 10), w_path)
        code, _, err = run_cli(
            ["cones", "member", "--matrix", str(w_path), "--sparse-k", "11"], capsys
        )
        assert code == 2
        assert "refut" in json.loads(err.strip())["error"]["message"]
        code, out, _ = run_cli(
            [
                "cones", "member", "--matrix", str(w_path), "--sparse-k", "11",
                "--refute", "--samples", "20", "--seed", "1",
            ],
            capsys,
        )
        doc = last_json(out)
        assert code == 0 and doc["member"] is False and doc["certain"] is True

    def test_witness_emits_matrix_and_separation(self, tmp_path, capsys):
        m_path = tmp_path / "w10.symmat"
        code, out, _ = run_cli(
            ["cones", "witness", "--n", "10", "--k", "2", "--matrix-out", str(m_path)],
            capsys,
        )
        doc = last_json(out)
        assert code == 0 and doc["value"] == 8.0
        from psdbounds.linalg import read_symmat

        W = read_symmat(m_path)
        assert abs(W.trace() - 1.0) < 1e-12


class TestHypercubeVerify:
    def test_moments_reports_exact_values(self, capsys, schema):
        code, out, _ = run_cli(["hypercube", "verify", "--lemma", "moments", "--n", "6"], capsys)
        doc = last_json(out)
        check_schema(doc, schema)
        assert code == 0
        assert doc["mean"] == 0.0 and doc["second_moment"] == 60.0

    @pytest.mark.parametrize("lemma", ["harmonic", "hypercontractivity"])
    def test_property_lemmas_pass(self, lemma, capsys):
        code, out, _ = run_cli(
            [
                "hypercube", "verify", "--lemma", lemma, "--n", "6",
                "--trials", "50", "--seed", "3",
            ],
            capsys,
        )
        assert code == 0
        assert last_json(out)["report"]["failures"] == []

    def test_variance_lemma_passes(self, capsys):
        code, out, _ = run_cli(
            [
                "hypercube", "verify", "--lemma", "variance", "--n", "6",
                "--trials", "2000", "--seed", "3",
            ],
            capsys,
        )
        assert code == 0

    def test_maximal_lemma_passes(self, capsys):
        code, out, _ = run_cli(
            ["hypercube", "verify", "--lemma", "maximal", "--trials", "4000", "--seed", "5"],
            capsys,
        )
        assert code == 0

    def test_failures_exit_one_with_counterexamples(self, capsys, monkeypatch):
        bundle = {"trial": 3, "seed": 9, "lhs": 2.0, "rhs": 1.0}
        monkeypatch.setattr(cli, "_verify_harmonic", lambda *a: (10, [bundle]))
        code, out, _ = run_cli(["hypercube", "verify", "--lemma", "harmonic"], capsys)
        assert code == 1
        doc = last_json(out)
        assert doc["report"]["failures"] == [bundle]


class TestFigures:
    def test_sparse_overview_bundle(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["figures", "--name", "sparse-overview", "--out", str(tmp_path)], capsys
        )
        assert code == 0
        files = last_json(out)["files"]
        assert sorted(f.rsplit("/", 1)[-1] for f in files) == ["psi.csv", "xi.csv", "zeta.csv"]
        psi_rows = [
            ln for ln in (tmp_path / "psi.csv").read_text().splitlines()
            if not ln.startswith("#") and not ln.startswith("abscissa")
        ]
        xi_rows = [
            ln for ln in (tmp_path / "xi.csv").read_text().splitlines()
            if not ln.startswith("#") and not ln.startswith("abscissa")
        ]
        for row in psi_rows:
            x, value, flag = row.split(",")
            assert flag == "ok" and float(value) > 0.0
        for row in xi_rows:
            x, value, flag = row.split(",")
            if float(x) >= 0.138:
                assert float(value) == 0.0

    def test_delta_star_figure_decreasing_and_bounded(self, tmp_path, capsys):
        run_cli(["figures", "--name", "delta-star", "--out", str(tmp_path)], capsys)
        rows = [
            ln.split(",") for ln in (tmp_path / "delta_star.csv").read_text().splitlines()
            if not ln.startswith("#") and not ln.startswith("abscissa")
        ]
        values = [float(r[1]) for r in rows]
        epsilons = [float(r[0]) for r in rows]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert all(v < 1.0 / (1.0 + e) ** 2 for e, v in zip(epsilons, values))

    def test_entropy_bracket_bundle(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["figures", "--name", "entropy-bracket", "--out", str(tmp_path)], capsys
        )
        files = [f.rsplit("/", 1)[-1] for f in last_json(out)["files"]]
        assert files == [
            "entropy.csv",
            "bracket_eps0.csv",
            "bracket_eps0.2.csv",
            "bracket_eps0.5.csv",
        ]

    def test_xc_lower_nonnegative_with_recorded_ordering(self, tmp_path, capsys):
        run_cli(["figures", "--name", "xc-lower", "--out", str(tmp_path)], capsys)

        def rows(name):
            return [
                (float(ln.split(",")[0]), float(ln.split(",")[1]))
                for ln in (tmp_path / name).read_text().splitlines()
                if not ln.startswith("#") and not ln.startswith("abscissa")
            ]

        thm1 = rows("thm1.csv")
        thm2 = rows("thm2.csv")
        assert all(v >= 0.0 for _, v in thm1 + thm2)
        # at n = 1e6 the second bound is still vacuous, so the first dominates
        # throughout the k <= sqrt(n) region
        for (k1, v1), (_, v2) in zip(thm1, thm2):
            if k1 <= 1000.0:
                assert v1 >= v2


class TestParsing:
    def test_parse_params_coercion(self):
        params = cli.parse_params("a=1,b=2.5,c=true,d=text")
        assert params == {"a": 1, "b": 2.5, "c": True, "d": "text"}

    def test_parse_params_malformed(self):
        with pytest.raises(ValueError):
            cli.parse_params("novalue")

    def test_parse_grid(self):
        assert cli.parse_grid("0:1:3") == [0.0, 0.5, 1.0]
        assert cli.parse_grid("2:2:1") == [2.0]
        with pytest.raises(ValueError):
            cli.parse_grid("0:1")

    def test_unknown_command_is_usage_error(self):
        assert cli.main(["frobnicate"]) == 2


class TestSubprocessEntryPoint:
    def test_console_script_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "psdbounds.cli", "bounds", "eval", "--formula",
             "delta_star", "--params", "eps=0"],
            capture_output=True,
            text=True,
            check=False,
        )
        assert proc.returncode == 0
        assert abs(json.loads(proc.stdout)["value"] - 0.137) <= 0.001
