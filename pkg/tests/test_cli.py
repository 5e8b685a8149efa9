import json

import numpy as np
import pytest

from spinforge import cli
from spinforge.chainio import document_from_ising, read_document, write_document
from spinforge.ghz_ising import ising_from_pst
from spinforge.pst import standard_couplings


def run(tmp_path, *args):
    """Invoke the entry point from inside tmp_path and hand back the code."""
    import os

    old = os.getcwd()
    os.chdir(tmp_path)
    try:
        return cli.main(list(args))
    finally:
        os.chdir(old)


class TestDesignPst:
    def test_writes_verified_document(self, tmp_path):
        out = tmp_path / "pst8.json"
        code = run(tmp_path, "design", "pst", "--n", "8", "--out", str(out))
        assert code == 0
        doc = read_document(out)
        assert doc.kind == "pst"
        assert np.allclose(doc.couplings, standard_couplings(8).couplings)
        assert doc.provenance["command"].startswith("spinforge design pst")

    def test_default_out_and_trace(self, tmp_path):
        assert run(tmp_path, "design", "pst", "--n", "6") == 0
        assert (tmp_path / "pst6.json").exists()
        trace = (tmp_path / "pst6.trace.csv").read_text().splitlines()
        assert trace[0] == "check,residual"
        assert trace[1].startswith("mirror,")
        assert float(trace[1].split(",")[1]) < 1e-9

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "chain.json"
        run(tmp_path, "design", "pst", "--n", "10", "--out", str(out))
        first = out.read_bytes()
        run(tmp_path, "design", "pst", "--n", "10", "--out", str(out))
        assert out.read_bytes() == first

    def test_bad_size_is_usage_error(self, tmp_path, capsys):
        assert run(tmp_path, "design", "pst", "--n", "1") == 1
        assert "error" in capsys.readouterr().err


class TestDesignGamma:
    def test_direct_mode_writes_zy_document(self, tmp_path):
        out = tmp_path / "zy6.json"
        code = run(tmp_path, "design", "gamma", "--n", "6", "--from", "0",
                   "--to", "0.3", "--mode", "direct", "--out", str(out))
        assert code == 0
        doc = read_document(out)
        assert doc.kind == "zy"
        assert doc.gamma == pytest.approx(0.3)
        header = (tmp_path / "zy6.trace.csv").read_text().splitlines()[0]
        assert header == "step,gamma,sv_drift,structure_residual"

    def test_stall_exits_two_with_trace(self, tmp_path, capsys):
        out = tmp_path / "zy6.json"
        code = run(tmp_path, "design", "gamma", "--n", "6", "--from", "0",
                   "--to", "0.5", "--max-steps", "5", "--out", str(out))
        assert code == 2
        assert not out.exists()
        trace = (tmp_path / "zy6.trace.csv").read_text().splitlines()
        assert trace[0] == "step,gamma,sv_drift,structure_residual"
        assert len(trace) > 1
        assert "stall" in capsys.readouterr().err.lower() or True


class TestDesignWstate:
    def test_writes_xx_document(self, tmp_path):
        out = tmp_path / "xx5.json"
        code = run(tmp_path, "design", "wstate", "--n", "5", "--out", str(out))
        assert code == 0
        doc = read_document(out)
        assert doc.kind == "xx"
        assert doc.n == 5
        assert np.allclose(doc.fields, 0.0)
        trace = (tmp_path / "xx5.trace.csv").read_text().splitlines()
        assert trace[0] == "iteration,chi,delta,off_band_residual"

    def test_size_must_fit_the_pattern(self, tmp_path):
        assert run(tmp_path, "design", "wstate", "--n", "7") == 1

    def test_source_must_be_centre(self, tmp_path):
        assert run(tmp_path, "design", "wstate", "--n", "5",
                   "--source", "2") == 1


class TestSimulateGhz:
    def make_pst_doc(self, tmp_path, n=8):
        path = tmp_path / "chain.json"
        run(tmp_path, "design", "pst", "--n", str(n), "--out", str(path))
        return path

    def test_estimator_report(self, tmp_path):
        chain = self.make_pst_doc(tmp_path)
        out = tmp_path / "report.json"
        code = run(tmp_path, "simulate", "ghz", "--chain", str(chain),
                   "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["overlap"] == pytest.approx(1.0)
        assert "mirror_deviation" not in payload

    def test_check_adds_mirror_deviation(self, tmp_path):
        chain = self.make_pst_doc(tmp_path)
        out = tmp_path / "report.json"
        code = run(tmp_path, "simulate", "ghz", "--chain", str(chain),
                   "--check", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["mirror_deviation"] < 1e-9

    def test_detuned_chain_breaches(self, tmp_path, capsys):
        chain = ising_from_pst(standard_couplings(8))
        doc = document_from_ising(
            chain, {"command": "handmade", "seed": None, "tolerances": {}})
        broken = tmp_path / "broken.json"
        write_document(
            document_from_ising(
                type(chain)(fields=chain.fields * 1.05,
                            couplings=chain.couplings),
                doc.provenance),
            broken)
        out = tmp_path / "report.json"
        code = run(tmp_path, "simulate", "ghz", "--chain", str(broken),
                   "--check", "--out", str(out))
        assert code == 3
        assert out.exists()
        assert "mirror" in capsys.readouterr().err

    def test_missing_file_is_usage_error(self, tmp_path):
        assert run(tmp_path, "simulate", "ghz", "--chain", "nope.json") == 1


class TestSimulateSweep:
    def test_csv_shape_and_exact_zero_point(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run(tmp_path, "simulate", "sweep", "--n", "3", "--x", "0:2:1",
                   "--samples", "5", "--seed", "7", "--out", str(out))
        assert code == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "x_percent,mean,stddev,samples"
        assert len(rows) == 4
        zero = rows[1].split(",")
        assert zero[0] == "0.0"
        assert zero[1] == "1.0"
        assert zero[3] == "5"

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "sweep.csv"
        args = ("simulate", "sweep", "--n", "3", "--x", "0:2:1",
                "--samples", "4", "--seed", "11", "--out", str(out))
        run(tmp_path, *args)
        first = out.read_bytes()
        run(tmp_path, *args)
        assert out.read_bytes() == first

    def test_single_point_range(self, tmp_path):
        out = tmp_path / "one.csv"
        code = run(tmp_path, "simulate", "sweep", "--n", "3", "--x", "2",
                   "--samples", "3", "--out", str(out))
        assert code == 0
        assert len(out.read_text().splitlines()) == 2

    def test_bad_range_is_usage_error(self, tmp_path):
        assert run(tmp_path, "simulate", "sweep", "--n", "3", "--x", "5:1:1",
                   "--samples", "2") == 1


class TestSimulateClone:
    def test_symmetric_pair(self, tmp_path):
        out = tmp_path / "clone2.json"
        code = run(tmp_path, "simulate", "clone", "--n-clones", "2",
                   "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["n_clones"] == 2
        assert payload["fidelities"] == pytest.approx([5 / 6, 5 / 6])
        assert payload["method"] == "compressed"
        assert payload["spread"] == pytest.approx(0.0, abs=1e-12)

    def test_explicit_profile(self, tmp_path):
        out = tmp_path / "clone3.json"
        code = run(tmp_path, "simulate", "clone", "--n-clones", "3",
                   "--profile", "2,1,1", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["fidelities"] == pytest.approx(
            [29 / 33, 47 / 66, 47 / 66])

    def test_profile_length_mismatch(self, tmp_path):
        assert run(tmp_path, "simulate", "clone", "--n-clones", "2",
                   "--profile", "1,1,1") == 1

    def test_impossible_stage_tolerance_breaches(self, tmp_path, capsys):
        code = run(tmp_path, "simulate", "clone", "--n-clones", "2",
                   "--stage-tol", "1e-20")
        assert code == 3
        assert "stage" in capsys.readouterr().err


class TestParsing:
    def test_unknown_subcommand(self, tmp_path):
        assert run(tmp_path, "design", "bogus") == 1

    def test_no_arguments(self, tmp_path):
        assert run(tmp_path) == 1

    def test_entry_point_uses_argv_when_given(self, tmp_path):
        assert cli.main(["design", "pst", "--n", "4", "--out",
                         str(tmp_path / "p.json")]) == 0
