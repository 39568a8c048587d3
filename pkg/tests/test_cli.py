"""Tests for the pimsim command-line interface."""

import json

import pytest
from click.testing import CliRunner

from pim_olap_sim.cli.app import cli
from pim_olap_sim.cli.handlers import EXIT_PARTIAL, EXIT_VALIDATION


def error_document(result):
    """The error JSON is the last stderr line."""
    return json.loads(result.stderr.strip().splitlines()[-1])


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def store(tmp_path_factory):
    """A small generated SSB store shared by the module."""
    out = tmp_path_factory.mktemp("cli_store")
    result = CliRunner().invoke(cli, ["--log-level", "WARNING", "gen", "--sf", "0.002", "--seed", "7", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out / "ssb.pimdb"


class TestGen:
    def test_manifest_printed(self, runner, tmp_path):
        result = runner.invoke(cli, ["gen", "--sf", "0.002", "--out", str(tmp_path), "--name", "tiny"])

        manifest = json.loads(result.stdout)
        assert result.exit_code == 0
        assert manifest["name"] == "tiny"
        assert manifest["scale_factor"] == 0.002
        assert manifest["seed"] == 7
        assert (tmp_path / "tiny.pimdb").is_file()
        assert (tmp_path / "tiny.manifest.json").is_file()

    def test_generation_is_byte_identical(self, runner, tmp_path, store):
        runner.invoke(cli, ["gen", "--sf", "0.002", "--seed", "7", "--out", str(tmp_path)])

        assert (tmp_path / "ssb.pimdb").read_bytes() == store.read_bytes()

    def test_zero_scale_factor(self, runner, tmp_path):
        result = runner.invoke(cli, ["gen", "--sf", "0", "--out", str(tmp_path)])

        assert result.exit_code == EXIT_VALIDATION
        assert error_document(result)["error"] == "invalid_input"
        assert result.stdout == ""


class TestDenorm:
    def test_fold_set(self, runner, store):
        result = runner.invoke(cli, ["denorm", "--db", str(store), "--level", "D2"])

        document = json.loads(result.stdout)
        assert result.exit_code == 0
        assert document["level"] == "D2"
        assert len(document["folded_columns"]) == 13
        assert document["memory_overhead"] > 0

    def test_widetable_saved(self, runner, store, tmp_path):
        result = runner.invoke(cli, ["denorm", "--db", str(store), "--level", "D3", "--out", str(tmp_path)])

        assert result.exit_code == 0
        assert json.loads(result.stdout)["store"].endswith("ssb_d3.pimdb")
        assert (tmp_path / "ssb_d3.manifest.json").is_file()

    def test_unknown_level(self, runner, store):
        result = runner.invoke(cli, ["denorm", "--db", str(store), "--level", "D9"])

        assert result.exit_code == EXIT_VALIDATION

    def test_wrong_suffix(self, runner, tmp_path):
        path = tmp_path / "data.bin"
        path.write_bytes(b"")

        result = runner.invoke(cli, ["denorm", "--db", str(path)])

        assert result.exit_code == EXIT_VALIDATION
        assert "pimdb" in error_document(result)["message"]


class TestRun:
    def test_query(self, runner, store):
        result = runner.invoke(cli, ["run", "--db", str(store), "--query", "q1.1", "--level", "D2", "--pim", "SALP-4"])

        document = json.loads(result.stdout)
        assert result.exit_code == 0
        assert document["level"] == "SALP-4"
        assert document["result"]["columns"] == ["revenue"]
        assert document["metrics"]["pim_passes"] == 3
        assert document["metrics"]["modeled_speedup"] > 0

    def test_result_independent_of_level(self, runner, store):
        outputs = [
            json.loads(runner.invoke(cli, ["run", "--db", str(store), "--query", "q2.2", *args]).stdout)["result"]
            for args in (["--pim", "Channel"], ["--pim", "Subarray", "--salp", "8", "--placement", "pessimistic"])
        ]
        assert outputs[0] == outputs[1]

    def test_unknown_query(self, runner, store):
        result = runner.invoke(cli, ["run", "--db", str(store), "--query", "q9.9"])

        assert result.exit_code == EXIT_VALIDATION
        assert error_document(result)["details"] == {"query": "q9.9"}

    def test_invalid_salp(self, runner, store):
        result = runner.invoke(cli, ["run", "--db", str(store), "--query", "q1.1", "--pim", "Subarray", "--salp", "9"])

        assert result.exit_code == EXIT_VALIDATION

    def test_missing_store(self, runner, tmp_path):
        result = runner.invoke(cli, ["run", "--db", str(tmp_path / "absent.pimdb"), "--query", "q1.1"])

        assert result.exit_code == EXIT_VALIDATION
        assert error_document(result)["error"] == "store_format"


class TestSweepAndReport:
    ARGS = ["--queries", "q1.1,q3.2", "--levels", "D1,D2", "--pim", "BankAB,SALP-2"]

    def test_sweep_is_deterministic(self, runner, store, tmp_path):
        first = runner.invoke(cli, ["sweep", "--db", str(store), *self.ARGS, "--out", str(tmp_path / "a")])
        second = runner.invoke(cli, ["sweep", "--db", str(store), *self.ARGS, "--out", str(tmp_path / "b")])

        assert first.exit_code == second.exit_code == 0
        assert json.loads(first.stdout)["failures"] == 0
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()

    def test_report(self, runner, store, tmp_path):
        runner.invoke(cli, ["sweep", "--db", str(store), *self.ARGS, "--out", str(tmp_path / "grid")])

        result = runner.invoke(cli, ["report", "--matrix", str(tmp_path / "grid" / "sweep.csv"), "--out", str(tmp_path / "report")])

        assert result.exit_code == 0
        assert len(json.loads(result.stdout)["tables"]) == 4
        assert (tmp_path / "report" / "operator_breakdown.csv").is_file()

    def test_report_missing_matrix(self, runner, tmp_path):
        result = runner.invoke(cli, ["report", "--matrix", str(tmp_path / "none.csv"), "--out", str(tmp_path)])

        assert result.exit_code == EXIT_VALIDATION

    def test_failed_points_give_partial_exit(self, runner, store, tmp_path):
        """A corrupt store fails every point but the sweep still writes its matrix."""
        broken = tmp_path / "ssb.pimdb"
        broken.write_bytes(b"PIMOLAP\0" + b"\x00" * 8)

        result = runner.invoke(cli, ["sweep", "--db", str(broken), *self.ARGS, "--out", str(tmp_path / "out")])

        assert result.exit_code == EXIT_PARTIAL
        assert json.loads(result.stdout)["failures"] > 0
        assert (tmp_path / "out" / "sweep.csv").is_file()


class TestMicrobench:
    def test_table(self, runner, tmp_path):
        result = runner.invoke(cli, ["microbench", "--include-sb", "--out", str(tmp_path)])

        assert result.exit_code == 0
        assert "BankSB" in result.stdout
        assert "SALP-8" in result.stdout
        assert (tmp_path / "microbench.csv").is_file()

    def test_with_selectivity(self, runner, tmp_path):
        result = runner.invoke(cli, ["microbench", "--selectivity", "--out", str(tmp_path)])

        assert result.exit_code == 0
        assert (tmp_path / "selectivity_sweep.csv").is_file()
