"""Command line driver: config handling, reports, exit codes, sweeps."""

from __future__ import annotations

import csv
import json
import pathlib
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from conftest import fixture_path, load_integrals

from qsubspace.cli import EXIT_CODES, main
from qsubspace.fock import exact_eigenpairs

H2 = str(fixture_path("h2_sto3g"))

SCHEMA = json.loads(
    (
        pathlib.Path(__file__).resolve().parent.parent
        / "src"
        / "qsubspace"
        / "schemas"
        / "result-v1.json"
    ).read_text()
)
VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def run_cli(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    report = None
    path = out / "result.json"
    if path.exists():
        report = json.loads(path.read_text())
    return code, report, out


def error_payload(capsys):
    return json.loads(capsys.readouterr().out)["error"]


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestReports:
    def test_fci_matches_committed_golden_bit_for_bit(self, tmp_path):
        golden = json.loads(
            (pathlib.Path(__file__).resolve().parent / "golden" / "fci_h2_sto3g.json").read_text()
        )
        code, report, _ = run_cli(tmp_path, "fci", "--input", H2)
        assert code == 0
        assert report["result"]["eigenvalues"] == golden["eigenvalues"]

    def test_report_validates_against_shipped_schema(self, tmp_path):
        code, report, _ = run_cli(tmp_path, "fci", "--input", H2)
        assert code == 0
        VALIDATOR.validate(report)

    def test_report_embeds_seed_and_generator(self, tmp_path):
        code, report, _ = run_cli(tmp_path, "qse", "--input", H2, "--seed", "9",
                                  "--shots", "2000")
        assert code == 0
        assert report["generator"] == "philox"
        assert report["seed"] == 9
        assert report["shots"]["generator"] == "philox"
        assert report["shots"]["seed"] == 9
        assert report["config"]["shots"]["enabled"] is True
        VALIDATOR.validate(report)

    def test_every_method_report_validates(self, tmp_path):
        invocations = [
            ("davidson", "--k", "2"),
            ("lanczos", "--n", "4"),
            ("power-krylov", "--n", "3"),
            ("chebyshev", "--n", "3"),
            ("gaussian-power", "--n", "3", "--tau", "0.5"),
            ("qse", "--level", "SD"),
            ("qeom", "--tda"),
            ("qfd", "--n", "4", "--dt", "0.4"),
            ("qfd", "--n", "4", "--dt", "0.4", "--shots", "5000"),
            ("qlanczos", "--n", "4", "--dtau", "0.5"),
            ("spectrum", "--n", "6", "--dt", "0.4", "--omega-points", "7"),
            ("fastforward", "--n", "4", "--dt", "0.6", "--time", "100"),
        ]
        for i, argv in enumerate(invocations):
            code, report, _ = run_cli(tmp_path / str(i), *argv, "--input", H2)
            assert code == 0, argv
            VALIDATOR.validate(report)

    def test_identical_runs_are_identical(self, tmp_path):
        args = ("qfd", "--input", H2, "--n", "4", "--dt", "0.4",
                "--shots", "3000", "--seed", "21")
        _, first, _ = run_cli(tmp_path / "a", *args)
        _, second, _ = run_cli(tmp_path / "b", *args)
        first["config"]["out"] = second["config"]["out"] = ""
        assert first == second

    def test_run_reproducible_from_config_echo(self, tmp_path):
        code, report, _ = run_cli(
            tmp_path / "flag", "qfd", "--input", H2, "--n", "5", "--dt", "0.3",
            "--shots", "4000", "--seed", "13",
        )
        assert code == 0
        echo = report["config"]
        lines = ["[run]", f"input = {echo['input']}", "[params]"]
        for key, value in echo["params"].items():
            if value is None:
                continue
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, list):
                value = ",".join(repr(x) for x in value)
            lines.append(f"{key} = {value}")
        shots = echo["shots"]
        lines += ["[shots]", f"enabled = {str(shots['enabled']).lower()}",
                  f"seed = {shots['seed']}", f"grouping = {shots['grouping']}"]
        if shots["shots"] is not None:
            lines.append(f"shots = {shots['shots']}")
        if shots["eps_target"] is not None:
            lines.append(f"eps_target = {shots['eps_target']}")
        ini = tmp_path / "echo.ini"
        ini.write_text("\n".join(lines) + "\n")
        code, replay, _ = run_cli(tmp_path / "ini", echo["method"], "--config", str(ini))
        assert code == 0
        assert replay["result"] == report["result"]
        assert replay["shots"] == report["shots"]

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "qsubspace.cli", "fci", "--input", H2,
             "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "ground energy" in proc.stdout
        assert (tmp_path / "result.json").exists()

    def test_help_documents_exit_codes(self):
        proc = subprocess.run(
            [sys.executable, "-m", "qsubspace.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "exit codes" in proc.stdout
        for code, text in EXIT_CODES.items():
            assert f"{code}  {text}" in proc.stdout


class TestMethodResults:
    def test_subspace_methods_agree_with_fci_on_two_electrons(self, tmp_path):
        exact = float(exact_eigenpairs(load_integrals("h2_sto3g")).eigenvalues[0])
        for i, method in enumerate(("lanczos", "power-krylov", "qse", "qfd", "qlanczos")):
            code, report, _ = run_cli(tmp_path / str(i), method, "--input", H2)
            assert code == 0
            assert abs(report["result"]["ground_energy"] - exact) < 1e-6
            assert abs(report["result"]["error_vs_fci"]) < 1e-6

    def test_qfd_exact_and_huge_shot_runs_agree(self, tmp_path):
        args = ("qfd", "--input", H2, "--n", "4", "--dt", "0.4")
        _, clean, _ = run_cli(tmp_path / "clean", *args)
        _, noisy, _ = run_cli(tmp_path / "noisy", *args, "--shots", "100000000",
                              "--seed", "5")
        diff = abs(clean["result"]["ground_energy"] - noisy["result"]["ground_energy"])
        assert diff < 1e-3

    def test_qeom_gaps_match_fci(self, tmp_path):
        ints = load_integrals("h2_sto3g")
        spectrum = exact_eigenpairs(ints, k=ints.sector_dimension)
        want = np.asarray(spectrum.eigenvalues[1:]) - spectrum.eigenvalues[0]
        code, report, _ = run_cli(tmp_path, "qeom", "--input", H2)
        assert code == 0
        got = np.sort(report["result"]["excitation_energies"])
        np.testing.assert_allclose(got, want, atol=1e-7)

    def test_spectrum_sum_rule_and_csv(self, tmp_path):
        code, report, out = run_cli(
            tmp_path, "spectrum", "--input", H2, "--n", "6", "--dt", "0.4",
            "--omega-points", "9", "--omega-max", "1.5",
        )
        assert code == 0
        rule = report["result"]["sum_rule"]
        assert abs(rule["residual"]) < 1e-8
        rows = read_rows(out / "spectrum.csv")
        sticks = [r for r in rows if r["kind"] == "stick"]
        response = [r for r in rows if r["kind"] == "response"]
        assert len(sticks) == report["result"]["num_sticks"]
        assert len(response) == 9
        total = sum(float(r["re"]) for r in sticks)
        assert abs(total - rule["weight_sum"]) < 1e-12

    def test_spectrum_ham_probe_peaks_at_zero_gap(self, tmp_path):
        code, report, out = run_cli(
            tmp_path, "spectrum", "--input", H2, "--n", "6", "--dt", "0.4",
            "--op", "ham",
        )
        assert code == 0
        assert abs(report["result"]["sum_rule"]["residual"]) < 1e-8

    def test_fastforward_contained_reference_is_faithful(self, tmp_path):
        # the mean-field reference couples two sector eigenstates, so a
        # 4-point grid contains it and t = 100 evolves exactly
        code, report, _ = run_cli(
            tmp_path, "fastforward", "--input", H2, "--n", "4", "--dt", "0.6",
            "--time", "100",
        )
        assert code == 0
        assert report["result"]["projection_weight"] > 1 - 1e-10
        assert report["result"]["fidelity"] >= 1 - 1e-6
        assert report["result"]["low_weight"] is False

    def test_davidson_reports_iterations(self, tmp_path):
        code, report, _ = run_cli(tmp_path, "davidson", "--input", H2, "--k", "2")
        assert code == 0
        assert report["result"]["iterations"] >= 1
        assert len(report["result"]["eigenvalues"]) == 2
        assert max(report["result"]["residual_norms"]) < 1e-8


class TestConfigFile:
    def write(self, tmp_path, text):
        path = tmp_path / "run.ini"
        path.write_text(text)
        return str(path)

    def test_file_supplies_input_and_params(self, tmp_path):
        ini = self.write(
            tmp_path,
            f"[run]\ninput = {H2}\n\n[params]\nn = 5\ndt = 0.4\n",
        )
        code, report, _ = run_cli(tmp_path, "qfd", "--config", ini)
        assert code == 0
        assert report["config"]["params"]["n"] == 5
        assert report["config"]["params"]["dt"] == 0.4

    def test_flags_override_file(self, tmp_path):
        ini = self.write(
            tmp_path,
            f"[run]\ninput = {H2}\n\n[params]\nn = 5\n\n"
            "[shots]\nenabled = true\nshots = 1000\nseed = 4\n",
        )
        code, report, _ = run_cli(
            tmp_path, "qfd", "--config", ini, "--n", "3", "--no-sampling"
        )
        assert code == 0
        assert report["config"]["params"]["n"] == 3
        assert report["config"]["shots"]["enabled"] is False
        assert report["shots"] is None

    def test_unknown_key_rejected(self, tmp_path, capsys):
        ini = self.write(tmp_path, "[params]\nwibble = 3\n")
        assert main(["qfd", "--input", H2, "--config", ini]) == 2
        err = error_payload(capsys)
        assert err["exit_code"] == 2
        assert "wibble" in err["message"]

    def test_unknown_section_rejected(self, tmp_path, capsys):
        ini = self.write(tmp_path, "[wat]\nx = 1\n")
        assert main(["qfd", "--input", H2, "--config", ini]) == 2
        assert "[wat]" in error_payload(capsys)["message"]

    def test_bad_value_rejected(self, tmp_path, capsys):
        ini = self.write(tmp_path, f"[run]\ninput = {H2}\n\n[params]\nn = much\n")
        assert main(["qfd", "--config", ini]) == 2
        assert "much" in error_payload(capsys)["message"]

    def test_config_sweep_section(self, tmp_path):
        ini = self.write(
            tmp_path,
            f"[run]\ninput = {H2}\n\n[sweep]\naxis = n\nvalues = 2,3,4\n",
        )
        code, report, out = run_cli(tmp_path, "lanczos", "--config", ini)
        assert code == 0
        assert [r["value"] for r in report["result"]["rows"]] == [2, 3, 4]
        assert (out / "sweep.csv").exists()


class TestExitCodes:
    def test_unknown_method_names_the_field(self, capsys):
        assert main(["frobnicate", "--input", H2]) == 2
        err = error_payload(capsys)
        assert err["exit_code"] == 2
        assert "method" in err["message"]

    def test_missing_input_file_is_io(self, capsys):
        assert main(["fci", "--input", "/no/such/file.fcidump"]) == 1
        assert error_payload(capsys)["exit_code"] == 1

    def test_malformed_fcidump_is_validation(self, tmp_path, capsys):
        bad = tmp_path / "bad.fcidump"
        bad.write_text("this is not an integral file\n")
        assert main(["fci", "--input", str(bad)]) == 2

    def test_inapplicable_parameter_rejected(self, capsys):
        assert main(["fci", "--input", H2, "--dt", "0.5"]) == 2
        assert "dt" in error_payload(capsys)["message"]

    def test_sampling_limited_to_qse_and_qfd(self, capsys):
        assert main(["davidson", "--input", H2, "--shots", "100"]) == 2
        assert "sampling" in error_payload(capsys)["message"]

    def test_shots_and_eps_target_conflict(self, capsys):
        code = main(["qse", "--input", H2, "--shots", "10", "--eps-target", "0.1"])
        assert code == 2

    def test_capacity_cap_is_exit_3(self, capsys):
        assert main(["power-krylov", "--input", H2, "--n", "50"]) == 3
        assert error_payload(capsys)["exit_code"] == 3

    def test_degenerate_method_data_error_is_exit_5(self, capsys):
        # the stretched-dimer excitation metric has no significant directions
        stretched = str(fixture_path("h2_stretched"))
        assert main(["qeom", "--input", stretched]) == 5
        assert error_payload(capsys)["exit_code"] == 5

    def test_overtight_threshold_is_exit_5(self, tmp_path, capsys):
        assert main(["qfd", "--input", H2, "--eps", "1e6",
                     "--out", str(tmp_path)]) == 5
        assert "eps" in error_payload(capsys)["message"]

    def test_invalid_sweep_axis_for_method(self, capsys):
        assert main(["lanczos", "--input", H2, "--sweep", "dt=0.1,0.2"]) == 2
        assert "sweep" in error_payload(capsys)["message"]


class TestSweeps:
    def test_lanczos_energy_nonincreasing(self, tmp_path):
        code, report, out = run_cli(
            tmp_path, "lanczos", "--input", H2, "--sweep", "n=1,2,3,4,5,6"
        )
        assert code == 0
        rows = read_rows(out / "sweep.csv")
        assert [r["value"] for r in rows] == ["1", "2", "3", "4", "5", "6"]
        energies = [float(r["energy"]) for r in rows]
        assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))
        # variational from above, inside the stated bound
        for row in rows:
            assert float(row["error_vs_fci"]) >= -1e-12
            assert float(row["error_vs_fci"]) <= float(row["bound"]) + 1e-12

    def test_power_krylov_cond_exceeds_lower_bound(self, tmp_path):
        code, _, out = run_cli(
            tmp_path, "power-krylov", "--input", H2, "--sweep", "n=5,7,9"
        )
        assert code == 0
        for row in read_rows(out / "sweep.csv"):
            assert float(row["cond_smat"]) >= float(row["bound"])

    def test_qfd_dt_sweep_error_below_bound(self, tmp_path):
        code, _, out = run_cli(
            tmp_path, "qfd", "--input", H2, "--n", "4",
            "--sweep", "dt=0.1,0.2,0.4,0.8",
        )
        assert code == 0
        rows = read_rows(out / "sweep.csv")
        assert len(rows) == 4
        for row in rows:
            assert float(row["error_vs_fci"]) <= float(row["bound"]) + 1e-12

    def test_shots_sweep_error_shrinks(self, tmp_path):
        code, report, out = run_cli(
            tmp_path, "qfd", "--input", H2, "--n", "4", "--dt", "0.4",
            "--seed", "3", "--sweep", "shots=100,1000000",
        )
        assert code == 0
        rows = read_rows(out / "sweep.csv")
        errors = [abs(float(r["error_vs_fci"])) for r in rows]
        assert errors[1] < errors[0]

    def test_jobs_do_not_change_the_table(self, tmp_path):
        args = ("lanczos", "--input", H2, "--sweep", "n=1,2,3,4,5,6")
        _, _, serial = run_cli(tmp_path / "serial", *args, "--jobs", "1")
        _, _, parallel = run_cli(tmp_path / "par", *args, "--jobs", "4")
        assert (serial / "sweep.csv").read_bytes() == (parallel / "sweep.csv").read_bytes()

    def test_sweep_report_validates(self, tmp_path):
        code, report, _ = run_cli(
            tmp_path, "qfd", "--input", H2, "--n", "4", "--dt", "0.4",
            "--sweep", "eps=1e-10,1e-6,1e-2",
        )
        assert code == 0
        VALIDATOR.validate(report)
        assert report["result"]["axis"] == "eps"
