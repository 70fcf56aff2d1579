import csv

import numpy as np
import pytest

from epichain import cli


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


class TestSimulate:
    def test_summary_schema(self, tmp_path):
        rc = cli.main([
            "simulate", "--preset", "sir-table1", "--steps", "20",
            "--trajectories", "50", "--seed", "1", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, rows = read_csv(tmp_path / "summary.csv")
        assert header == [
            "t", "S_mean", "S_p05", "S_p95", "I_mean", "I_p05", "I_p95",
            "R_mean", "R_p05", "R_p95",
        ]
        assert len(rows) == 21
        assert float(rows[0][0]) == 0.0
        assert float(rows[0][1]) == 9000.0
        assert (tmp_path / "simulate_manifest.txt").exists()

    def test_trajectories_output(self, tmp_path):
        rc = cli.main([
            "simulate", "--preset", "sir-small", "--steps", "5",
            "--trajectories", "3", "--save-trajectories", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, rows = read_csv(tmp_path / "trajectories.csv")
        assert header == ["trajectory", "t", "S", "I", "R"]
        assert len(rows) == 3 * 6
        totals = {int(r[2]) + int(r[3]) + int(r[4]) for r in rows}
        assert totals == {1000}

    def test_reproducible_given_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            cli.main([
                "simulate", "--preset", "sir-table1", "--steps", "10",
                "--trajectories", "20", "--seed", "9", "--out-dir", str(out),
            ])
        assert (a / "summary.csv").read_text() == (b / "summary.csv").read_text()

    def test_model_flags_instead_of_preset(self, tmp_path):
        rc = cli.main([
            "simulate", "--model", "seir", "--n-pop", "1000", "--s0", "900",
            "--i0", "100", "--steps", "5", "--trajectories", "10",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, _ = read_csv(tmp_path / "summary.csv")
        assert "E_mean" in header

    def test_population_mismatch_is_usage_error(self, tmp_path, capsys):
        rc = cli.main([
            "simulate", "--model", "SIR", "--n-pop", "1000", "--s0", "900",
            "--i0", "200", "--out-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_missing_model_and_preset(self, tmp_path, capsys):
        rc = cli.main(["simulate", "--out-dir", str(tmp_path)])
        assert rc == 1

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
        rc = cli.main([
            "simulate", "--preset", "sir-small", "--steps", "3", "--trajectories", "5",
        ])
        assert rc == 0
        assert (tmp_path / "summary.csv").exists()


class TestGenerateMeasurements:
    def test_schema_and_initial_row(self, tmp_path):
        rc = cli.main([
            "generate-measurements", "--preset", "sir-table1",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, rows = read_csv(tmp_path / "measurements.csv")
        assert header == ["t", "y"]
        assert len(rows) == 202
        assert float(rows[0][1]) == 1000.0
        assert float(rows[1][1]) == pytest.approx(1007.0)

    def test_full_precision_floats(self, tmp_path):
        cli.main([
            "generate-measurements", "--preset", "sir-table1", "--steps", "5",
            "--out-dir", str(tmp_path),
        ])
        _, rows = read_csv(tmp_path / "measurements.csv")
        from epichain import epi

        kind, params, initial = epi.preset("sir-table1")
        det = epi.simulate_deterministic(kind, params, initial, 5)
        for k, row in enumerate(rows):
            # %.17g round-trips doubles exactly.
            assert float(row[1]) == det[k, 1]


@pytest.fixture(scope="module")
def measurements(tmp_path_factory):
    out = tmp_path_factory.mktemp("meas")
    cli.main([
        "generate-measurements", "--preset", "sir-table1", "--steps", "60",
        "--out-dir", str(out),
    ])
    return out / "measurements.csv"


class TestInfer:
    def test_chain_and_posterior_outputs(self, tmp_path, measurements):
        rc = cli.main([
            "infer", "--preset", "sir-table1", "--measurements", str(measurements),
            "--iterations", "20", "--particles", "30", "--burn-in", "5",
            "--seed", "2", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, rows = read_csv(tmp_path / "chain.csv")
        assert header == ["iteration", "beta", "alpha", "score", "accepted"]
        assert len(rows) == 21
        assert [int(r[0]) for r in rows] == list(range(21))
        # theta0 doubling of the table values
        assert float(rows[0][1]) == pytest.approx(0.26)
        assert float(rows[0][2]) == pytest.approx(0.22)
        header, rows = read_csv(tmp_path / "posterior.csv")
        assert header == ["parameter", "mean", "std", "p05", "p95"]
        assert [r[0] for r in rows] == ["beta", "alpha"]

    def test_reproducible_given_seed(self, tmp_path, measurements):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            cli.main([
                "infer", "--preset", "sir-table1", "--measurements", str(measurements),
                "--iterations", "10", "--particles", "20", "--burn-in", "2",
                "--seed", "4", "--out-dir", str(out),
            ])
        assert (a / "chain.csv").read_text() == (b / "chain.csv").read_text()

    def test_missing_measurement_file(self, tmp_path, capsys):
        rc = cli.main([
            "infer", "--preset", "sir-table1", "--measurements",
            str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path),
        ])
        assert rc == 1

    def test_excessive_burn_in(self, tmp_path, measurements):
        rc = cli.main([
            "infer", "--preset", "sir-table1", "--measurements", str(measurements),
            "--iterations", "5", "--particles", "10", "--burn-in", "50",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 1


class TestIdentify:
    def write_candidates(self, path, seed=3):
        from epichain.rng import substream

        gen = substream(seed)
        p = gen.normal(size=(100, 3))
        y = 2.0 * p[:, 0] - 1.0 * p[:, 2]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c0", "c1", "c2", "y"])
            for row, target in zip(p, y):
                writer.writerow([f"{v:.17g}" for v in row] + [f"{target:.17g}"])

    def test_explicit_candidates(self, tmp_path):
        data = tmp_path / "data.csv"
        self.write_candidates(data)
        rc = cli.main([
            "identify", "--data", str(data), "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, rows = read_csv(tmp_path / "frols_report.csv")
        assert header == [
            "order", "term", "candidate_index", "err", "err_cumulative", "coefficient",
        ]
        assert [r[1] for r in rows] == ["c0", "c2"]
        coeffs = {r[1]: float(r[5]) for r in rows}
        assert coeffs["c0"] == pytest.approx(2.0, abs=1e-8)
        assert coeffs["c2"] == pytest.approx(-1.0, abs=1e-8)
        assert float(rows[-1][4]) >= 1.0 - 1e-8

    def test_volterra_expansion(self, tmp_path):
        from epichain.rng import substream

        gen = substream(5)
        u = gen.normal(size=200)
        y = np.zeros(200)
        y[2:] = 0.7 * u[1:-1] + 0.2 * u[:-2] ** 2
        data = tmp_path / "series.csv"
        with open(data, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u", "y"])
            for a, b in zip(u, y):
                writer.writerow([f"{a:.17g}", f"{b:.17g}"])
        rc = cli.main([
            "identify", "--data", str(data), "--volterra", "--max-lag", "2",
            "--max-order", "2", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        _, rows = read_csv(tmp_path / "frols_report.csv")
        assert {r[1] for r in rows} == {"u(k-1)", "u(k-2)*u(k-2)"}

    def test_parse_error_names_location(self, tmp_path, capsys):
        data = tmp_path / "bad.csv"
        data.write_text("c0,y\n1.0,2.0\noops,3.0\n")
        rc = cli.main(["identify", "--data", str(data), "--out-dir", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err
        assert "line 3" in err and "column 1" in err and "c0" in err

    def test_missing_y_column(self, tmp_path):
        data = tmp_path / "noy.csv"
        data.write_text("c0,c1\n1.0,2.0\n")
        rc = cli.main(["identify", "--data", str(data), "--out-dir", str(tmp_path)])
        assert rc == 1

    def test_dependent_candidates_exit_code(self, tmp_path, capsys):
        # Duplicate column with max-terms forcing a second pick would
        # normally exhaust gracefully; an all-zero candidate instead trips
        # the numeric-input validation (exit 2 covers numeric errors).
        data = tmp_path / "dup.csv"
        with open(data, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c0", "c1", "y"])
            for k in range(20):
                writer.writerow([k + 1.0, 0.0, 2.0 * (k + 1.0)])
        rc = cli.main(["identify", "--data", str(data), "--out-dir", str(tmp_path)])
        assert rc == 1  # zero column is rejected as invalid input


class TestDistCheck:
    def test_moment_table(self, tmp_path):
        rc = cli.main([
            "dist-check", "--samples", "200000", "--seed", "6",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        header, rows = read_csv(tmp_path / "dist_check.csv")
        assert header == [
            "nu", "distribution", "analytic_mean", "mc_mean", "analytic_var", "mc_var",
        ]
        assert len(rows) == 18
        assert rows[0][1] == "poisson" and rows[1][1] == "binomial"
        assert rows[2][1] == "negbin" and rows[3][1] == "betabin"
        for row in rows:
            assert float(row[3]) == pytest.approx(float(row[2]), rel=0.05)
            assert float(row[5]) == pytest.approx(float(row[4]), rel=0.05)


class TestConfigFile:
    def test_config_fills_defaults_flags_win(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(
            "[simulate]\npreset = sir-small\nsteps = 7\ntrajectories = 12\nseed = 5\n"
        )
        rc = cli.main([
            "simulate", "--config", str(cfg), "--steps", "4", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        _, rows = read_csv(tmp_path / "summary.csv")
        assert len(rows) == 5  # flag value 4 overrides config value 7
        manifest = (tmp_path / "simulate_manifest.txt").read_text()
        assert "trajectories = 12" in manifest
        assert "preset = sir-small" in manifest

    def test_missing_config(self, tmp_path, capsys):
        rc = cli.main([
            "simulate", "--config", str(tmp_path / "nope.ini"),
            "--preset", "sir-small", "--out-dir", str(tmp_path),
        ])
        assert rc == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[simulate]\nwarp_speed = 9\n")
        rc = cli.main([
            "simulate", "--config", str(cfg), "--preset", "sir-small",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 1


class TestEntryPoint:
    def test_console_script_runs(self, tmp_path):
        import subprocess

        proc = subprocess.run(
            [
                "epichain", "simulate", "--preset", "sir-small", "--steps", "3",
                "--trajectories", "5", "--out-dir", str(tmp_path),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "summary.csv").exists()

    def test_unknown_command_is_usage_error(self, capsys):
        assert cli.main(["transmogrify"]) == 1
