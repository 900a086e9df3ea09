import os

import numpy as np
import pytest

from vawtopt import cli, oracle, scaling
from vawtopt.design_space import read_points_csv


def run(argv):
    return cli.main(argv)


def read_kv(path):
    out = {}
    for ln in path.read_text().splitlines():
        if "=" in ln:
            k, v = ln.split("=", 1)
            out[k] = v
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared artifacts for the expensive train/optimize flows."""
    root = tmp_path_factory.mktemp("cli")
    data_dir = root / "data"
    test_dir = root / "test"
    assert run(["generate", "--n", "120", "--seed", "11", "--out", str(data_dir)]) == 0
    assert run([
        "generate", "--n", "24", "--preset", "extended",
        "--grid", "L_rr:0.36:1.6", "L_d:0.15:1.35", "--out", str(test_dir),
    ]) == 0
    gpr_dir = root / "gpr"
    assert run([
        "train", "--model", "gpr", "--data", str(data_dir / "dataset.csv"),
        "--test", str(test_dir / "dataset.csv"), "--out", str(gpr_dir),
    ]) == 0
    return root


class TestGenerate:
    def test_dataset_written_with_sidecar_and_figure(self, workspace):
        data = workspace / "data"
        points, ct = read_points_csv(data / "dataset.csv")
        assert len(points) == 120 and len(ct) == 120
        meta = read_kv(data / "dataset.csv.meta")
        assert meta["seed"] == "11"
        assert meta["reynolds"] == "80000"
        assert (data / "dataset_ct_hist.png").exists()
        assert (data / "generate_manifest.txt").exists()

    def test_grid_mode_produces_figure_style_points(self, workspace):
        points, ct = read_points_csv(workspace / "test" / "dataset.csv")
        assert len(points) == 24
        assert np.allclose(
            sorted({p.L_rr for p in points}), np.linspace(0.36, 1.6, 6), atol=1e-9
        )
        assert np.allclose(
            sorted({p.L_d for p in points}), np.linspace(0.15, 1.35, 4), atol=1e-9
        )

    def test_byte_identical_repeat(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["generate", "--n", "30", "--seed", "5", "--out", str(out)]) == 0
        assert (a / "dataset.csv").read_bytes() == (b / "dataset.csv").read_bytes()
        assert (a / "dataset.csv.meta").read_bytes() == (b / "dataset.csv.meta").read_bytes()

    def test_invalid_n_is_usage_error(self, tmp_path):
        assert run(["generate", "--n", "0", "--out", str(tmp_path / "x")]) == 2


class TestTrain:
    def test_gpr_report_and_model(self, workspace):
        gpr_dir = workspace / "gpr"
        report = read_kv(gpr_dir / "train_report.txt")
        assert report["model"] == "gpr"
        assert "test_mse" in report
        assert (gpr_dir / "gpr.model").exists()
        assert (gpr_dir / "pred_vs_actual.png").exists()

    def test_gpr_reproducible_mse(self, workspace, tmp_path):
        again = tmp_path / "gpr2"
        assert run([
            "train", "--model", "gpr",
            "--data", str(workspace / "data" / "dataset.csv"),
            "--test", str(workspace / "test" / "dataset.csv"),
            "--out", str(again),
        ]) == 0
        a = read_kv(workspace / "gpr" / "train_report.txt")
        b = read_kv(again / "train_report.txt")
        assert a["test_mse"] == b["test_mse"]
        assert (workspace / "gpr" / "gpr.model").read_bytes() == (again / "gpr.model").read_bytes()

    def test_nn_training_with_history_figure(self, workspace, tmp_path):
        out = tmp_path / "nn"
        assert run([
            "train", "--model", "nn", "--data", str(workspace / "data" / "dataset.csv"),
            "--epochs", "120", "--width", "16", "--out", str(out),
        ]) == 0
        report = read_kv(out / "train_report.txt")
        assert report["model"] == "nn"
        assert float(report["train_mse"]) >= 0
        assert (out / "nn.model").exists()
        assert (out / "training_history.png").exists()

    def test_nn_grid_search_emits_32_rows(self, workspace, tmp_path):
        out = tmp_path / "gs"
        assert run([
            "train", "--model", "nn", "--data", str(workspace / "data" / "dataset.csv"),
            "--test", str(workspace / "test" / "dataset.csv"),
            "--grid-search", "--epochs", "30", "--out", str(out),
        ]) == 0
        lines = (out / "grid_search.csv").read_text().strip().splitlines()
        assert len(lines) == 33  # header + 32 configs
        assert (out / "grid_search_mse.png").exists()

    def test_missing_ct_column_exits_4(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("kappa_r,kappa_d,L_dr,L_rr,L_d,alpha_deg\n2,1,0.5,1,0.7,30\n")
        code = run(["train", "--model", "gpr", "--data", str(bad), "--out", str(tmp_path / "o")])
        assert code == 4

    def test_missing_file_exits_3(self, tmp_path):
        code = run([
            "train", "--model", "gpr", "--data", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path / "o"),
        ])
        assert code == 3


class TestContour:
    def test_default_grid_shape_and_fixed_point(self, workspace, tmp_path):
        out = tmp_path / "contour"
        assert run([
            "contour", "--model", str(workspace / "gpr" / "gpr.model"),
            "--res", "12", "--out", str(out),
        ]) == 0
        lines = (out / "contour.csv").read_text().strip().splitlines()
        assert lines[0] == "L_rr,L_d,C_T_pred,feasible"
        assert len(lines) == 1 + 144
        manifest = read_kv(out / "contour_manifest.txt")
        assert "kappa_r=4.95" in manifest["fixed"]
        assert "alpha_deg=45" in manifest["fixed"]
        assert (out / "contour.png").exists()

    def test_infeasible_cells_flagged_not_dropped(self, workspace, tmp_path):
        out = tmp_path / "contour2"
        assert run([
            "contour", "--model", str(workspace / "gpr" / "gpr.model"),
            "--res", "6", "--out", str(out),
        ]) == 0
        rows = (out / "contour.csv").read_text().strip().splitlines()[1:]
        flags = [r.rsplit(",", 1)[1] for r in rows]
        assert "0" in flags and "1" in flags

    def test_model_file_mismatch_exits_4(self, workspace, tmp_path):
        junk = tmp_path / "junk.model"
        junk.write_text("format=unknown\n")
        assert run(["contour", "--model", str(junk), "--out", str(tmp_path / "o")]) == 4


class TestScale:
    def test_fit_recovers_published_exponents(self, tmp_path):
        pts = tmp_path / "pts.csv"
        rows = ["lambda_l,lambda_v,value"]
        for l in (1.0, 2.0, 3.0, 5.0):
            for v in (1.0, 1.5, 2.0, 3.0):
                rows.append(f"{l},{v},{0.34 * l**1.95 * v**3.05!r}")
        pts.write_text("\n".join(rows) + "\n")
        out = tmp_path / "fit"
        assert run(["scale", "fit", "--data", str(pts), "--out", str(out)]) == 0
        report = read_kv(out / "scale_fit.txt")
        assert float(report["exponent_l"]) == pytest.approx(1.95, abs=1e-6)
        assert float(report["exponent_v"]) == pytest.approx(3.05, abs=1e-6)
        assert (out / "power_law_fit.png").exists()

    def test_rated_on_linear_fixture(self, tmp_path):
        m0, w0 = 6.0, 3.0
        curve = scaling.TorqueCurve(
            omega=(0.01 * w0, w0), torque=(m0 * 0.99, 0.0), wind_speed=3.0, lambda_l=1.0
        )
        path = tmp_path / "curve.csv"
        scaling.write_torque_curve_csv(curve, path)
        out = tmp_path / "rated"
        assert run(["scale", "rated", "--curve", str(path), "--out", str(out)]) == 0
        report = read_kv(out / "scale_rated.txt")
        assert float(report["rated_power"]) == pytest.approx(m0 * w0 / 4.0, rel=1e-12)
        assert (out / "torque_curve.png").exists()

    def test_similarity_report(self, tmp_path):
        out = tmp_path / "sim"
        assert run([
            "scale", "similarity", "--lambda-l", "10", "--lambda-v", "2", "--out", str(out)
        ]) == 0
        report = read_kv(out / "scale_similarity.txt")
        assert float(report["lambda_t"]) == pytest.approx(5.0)
        assert float(report["viscosity_mismatch"]) == pytest.approx(20.0)

    def test_efficiency_reference_example(self, tmp_path):
        out = tmp_path / "eff"
        assert run([
            "scale", "efficiency", "--torque", "10.1", "--omega", "1",
            "--wind-speed", "3", "--out", str(out),
        ]) == 0
        report = read_kv(out / "scale_efficiency.txt")
        assert float(report["eta"]) == pytest.approx(0.2036, abs=1e-4)
        assert report["betz_exceeded"] == "0"

    def test_missing_required_inputs_are_usage_errors(self, tmp_path):
        assert run(["scale", "rated", "--out", str(tmp_path / "a")]) == 2
        assert run(["scale", "fit", "--out", str(tmp_path / "b")]) == 2
        assert run(["scale", "efficiency", "--out", str(tmp_path / "c")]) == 2

    def test_bad_curve_schema_exits_4(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("omega,torque\n1,2\n")
        assert run(["scale", "rated", "--curve", str(bad), "--out", str(tmp_path / "o")]) == 4


class TestOptimize:
    def test_oracle_with_verification(self, tmp_path):
        out = tmp_path / "opt"
        assert run([
            "optimize", "--oracle", "--budget", "20000", "--verify-oracle",
            "--seed", "1", "--out", str(out),
        ]) == 0
        report = read_kv(out / "opt_result.txt")
        assert float(report["predicted_ct_star"]) == pytest.approx(0.336, abs=1e-3)
        assert float(report["oracle_verified_ct_star"]) == pytest.approx(0.336, abs=1e-3)
        assert float(report["improvement_vs_baseline"]) == pytest.approx(0.30, abs=0.01)
        points, _ = read_points_csv(out / "x_star.csv")
        assert len(points) == 1
        assert (out / "optimization_summary.png").exists()

    def test_trained_model_path(self, workspace, tmp_path):
        out = tmp_path / "opt_gpr"
        assert run([
            "optimize", "--model", str(workspace / "gpr" / "gpr.model"),
            "--budget", "2000", "--verify-oracle", "--out", str(out),
        ]) == 0
        report = read_kv(out / "opt_result.txt")
        assert "predicted_ct_star" in report
        assert "oracle_verified_ct_star" in report

    def test_requires_model_or_oracle(self, tmp_path):
        assert run(["optimize", "--out", str(tmp_path / "x")]) == 2

    def test_byte_identical_repeat(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run([
                "optimize", "--oracle", "--budget", "500", "--seed", "3", "--out", str(out)
            ]) == 0
        assert (a / "opt_result.txt").read_bytes() == (b / "opt_result.txt").read_bytes()
        assert (a / "x_star.csv").read_bytes() == (b / "x_star.csv").read_bytes()


class TestManifests:
    def test_every_subcommand_writes_manifest(self, workspace):
        assert (workspace / "data" / "generate_manifest.txt").exists()
        assert (workspace / "gpr" / "train_manifest.txt").exists()

    def test_manifest_carries_timestamp_but_reports_do_not(self, workspace):
        manifest = (workspace / "gpr" / "train_manifest.txt").read_text()
        assert "created_at=" in manifest
        report = (workspace / "gpr" / "train_report.txt").read_text()
        assert "created_at" not in report


class TestExitCodes:
    def test_inputs_never_mutated(self, workspace, tmp_path):
        data = workspace / "data" / "dataset.csv"
        before = data.read_bytes()
        assert run([
            "train", "--model", "gpr", "--data", str(data), "--out", str(tmp_path / "o")
        ]) == 0
        assert data.read_bytes() == before

    def test_optimization_failure_maps_to_5(self, tmp_path, monkeypatch):
        from vawtopt import optimize
        from vawtopt.errors import NoFeasibleStart

        def boom(*a, **kw):
            raise NoFeasibleStart("no start")

        monkeypatch.setattr(optimize, "maximize", boom)
        code = run(["optimize", "--oracle", "--budget", "500", "--out", str(tmp_path / "x")])
        assert code == 5

    def test_small_budget_is_usage_error(self, tmp_path):
        assert run([
            "optimize", "--oracle", "--budget", "50", "--out", str(tmp_path / "x")
        ]) == 2

    def test_contour_over_other_axes(self, workspace, tmp_path):
        out = tmp_path / "kd"
        assert run([
            "contour", "--model", str(workspace / "gpr" / "gpr.model"),
            "--axes", "kappa_d,L_dr", "--res", "5", "--out", str(out),
        ]) == 0
        lines = (out / "contour.csv").read_text().strip().splitlines()
        assert lines[0] == "kappa_d,L_dr,C_T_pred,feasible"
        assert len(lines) == 26
