import numpy as np
import pytest

from vawtopt import scaling
from vawtopt.errors import NonFiniteInput, SchemaError, TooFewSamples, ZeroWind
from vawtopt.scaling import (
    OperatingPoint,
    ScalingParams,
    TorqueCurve,
    efficiency,
    fit_power_law,
    rated_power,
    rated_torque_law,
    scale_torque_power,
    similarity_from_speed,
)


class TestEfficiency:
    def test_reference_example(self):
        # P = 10.1 W through a 1.5 m x 2 m swept area at 3 m/s
        op = OperatingPoint(torque=10.1, angular_velocity=1.0, wind_speed=3.0,
                            rho=1.225, area=3.0)
        res = efficiency(op)
        assert res.eta == pytest.approx(10.1 / 49.6125, abs=1e-12)
        assert res.eta == pytest.approx(0.2036, abs=1e-4)
        assert not res.betz_exceeded

    def test_zero_torque(self):
        op = OperatingPoint(torque=0.0, angular_velocity=2.0, wind_speed=3.0)
        assert efficiency(op).eta == 0.0

    def test_betz_flag(self):
        op = OperatingPoint(torque=50.0, angular_velocity=1.0, wind_speed=3.0,
                            rho=1.225, area=3.0)
        res = efficiency(op)
        assert res.eta > 0.593
        assert res.betz_exceeded

    def test_zero_wind_raises(self):
        op = OperatingPoint(torque=1.0, angular_velocity=1.0, wind_speed=0.0)
        with pytest.raises(ZeroWind):
            efficiency(op)

    def test_operating_point_validation(self):
        with pytest.raises(NonFiniteInput):
            OperatingPoint(torque=float("nan"), angular_velocity=1.0, wind_speed=3.0)
        with pytest.raises(ValueError):
            OperatingPoint(torque=1.0, angular_velocity=1.0, wind_speed=3.0, rho=-1.0)


class TestScaleTorquePower:
    def test_identity(self):
        assert scale_torque_power(3.3, 1.7, ScalingParams(1, 1, 1)) == (3.3, 3.3 * 1.7)

    def test_geometry_doubling(self):
        m, p = scale_torque_power(1.0, 1.0, ScalingParams(lambda_l=2, lambda_t=1, lambda_rho=1))
        assert m == pytest.approx(32.0)
        assert p == pytest.approx(32.0)

    def test_time_doubling(self):
        m, p = scale_torque_power(1.0, 1.0, ScalingParams(lambda_l=1, lambda_t=2, lambda_rho=1))
        assert m == pytest.approx(0.25)
        assert p == pytest.approx(0.125)

    def test_composition_is_componentwise_product(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            l1, t1, r1, l2, t2, r2 = np.exp(rng.uniform(-1, 1, size=6))
            s1 = ScalingParams(l1, t1, r1)
            s2 = ScalingParams(l2, t2, r2)
            s12 = ScalingParams(l1 * l2, t1 * t2, r1 * r2)
            m_a, p_a = scale_torque_power(*scale_torque_power(2.0, 3.0, s1), s2)
            # composing power scalings multiplies torque scale; check torque
            m_direct, _ = scale_torque_power(2.0, 3.0, s12)
            assert m_a == pytest.approx(m_direct, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScalingParams(lambda_l=-1.0)


class TestSimilarity:
    def test_reference_factors(self):
        s = similarity_from_speed(10.0, 2.0)
        assert s.lambda_t == pytest.approx(5.0)
        assert s.lambda_rho == 1.0
        assert s.viscosity_mismatch == pytest.approx(20.0)

    def test_unity_is_exact_similarity(self):
        s = similarity_from_speed(1.0, 1.0)
        assert s.lambda_t == 1.0
        assert s.viscosity_mismatch == pytest.approx(1.0)

    def test_power_and_torque_exponents(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            ll, lv = np.exp(rng.uniform(-1.5, 1.5, size=2))
            s = similarity_from_speed(ll, lv)
            m, p = scale_torque_power(1.0, 1.0, s)
            assert p == pytest.approx(ll**2 * lv**3, rel=1e-12)
            assert m == pytest.approx(ll**3 * lv**2, rel=1e-12)

    def test_efficiency_invariant_under_similarity(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            ll, lv = np.exp(rng.uniform(-1, 1, size=2))
            op = OperatingPoint(
                torque=rng.uniform(1, 20), angular_velocity=rng.uniform(0.1, 5),
                wind_speed=rng.uniform(1, 15), rho=1.225, area=rng.uniform(0.5, 10),
            )
            s = similarity_from_speed(ll, lv)
            m_s, _ = scale_torque_power(op.torque, op.angular_velocity, s)
            scaled = OperatingPoint(
                torque=m_s,
                angular_velocity=op.angular_velocity / s.lambda_t,
                wind_speed=lv * op.wind_speed,
                rho=op.rho,
                area=ll**2 * op.area,
            )
            assert efficiency(scaled).eta == pytest.approx(efficiency(op).eta, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            similarity_from_speed(-1.0, 2.0)


class TestRatedPower:
    def test_linear_curve_analytic_optimum(self):
        m0, w0 = 7.3, 4.1
        curve = TorqueCurve(
            omega=(0.01 * w0, w0),
            torque=(m0 * (1 - 0.01), 0.0),
        )
        rated = rated_power(curve)
        assert rated.power == pytest.approx(m0 * w0 / 4.0, rel=1e-12)
        assert rated.omega == pytest.approx(w0 / 2.0, rel=1e-12)
        assert rated.torque == pytest.approx(m0 / 2.0, rel=1e-12)

    def test_monotone_increasing_torque_maximum_at_right_endpoint(self):
        curve = TorqueCurve(omega=(1.0, 2.0, 3.0), torque=(1.0, 1.5, 2.5))
        rated = rated_power(curve)
        assert rated.omega == 3.0
        assert rated.power == pytest.approx(7.5)

    def test_random_concave_curves_match_dense_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            w = np.sort(rng.uniform(0.2, 6.0, size=10))
            while np.min(np.diff(w)) < 1e-3:
                w = np.sort(rng.uniform(0.2, 6.0, size=10))
            peak = rng.uniform(3.0, 9.0)
            m = peak - rng.uniform(0.2, 0.9) * (w - w[0]) ** 2  # concave profile
            curve = TorqueCurve(omega=tuple(w), torque=tuple(m))
            rated = rated_power(curve)
            dense_w = np.linspace(w[0], w[-1], 1_000_000)
            dense_p = dense_w * np.interp(dense_w, w, m)
            assert rated.power >= dense_p.max() - 1e-12
            assert rated.power == pytest.approx(dense_p.max(), rel=1e-6)

    def test_subdivision_invariance(self):
        w = (1.0, 2.0, 4.0)
        m = (5.0, 4.0, 1.0)
        base = rated_power(TorqueCurve(omega=w, torque=m))
        # insert collinear midpoints
        refined = rated_power(
            TorqueCurve(omega=(1.0, 1.5, 2.0, 3.0, 4.0), torque=(5.0, 4.5, 4.0, 2.5, 1.0))
        )
        assert refined.power == pytest.approx(base.power, abs=1e-12)
        assert refined.omega == pytest.approx(base.omega, abs=1e-12)

    def test_curve_validation(self):
        with pytest.raises(TooFewSamples):
            TorqueCurve(omega=(1.0,), torque=(1.0,))
        with pytest.raises(ValueError):
            TorqueCurve(omega=(2.0, 1.0), torque=(1.0, 1.0))
        with pytest.raises(ValueError):
            TorqueCurve(omega=(-1.0, 1.0), torque=(1.0, 1.0))


class TestPowerLawFit:
    @staticmethod
    def grid_points(fn):
        return [
            (l, v, fn(l, v))
            for l in (1.0, 2.0, 3.0, 5.0, 8.0)
            for v in (1.0, 1.5, 2.0, 3.0, 4.0)
        ]

    def test_recovers_published_power_law(self):
        fit = fit_power_law(self.grid_points(lambda l, v: 0.34 * l**1.95 * v**3.05))
        assert fit.prefactor == pytest.approx(0.34, abs=1e-6)
        assert fit.exponent_l == pytest.approx(1.95, abs=1e-6)
        assert fit.exponent_v == pytest.approx(3.05, abs=1e-6)
        assert fit.residual < 1e-10
        assert fit.dropped == ()

    def test_recovers_ideal_similarity_exponents(self):
        fit = fit_power_law(self.grid_points(lambda l, v: 1.7 * l**2 * v**3))
        assert fit.exponent_l == pytest.approx(2.0, abs=1e-6)
        assert fit.exponent_v == pytest.approx(3.0, abs=1e-6)

    def test_constant_speed_column_dropped(self):
        pts = [(l, 2.0, 0.5 * l**1.6 * 2.0**3) for l in (1.0, 2.0, 4.0, 8.0)]
        fit = fit_power_law(pts)
        assert fit.dropped == ("exponent_v",)
        assert fit.exponent_v == 0.0
        assert fit.exponent_l == pytest.approx(1.6, abs=1e-6)

    def test_unbiased_under_symmetric_log_noise(self):
        rng = np.random.default_rng(8)
        sigma = 0.05
        estimates = []
        for _ in range(200):
            pts = [
                (l, v, 0.34 * l**1.95 * v**3.05 * np.exp(rng.normal(0, sigma)))
                for l in (1.0, 2.0, 4.0)
                for v in (1.0, 2.0, 3.0)
            ]
            estimates.append(fit_power_law(pts).exponent_l)
        est = np.array(estimates)
        stderr = est.std(ddof=1) / np.sqrt(len(est))
        assert abs(est.mean() - 1.95) < 3 * stderr + 1e-12

    def test_positivity_required(self):
        with pytest.raises(ValueError):
            fit_power_law([(1.0, 1.0, 1.0), (2.0, 1.0, -0.5), (3.0, 1.0, 2.0)])
        with pytest.raises(ValueError):
            fit_power_law([(1.0, 1.0, 1.0), (2.0, 1.0, 2.0)])


class TestRatedTorqueLaw:
    def test_recovers_published_exponents(self):
        pts = [
            (l, v, 1.1 * l**2.92 * v**2.09)
            for l in (1.0, 2.0, 3.0, 5.0)
            for v in (1.0, 1.5, 2.5)
        ]
        fit = rated_torque_law(pts)
        assert fit.exponent_l == pytest.approx(2.92, abs=1e-6)
        assert fit.exponent_v == pytest.approx(2.09, abs=1e-6)

    def test_ideal_similarity_exponents(self):
        pts = [
            (l, v, 0.9 * l**3 * v**2)
            for l in (1.0, 2.0, 4.0)
            for v in (1.0, 2.0, 3.0)
        ]
        fit = rated_torque_law(pts)
        assert fit.exponent_l == pytest.approx(3.0, abs=1e-6)
        assert fit.exponent_v == pytest.approx(2.0, abs=1e-6)

    def test_negative_torque_folded_and_recorded(self):
        pts = [
            (l, v, 0.9 * l**3 * v**2)
            for l in (1.0, 2.0, 4.0)
            for v in (1.0, 2.0)
        ]
        pts[2] = (pts[2][0], pts[2][1], -pts[2][2])
        fit = rated_torque_law(pts)
        assert fit.negative_indices == (2,)
        assert fit.exponent_l == pytest.approx(3.0, abs=1e-6)


class TestCurveCsv:
    def test_round_trip(self, tmp_path):
        curve = TorqueCurve(
            omega=(0.5, 1.0, 2.0), torque=(4.0, 3.0, 1.0), wind_speed=3.0, lambda_l=1.0
        )
        path = tmp_path / "curve.csv"
        scaling.write_torque_curve_csv(curve, path)
        back = scaling.read_torque_curve_csv(path)
        assert back == curve

    def test_schema_violation_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("omega_rad_s,torque_Nm\n1.0,2.0\nbroken\n")
        with pytest.raises(SchemaError) as err:
            scaling.read_torque_curve_csv(path)
        assert err.value.line == 3

    def test_power_law_csv(self, tmp_path):
        path = tmp_path / "pts.csv"
        path.write_text("lambda_l,lambda_v,value\n1,1,0.34\n2,1,1.31\n")
        pts = scaling.read_power_law_csv(path)
        assert pts == [(1.0, 1.0, 0.34), (2.0, 1.0, 1.31)]
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SchemaError):
            scaling.read_power_law_csv(bad)
