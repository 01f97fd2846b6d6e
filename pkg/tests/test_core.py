import numpy as np
import pytest

from phcbf import (PhSystem, bracket_j, bracket_sym, drift, output, power_terms,
                   sample_states, validate_structure, velocity)


class TestBracketJ:
    def test_diagonal_vanishes(self, ms_sys):
        rng = np.random.default_rng(0)
        for _ in range(50):
            g = rng.normal(size=2)
            x = rng.normal(size=2)
            assert bracket_j(g, g, x, ms_sys) == pytest.approx(0.0, abs=1e-12)

    def test_reads_off_diagonal_entry(self, ms_sys):
        x = np.zeros(2)
        assert bracket_j([1.0, 0.0], [0.0, 1.0], x, ms_sys) == 1.0

    def test_antisymmetry(self, ms_sys):
        x = np.zeros(2)
        assert bracket_j([0.0, 1.0], [1.0, 0.0], x, ms_sys) == -1.0

    def test_dimension_mismatch(self, ms_sys):
        with pytest.raises(ValueError):
            bracket_j([1.0, 0.0, 0.0], [0.0, 1.0], np.zeros(2), ms_sys)

    def test_bilinearity(self, ms_sys):
        rng = np.random.default_rng(1)
        x = np.zeros(2)
        for _ in range(50):
            ga, gb, gc = rng.normal(size=(3, 2))
            a, b = rng.normal(size=2)
            lhs = bracket_j(a * ga + b * gb, gc, x, ms_sys)
            rhs = a * bracket_j(ga, gc, x, ms_sys) + b * bracket_j(gb, gc, x, ms_sys)
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestBracketSym:
    def test_zero_matrix(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g = rng.normal(size=3)
            assert bracket_sym(g, g, np.zeros((3, 3))) == 0.0

    def test_identity_is_squared_norm(self):
        assert bracket_sym([3.0, 4.0], [3.0, 4.0], np.eye(2)) == 25.0

    def test_asymmetric_rejected(self):
        y = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError, match="not symmetric"):
            bracket_sym([1.0, 0.0], [0.0, 1.0], y)

    def test_dissipation_matches_velocity_form(self, double_pendulum, dp_sys):
        # [H,H]_D over the momentum block equals qdot^T D qdot.
        rng = np.random.default_rng(3)
        for _ in range(25):
            x = rng.uniform(-2, 2, size=4)
            dH = dp_sys.gradH(x)
            val = bracket_sym(dH, dH, dp_sys.R(x))
            qd = velocity(double_pendulum, x[:2], x[2:])
            assert val >= 0.0
            assert val == pytest.approx(float(qd @ double_pendulum.damping @ qd), rel=1e-12)

    def test_bilinearity(self):
        rng = np.random.default_rng(4)
        y = np.diag([0.3, 0.7, 1.1])
        for _ in range(50):
            ga, gb, gc = rng.normal(size=(3, 3))
            a, b = rng.normal(size=2)
            lhs = bracket_sym(a * ga + b * gb, gc, y)
            rhs = a * bracket_sym(ga, gc, y) + b * bracket_sym(gb, gc, y)
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestDrift:
    def test_equilibrium(self, ms_sys):
        assert np.allclose(drift([0.0, 0.0], ms_sys), [0.0, 0.0])

    def test_max_momentum_state(self, ms_sys):
        assert np.allclose(drift([0.0, 8.0], ms_sys), [4.0, 0.0])

    def test_displaced_state(self, ms_sys):
        assert np.allclose(drift([2.0, 0.0], ms_sys), [0.0, -1.0])

    def test_nonfinite_reported(self):
        bad = PhSystem.from_matrices(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros((2, 2)),
                                     np.array([[0.0], [1.0]]),
                                     H=lambda x: float("nan"),
                                     gradH=lambda x: np.array([np.nan, 0.0]))
        with pytest.raises(FloatingPointError, match="non-finite"):
            drift(np.zeros(2), bad)


class TestOutput:
    def test_velocity_output(self, ms_sys):
        assert output([0.0, 8.0], ms_sys) == pytest.approx([4.0])

    def test_zero_gradient(self, ms_sys):
        assert np.allclose(output([0.0, 0.0], ms_sys), [0.0])

    def test_pendulum_output_is_joint_velocity(self, double_pendulum, dp_sys):
        rng = np.random.default_rng(5)
        B = double_pendulum.input_matrix
        for _ in range(25):
            x = rng.uniform(-2, 2, size=4)
            qd = velocity(double_pendulum, x[:2], x[2:])
            assert np.abs(output(x, dp_sys) - B.T @ qd).max() < 1e-12


class TestPowerTerms:
    def test_conservative_autonomous(self, ms_sys):
        pt = power_terms([1.0, 2.0], [0.0], ms_sys)
        assert pt.routing == pytest.approx(0.0, abs=1e-12)
        assert pt.dissipation == 0.0
        assert pt.supplied == 0.0

    def test_damped_zero_input(self, dp_sys):
        pt = power_terms([0.3, -0.2, 1.0, 2.0], [0.0, 0.0], dp_sys)
        assert pt.supplied == 0.0
        assert pt.dissipation >= 0.0
        assert pt.h_dot == pytest.approx(-pt.dissipation)

    def test_supplied_power(self, ms_sys):
        pt = power_terms([0.0, 8.0], [-1.5], ms_sys)
        assert pt.supplied == pytest.approx(-6.0)

    def test_dimension_mismatch(self, ms_sys):
        with pytest.raises(ValueError):
            power_terms([0.0, 8.0], [1.0, 2.0], ms_sys)

    def test_routing_zero_on_samples(self, dp_sys):
        for x in sample_states(4, 100, (-3, 3), seed=6):
            pt = power_terms(x, np.zeros(2), dp_sys)
            assert abs(pt.routing) < 1e-10
            assert pt.dissipation >= -1e-10


class TestValidateStructure:
    def test_mass_spring_passes(self, ms_sys):
        report = validate_structure(ms_sys, sample_states(2, 100, (-5, 5), seed=7))
        assert report.passed
        assert report.max_skew_defect == 0.0

    def test_negative_dissipation_fails(self, ms_sys):
        bad = PhSystem(n=2, m=1, J=ms_sys.J, R=lambda x: -np.eye(2), g=ms_sys.g,
                       H=ms_sys.H, gradH=ms_sys.gradH)
        report = validate_structure(bad, sample_states(2, 10, (-1, 1), seed=8))
        assert not report.passed
        assert any("R not PSD" in msg for msg in report.failures)

    def test_double_pendulum_passes(self, dp_sys):
        report = validate_structure(dp_sys, sample_states(4, 100, (-2, 2), seed=9))
        assert report.passed
        assert report.max_grad_error < 1e-5

    def test_empty_samples_rejected(self, ms_sys):
        with pytest.raises(ValueError):
            validate_structure(ms_sys, [])
