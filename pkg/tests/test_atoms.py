import numpy as np
import pytest
from scipy.integrate import quad

from vapor_memory_lab import atoms
from vapor_memory_lab.constants import CONST
from vapor_memory_lab.errors import DomainError


class TestVaporDensity:
    def test_density_at_74C(self):
        # The Alcock-form liquid curve gives 2.899e18 m^-3 at 347.15 K,
        # cross-checked against published vapor-pressure tables (1 Pa at
        # 418 K within ~5%); published curves disagree below the 10% level.
        n = atoms.vapor_density(347.15)
        assert 2.5e18 < n < 2e19
        assert n == pytest.approx(2.899e18, rel=0.01)

    def test_table_anchor_points(self):
        # CRC vapor-pressure table: p(Cs) reaches 1 Pa at 418 K, 10 Pa at 469 K.
        assert atoms.cs_vapor_pressure(418.0) == pytest.approx(1.0, rel=0.06)
        assert atoms.cs_vapor_pressure(469.0) == pytest.approx(10.0, rel=0.06)

    def test_monotone_in_temperature(self):
        assert atoms.vapor_density(350.0) > atoms.vapor_density(340.0)
        grid = np.linspace(250.0, 450.0, 100)
        densities = [atoms.vapor_density(t) for t in grid]
        assert np.all(np.diff(densities) > 0)

    def test_ideal_gas_identity(self):
        for t in (300.0, 347.15, 420.0):
            n = atoms.vapor_density(t)
            assert n * (CONST.kB * t) / atoms.cs_vapor_pressure(t) == pytest.approx(
                1.0, abs=1e-14
            )

    def test_out_of_range_raises(self):
        for t in (249.9, 450.1, 0.0):
            with pytest.raises(DomainError, match="450"):
                atoms.vapor_density(t)


class TestMaxwellBoltzmann:
    @pytest.mark.parametrize("temp", [300.0, 347.0, 400.0])
    def test_normalization(self, temp):
        sigma = np.sqrt(CONST.kB * temp / CONST.m_cs)
        integral, _ = quad(
            atoms.maxwell_boltzmann_velocity_pdf, -8 * sigma, 8 * sigma, args=(temp,)
        )
        assert integral == pytest.approx(1.0, abs=1e-9)

    def test_peak_value(self):
        t = 347.15
        expected = 1.0 / np.sqrt(2 * np.pi * CONST.kB * t / CONST.m_cs)
        assert atoms.maxwell_boltzmann_velocity_pdf(0.0, t) == pytest.approx(
            expected, rel=1e-14
        )

    def test_symmetry(self):
        v = np.linspace(1.0, 500.0, 40)
        assert np.array_equal(
            atoms.maxwell_boltzmann_velocity_pdf(v, 330.0),
            atoms.maxwell_boltzmann_velocity_pdf(-v, 330.0),
        )

    def test_nonpositive_temperature_raises(self):
        with pytest.raises(DomainError):
            atoms.maxwell_boltzmann_velocity_pdf(0.0, 0.0)


class TestLarmor:
    def test_reference_field(self):
        f = atoms.larmor_angular_frequency(127.49e-6) / (2 * np.pi)
        assert f == pytest.approx(3.573e6, rel=5e-4)

    def test_reference_frequency(self):
        b = atoms.b_field_from_precession(3.573e6)
        assert b == pytest.approx(127.49e-6, rel=5e-4)

    def test_zero(self):
        assert atoms.larmor_angular_frequency(0.0) == 0.0
        assert atoms.b_field_from_precession(0.0) == 0.0

    def test_50_microtesla(self):
        # gamma_e / 2pi = 28.0250 GHz/T, so 50 uT precesses at 1.40125 MHz
        f = atoms.larmor_angular_frequency(50e-6) / (2 * np.pi)
        assert f == pytest.approx(1.40125e6, rel=1e-4)

    def test_round_trip_property(self):
        rng = np.random.default_rng(91)
        for b in rng.uniform(0.0, 1e-3, size=1000):
            f = atoms.larmor_angular_frequency(b) / (2 * np.pi)
            back = atoms.b_field_from_precession(f)
            assert abs(back - b) <= 1e-12 * max(b, 1e-30)

    def test_negative_inputs_raise(self):
        with pytest.raises(DomainError):
            atoms.larmor_angular_frequency(-1e-6)
        with pytest.raises(DomainError):
            atoms.b_field_from_precession(-1.0)


class TestLambdaSystem:
    def test_defaults_valid(self):
        system = atoms.LambdaSystem()
        assert system.gamma31 > system.gamma_d >= 0
        assert system.lambda0 == pytest.approx(894.6e-9, rel=1e-3)

    def test_rate_ordering_enforced(self):
        with pytest.raises(DomainError):
            atoms.LambdaSystem(gamma31=1.0, gamma_d=2.0)

    def test_frequency_window_enforced(self):
        with pytest.raises(DomainError):
            atoms.LambdaSystem(nu0=CONST.c0 / 894e-9 * 1.02)


class TestVaporState:
    def test_mean_speed_identity(self):
        vapor = atoms.VaporState(temperature=347.15)
        expected = np.sqrt(8 * CONST.kB * 347.15 / (np.pi * CONST.m_cs))
        assert vapor.mean_speed == pytest.approx(expected, rel=1e-12)

    def test_density_defaults_to_curve(self):
        vapor = atoms.VaporState(temperature=347.15)
        assert vapor.density == atoms.vapor_density(347.15)
        assert vapor.effective_density == vapor.density

    def test_density_scale_positive(self):
        with pytest.raises(DomainError):
            atoms.VaporState(temperature=300.0, density_scale=0.0)
        vapor = atoms.VaporState(temperature=300.0, density_scale=0.5)
        assert vapor.effective_density == pytest.approx(0.5 * vapor.density)
