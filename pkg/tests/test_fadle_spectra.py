import time

import numpy as np
import pytest

from sectorsum.core_grids import Params
from sectorsum.exceptions import ConfigurationError, DomainError
from sectorsum.fadle_spectra import (RootTable, check_condition, default_eps0,
                                     eigenvalues_of_minus_l2, find_roots, in_pi_mu,
                                     in_sigma_l1, operator_eigenvalues, separation_report,
                                     spectral_constants, tau_of)
from sectorsum.resolvent_theta import u_factors

TAU = 4.21239


def test_first_root(table):
    z1 = table.roots[0]
    assert z1 == pytest.approx(2.2507286116 + 4.2123922305j, abs=1e-9)
    assert table.branch_tags[0] == "+"
    assert abs(z1.imag - TAU) < 1e-4


def test_single_root_request():
    t = find_roots(1)
    assert abs(abs(t.roots[0].imag) - TAU) < 1e-4


def test_roots_are_roots(table):
    for z, tag in zip(table.roots, table.branch_tags):
        sign = 1 if tag == "+" else -1
        assert abs(np.sinh(z) + sign * z) < 1e-9 * abs(np.cosh(z))
    assert np.all(np.diff(np.abs(table.roots)) > 0)
    assert np.all(table.roots.real > 0) and np.all(table.roots.imag > 0)


def test_branches_alternate(table):
    assert table.branch_tags[:4] == ("+", "-", "+", "-")


def test_tau(table):
    assert abs(tau_of(table) - TAU) < 1e-4
    assert tau_of(table) == abs(table.roots[0].imag)


def test_tau_synthetic():
    assert tau_of(RootTable(np.array([1 + 2j]), ("+",), np.zeros(1))) == 2.0


def test_tau_empty():
    with pytest.raises(ConfigurationError):
        tau_of(RootTable(np.array([], dtype=complex), (), np.zeros(0)))


def test_runtime_ten_roots():
    start = time.perf_counter()
    find_roots(10)
    assert time.perf_counter() - start < 5


def test_invalid_count():
    with pytest.raises(ConfigurationError):
        find_roots(0)


def test_minus_l2_eigenvalues(table):
    lam = eigenvalues_of_minus_l2(table, np.pi)
    assert lam[0] == pytest.approx(-table.roots[0] ** 2 / np.pi ** 2)


def test_minus_l2_filters_positive_axis():
    omega = 1.3
    t = RootTable(np.array([1j * omega, 2 + 3j]), ("+", "-"), np.zeros(2))
    lam = eigenvalues_of_minus_l2(t, omega)
    assert len(lam) == 1


class TestGate:
    def test_pi_mu_one(self, table):
        assert check_condition(np.pi, 1, table)

    def test_two_pi_mu_three(self, table):
        assert not check_condition(2 * np.pi, 3, table)

    @pytest.mark.parametrize("omega", [0.1, 1.0, 2 * np.pi])
    def test_mu_zero(self, table, omega):
        assert check_condition(omega, 0, table)


class TestRegions:
    def test_pi_mu_inside(self):
        assert in_pi_mu(4.0, 1.0)

    def test_pi_mu_vertex_excluded(self):
        assert not in_pi_mu(1.0, 1.0)

    def test_pi_mu_nonpositive_mu(self):
        for z in (1e-3, -5 + 1j, 3j):
            assert in_pi_mu(z, 0.0) and in_pi_mu(z, -2.0)

    def test_pi_mu_matches_sqrt(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            z = complex(*rng.uniform(-20, 20, 2))
            mu = rng.uniform(0.1, 3)
            assert in_pi_mu(z, mu) == (np.sqrt(z).real > mu)

    def test_pi_mu_branch_cut(self):
        with pytest.raises(DomainError):
            in_pi_mu(-2.0, 1.0)

    def test_sigma(self):
        c = spectral_constants(np.pi / 2, eps_l1=0.1)
        mu = 1.0
        assert in_sigma_l1(1 + 4 * mu ** 2 / np.sin(0.1) ** 2, mu, c)
        assert not in_sigma_l1(-1.0, mu, c)
        assert not in_sigma_l1(10.0, mu, c)


class TestOperatorEigenvalues:
    @pytest.mark.parametrize("omega", [np.pi / 4, np.pi / 2, np.pi])
    def test_zeros_of_boundary_factors(self, omega):
        for lam in operator_eigenvalues(omega, 6):
            U1, U2 = u_factors(lam, omega)
            assert min(abs(U1), abs(U2)) < 1e-8

    def test_half_plane_eps0(self):
        assert default_eps0(np.pi) == pytest.approx(0.5, abs=1e-8)
        assert default_eps0(np.pi / 2) == pytest.approx(4.3788, abs=1e-3)


class TestSeparation:
    def test_gate_passes_separated(self, table):
        rep = separation_report(Params(omega=np.pi / 2, mu=2.0), table,
                                spectral_constants(np.pi / 2))
        assert rep["gate"] and rep["separated_fadle"] and rep["separated_operator"]

    def test_gate_fails_flagged(self, table):
        rep = separation_report(Params(omega=np.pi, mu=2.0), table, spectral_constants(np.pi))
        assert not rep["gate"] and rep["min_fadle_margin"] <= 0

    def test_nonpositive_mu_closed_form(self, table):
        omega = 1.1
        rep = separation_report(Params(omega=omega, mu=-0.5), table, spectral_constants(omega))
        assert np.allclose(rep["fadle_margin"], np.abs(table.roots.imag) / omega)
