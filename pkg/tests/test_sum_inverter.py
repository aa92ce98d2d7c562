import numpy as np
import pytest
from scipy.stats import unitary_group

from sectorsum.core_grids import (Field, Params, XFunction, field_norm, make_t_grid,
                                  make_theta_grid)
from sectorsum.exceptions import (ConfigurationError, PreconditionError,
                                  SpectralViolationError)
from sectorsum.fadle_spectra import spectral_constants
from sectorsum.perturbation_pipeline import forward
from sectorsum.sum_inverter import (apply_a, build_contour, invert_sum, make_contour,
                                    matrix_contour, matrix_oracle, separating_contour)

W = np.pi / 2


def commuting_pair(rng, d):
    """Random commuting sectorial pair sharing a non-normal similarity."""
    U = unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1)
    Q = U @ (np.eye(d) + 0.3 * rng.standard_normal((d, d)))
    A = np.zeros((d, d), complex)
    B = np.zeros((d, d), complex)
    i = 0
    while i < d:
        k = int(rng.integers(1, min(3, d - i) + 1))
        N = np.diag(np.ones(k - 1), 1)
        a = np.exp(rng.uniform(np.log(0.5), np.log(5))) * np.exp(1j * rng.uniform(-0.18, 0.18))
        b = np.exp(rng.uniform(np.log(0.5), np.log(5))) * np.exp(1j * rng.uniform(-2.5, 2.5))
        A[i:i + k, i:i + k] = a * np.eye(k) + 0.5 * N
        B[i:i + k, i:i + k] = b * np.eye(k) + rng.standard_normal() * 0.5 * N \
            + rng.standard_normal() * 0.5 * N @ N
        i += k
    Qi = np.linalg.inv(Q)
    return Q @ A @ Qi, Q @ B @ Qi


class TestContour:
    def test_default_theta0(self, table, consts_half):
        c = build_contour(Params(omega=W, mu=0.0), consts_half, table, n_nodes=64)
        assert c.theta0 == pytest.approx(0.25)

    def test_gate(self, table):
        P = Params(omega=np.pi, mu=2.0)
        with pytest.raises(SpectralViolationError):
            build_contour(P, spectral_constants(np.pi), table)

    def test_theta0_range(self, table, consts_half):
        with pytest.raises(ConfigurationError):
            build_contour(Params(omega=W), consts_half, table, theta0=0.1)

    def test_separates(self, table, consts_half):
        from sectorsum.fadle_spectra import operator_eigenvalues
        from sectorsum.resolvent_t import l1_admissible
        P = Params(omega=W, mu=2.0)
        c = build_contour(P, consts_half, table, n_nodes=64)
        assert not np.any(c.encloses(operator_eigenvalues(W, 24)))
        assert all(l1_admissible(z, P.mu) for z in c.quad_nodes)

    def test_node_count(self):
        with pytest.raises(ConfigurationError):
            make_contour(0.25, 1.0, n_nodes=12)

    def test_length_integral(self):
        # 1/(z - a)^2 has no residue; 1/((z - a)(z - b)) picks up the residue at
        # the enclosed point a = 0.3 only
        c = make_contour(0.25, 1.0, u_max=12.0, n_nodes=512)
        assert abs(np.sum(c.quad_weights / (c.quad_nodes - 10.0) ** 2)) < 1e-8
        z = c.quad_nodes
        total = np.sum(c.quad_weights / ((z - 0.3) * (z - 10.0)))
        assert abs(total) == pytest.approx(2 * np.pi / 9.7, rel=1e-8)


class TestMatrixOracle:
    def test_diagonal(self):
        out = matrix_oracle(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))
        assert np.abs(out - np.diag([0.25, 1 / 6])).max() < 1e-8

    def test_non_normal(self):
        M1 = np.array([[1.0, 1.0], [0.0, 1.0]])
        M2 = np.array([[2.0, 0.5], [0.0, 2.0]])
        assert np.abs(matrix_oracle(M1, M2) - np.linalg.inv(M1 + M2)).max() < 1e-6

    def test_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            M1, M2 = commuting_pair(rng, int(rng.integers(1, 9)))
            assert np.abs(matrix_oracle(M1, M2) - np.linalg.inv(M1 + M2)).max() < 1e-6

    def test_not_commuting(self):
        with pytest.raises(PreconditionError):
            matrix_oracle(np.array([[1.0, 1.0], [0.0, 2.0]]), np.array([[1.0, 0.0], [1.0, 2.0]]))

    def test_not_separated(self):
        c = matrix_contour(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))
        with pytest.raises(SpectralViolationError):
            matrix_oracle(np.diag([1.0, 2.0]), np.diag([-0.5, -0.5]), contour=c)

    def test_separating_requires_gap(self):
        with pytest.raises(SpectralViolationError):
            separating_contour([4.0], [-4.0 + 0j], n_nodes=64)

    def test_tail(self):
        M1, M2 = np.diag([1.0, 2.0]), np.diag([3.0, 4.0])
        base = matrix_contour(M1, M2)
        longer = make_contour(base.theta0, base.c0, base.b, base.beta, 2 * base.u_max,
                              2 * base.n, base.sign)
        assert np.abs(matrix_oracle(M1, M2, base) - matrix_oracle(M1, M2, longer)).max() < 1e-9


class TestApplyA:
    def test_zero(self):
        g = make_theta_grid(W, 32)
        out = apply_a(XFunction(np.zeros(32), np.zeros(32), g, in_domain=True))
        assert np.abs(out.psi1).max() == 0 and np.abs(out.psi2).max() == 0

    def test_bump(self):
        g = make_theta_grid(W, 64)
        x = g.nodes
        f = x ** 2 * (W - x) ** 2
        f_dd = 2 * (W - x) ** 2 - 8 * x * (W - x) + 2 * x ** 2
        out = apply_a(XFunction(f, np.zeros(64), g, in_domain=True))
        assert np.abs(out.psi1).max() == 0
        assert np.abs(out.psi2 + (24 + 2 * f_dd + f)).max() < 1e-6

    def test_flag(self):
        g = make_theta_grid(W, 32)
        with pytest.raises(PreconditionError):
            apply_a(XFunction(np.zeros(32), np.zeros(32), g))


@pytest.fixture(scope="module")
def setup(table, consts_half):
    P = Params(omega=W, mu=2.0, k=0.0)
    tg, th = make_t_grid(20, 48), make_theta_grid(W, 48)
    T, TH = np.meshgrid(tg.nodes, th.nodes, indexing="ij")
    b = TH ** 2 * (W - TH) ** 2
    V = Field(T ** 2 * np.exp(-T) * b, T ** 2 * np.exp(-1.5 * T) * b * np.cos(TH), tg, th)
    c = build_contour(P, consts_half, table, n_nodes=96)
    return P, V, c


class TestInvertSum:
    def test_zero(self, setup, consts_half):
        P, V, c = setup
        out = invert_sum(Field.zeros(V.tgrid, V.theta_grid), c, P, consts_half)
        assert field_norm(out) == 0

    def test_recovers_manufactured(self, setup, consts_half):
        P, V, c = setup
        info = {}
        out = invert_sum(forward(V, P), c, P, consts_half, info)
        assert field_norm(out - V) / field_norm(V) < 2e-2
        assert info["imag_ratio"] < 1e-6 and info["nodes"] == 96

    def test_workers_bit_identical(self, setup, consts_half):
        P, V, c = setup
        F = forward(V, P)
        a = invert_sum(F, c, P, consts_half, workers=1)
        b = invert_sum(F, c, P, consts_half, workers=3)
        assert np.array_equal(a.psi1, b.psi1) and np.array_equal(a.psi2, b.psi2)
