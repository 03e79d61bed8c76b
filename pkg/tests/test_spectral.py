import numpy as np
import pytest

from porodelay import diagnostics as dg
from porodelay import solver, spectral
from porodelay.model import ForcingSpec, PhysicalParams
from porodelay.state import SimState, build_grid


def random_state(g, rng):
    s = SimState.zeros(g)
    for name in ("u", "v", "phi", "psi"):
        setattr(s, name, rng.standard_normal(g.N))
    s.z = rng.standard_normal((g.N, g.M))
    s.z[:, 0] = s.psi
    return s


@pytest.fixture(scope="module")
def gen():
    return spectral.assemble_generator(build_grid(40, 11), PhysicalParams())


class TestAssembly:
    def test_dimension(self):
        assert spectral.assemble_generator(build_grid(4, 3), PhysicalParams()).dim == 24

    @pytest.mark.parametrize("b", [0.5, -0.3])
    def test_matvec_matches_rhs(self, rng, b):
        g = build_grid(12, 7)
        p = PhysicalParams(rho=1.4, mu=0.8, J=0.6, delta=1.3, xi=1.1, b=b, mu1=0.7, mu2=0.3, tau=0.6)
        Gm = spectral.assemble_generator(g, p)
        for _ in range(5):
            s = random_state(g, rng)
            ref = solver.rhs(s, p, ForcingSpec.zero(), g).pack()
            np.testing.assert_allclose(Gm.A @ s.pack(), ref, rtol=0, atol=1e-13 * np.max(np.abs(ref)))

    def test_coupling_sign_flip(self):
        g = build_grid(6, 4)
        p = PhysicalParams(b=0.4)
        diff = spectral.assemble_generator(g, p).A - spectral.assemble_generator(g, p.replace(b=-0.4)).A
        n = g.N
        blk = lambda r, c: diff[r * n:(r + 1) * n, c * n:(c + 1) * n]
        mask = np.zeros_like(diff, dtype=bool)
        mask[n:2 * n, 2 * n:3 * n] = True  # v row, phi column
        mask[3 * n:4 * n, 0:n] = True      # psi row, u column
        assert np.all(diff[~mask] == 0.0)
        assert np.any(blk(1, 2) != 0) and np.any(blk(3, 0) != 0)

    def test_weight_matches_h_norm(self, rng):
        g = build_grid(10, 6)
        p = PhysicalParams(b=-0.7, eta=0.6)
        for quad in dg.QUADRATURES:
            cfg = dg.DiagnosticsConfig(quadrature=quad)
            Gm = spectral.assemble_generator(g, p, cfg)
            s = random_state(g, rng)
            U = s.pack()
            assert spectral.h_inner(Gm, U, U) == pytest.approx(dg.h_normsq(s, p, cfg), rel=1e-12)

    def test_weight_symmetric_positive(self, gen):
        np.testing.assert_array_equal(gen.Wh, gen.Wh.T)
        assert np.min(np.linalg.eigvalsh(gen.Wh)) > 0

    def test_resource_cap(self):
        with pytest.raises(spectral.ResourceCapError):
            spectral.assemble_generator(build_grid(1000, 5), PhysicalParams())


class TestDissipativity:
    def test_velocity_only_state(self, gen, rng):
        U = np.zeros(gen.dim)
        U[gen.grid.N:2 * gen.grid.N] = rng.standard_normal(gen.grid.N)
        assert abs(spectral.rayleigh_quotient(gen, U)) <= 1e-12

    def test_weak_delay(self):
        p = PhysicalParams(mu1=1.0, mu2=0.01, eta=1.0)
        Gm = spectral.assemble_generator(build_grid(40, 11), p)
        assert spectral.dissipativity_check(Gm, trials=200) <= 1e-8
        assert spectral.dissipativity_bound(Gm) <= 1e-8

    def test_random_quotients_below_exact_bound(self, gen):
        assert spectral.dissipativity_check(gen, trials=500) <= spectral.dissipativity_bound(gen) + 1e-12

    def test_eta_outside_window_is_reported(self):
        p = PhysicalParams(mu1=0.5, mu2=0.25, eta=1.5)
        bound = spectral.dissipativity_bound(spectral.assemble_generator(build_grid(20, 6), p))
        assert np.isfinite(bound)


class TestSpectrum:
    def test_uncoupled_wave_block(self):
        g = build_grid(30, 5)
        p = PhysicalParams(b=0.0, mu=2.0, rho=0.5)
        Gm = spectral.assemble_generator(g, p)
        n = g.N
        # with b = 0 the (u, v) rows close on themselves
        assert np.all(Gm.A[:2 * n, 2 * n:] == 0.0)
        lam = np.sort(np.linalg.eigvals(Gm.A[:2 * n, :2 * n]).imag)
        k = np.sqrt(p.mu / p.rho) * np.sqrt(spectral.laplacian_eigenvalues(n))
        np.testing.assert_allclose(lam, np.sort(np.concatenate([k, -k])), atol=1e-9)
        np.testing.assert_allclose(np.linalg.eigvals(Gm.A[:2 * n, :2 * n]).real, 0.0, atol=1e-9)

    def test_default_abscissa_negative(self, gen):
        sigma = spectral.spectral_abscissa(spectral.spectrum(gen))
        assert sigma < 0

    def test_laplacian_eigenvalues(self):
        n = 7
        h = 1.0 / (n + 1)
        D2 = (np.diag(-2 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
        np.testing.assert_allclose(np.sort(-np.linalg.eigvalsh(D2)), spectral.laplacian_eigenvalues(n), rtol=1e-12)
