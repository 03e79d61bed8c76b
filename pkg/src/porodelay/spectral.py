"""Dense generator matrix of the linear system and its spectral probes.

The matrix is assembled from explicit stencil matrices, independently of the
vectorised right-hand side in :mod:`porodelay.solver`; the two must agree on
every state. Unknown ordering matches ``SimState.pack``: u, v, phi, psi, then
z at y_1..y_{M-1} (each block of length N). The inflow z(., 0) = psi is
eliminated, so psi feeds the first z block directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .diagnostics import DiagnosticsConfig
from .model import PhysicalParams
from .state import GridSpec

MAX_DENSE_DIM = 5000


class ResourceCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorMatrix:
    A: np.ndarray
    Wh: np.ndarray
    grid: GridSpec
    params: PhysicalParams

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def _second_difference(n: int, h: float):
    return sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2


def _central_difference(n: int, h: float):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2.0 * h)


def _forward_difference(n: int, h: float):
    # (n+1) x n map from interior values to the cell gradients, boundary zeros implied
    return sp.diags([-np.ones(n), np.ones(n)], [-1, 0], shape=(n + 1, n)) / h


def assemble_generator(g: GridSpec, p: PhysicalParams,
                       cfg: DiagnosticsConfig = DiagnosticsConfig()) -> GeneratorMatrix:
    n, M = g.N, g.M
    dim = g.size
    if dim > MAX_DENSE_DIM:
        raise ResourceCapError(f"generator dimension {dim} exceeds the dense cap {MAX_DENSE_DIM}")
    h, dy = g.h, g.dy
    I = sp.identity(n)
    D2 = _second_difference(n, h)
    D1 = _central_difference(n, h)
    nz = M - 1
    cz = 1.0 / (p.tau * dy)

    blocks = [[None] * (4 + nz) for _ in range(4 + nz)]
    U, V, PHI, PSI = 0, 1, 2, 3
    Z = lambda j: 3 + j  # z at y_j, j = 1..M-1
    blocks[U][V] = I
    blocks[V][U] = (p.mu / p.rho) * D2
    blocks[V][PHI] = (p.b / p.rho) * D1
    blocks[PHI][PSI] = I
    blocks[PSI][PHI] = (p.delta / p.J) * D2 - (p.xi / p.J) * I
    blocks[PSI][U] = -(p.b / p.J) * D1
    blocks[PSI][PSI] = -(p.mu1 / p.J) * I
    blocks[PSI][Z(nz)] = -(p.mu2 / p.J) * I
    for j in range(1, nz + 1):
        blocks[Z(j)][Z(j)] = -cz * I
        blocks[Z(j)][PSI if j == 1 else Z(j - 1)] = cz * I
    for r in range(4 + nz):  # bmat needs one block per block-row to fix shapes
        if blocks[r][r] is None:
            blocks[r][r] = sp.csr_matrix((n, n))
    A = sp.bmat(blocks, format="csr").toarray()

    Dx = _forward_difference(n, h)
    lap = (Dx.T @ Dx).toarray()
    W = np.zeros((dim, dim))
    sl = lambda k: slice(k * n, (k + 1) * n)
    W[sl(U), sl(U)] = p.mu * h * lap
    W[sl(V), sl(V)] = p.rho * h * np.eye(n)
    W[sl(PHI), sl(PHI)] = p.delta * h * lap + p.xi * h * np.eye(n)
    W[sl(PSI), sl(PSI)] = p.J * h * np.eye(n)
    W[sl(PHI), sl(U)] = p.b * h * D1.toarray()
    W[sl(U), sl(PHI)] = p.b * h * D1.toarray().T
    zw = np.full(nz, dy)
    if cfg.quadrature == "trapezoid":
        zw[-1] = 0.5 * dy
        W[sl(PSI), sl(PSI)] += p.eta * h * 0.5 * dy * np.eye(n)
    for j in range(1, nz + 1):
        W[sl(Z(j)), sl(Z(j))] = p.eta * h * zw[j - 1] * np.eye(n)
    return GeneratorMatrix(A, W, g, p)


def h_inner(Gm: GeneratorMatrix, a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ Gm.Wh @ b)


def rayleigh_quotient(Gm: GeneratorMatrix, U: np.ndarray) -> float:
    """⟨AU, U⟩_H / ⟨U, U⟩_H."""
    return h_inner(Gm, Gm.A @ U, U) / h_inner(Gm, U, U)


def dissipativity_check(Gm: GeneratorMatrix, trials: int = 1000, seed: int = 0xC0FFEE) -> float:
    """Largest Rayleigh quotient over ``trials`` Gaussian random states."""
    rng = np.random.default_rng(seed)
    Us = rng.standard_normal((trials, Gm.dim))
    num = np.einsum("ki,ki->k", (Us @ Gm.A.T) @ Gm.Wh, Us)
    den = np.einsum("ki,ki->k", Us @ Gm.Wh, Us)
    return float(np.max(num / den))


def dissipativity_bound(Gm: GeneratorMatrix) -> float:
    """Exact sup of the Rayleigh quotient: top eigenvalue of the pencil (sym(W A), W).

    Needs W positive definite (b² < μξ).
    """
    S = Gm.Wh @ Gm.A
    S = 0.5 * (S + S.T)
    return float(scipy.linalg.eigh(S, Gm.Wh, eigvals_only=True, subset_by_index=[Gm.dim - 1, Gm.dim - 1])[0])


def spectrum(Gm: GeneratorMatrix) -> np.ndarray:
    return scipy.linalg.eigvals(Gm.A)


def spectral_abscissa(eigs: np.ndarray) -> float:
    return float(np.max(np.real(eigs)))


def laplacian_eigenvalues(N: int) -> np.ndarray:
    """Eigenvalues 4/h² sin²(kπh/2) of the Dirichlet three-point Laplacian."""
    h = 1.0 / (N + 1)
    k = np.arange(1, N + 1)
    return 4.0 / h**2 * np.sin(k * np.pi * h / 2.0) ** 2
