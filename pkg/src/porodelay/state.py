"""Grid layout and the discrete state vector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform x-grid of N interior nodes and y-grid of M nodes on [0, 1].

    x_i = i*h for i = 1..N (boundary values are implicit zeros) and
    y_j = j*dy for j = 0..M-1.
    """

    N: int
    M: int

    @property
    def h(self) -> float:
        return 1.0 / (self.N + 1)

    @property
    def dy(self) -> float:
        return 1.0 / (self.M - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(1, self.N + 1) * self.h

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.M) * self.dy

    @property
    def size(self) -> int:
        """Length of the flat state vector (u, v, phi, psi, z at y_1..y_{M-1})."""
        return 4 * self.N + self.N * (self.M - 1)


def build_grid(N: int, M: int) -> GridSpec:
    if int(N) != N or N < 4:
        raise GridError(f"N must be an integer >= 4, got {N}")
    if int(M) != M or M < 3:
        raise GridError(f"M must be an integer >= 3, got {M}")
    return GridSpec(int(N), int(M))


@dataclass
class SimState:
    """Interior samples of (u, u_t, phi, phi_t) and the delay field z.

    z has shape (N, M); column 0 is the inflow value and always equals psi.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    z: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.u.shape[0]

    @property
    def M(self) -> int:
        return self.z.shape[1]

    @classmethod
    def zeros(cls, g: GridSpec, t: float = 0.0) -> "SimState":
        n = g.N
        return cls(t, np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n), np.zeros((n, g.M)))

    def copy(self) -> "SimState":
        return SimState(self.t, self.u.copy(), self.v.copy(), self.phi.copy(),
                        self.psi.copy(), self.z.copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.u, self.v, self.phi, self.psi, self.z[:, 1:].T.ravel()])

    @classmethod
    def unpack(cls, y: np.ndarray, g: GridSpec, t: float = 0.0) -> "SimState":
        n = g.N
        u, v, phi, psi = (y[k * n:(k + 1) * n].copy() for k in range(4))
        z = np.empty((n, g.M))
        z[:, 0] = psi
        z[:, 1:] = y[4 * n:].reshape(g.M - 1, n).T
        return cls(t, u, v, phi, psi, z)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(a), initial=0.0)
                         for a in (self.u, self.v, self.phi, self.psi, self.z)))


@dataclass
class StateDerivative:
    du: np.ndarray
    dv: np.ndarray
    dphi: np.ndarray
    dpsi: np.ndarray
    dz: np.ndarray  # (N, M); column 0 mirrors dpsi

    def pack(self) -> np.ndarray:
        return np.concatenate([self.du, self.dv, self.dphi, self.dpsi, self.dz[:, 1:].T.ravel()])


def pad(a: np.ndarray) -> np.ndarray:
    """Append the Dirichlet boundary zeros."""
    out = np.zeros(a.shape[0] + 2)
    out[1:-1] = a
    return out


def d2(a: np.ndarray, h: float) -> np.ndarray:
    """Three-point second difference with zero boundary values."""
    ap = pad(a)
    return (ap[2:] - 2.0 * ap[1:-1] + ap[:-2]) / (h * h)


def d1(a: np.ndarray, h: float) -> np.ndarray:
    """Central first difference at interior nodes with zero boundary values."""
    ap = pad(a)
    return (ap[2:] - ap[:-2]) / (2.0 * h)


def dcell(a: np.ndarray, h: float) -> np.ndarray:
    """Forward differences on the N+1 cells, boundary zeros included."""
    return np.diff(pad(a)) / h


@dataclass
class Trajectory:
    """Sampled output of a run: times, diagnostic series, optional snapshots."""

    times: np.ndarray
    series: dict[str, np.ndarray]
    states: list[SimState] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.series[name]
