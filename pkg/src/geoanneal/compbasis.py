"""Computational (persistent-current) basis, profile functions A(s), B(s),
the basis change V(s), the transformed connection G^C and its Pauli form.

Per-qubit ordering is (down, up), with up = (|1> + |0>)/sqrt2 carrying
<phi> > 0. Multi-qubit states are Kronecker products, qubit 1 leftmost.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .circuits import IsingSpec
from .errors import (BadDimension, ModelDegeneracy, UndefinedAngle, ZeroCurrent, ZeroGap)
from .frame import fd_derivative, imaginary_hermitian
from .spectral import SpectralSlice

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_all(mats):
    return reduce(np.kron, mats)


def local_op(op, i, n):
    return kron_all([op if k == i else np.eye(2) for k in range(n)])


# --------------------------------------------------------------------------
# persistent-current basis and profiles


def persistent_current_basis(slc: SpectralSlice, phi: np.ndarray, tol: float = 1e-12):
    """(up, down) from the two lowest zero-bias states; up has <phi> > 0."""
    v0, v1 = slc.states[:, 0], slc.states[:, 1]
    up = (v1 + v0) / np.sqrt(2.0)
    down = (v1 - v0) / np.sqrt(2.0)
    cur = float(up @ (phi * up))
    if abs(cur) < tol:
        raise ZeroCurrent(f"<up|phi|up> = {cur:.3e} at s={slc.s:.6g}")
    if cur < 0:
        up, down = down, up
    return up, down


@dataclass
class ProfileFunctions:
    s: np.ndarray
    A: np.ndarray
    B: np.ndarray
    I_p: np.ndarray
    phi_x: np.ndarray
    script_I_p: Optional[np.ndarray] = None
    _spl: Dict[str, CubicSpline] = field(default_factory=dict, repr=False)

    def spline(self, name) -> CubicSpline:
        if name not in self._spl:
            self._spl[name] = CubicSpline(self.s, getattr(self, name), bc_type="natural")
        return self._spl[name]

    @property
    def A_dot(self):
        return self.spline("A")(self.s, 1)

    @property
    def B_dot(self):
        return self.spline("B")(self.s, 1)

    def model_gap(self):
        return 2.0 * np.hypot(self.A, self.B)


def transverse_profile(slc: SpectralSlice, up, down, H0) -> float:
    """A = <up|H(phi_x = 0)|down>."""
    return float(up @ (H0.matrix @ down))


# --------------------------------------------------------------------------
# model Hamiltonian and V(s)


def model_hamiltonian(A, B, ising: IsingSpec) -> np.ndarray:
    """A sum_i X_i + B (sum_i h_i Z_i + sum_(ij) J_ij Z_i Z_j) (realised couplings)."""
    n = ising.n_qubits
    X = sum(local_op(PAULI["X"].real, i, n) for i in range(n))
    Z = problem_matrix(ising)
    return A * X + B * Z


def driver_matrix(n) -> np.ndarray:
    return sum(local_op(PAULI["X"].real, i, n) for i in range(n))


def problem_matrix(ising: IsingSpec) -> np.ndarray:
    n = ising.n_qubits
    Z = np.zeros((2 ** n, 2 ** n))
    for i, h in enumerate(ising.local_fields):
        Z += h * local_op(PAULI["Z"].real, i, n)
    for i, j, J in ising.couplings:
        Z += J * local_op(PAULI["Z"].real, i, n) @ local_op(PAULI["Z"].real, j, n)
    return Z


def single_qubit_V(A: float, B: float) -> np.ndarray:
    """exp[(i/2) arctan(A/B) sigma_y] as a real rotation.

    arctan2 extends arctan(A/B) continuously through B = 0.
    """
    if A == 0 and B == 0:
        raise UndefinedAngle("A = B = 0")
    theta = 0.5 * np.arctan2(A, B)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def single_qubit_theta(A, B, A_dot, B_dot):
    theta = 0.5 * np.arctan2(A, B)
    theta_dot = 0.5 * (A_dot * B - A * B_dot) / (A ** 2 + B ** 2)
    return theta, theta_dot


def sign_continuous(V: np.ndarray, ref: Optional[np.ndarray]) -> np.ndarray:
    if ref is None:
        idx = np.argmax(np.abs(V), axis=0)
        signs = np.sign(V[idx, np.arange(V.shape[1])])
    else:
        signs = np.sign(np.einsum("ia,ia->a", ref, V))
    signs[signs == 0] = 1.0
    return V * signs


def model_V(h_tilde: np.ndarray, A: float, B: float, ising: IsingSpec,
            prev_V: Optional[np.ndarray] = None, degeneracy: float = 1e-8):
    """Columns are the ascending real eigenvectors of the model Hamiltonian.

    Returns (V, residual) with residual = max_a |lambda_a - E_a - c|, c fixed by
    trace matching.
    """
    H = model_hamiltonian(A, B, ising)
    lam, vec = np.linalg.eigh(H)
    if np.min(np.diff(lam)) < degeneracy:
        raise ModelDegeneracy(f"model spacing {np.min(np.diff(lam)):.3e} GHz")
    V = sign_continuous(vec, prev_V)
    E = np.diag(h_tilde)
    c = lam.mean() - E.mean()
    return V, float(np.max(np.abs(lam - E - c)))


two_qubit_V = model_V


def gap_ratios(E_exact: np.ndarray, A, B, ising: IsingSpec) -> np.ndarray:
    """Delta_{k,0}(exact) / Delta_{k,0}(model) for k >= 1, per grid point."""
    out = []
    for E, a, b in zip(np.atleast_2d(E_exact), np.atleast_1d(A), np.atleast_1d(B)):
        lam = np.linalg.eigvalsh(model_hamiltonian(a, b, ising))
        out.append((E[1:] - E[0]) / (lam[1:] - lam[0]))
    return np.array(out)


def align_signs(V0: np.ndarray, overlaps: np.ndarray) -> np.ndarray:
    """Column signs D making V0 agree with physical overlaps X_ab = <a|c_b>."""
    d = np.sign(np.einsum("ba,ab->a", V0, overlaps))
    d[d == 0] = 1.0
    return d


class VField:
    """V(s) and dV/ds anywhere in [0, 1] from spline profiles.

    One qubit uses the closed-form rotation times the constant column signs
    ``col_signs``. More qubits use model eigenvectors, sign-matched to the
    aligned grid values ``node_V``, with the first-order perturbative derivative.
    """

    def __init__(self, profiles: ProfileFunctions, ising: IsingSpec, col_signs=None,
                 node_V: Optional[np.ndarray] = None):
        self.profiles = profiles
        self.ising = ising
        self.n = ising.n_qubits
        self.col_signs = np.ones(2 ** self.n) if col_signs is None else np.asarray(col_signs, float)
        if self.n > 1 and node_V is None:
            raise ValueError("node_V is required for more than one qubit")
        self.node_V = node_V
        self._A = profiles.spline("A")
        self._B = profiles.spline("B")
        self._X = driver_matrix(self.n)
        self._Z = problem_matrix(ising)

    def __call__(self, s):
        return self.value_and_derivative(s)[0]

    def value_and_derivative(self, s):
        A, B = float(self._A(s)), float(self._B(s))
        Ad, Bd = float(self._A(s, 1)), float(self._B(s, 1))
        if self.n == 1:
            th, thd = single_qubit_theta(A, B, Ad, Bd)
            c, sn = np.cos(th), np.sin(th)
            V = np.array([[c, sn], [-sn, c]])
            Vd = thd * np.array([[-sn, c], [-c, -sn]])
            return V * self.col_signs, Vd * self.col_signs
        lam, vec = np.linalg.eigh(A * self._X + B * self._Z)
        j = int(np.argmin(np.abs(self.profiles.s - s)))
        V = sign_continuous(vec, self.node_V[j])
        M = V.T @ (Ad * self._X + Bd * self._Z) @ V
        dl = lam[None, :] - lam[:, None]
        np.fill_diagonal(dl, np.inf)
        return V, V @ (M / dl)


# --------------------------------------------------------------------------
# connection transform and Pauli form


def connection_transform(G: np.ndarray, V: np.ndarray, V_dot: np.ndarray) -> np.ndarray:
    """V G V^T + i V dV^T / ds for real V, projected to imaginary Hermitian."""
    return imaginary_hermitian(V @ G @ V.T + 1j * V @ V_dot.T)


def transform_G(G: np.ndarray, V: np.ndarray, s_grid) -> np.ndarray:
    """G^C on the grid; dV/ds by second-order differences of V entries."""
    V_dot = fd_derivative(V, s_grid)
    return np.array([connection_transform(g, v, vd) for g, v, vd in zip(G, V, V_dot)])


def pauli_labels(n):
    return ["".join(p) for p in product("IXYZ", repeat=n)]


@dataclass
class PauliDecomposition:
    coefficients: Dict[str, float]

    @property
    def n_qubits(self) -> int:
        return len(next(iter(self.coefficients)))

    def matrix(self) -> np.ndarray:
        return sum(c * kron_all([PAULI[ch] for ch in label]) for label, c in self.coefficients.items())

    def odd_y(self) -> Dict[str, float]:
        return {k: v for k, v in self.coefficients.items() if k.count("Y") % 2 == 1}

    def even_y(self) -> Dict[str, float]:
        return {k: v for k, v in self.coefficients.items() if k.count("Y") % 2 == 0}


def pauli_decompose(M: np.ndarray, *, imag_tol: float = 1e-10) -> PauliDecomposition:
    """c_P = Tr(P M) / N for every Pauli string. Coefficients of Hermitian M are real."""
    M = np.asarray(M)
    N = M.shape[0]
    if M.shape != (N, N) or N < 2 or N & (N - 1):
        raise BadDimension(f"expected a 2^n square matrix, got shape {M.shape}")
    n = N.bit_length() - 1
    coeffs = {}
    for label in pauli_labels(n):
        P = kron_all([PAULI[ch] for ch in label])
        c = np.trace(P @ M) / N
        if abs(c.imag) > imag_tol * max(1.0, np.abs(M).max()):
            raise BadDimension(f"matrix is not Hermitian (coefficient {label} = {c})")
        coeffs[label] = float(c.real)
    return PauliDecomposition(coeffs)


def analytic_gy(g, A, B, A_dot, B_dot, Delta):
    """g^y = g + (2 / Delta^2)(A_dot B - A B_dot), Delta the model gap 2 sqrt(A^2 + B^2)."""
    Delta = np.asarray(Delta, dtype=float)
    if np.any(Delta <= 0):
        raise ZeroGap("Delta must be positive")
    return g + 2.0 / Delta ** 2 * (A_dot * B - A * B_dot)


def comp_state_labels(n) -> list:
    """Labels of the computational states in matrix order, e.g. ['dd', 'du', 'ud', 'uu']."""
    return ["".join(p) for p in product("du", repeat=n)]
