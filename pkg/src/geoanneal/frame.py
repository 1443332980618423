"""Instantaneous-eigenbasis frame: H~(s), the geometric term G(s) and H_eff(s)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .circuits import Kappa
from .discretization import SparseOperator
from .errors import DegenerateSubspace
from .spectral import DEGENERACY_THRESHOLD, SpectralSlice


@dataclass
class EffectiveFrame:
    s: float
    h_tilde: np.ndarray     # (N, N) real diagonal, GHz
    G: np.ndarray           # (N, N) Hermitian, purely imaginary
    kappa_dot: float

    @property
    def energies(self) -> np.ndarray:
        return np.diag(self.h_tilde).copy()


def fd_weights(s, j):
    """Three-point second-order first-derivative weights at node j.

    Returns (indices, weights); central on the interior, one-sided at the ends.
    Works on nonuniform grids.
    """
    s = np.asarray(s, dtype=float)
    n = len(s)
    if n < 3:
        raise ValueError("need at least three grid points")
    if j == 0:
        h1, h2 = s[1] - s[0], s[2] - s[1]
        w = (-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2)))
        return (0, 1, 2), w
    if j == n - 1:
        h1, h2 = s[-2] - s[-3], s[-1] - s[-2]
        w = (h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (2 * h2 + h1) / (h2 * (h1 + h2)))
        return (n - 3, n - 2, n - 1), w
    h1, h2 = s[j] - s[j - 1], s[j + 1] - s[j]
    w = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))
    return (j - 1, j, j + 1), w


def fd_derivative(values, s):
    """Second-order derivative along axis 0 of an array sampled on ``s``."""
    values = np.asarray(values)
    out = np.empty_like(values)
    for j in range(len(s)):
        idx, w = fd_weights(s, j)
        out[j] = w[0] * values[idx[0]] + w[1] * values[idx[1]] + w[2] * values[idx[2]]
    return out


def imaginary_hermitian(M) -> np.ndarray:
    """Projection (M + M^dag)/2 of i * (real matrix) onto purely imaginary Hermitian form."""
    M = np.asarray(M)
    return 0.5 * (M + M.conj().T)


def geometric_term(slices: Sequence[SpectralSlice], j: int) -> np.ndarray:
    """G_ab(s_j) = <a| i d/ds |b> by finite differences of the gauge-fixed states."""
    s = np.array([sl.s for sl in slices])
    idx, w = fd_weights(s, j)
    deriv = sum(wk * slices[i].states for i, wk in zip(idx, w))
    overlap = slices[j].states.T @ deriv
    return imaginary_hermitian(1j * overlap)


def geometric_terms(slices: Sequence[SpectralSlice]) -> np.ndarray:
    return np.array([geometric_term(slices, j) for j in range(len(slices))])


def hellmann_feynman_G(slc: SpectralSlice, dH_ds: SparseOperator,
                       degeneracy: float = DEGENERACY_THRESHOLD) -> np.ndarray:
    """Off-diagonal G_ab = i <a|dH/ds|b> / (E_b - E_a); diagonal zero."""
    E = slc.energies
    gap = E[None, :] - E[:, None]
    off = ~np.eye(len(E), dtype=bool)
    if np.any(np.abs(gap[off]) < degeneracy):
        raise DegenerateSubspace(f"tracked levels closer than {degeneracy} GHz at s={slc.s:.6g}")
    X = slc.states.T @ (dH_ds.matrix @ slc.states)
    G = np.zeros(X.shape, dtype=complex)
    G[off] = 1j * X[off] / gap[off]
    return G


def build_frames(slices: Sequence[SpectralSlice], kappa: Kappa) -> List[EffectiveFrame]:
    G = geometric_terms(slices)
    s = np.array([sl.s for sl in slices])
    kd = kappa.d1(s)
    return [EffectiveFrame(sl.s, np.diag(sl.energies), Gj, float(k))
            for sl, Gj, k in zip(slices, G, kd)]


def effective_hamiltonian(frame: EffectiveFrame, t_f: float, include_G: bool = True) -> np.ndarray:
    H = t_f * frame.kappa_dot * frame.h_tilde.astype(complex)
    if include_G:
        H = H - frame.G
    return H


def frame_arrays(frames: Sequence[EffectiveFrame]):
    """(s, energies[M, N], G[M, N, N], kappa_dot[M])."""
    s = np.array([f.s for f in frames])
    E = np.array([f.energies for f in frames])
    G = np.array([f.G for f in frames])
    kd = np.array([f.kappa_dot for f in frames])
    return s, E, G, kd


def max_frame_deviation(frames_a: Sequence[EffectiveFrame], frames_b: Sequence[EffectiveFrame]) -> float:
    """max_s ||G_a(s) - G_b(s)||_2 over a shared grid."""
    sa = np.array([f.s for f in frames_a])
    sb = np.array([f.s for f in frames_b])
    if sa.shape != sb.shape or np.any(sa != sb):
        raise ValueError("frames must share the s-grid")
    return max(float(np.linalg.norm(a.G - b.G, 2)) for a, b in zip(frames_a, frames_b))


def structure_errors(G: np.ndarray) -> dict:
    """Largest violations of Hermiticity, imaginarity and zero diagonal."""
    G = np.asarray(G)
    herm = np.abs(G - np.swapaxes(G.conj(), -1, -2)).max()
    real = np.abs(G.real).max()
    diag = np.abs(np.diagonal(G, axis1=-2, axis2=-1)).max()
    return {"hermitian": float(herm), "real_part": float(real), "diagonal": float(diag)}
