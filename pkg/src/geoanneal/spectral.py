"""Lowest eigenpairs, real-gauge fixing and s-sweeps of the discretized Hamiltonians."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence

from .discretization import SparseOperator
from .errors import AmbiguousOverlap, DegenerateSubspace, GeoAnnealError, NoConvergence

log = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 1e-8  # GHz
RESIDUAL_TOL = 1e-9
OVERLAP_THRESHOLD = 0.5


@dataclass
class SpectralSlice:
    s: float
    energies: np.ndarray            # (k,) GHz ascending
    states: np.ndarray              # (dim, k) real, orthonormal columns
    aux: Dict[str, np.ndarray] = field(default_factory=dict)
    margin: float = np.nan          # E_k - E_{k-1}
    residual: float = np.nan        # max_a ||H v - E v|| / ||H||

    @property
    def k(self) -> int:
        return len(self.energies)

    def orthonormality_error(self) -> float:
        gram = self.states.T @ self.states
        return float(np.max(np.abs(gram - np.eye(self.k))))

    def flipped(self, signs) -> "SpectralSlice":
        return replace(self, states=self.states * np.asarray(signs, dtype=float))


def lowest_eigenpairs(H: SparseOperator, k: int, tol: float = RESIDUAL_TOL, *,
                      extra: int = 1, maxiter: Optional[int] = None,
                      degeneracy: float = DEGENERACY_THRESHOLD):
    """Lowest ``k`` eigenpairs by shift-invert Lanczos.

    The shift sits just below the Gershgorin lower bound so the wanted
    eigenvalues are the largest-magnitude ones of the inverted operator.
    Returns (energies[k], vectors[:, k], next_energy, relative_residual).
    """
    dim = H.dimension
    if not 0 < k < dim:
        raise ValueError(f"need 0 < k < dimension, got k={k}, dim={dim}")
    nev = min(k + extra, dim - 1)
    lower = H.lower_bound()
    sigma = lower - max(1.0, 1e-3 * abs(lower))
    # fixed start vector: ARPACK's random default makes reruns differ at round-off,
    # which finite differences of the states then amplify
    v0 = np.random.default_rng(dim).standard_normal(dim)
    try:
        w, v = sla.eigsh(H.matrix.tocsc(), k=nev, sigma=sigma, which="LM", tol=0.0,
                         maxiter=maxiter or 50 * dim, v0=v0)
    except ArpackNoConvergence as exc:
        raise NoConvergence(f"Lanczos did not converge ({len(exc.eigenvalues)} of {nev} pairs)") from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    energies, vectors = w[:k], np.ascontiguousarray(v[:, :k])
    nxt = float(w[k]) if nev > k else np.nan

    gaps = np.diff(energies)
    if gaps.size and gaps.min() < degeneracy:
        a = int(np.argmin(gaps))
        raise DegenerateSubspace(f"levels {a} and {a + 1} within {gaps[a]:.3e} GHz")
    norm = H.norm_bound()
    res = np.linalg.norm(H.matrix @ vectors - vectors * energies, axis=0).max() / norm
    if res > tol:
        raise NoConvergence(f"eigen-residual {res:.2e} exceeds {tol:.1e} * ||H||")
    return energies, vectors, nxt, float(res)


def dense_eigenpairs(H: SparseOperator, k: int):
    """Full LAPACK diagonalization; oracle for small meshes."""
    w, v = np.linalg.eigh(H.dense())
    return w[:k], v[:, :k]


def _anchor_signs(states: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(states), axis=0)
    signs = np.sign(states[idx, np.arange(states.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def fix_gauge(slices: Sequence[SpectralSlice], *, threshold: float = OVERLAP_THRESHOLD,
              anchor: Optional[np.ndarray] = None) -> List[SpectralSlice]:
    """Make consecutive overlaps <a(s_j)|a(s_j+1)> positive.

    The first slice is the anchor: each state's largest-magnitude component is
    made positive, or ``anchor`` signs are applied instead.
    """
    if not slices:
        return []
    first = slices[0]
    signs = _anchor_signs(first.states) if anchor is None else np.asarray(anchor, dtype=float)
    out = [first.flipped(signs) if np.any(signs < 0) else first]
    for j in range(1, len(slices)):
        prev, cur = out[-1], slices[j]
        overlaps = np.einsum("ia,ia->a", prev.states, cur.states)
        weak = np.abs(overlaps) < threshold
        if weak.any():
            a = int(np.argmax(weak))
            raise AmbiguousOverlap(
                f"|<{a}(s={prev.s:.6g})|{a}(s={cur.s:.6g})>| = {abs(overlaps[a]):.3f} < {threshold}",
                interval=(j - 1, j), state=a)
        flip = np.where(overlaps < 0, -1.0, 1.0)
        out.append(cur.flipped(flip) if np.any(flip < 0) else cur)
    return out


def _solve_all(solve: Callable[[float], SpectralSlice], s_values, workers: int):
    def run(s):
        try:
            return solve(float(s))
        except GeoAnnealError as exc:
            head = exc.args[0] if exc.args else ""
            exc.args = (f"at s={s:.6g}: {head}",) + tuple(exc.args[1:])
            raise

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, s_values))
    return [run(s) for s in s_values]


def spectral_sweep(solve: Callable[[float], SpectralSlice], s_grid, *, workers: int = 1,
                   max_refinements: int = 3, anchor=None) -> List[SpectralSlice]:
    """Solve on every grid point, then gauge-fix.

    When two neighbours cannot be matched the interval is bisected (up to
    ``max_refinements`` times per original interval) and the pass is retried.
    """
    s_values = list(np.asarray(s_grid, dtype=float))
    slices = _solve_all(solve, s_values, workers)
    depth = [0] * len(slices)  # refinement depth of the interval to the right
    while True:
        try:
            return fix_gauge(slices, anchor=anchor)
        except AmbiguousOverlap as exc:
            j0, j1 = exc.interval
            if depth[j0] >= max_refinements:
                raise
            mid = 0.5 * (slices[j0].s + slices[j1].s)
            log.info("refining s-interval [%g, %g]", slices[j0].s, slices[j1].s)
            new = _solve_all(solve, [mid], 1)[0]
            d = depth[j0] + 1
            slices.insert(j1, new)
            depth[j0] = d
            depth.insert(j1, d)
