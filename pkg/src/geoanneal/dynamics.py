"""Propagation of the N-level effective Schrodinger equation i dpsi/ds = H(s) psi.

Generators
----------
SplineGenerator
    instantaneous frame, t_f kappa'(s) H~(s) - G(s) with entry-wise natural
    cubic splines of H~ and G between grid points.
RotatedGenerator
    computational frame, V H_eff V^T + i V' V^T with V(s) from the profile
    splines (exact rotation of the spline generator).
Reparametrized
    kappa'(s) H_a(kappa(s)), the same physical protocol in a new parameter.

The identity part of H~ is removed by default; it only contributes a global
phase, which cancels in populations and fidelities.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import _dp45_py
from .circuits import IDENTITY, Kappa
from .errors import MismatchedRuns, StepFailure, ValidationError

log = logging.getLogger(__name__)

try:
    from . import _dp45 as _compiled
except ImportError:  # pragma: no cover - exercised when the extension is not built
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None
RTOL = 1e-9
ATOL = 1e-12

INSTANTANEOUS = "instantaneous"
COMPUTATIONAL = "computational"


def default_backend() -> str:
    return "compiled" if COMPILED_AVAILABLE else "python"


# --------------------------------------------------------------------------
# generators


class SplineGenerator(_dp45_py.PiecewiseCubic):
    """t_f kappa'(s) H~(s) - G(s) (or without G) as a piecewise cubic."""

    def __init__(self, s, energies, G, t_f, kappa: Kappa = IDENTITY, include_G=True,
                 subtract_mean=True):
        s = np.asarray(s, dtype=float)
        energies = np.asarray(energies, dtype=float)
        M, N = energies.shape
        if t_f < 0:
            raise ValidationError("t_f", "must be non-negative")
        diag = energies - energies.mean(axis=1, keepdims=True) if subtract_mean else energies
        D = np.zeros((M, N, N), dtype=complex)
        D[:, np.arange(N), np.arange(N)] = diag
        f_spl = CubicHermiteSpline(s, t_f * kappa.d1(s), t_f * kappa.d2(s))
        D_spl = CubicSpline(s, D, axis=0, bc_type="natural")
        E = -np.asarray(G, dtype=complex) if include_G else np.zeros((M, N, N), dtype=complex)
        E_spl = CubicSpline(s, E, axis=0, bc_type="natural")
        super().__init__(s, f_spl.c, D_spl.c, E_spl.c)
        self.t_f = t_f
        self.kappa = kappa
        self.include_G = include_G
        self._D_spl, self._E_spl, self._f_spl = D_spl, E_spl, f_spl

    def parts(self, s):
        """(t_f kappa'(s), H~(s) - mean, -G(s)) at s."""
        return float(self._f_spl(s)), self._D_spl(s), self._E_spl(s)


class RotatedGenerator:
    """Computational-frame generator obtained from an instantaneous one and V(s)."""

    def __init__(self, inst: SplineGenerator, vfield, include_G=True):
        self.inst = inst
        self.vfield = vfield
        self.include_G = include_G
        self.t_f = inst.t_f
        self.n = inst.n

    def __call__(self, s):
        f, D, E = self.inst.parts(s)
        V, Vd = self.vfield.value_and_derivative(s)
        H = f * (V @ D @ V.T)
        if self.include_G:
            H = H + V @ E @ V.T + 1j * (Vd @ V.T)
        return H


class Reparametrized:
    """H_b(s) = kappa'(s) H_a(kappa(s))."""

    def __init__(self, base: Callable, kappa: Kappa):
        self.base = base
        self.kappa = kappa
        self.n = base.n
        self.t_f = getattr(base, "t_f", None)

    def __call__(self, s):
        return float(self.kappa.d1(s)) * self.base(float(self.kappa.value(s)))


# --------------------------------------------------------------------------
# propagation


@dataclass
class Trajectory:
    s: np.ndarray
    states: np.ndarray          # (len(s), N) complex
    basis: str
    include_G: bool
    t_f: float
    info: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


def propagate(generator, initial, s_out=None, *, t_f=None, include_G=True, basis=INSTANTANEOUS,
              backend="auto", rtol=RTOL, atol=ATOL) -> Trajectory:
    """Integrate from s_out[0] (default 0) to s_out[-1] (default 1).

    ``backend`` is "compiled", "python" or "auto"; callables other than a
    SplineGenerator always use the Python kernel.
    """
    s_out = np.linspace(0.0, 1.0, 101) if s_out is None else np.asarray(s_out, dtype=float)
    y0 = np.asarray(initial, dtype=complex)
    if abs(np.linalg.norm(y0) - 1.0) > 1e-12:
        raise ValidationError("initial", "initial state must be normalized")
    if backend not in ("auto", "compiled", "python"):
        raise ValidationError("backend", f"unknown backend {backend!r}")
    piecewise = isinstance(generator, _dp45_py.PiecewiseCubic)
    if backend == "compiled" and not (COMPILED_AVAILABLE and piecewise):
        raise ValidationError("backend", "compiled kernel unavailable for this generator")
    use_compiled = piecewise and COMPILED_AVAILABLE and backend != "python"
    if use_compiled:
        states, info = _compiled.integrate(generator.x, generator.f_c, generator.D_c, generator.E_c,
                                           y0, s_out, rtol, atol)
        info["backend"] = "compiled"
    else:
        states, info = _dp45_py.integrate(generator, y0, s_out, rtol, atol)
        info["backend"] = "python"
    if info["status"] != 0:
        reason = "step size underflow" if info["status"] == 1 else "step budget exhausted"
        raise StepFailure(f"{reason} at s={info['s_reached']:.6g}")
    if t_f is None:
        t_f = getattr(generator, "t_f", np.nan)
    return Trajectory(s_out, states, basis, include_G, t_f, info)


def populations(traj: Trajectory) -> np.ndarray:
    return traj.populations


def fidelity_series(traj_G: Trajectory, traj_noG: Trajectory) -> np.ndarray:
    if traj_G.basis != traj_noG.basis:
        raise MismatchedRuns(f"bases differ: {traj_G.basis} vs {traj_noG.basis}")
    if not np.isclose(traj_G.t_f, traj_noG.t_f):
        raise MismatchedRuns(f"t_f differs: {traj_G.t_f} vs {traj_noG.t_f}")
    if traj_G.s.shape != traj_noG.s.shape or np.any(traj_G.s != traj_noG.s):
        raise MismatchedRuns("sample points differ")
    if not np.allclose(traj_G.states[0], traj_noG.states[0], atol=1e-14):
        raise MismatchedRuns("initial states differ")
    return np.abs(np.einsum("ia,ia->i", traj_G.states.conj(), traj_noG.states)) ** 2


def to_computational(traj: Trajectory, vfield) -> Trajectory:
    """Map an instantaneous-frame trajectory with V(s) at every sample."""
    if traj.basis != INSTANTANEOUS:
        raise MismatchedRuns("trajectory is not in the instantaneous frame")
    states = np.array([vfield(s) @ psi for s, psi in zip(traj.s, traj.states)])
    return Trajectory(traj.s, states, COMPUTATIONAL, traj.include_G, traj.t_f, dict(traj.info))


def ground_state(n_levels) -> np.ndarray:
    psi = np.zeros(n_levels, dtype=complex)
    psi[0] = 1.0
    return psi


def run_pair(frames, t_f, *, basis=COMPUTATIONAL, s_out=None, backend="auto", rtol=RTOL, atol=ATOL):
    """With-G and without-G runs from the ground state in the requested frame.

    ``frames`` provides s, energies, G, kappa and (for the computational frame) vfield.
    """
    out = {}
    N = frames.energies.shape[1]
    for include_G in (True, False):
        inst = SplineGenerator(frames.s, frames.energies, frames.G, t_f, frames.kappa, include_G)
        if basis == INSTANTANEOUS:
            gen, psi0 = inst, ground_state(N)
        else:
            gen = RotatedGenerator(inst, frames.vfield, include_G)
            psi0 = frames.vfield(0.0) @ ground_state(N)
        out[include_G] = propagate(gen, psi0, s_out, t_f=t_f, include_G=include_G, basis=basis,
                                   backend=backend, rtol=rtol, atol=atol)
    return out[True], out[False]


def tf_sweep(systems: dict, t_f_list: Sequence[float], *, basis=COMPUTATIONAL, backend="auto",
             rtol=RTOL, atol=ATOL):
    """End-of-anneal fidelity per system and t_f.

    Returns (t_f array, {name: fidelity array}).
    """
    t_f = np.asarray(sorted(t_f_list), dtype=float)
    table = {}
    for name, frames in systems.items():
        vals = []
        for tf in t_f:
            a, b = run_pair(frames, tf, basis=basis, s_out=np.array([0.0, 1.0]), backend=backend,
                            rtol=rtol, atol=atol)
            vals.append(fidelity_series(a, b)[-1])
            log.info("%s t_f=%g fidelity=%.9f", name, tf, vals[-1])
        table[name] = np.array(vals)
    return t_f, table


def adiabatic_threshold(t_f, fidelity, level=0.999) -> Optional[float]:
    """Smallest swept t_f from which the fidelity stays above ``level``."""
    t_f = np.asarray(t_f)
    fidelity = np.asarray(fidelity)
    above = fidelity > level
    for i in range(len(t_f)):
        if above[i:].all():
            return float(t_f[i])
    return None
