"""Static pipeline: spectra, profiles, frames and computational-basis quantities.

    zero-bias sweep -> up/down basis, A(s), I_p(s) -> phi_x(s) table
    biased sweep    -> gauge-fixed slices -> H~(s), G(s)
    profiles        -> V(s) -> G^C(s) -> Pauli coefficients
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import circuits as cm
from .circuits import CircuitParams, IsingSpec, PersistentCurrentTable, Schedule
from .compbasis import (PauliDecomposition, ProfileFunctions, VField, align_signs, gap_ratios,
                        kron_all, model_V, pauli_decompose, persistent_current_basis, transform_G)
from .discretization import (DEFAULT_DIMENSION_CAP, Mesh, SparseOperator, assemble_1q,
                             assemble_2q, cjj_half_width, cshunt_mesh, diagonal_operator)
from .errors import GeoAnnealError, ValidationError
from .frame import EffectiveFrame, build_frames, hellmann_feynman_G
from .spectral import SpectralSlice, lowest_eigenpairs, spectral_sweep

log = logging.getLogger(__name__)


def _stage(name):
    def deco(fn):
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except GeoAnnealError as exc:
                if exc.stage is None:
                    exc.with_stage(name)
                raise
        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper
    return deco


class CircuitSystem:
    family: str
    n_qubits: int

    def __init__(self, params: CircuitParams, sched: Schedule, mesh: Mesh, tol=1e-9):
        self.params = params
        self.sched = sched
        self.mesh = mesh
        self.tol = tol
        self.kinetic = cm.kinetic_coefficient(self.family, params)
        self.phi = mesh.nodes

    @property
    def levels(self) -> int:
        return 2 ** self.n_qubits

    # single-qubit zero-bias problem, shared by both families
    def zero_bias_operator(self, s) -> SparseOperator:
        raise NotImplementedError

    def zero_bias_slice(self, s) -> SpectralSlice:
        E, v, nxt, res = lowest_eigenpairs(self.zero_bias_operator(s), 2, self.tol)
        aux = {"phi": np.einsum("ia,i,ia->a", v, self.phi, v)}
        return SpectralSlice(s, E, v, aux, nxt - E[-1], res)

    def bias_current(self, s, up) -> float:
        raise NotImplementedError

    def biased_operator(self, s, phi_x) -> SparseOperator:
        raise NotImplementedError

    def biased_operator_ds(self, s, phi_x, phi_x_rate) -> SparseOperator:
        raise NotImplementedError

    def biased_slice(self, s, phi_x) -> SpectralSlice:
        E, v, nxt, res = lowest_eigenpairs(self.biased_operator(s, phi_x), self.levels, self.tol)
        return SpectralSlice(s, E, v, self.aux(v), nxt - E[-1], res)

    def aux(self, v) -> dict:
        return {}

    def comp_states(self, up, down) -> np.ndarray:
        pair = np.stack([down, up], axis=1)
        cols = []
        for idx in np.ndindex(*(2,) * self.n_qubits):
            cols.append(kron_all([pair[:, b] for b in idx]))
        return np.stack(cols, axis=1)

    def problem(self) -> IsingSpec:
        raise NotImplementedError


class CShuntQubit(CircuitSystem):
    family = "cshunt"
    n_qubits = 1

    def __init__(self, params: CircuitParams, sched: Schedule, mesh: Optional[Mesh] = None,
                 tol=1e-9, current_table: Optional[PersistentCurrentTable] = None):
        params.require("cshunt_scale")
        super().__init__(params, sched, mesh or cshunt_mesh(600), tol)
        self.current_table = current_table

    def zero_bias_operator(self, s):
        return assemble_1q(self.mesh, self.kinetic,
                           cm.cshunt_potential(self.phi, s, self.params, self.sched, 0.0))

    def biased_operator(self, s, phi_x):
        return assemble_1q(self.mesh, self.kinetic,
                           cm.cshunt_potential(self.phi, s, self.params, self.sched, phi_x))

    def biased_operator_ds(self, s, phi_x, phi_x_rate):
        return diagonal_operator(cm.cshunt_potential_ds(self.phi, s, self.params, self.sched,
                                                        phi_x, phi_x_rate))

    def bias_current(self, s, up):
        op = cm.cshunt_bias_operator(self.phi, s, self.params, self.sched)
        return float(up @ (op * up))

    def aux(self, v):
        return {"phi": np.einsum("ia,i,ia->a", v, self.phi, v),
                "sin2phi": np.einsum("ia,i,ia->a", v, np.sin(2 * self.phi), v)}

    def problem(self):
        return cm.problem_ising("cshunt", None, 1)


class CJJPair(CircuitSystem):
    """Two identical CJJ qubits with local fields h and inductive coupling J12."""

    family = "cjj"
    n_qubits = 2

    def __init__(self, params: CircuitParams, sched: Schedule, ising: IsingSpec,
                 points: int = 200, mesh: Optional[Mesh] = None, tol=1e-9,
                 dimension_cap=DEFAULT_DIMENSION_CAP):
        params.require("inductive_energy", "mutual_energy")
        if ising.n_qubits != 2:
            raise ValidationError("ising.local_fields", "the CJJ pair needs two local fields")
        self.ising = ising
        self.dimension_cap = dimension_cap
        super().__init__(params, sched, mesh or default_cjj_mesh(params, ising, points), tol)

    @property
    def J12(self):
        return self.ising.coupling(0, 1)

    def zero_bias_operator(self, s):
        return assemble_1q(self.mesh, self.kinetic,
                           cm.cjj_potential(self.phi, s, 0.0, self.params, self.sched, 0.0))

    def biased_operator(self, s, phi_x):
        h1, h2 = self.ising.local_fields
        p = self.params
        return assemble_2q(
            self.mesh, self.mesh, self.kinetic,
            cm.cjj_potential(self.phi, s, h1, p, self.sched, phi_x),
            cm.cjj_potential(self.phi, s, h2, p, self.sched, phi_x),
            lambda a, b: cm.coupling_potential(a, b, self.J12, p, phi_x),
            cap=self.dimension_cap)

    def biased_operator_ds(self, s, phi_x, phi_x_rate):
        h1, h2 = self.ising.local_fields
        p = self.params
        d1 = cm.cjj_potential_ds(self.phi, s, h1, p, self.sched, phi_x, phi_x_rate)
        d2 = cm.cjj_potential_ds(self.phi, s, h2, p, self.sched, phi_x, phi_x_rate)
        g1, g2 = np.meshgrid(self.phi, self.phi, indexing="ij")
        dint = cm.coupling_potential_ds(g1, g2, self.J12, p, phi_x, phi_x_rate)
        return diagonal_operator((d1[:, None] + d2[None, :] + dint).ravel())

    def bias_current(self, s, up):
        return float(self.params.inductive_energy * (up @ (self.phi * up)))

    def aux(self, v):
        L = self.mesh.points
        w = v.reshape(L, L, -1) ** 2
        return {"phi1": np.einsum("ija,i->a", w, self.phi),
                "phi2": np.einsum("ija,j->a", w, self.phi)}

    def problem(self):
        return cm.problem_ising("cjj", self.ising, 2)


def default_cjj_mesh(params: CircuitParams, ising: IsingSpec, points: int = 200) -> Mesh:
    """Symmetric mesh wide enough for every bias centre h * phi_x.

    |phi_x| = E_M |I_p| / E_L^2 <= E_M w / E_L, so the half-width is
    w (1 + max|h| E_M / E_L) with w from the 40 E_C barrier rule.
    """
    w = cjj_half_width(params.josephson_energy, params.kinetic_energy, params.inductive_energy)
    hmax = max(abs(h) for h in ising.local_fields)
    half = w * (1.0 + hmax * params.mutual_energy / params.inductive_energy)
    return Mesh(-half, half, points)


# --------------------------------------------------------------------------


@dataclass
class StaticFrames:
    system: CircuitSystem
    s: np.ndarray
    profiles: ProfileFunctions
    table: PersistentCurrentTable
    slices: List[SpectralSlice]
    frames: List[EffectiveFrame]
    V: np.ndarray                 # (M, N, N) aligned model eigenvectors on the grid
    col_signs: np.ndarray
    GC: np.ndarray                # (M, N, N)
    model_residual: np.ndarray    # (M,)
    zero_bias: List[SpectralSlice] = field(repr=False, default_factory=list)
    G_hf: Optional[np.ndarray] = None
    vfield: Optional[VField] = None

    @property
    def kappa(self):
        return self.system.sched.kappa

    @property
    def energies(self) -> np.ndarray:
        return np.array([sl.energies for sl in self.slices])

    @property
    def G(self) -> np.ndarray:
        return np.array([f.G for f in self.frames])

    @property
    def gaps(self) -> np.ndarray:
        E = self.energies
        return E[:, 1:] - E[:, :1]

    def gap_ratios(self) -> np.ndarray:
        return gap_ratios(self.energies, self.profiles.A, self.profiles.B, self.system.problem())

    def pauli(self) -> List[PauliDecomposition]:
        return [pauli_decompose(m) for m in self.GC]

    def g(self) -> np.ndarray:
        """-i G_01 on the grid."""
        return (-1j * self.G[:, 0, 1]).real

    def gy_direct(self) -> np.ndarray:
        """Pauli-Y coefficient of G^C on the grid (one qubit), i (G^C)_01."""
        return (1j * self.GC[:, 0, 1]).real

    def drop_states(self):
        for sl in self.slices:
            sl.states = None
        for sl in self.zero_bias:
            sl.states = None


@_stage("spectral")
def zero_bias_sweep(system: CircuitSystem, s_grid, workers=1):
    return spectral_sweep(system.zero_bias_slice, s_grid, workers=workers)


@_stage("computational_basis")
def build_profiles(system: CircuitSystem, zero_bias: List[SpectralSlice]):
    """(ProfileFunctions, PersistentCurrentTable, comp states at s = 0)."""
    s = np.array([sl.s for sl in zero_bias])
    ups, downs = [], []
    A, cur = [], []
    for sl in zero_bias:
        up, down = persistent_current_basis(sl, system.phi)
        ups.append(up)
        downs.append(down)
        # <up|H0|down> = (E1 - E0)/2 for the symmetric/antisymmetric pair
        A.append(0.5 * (sl.energies[1] - sl.energies[0]))
        cur.append(system.bias_current(sl.s, up))
    A, cur = np.array(A), np.array(cur)
    p, sched = system.params, system.sched
    if system.family == "cjj":
        table = PersistentCurrentTable(s, current=cur)
        I_p, script = cur, None
    else:
        ext = getattr(system, "current_table", None)
        if ext is None:
            table = PersistentCurrentTable(s, script_current=cur)
            I_p = cur
        else:
            I_p = ext.value("current", s)
            table = PersistentCurrentTable(s, current=I_p, script_current=cur)
        script = cur
    _, phi_x = cm.control_fluxes(s, system.family, sched, p, table)
    B = phi_x * (cur if system.family == "cshunt" else I_p)
    profiles = ProfileFunctions(s, A, B, I_p, phi_x, script)
    comp0 = system.comp_states(ups[0], downs[0])
    return profiles, table, comp0


@_stage("spectral")
def biased_sweep(system: CircuitSystem, table: PersistentCurrentTable, s_grid, workers=1,
                 anchor=None):
    def solve(s):
        _, phi_x = cm.control_fluxes(s, system.family, system.sched, system.params, table)
        return system.biased_slice(s, float(phi_x))
    return spectral_sweep(solve, s_grid, workers=workers, anchor=anchor)


@_stage("adiabatic_frame")
def hellmann_feynman_all(system: CircuitSystem, table, slices):
    out = []
    for sl in slices:
        _, phi_x = cm.control_fluxes(sl.s, system.family, system.sched, system.params, table)
        _, rate = cm.control_flux_rates(sl.s, system.family, system.sched, system.params, table)
        dH = system.biased_operator_ds(sl.s, float(phi_x), float(rate))
        out.append(hellmann_feynman_G(sl, dH))
    return np.array(out)


@_stage("computational_basis")
def build_V(system: CircuitSystem, profiles: ProfileFunctions, slices, comp0):
    """Aligned V on the grid, column signs, model residuals and the V(s) field."""
    problem = system.problem()
    Vs, res = [], []
    prev = None
    for sl, a, b in zip(slices, profiles.A, profiles.B):
        V, r = model_V(np.diag(sl.energies), a, b, problem, prev)
        Vs.append(V)
        res.append(r)
        prev = V
    Vs = np.array(Vs)
    if system.n_qubits == 1:
        # closed-form rotation; its columns coincide with the ascending eigenvectors
        from .compbasis import single_qubit_V
        Vs = np.array([single_qubit_V(a, b) for a, b in zip(profiles.A, profiles.B)])
    X = slices[0].states.T @ comp0
    signs = align_signs(Vs[0], X)
    Vs = Vs * signs
    vfield = VField(profiles, problem, col_signs=signs if system.n_qubits == 1 else None,
                    node_V=Vs if system.n_qubits > 1 else None)
    return Vs, signs, np.array(res), vfield


def build_static(system: CircuitSystem, s_grid=None, *, workers=1, hellmann_feynman=False,
                 anchor=None, keep_states=True) -> StaticFrames:
    s_grid = system.sched.s_grid if s_grid is None else np.asarray(s_grid, dtype=float)
    zero = zero_bias_sweep(system, s_grid, workers)
    s_zero = np.array([sl.s for sl in zero])
    profiles, table, comp0 = build_profiles(system, zero)
    slices = biased_sweep(system, table, s_zero, workers, anchor)
    s = np.array([sl.s for sl in slices])
    if len(s) != len(s_zero):
        # the biased sweep refined its grid; bring the profiles onto it
        zero = zero_bias_sweep(system, s, workers)
        profiles, table, comp0 = build_profiles(system, zero)
        slices = biased_sweep(system, table, s, workers, anchor)
        s = np.array([sl.s for sl in slices])
    frames = _stage("adiabatic_frame")(build_frames)(slices, system.sched.kappa)
    G_hf = hellmann_feynman_all(system, table, slices) if hellmann_feynman else None
    Vs, signs, res, vfield = build_V(system, profiles, slices, comp0)
    G = np.array([f.G for f in frames])
    GC = _stage("computational_basis")(transform_G)(G, Vs, s)
    static = StaticFrames(system, s, profiles, table, slices, frames, Vs, signs, GC, res,
                          zero, G_hf, vfield)
    if not keep_states:
        static.drop_states()
    return static


def cshunt_system(L=600, sched: Optional[Schedule] = None, params=None, **kw) -> CShuntQubit:
    sched = sched or Schedule(cm.uniform_grid(100), (2.9, 2.2))
    return CShuntQubit(params or cm.cshunt_preset(), sched, cshunt_mesh(L), **kw)


def cjj_pair_system(L=200, sched: Optional[Schedule] = None, params=None,
                    ising: Optional[IsingSpec] = None, **kw) -> CJJPair:
    sched = sched or Schedule(cm.uniform_grid(100), (2.6, 1.9))
    return CJJPair(params or cm.cjj_preset(), sched, ising or cm.preset_cjj_ising(), points=L, **kw)
