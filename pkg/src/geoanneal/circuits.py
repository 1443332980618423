"""Flux-qubit potentials, kinetic coefficients and control-flux schedules.

Energies are linear frequencies in GHz. Fluxes are phases (units of Phi_0 / 2pi).
Two circuit families are supported:

``cshunt``
    capacitively shunted qubit, ``-(E_S/8) d^2/dphi^2 + P(phi, s)``
``cjj``
    compound-Josephson-junction qubit, ``-(E_C/4) d^2/dphi^2 + P(phi, s, h)``;
    pairs of them interact through an inductive coupling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DivisionByZero, MissingTable, ValidationError

FAMILIES = ("cshunt", "cjj")


@dataclass(frozen=True)
class CircuitParams:
    """Circuit energies in GHz.

    ``kinetic_energy`` is E_S for the C-shunt qubit and E_C for the CJJ qubit.
    ``reflect_cjj`` applies phi_cjj -> 2 pi - phi_cjj inside the potential; the
    C-shunt preset needs it to be biased at its double-well point.
    """

    kinetic_energy: float
    josephson_energy: float
    inductive_energy: Optional[float] = None
    mutual_energy: Optional[float] = None
    cshunt_scale: Optional[float] = None
    reflect_cjj: bool = False

    def __post_init__(self):
        for name in ("kinetic_energy", "josephson_energy", "inductive_energy",
                     "mutual_energy", "cshunt_scale"):
            value = getattr(self, name)
            if value is None:
                continue
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(name, f"must be a positive finite energy, got {value!r}")

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ValidationError(name, "required for this circuit family")


def cshunt_preset() -> CircuitParams:
    return CircuitParams(kinetic_energy=3.03, josephson_energy=86.2,
                         cshunt_scale=1.0e4, reflect_cjj=True)


def cjj_preset() -> CircuitParams:
    return CircuitParams(kinetic_energy=3.44, josephson_energy=684.0,
                         inductive_energy=570.0, mutual_energy=3.98)


def kinetic_coefficient(family: str, params: CircuitParams) -> float:
    if family == "cshunt":
        return params.kinetic_energy / 8.0
    if family == "cjj":
        return params.kinetic_energy / 4.0
    raise ValidationError("family", f"unknown circuit family {family!r}")


# --------------------------------------------------------------------------
# annealing parametrization


@dataclass(frozen=True)
class Kappa:
    """Monotone map kappa: [0, 1] -> [0, 1] with its first two derivatives."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]

    def inverse(self, tau, tol=1e-14):
        """Numerical inverse by bisection (kappa is monotone)."""
        tau = np.asarray(tau, dtype=float)
        lo = np.zeros_like(tau)
        hi = np.ones_like(tau)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.value(mid) < tau
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) < tol:
                break
        return 0.5 * (lo + hi)


def _as_float(s):
    return np.asarray(s, dtype=float)


def _one(s):
    return np.ones_like(_as_float(s))


def _zero(s):
    return np.zeros_like(_as_float(s))


def _smoothstep(s):
    s = _as_float(s)
    return s * s * (3.0 - 2.0 * s)


def _smoothstep_d1(s):
    s = _as_float(s)
    return 6.0 * s * (1.0 - s)


def _smoothstep_d2(s):
    return 6.0 - 12.0 * _as_float(s)


IDENTITY = Kappa("identity", _as_float, _one, _zero)
SMOOTHSTEP = Kappa("smoothstep", _smoothstep, _smoothstep_d1, _smoothstep_d2)


def tabulated_kappa(s_samples, kappa_samples) -> Kappa:
    """Kappa given by samples; derivatives come from a natural cubic spline."""
    spline = CubicSpline(np.asarray(s_samples, float), np.asarray(kappa_samples, float),
                         bc_type="natural")
    return Kappa("tabulated", spline, spline.derivative(1), spline.derivative(2))


def kappa_by_name(name: str) -> Kappa:
    if name == "identity":
        return IDENTITY
    if name == "smoothstep":
        return SMOOTHSTEP
    raise ValidationError("schedule.kappa", f"unknown kappa {name!r} (identity | smoothstep)")


def uniform_grid(points: int = 100) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def graded_grid(points: int, center: float, width: float, ratio: float) -> np.ndarray:
    """Grid on [0, 1] whose density is ``ratio`` times higher at ``center``.

    Density 1 + (ratio - 1) exp(-((s - center)/width)^2), equidistributed, so
    the spacing varies smoothly and three-point differences stay second order.
    """
    fine = np.linspace(0.0, 1.0, 20001)
    rho = 1.0 + (ratio - 1.0) * np.exp(-((fine - center) / width) ** 2)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(fine))])
    grid = np.interp(np.linspace(0.0, cum[-1], points), cum, fine)
    grid[0], grid[-1] = 0.0, 1.0
    return grid


@dataclass(frozen=True)
class Schedule:
    s_grid: np.ndarray
    cjj_flux: tuple = (2.9, 2.2)
    kappa: Kappa = IDENTITY
    t_f: Optional[float] = None

    def __post_init__(self):
        grid = np.asarray(self.s_grid, dtype=float)
        object.__setattr__(self, "s_grid", grid)
        if grid.ndim != 1 or grid.size < 3:
            raise ValidationError("schedule.s_grid", "need at least 3 points")
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValidationError("schedule.s_grid", "must start at 0 and end at 1")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("schedule.s_grid", "must be strictly increasing")
        if len(self.cjj_flux) != 2:
            raise ValidationError("schedule.cjj_flux", "expected (start, end)")
        probe = np.linspace(0.0, 1.0, 401)
        kv = self.kappa.value(probe)
        if abs(kv[0]) > 1e-12 or abs(kv[-1] - 1.0) > 1e-12:
            raise ValidationError("schedule.kappa", "kappa(0) = 0 and kappa(1) = 1 required")
        if np.any(self.kappa.d1(probe[1:-1]) <= 0):
            raise ValidationError("schedule.kappa", "kappa must be strictly increasing")
        if self.t_f is not None and not self.t_f > 0:
            raise ValidationError("schedule.t_f", "must be positive")

    def with_grid(self, s_grid) -> "Schedule":
        return Schedule(np.asarray(s_grid, float), self.cjj_flux, self.kappa, self.t_f)

    def with_kappa(self, kappa: Kappa) -> "Schedule":
        return Schedule(self.s_grid, self.cjj_flux, kappa, self.t_f)

    def phi_cjj(self, s):
        start, end = self.cjj_flux
        s = np.asarray(s, dtype=float)
        return start * (1.0 - s) + end * s

    @property
    def phi_cjj_rate(self) -> float:
        start, end = self.cjj_flux
        return end - start


@dataclass(frozen=True)
class IsingSpec:
    local_fields: tuple
    couplings: tuple = ()

    def __post_init__(self):
        n = len(self.local_fields)
        for entry in self.couplings:
            if len(entry) != 3:
                raise ValidationError("ising.couplings", f"expected (i, j, J), got {entry!r}")
            i, j, _ = entry
            if i == j:
                raise ValidationError("ising.couplings", f"self-coupling ({i}, {j})")
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError("ising.couplings", f"index out of range in {entry!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.local_fields)

    def coupling(self, i, j) -> float:
        total = 0.0
        for a, b, J in self.couplings:
            if {a, b} == {i, j}:
                total += J
        return total


# --------------------------------------------------------------------------
# potentials


def effective_cjj(phi_cjj, params: CircuitParams):
    return 2.0 * np.pi - phi_cjj if params.reflect_cjj else phi_cjj


def _cjj_sign(params: CircuitParams) -> float:
    # d(effective phi_cjj)/d(phi_cjj)
    return -1.0 if params.reflect_cjj else 1.0


def cshunt_potential(phi, s, params: CircuitParams, sched: Schedule, phi_x=0.0):
    """P(phi, s) = -2 E_J (cos[phi_cjj/2] cos[phi_x + 2 phi] + cos phi)."""
    pc = effective_cjj(sched.phi_cjj(s), params)
    EJ = params.josephson_energy
    return -2.0 * EJ * (np.cos(0.5 * pc) * np.cos(phi_x + 2.0 * phi) + np.cos(phi))


def cshunt_potential_ds(phi, s, params, sched, phi_x=0.0, phi_x_rate=0.0):
    pc = effective_cjj(sched.phi_cjj(s), params)
    dpc = _cjj_sign(params) * sched.phi_cjj_rate
    EJ = params.josephson_energy
    return -2.0 * EJ * (-0.5 * np.sin(0.5 * pc) * dpc * np.cos(phi_x + 2.0 * phi)
                        - np.cos(0.5 * pc) * np.sin(phi_x + 2.0 * phi) * phi_x_rate)


def cshunt_bias_operator(phi, s, params, sched):
    """First-order bias operator dP/dphi_x at phi_x = 0: 2 E_J cos(phi_cjj/2) sin(2 phi)."""
    pc = effective_cjj(sched.phi_cjj(s), params)
    return 2.0 * params.josephson_energy * np.cos(0.5 * pc) * np.sin(2.0 * phi)


def cjj_potential(phi, s, h, params: CircuitParams, sched: Schedule, phi_x=0.0):
    """P(phi, s, h) = 2 E_J cos(phi) cos(phi_cjj/2) + E_L (phi - h phi_x)^2 / 2."""
    params.require("inductive_energy")
    pc = effective_cjj(sched.phi_cjj(s), params)
    EJ, EL = params.josephson_energy, params.inductive_energy
    return 2.0 * EJ * np.cos(phi) * np.cos(0.5 * pc) + 0.5 * EL * (phi - h * phi_x) ** 2


def cjj_potential_ds(phi, s, h, params, sched, phi_x=0.0, phi_x_rate=0.0):
    pc = effective_cjj(sched.phi_cjj(s), params)
    dpc = _cjj_sign(params) * sched.phi_cjj_rate
    EJ, EL = params.josephson_energy, params.inductive_energy
    return (-EJ * np.cos(phi) * np.sin(0.5 * pc) * dpc
            - EL * (phi - h * phi_x) * h * phi_x_rate)


def coupling_potential(phi1, phi2, J12, params: CircuitParams, phi_x=0.0):
    """P_int = -J12 E_M (phi1 - phi_x)(phi2 - phi_x)."""
    params.require("mutual_energy")
    return -J12 * params.mutual_energy * (phi1 - phi_x) * (phi2 - phi_x)


def coupling_potential_ds(phi1, phi2, J12, params, phi_x=0.0, phi_x_rate=0.0):
    EM = params.mutual_energy
    return J12 * EM * phi_x_rate * ((phi1 - phi_x) + (phi2 - phi_x))


# --------------------------------------------------------------------------
# control fluxes


@dataclass
class PersistentCurrentTable:
    """Persistent currents tabulated on the s-grid (GHz).

    ``current`` is I_p (E_L <up|phi|up> for the CJJ qubit). For the C-shunt
    qubit ``script_current`` holds the bias matrix element <up|dP/dphi_x|up>;
    ``current`` may be None there, meaning I_p is taken equal to it.
    """

    s: np.ndarray
    current: Optional[np.ndarray] = None
    script_current: Optional[np.ndarray] = None
    _splines: dict = field(default_factory=dict, repr=False)

    def _spline(self, name):
        if name not in self._splines:
            values = getattr(self, name)
            if values is None:
                raise MissingTable(f"persistent-current table has no {name!r} column")
            self._splines[name] = CubicSpline(np.asarray(self.s, float), np.asarray(values, float),
                                              bc_type="natural")
        return self._splines[name]

    def value(self, name, s, nu=0):
        s_arr = np.asarray(s, dtype=float)
        spline = self._spline(name)
        out = spline(s_arr, nu)
        # exact node values, no spline round-off
        if nu == 0:
            idx = np.searchsorted(self.s, s_arr)
            idx = np.clip(idx, 0, len(self.s) - 1)
            hit = np.asarray(self.s)[idx] == s_arr
            out = np.where(hit, np.asarray(getattr(self, name))[idx], out)
        return out


def control_fluxes(s, family: str, sched: Schedule, params: CircuitParams,
                   table: Optional[PersistentCurrentTable] = None, *, zero_bias=False):
    """Return (phi_cjj(s), phi_x(s)).

    With ``zero_bias`` the persistent-current table is not consulted and phi_x = 0
    (the first pass that builds the table).
    """
    phi_cjj = sched.phi_cjj(s)
    if zero_bias:
        return phi_cjj, np.zeros_like(np.asarray(s, dtype=float))
    if table is None:
        raise MissingTable("control flux phi_x needs the persistent-current table")
    if family == "cjj":
        params.require("inductive_energy", "mutual_energy")
        ip = table.value("current", s)
        return phi_cjj, params.mutual_energy / params.inductive_energy ** 2 * ip
    if family == "cshunt":
        params.require("cshunt_scale")
        scr = table.value("script_current", s)
        if np.any(scr == 0):
            raise DivisionByZero("script persistent current vanishes; phi_x undefined")
        if table.current is None:
            return phi_cjj, scr / params.cshunt_scale
        ip = table.value("current", s)
        return phi_cjj, ip ** 2 / (params.cshunt_scale * scr)
    raise ValidationError("family", f"unknown circuit family {family!r}")


def control_flux_rates(s, family, sched, params, table=None, *, zero_bias=False):
    """d/ds of (phi_cjj, phi_x); phi_x via the natural-spline derivative of the table."""
    s_arr = np.asarray(s, dtype=float)
    dpc = np.full_like(s_arr, sched.phi_cjj_rate)
    if zero_bias:
        return dpc, np.zeros_like(s_arr)
    if table is None:
        raise MissingTable("control flux rate needs the persistent-current table")
    if family == "cjj":
        return dpc, (params.mutual_energy / params.inductive_energy ** 2
                     * table.value("current", s_arr, 1))
    if table.current is None:
        return dpc, table.value("script_current", s_arr, 1) / params.cshunt_scale
    ip, dip = table.value("current", s_arr), table.value("current", s_arr, 1)
    sc, dsc = table.value("script_current", s_arr), table.value("script_current", s_arr, 1)
    return dpc, (2 * ip * dip * sc - ip ** 2 * dsc) / (params.cshunt_scale * sc ** 2)


def problem_ising(family: str, ising: Optional[IsingSpec], n_qubits: int) -> IsingSpec:
    """Ising couplings realised by the circuit in the (down, up) computational ordering.

    The CJJ bias enters as -h phi_x E_L phi and the coupling as -J E_M phi1 phi2, so
    the realised problem is (h, -J). The C-shunt bias raises the up state: h = -1.
    """
    if family == "cshunt":
        return IsingSpec((-1.0,) * n_qubits)
    if ising is None:
        raise ValidationError("ising", "required for the CJJ family")
    return IsingSpec(tuple(ising.local_fields),
                     tuple((i, j, -J) for i, j, J in ising.couplings))


def preset_cjj_ising() -> IsingSpec:
    return IsingSpec((1.0, 0.4), ((0, 1, -0.7),))


def as_array(x: Sequence[float]) -> np.ndarray:
    return np.asarray(x, dtype=float)
