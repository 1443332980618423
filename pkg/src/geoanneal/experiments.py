"""Experiment orchestration and figure-data emission (CSV + JSON manifest).

Every stage writes plain CSV files whose first row names the columns with
units in brackets; a ``manifest.json`` next to them records the config hash,
grid sizes, tolerances, output checksums and wall time.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from . import __version__
from . import circuits as cm
from . import dynamics as dyn
from .compbasis import analytic_gy, comp_state_labels, pauli_labels
from .config import RunConfig
from .discretization import Mesh, cshunt_mesh, dump_triplets
from .errors import GeoAnnealError, ParseError
from .frame import max_frame_deviation, structure_errors
from .pipeline import (CJJPair, CShuntQubit, StaticFrames, biased_sweep, build_profiles,
                       build_static, default_cjj_mesh, zero_bias_sweep)
from .spectral import dense_eigenpairs, lowest_eigenpairs

log = logging.getLogger(__name__)

FLOAT_FMT = "{:.12e}"


# --------------------------------------------------------------------------
# output helpers


class OutputDir:
    """Collects written files so the manifest can list their checksums."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: Dict[str, str] = {}

    def csv(self, name, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
        cols = [np.asarray(c, dtype=float).ravel() for c in columns]
        n = len(cols[0])
        if any(len(c) != n for c in cols) or len(header) != len(cols):
            raise ValueError(f"{name}: ragged columns")
        lines = [",".join(header)]
        for i in range(n):
            lines.append(",".join(FLOAT_FMT.format(c[i]) for c in cols))
        return self.text(name, "\n".join(lines) + "\n")

    def text(self, name, content: str) -> Path:
        p = self.path / name
        p.write_text(content)
        self.files[name] = hashlib.sha256(content.encode()).hexdigest()
        return p

    def json(self, name, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def manifest(self, cfg: RunConfig, stage: str, wall: float, extra=None) -> Path:
        info = {
            "package_version": __version__,
            "stage": stage,
            "experiment": cfg.experiment,
            "system": cfg.system,
            "config_sha256": cfg.digest(),
            "config": cfg.raw,
            "grid": {"s_points": int(len(cfg.schedule.s_grid)), "mesh_points": cfg.mesh_points,
                     "mesh_bounds": cfg.mesh_bounds},
            "tolerances": {"eig_tol": cfg.eig_tol, "rtol": cfg.rtol, "atol": cfg.atol},
            "backend": cfg.backend if cfg.backend != "auto" else dyn.default_backend(),
            "workers": cfg.workers,
            "outputs": dict(sorted(self.files.items())),
            "wall_time_s": round(wall, 3),
        }
        if extra:
            info.update(extra)
        p = self.path / "manifest.json"
        p.write_text(json.dumps(info, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return p


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    return str(x)


# --------------------------------------------------------------------------
# systems


def load_current_table(path) -> cm.PersistentCurrentTable:
    """Two-column CSV (s, I_p [GHz]) with a header row."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ParseError(f"persistent-current table {path}: {exc}") from None
    if data.shape[1] < 2:
        raise ParseError(f"persistent-current table {path}: need columns s, I_p")
    return cm.PersistentCurrentTable(data[:, 0], current=data[:, 1])


def make_system(cfg: RunConfig, system_name=None, *, points=None):
    """Circuit model for ``cfg`` (or for one of the preset systems in a sweep)."""
    name = system_name or cfg.system
    family = {"cshunt_1q": "cshunt", "cjj_2q": "cjj"}.get(name, cfg.family)
    sched = cfg.schedule
    if family == cfg.family:
        params, ising = cfg.params, cfg.ising
        L = points or cfg.mesh_points
        bounds = cfg.mesh_bounds
    else:
        # the other preset in a sweep keeps its own circuit and default mesh
        params = cm.cshunt_preset() if family == "cshunt" else cm.cjj_preset()
        ising = cm.preset_cjj_ising() if family == "cjj" else None
        flux = (2.9, 2.2) if family == "cshunt" else (2.6, 1.9)
        sched = cm.Schedule(sched.s_grid, flux, sched.kappa, sched.t_f)
        L = points or (600 if family == "cshunt" else 200)
        bounds = None
    if family == "cshunt":
        mesh = Mesh(bounds[0], bounds[1], L) if bounds else cshunt_mesh(L)
        table = None
        if cfg.cshunt_current == "table" and family == cfg.family:
            table = load_current_table(cfg.cshunt_current_table)
        return CShuntQubit(params, sched, mesh, tol=cfg.eig_tol, current_table=table)
    mesh = Mesh(bounds[0], bounds[1], L) if bounds else default_cjj_mesh(params, ising, L)
    return CJJPair(params, sched, ising, points=L, mesh=mesh, tol=cfg.eig_tol,
                   dimension_cap=cfg.dimension_cap)


def _static(cfg, system, **kw) -> StaticFrames:
    return build_static(system, workers=cfg.workers, **kw)


# --------------------------------------------------------------------------
# stages


def run_spectrum(cfg: RunConfig, out: OutputDir) -> dict:
    system = make_system(cfg)
    zero = zero_bias_sweep(system, cfg.schedule.s_grid, cfg.workers)
    profiles, table, _ = build_profiles(system, zero)
    slices = biased_sweep(system, table, profiles.s, cfg.workers)
    s = np.array([sl.s for sl in slices])
    E = np.array([sl.energies for sl in slices])
    N = E.shape[1]
    out.csv("spectrum.csv",
            ["s [1]"] + [f"E_{a} [GHz]" for a in range(N)]
            + ["margin [GHz]", "residual [1]", "orthonormality [1]"],
            [s, *E.T, [sl.margin for sl in slices], [sl.residual for sl in slices],
             [sl.orthonormality_error() for sl in slices]])
    out.csv("profiles.csv",
            ["s [1]", "A [GHz]", "B [GHz]", "I_p [GHz]", "phi_x [rad]", "phi_cjj [rad]"],
            [profiles.s, profiles.A, profiles.B, profiles.I_p, profiles.phi_x,
             cfg.schedule.phi_cjj(profiles.s)])
    if cfg.dump_operators:
        d = out.path / "operators"
        d.mkdir(exist_ok=True)
        for s_val in (0.0, 0.5, 1.0):
            _, phi_x = cm.control_fluxes(s_val, system.family, system.sched, system.params, table)
            p = dump_triplets(system.biased_operator(s_val, float(phi_x)), d / f"H_s{s_val:.2f}.txt")
            out.files[f"operators/{p.name}"] = hashlib.sha256(p.read_bytes()).hexdigest()
    return {"levels": N, "max_residual": float(max(sl.residual for sl in slices))}


def _schedule_columns(static: StaticFrames):
    pr = static.profiles
    gaps = static.gaps
    n = static.system.n_qubits
    if n == 1:
        return (["s [1]", "A [GHz]", "B [GHz]", "Delta [GHz]", "g_y [1]"],
                [static.s, pr.A, pr.B, gaps[:, 0], static.gy_direct()])
    coeffs = [d.coefficients for d in static.pauli()]
    pick = {"g_y_1": "YI", "g_y_2": "IY", "g_xy_12": "XY", "g_xy_21": "YX",
            "g_zy_12": "ZY", "g_zy_21": "YZ"}
    header = ["s [1]", "A [GHz]", "B [GHz]"] + [f"Delta_{k}0 [GHz]" for k in range(1, gaps.shape[1] + 1)]
    cols = [static.s, pr.A, pr.B, *gaps.T]
    for name, label in pick.items():
        header.append(f"{name} [1]")
        cols.append([c[label] for c in coeffs])
    return header, cols


def write_frame_tables(static: StaticFrames, out: OutputDir):
    header, cols = _schedule_columns(static)
    out.csv("schedule.csv", header, cols)
    E = static.energies
    G = static.G
    N = E.shape[1]
    h = ["s [1]", "kappa_dot [1]"] + [f"E_{a} [GHz]" for a in range(N)]
    c = [static.s, static.kappa.d1(static.s), *E.T]
    for a in range(N):
        for b in range(a + 1, N):
            h.append(f"ImG_{a}{b} [1]")
            c.append(G[:, a, b].imag)
    out.csv("frame.csv", h, c)
    labels = pauli_labels(static.system.n_qubits)
    coeffs = [d.coefficients for d in static.pauli()]
    out.csv("pauli.csv", ["s [1]"] + [f"{lab} [1]" for lab in labels],
            [static.s] + [[cf[lab] for cf in coeffs] for lab in labels])
    ratios = static.gap_ratios()
    out.csv("gap_ratio.csv",
            ["s [1]"] + [f"ratio_{k}0 [1]" for k in range(1, ratios.shape[1] + 1)],
            [static.s, *ratios.T])
    return {"max_gap_ratio_error": np.abs(ratios - 1).max(axis=0).tolist(),
            "min_gap": float(static.gaps[:, 0].min()),
            "s_min_gap": float(static.s[np.argmin(static.gaps[:, 0])])}


def run_frame(cfg: RunConfig, out: OutputDir) -> dict:
    static = _static(cfg, make_system(cfg), keep_states=False)
    return write_frame_tables(static, out)


def dynamics_tables(static: StaticFrames, t_f, s_out, *, backend="auto", rtol=dyn.RTOL,
                    atol=dyn.ATOL):
    """Populations in both frames, the without-G run and the fidelity series."""
    N = static.energies.shape[1]
    inst_G, _ = _tag(dyn.run_pair)(static, t_f, basis=dyn.INSTANTANEOUS, s_out=s_out,
                                   backend=backend, rtol=rtol, atol=atol)
    comp_G, comp_noG = _tag(dyn.run_pair)(static, t_f, basis=dyn.COMPUTATIONAL, s_out=s_out,
                                          backend=backend, rtol=rtol, atol=atol)
    fid = dyn.fidelity_series(comp_G, comp_noG)
    inst_as_comp = dyn.to_computational(inst_G, static.vfield)
    return {"inst_G": inst_G, "comp_G": comp_G, "comp_noG": comp_noG, "fidelity": fid,
            "frame_difference": float(np.abs(inst_as_comp.populations[-1]
                                             - comp_G.populations[-1]).max()),
            "levels": N}


def _tag(fn):
    def wrapper(*a, **k):
        try:
            return fn(*a, **k)
        except GeoAnnealError as exc:
            if exc.stage is None:
                exc.with_stage("dynamics")
            raise
    return wrapper


def run_dynamics(cfg: RunConfig, out: OutputDir, static: StaticFrames = None) -> dict:
    if cfg.t_f is None:
        from .errors import ValidationError
        raise ValidationError("schedule.t_f", "required for the dynamics stage")
    static = static or _static(cfg, make_system(cfg), keep_states=False)
    s_out = np.linspace(0.0, 1.0, cfg.output_points)
    res = dynamics_tables(static, cfg.t_f, s_out, backend=cfg.backend, rtol=cfg.rtol, atol=cfg.atol)
    N = res["levels"]
    comp = comp_state_labels(static.system.n_qubits)
    header = ["s [1]"] + [f"P_inst_{a} [1]" for a in range(N)]
    header += [f"P_comp_{lab} [1]" for lab in comp]
    header += [f"P_comp_noG_{lab} [1]" for lab in comp]
    header += ["fidelity [1]"]
    out.csv("dynamics.csv", header,
            [s_out, *res["inst_G"].populations.T, *res["comp_G"].populations.T,
             *res["comp_noG"].populations.T, res["fidelity"]])
    drift = max(res[k].norm_drift() for k in ("inst_G", "comp_G", "comp_noG"))
    return {"t_f": cfg.t_f, "end_fidelity": float(res["fidelity"][-1]),
            "end_ground_population_inst": float(res["inst_G"].populations[-1, 0]),
            "frame_difference": res["frame_difference"], "norm_drift": drift}


def run_sweep(cfg: RunConfig, out: OutputDir) -> dict:
    systems = {name: _static(cfg, make_system(cfg, name), keep_states=False)
               for name in cfg.sweep_systems}
    t_f, table = _tag(dyn.tf_sweep)(systems, cfg.t_f_list, basis=dyn.COMPUTATIONAL,
                                    backend=cfg.backend, rtol=cfg.rtol, atol=cfg.atol)
    names = list(cfg.sweep_systems)
    short = {"cshunt_1q": "fidelity_1q [1]", "cjj_2q": "fidelity_2q [1]"}
    out.csv("sweep.csv", ["t_f [ns/2pi]"] + [short[n] for n in names],
            [t_f] + [table[n] for n in names])
    return {"adiabatic_threshold": {n: dyn.adiabatic_threshold(t_f, table[n], cfg.fidelity_level)
                                    for n in names},
            "fidelity_level": cfg.fidelity_level}


def run_figure(cfg: RunConfig, out: OutputDir) -> dict:
    static = _static(cfg, make_system(cfg), keep_states=False)
    summary = write_frame_tables(static, out)
    summary.update(run_dynamics(cfg, out, static))
    return summary


# --------------------------------------------------------------------------
# invariants


def _check(report: List[dict], name, value, tol, passed=None, note=""):
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    report.append({"invariant": name, "value": value, "tolerance": tol, "passed": ok, "note": note})
    log.info("%-48s %s value=%.3e tol=%.1e", name, "PASS" if ok else "FAIL", value, tol)


def oracle_eigen_error(system, s_values, k) -> float:
    """Max relative gap between the iterative and dense lowest-k eigenvalues."""
    zero = zero_bias_sweep(system, np.asarray(s_values, dtype=float))
    _, table, _ = build_profiles(system, zero)
    worst = 0.0
    for s in s_values:
        _, phi_x = cm.control_fluxes(s, system.family, system.sched, system.params, table)
        H = system.biased_operator(s, float(phi_x))
        E_it = lowest_eigenpairs(H, k, system.tol)[0]
        E_dn = dense_eigenpairs(H, k)[0]
        worst = max(worst, float(np.max(np.abs(E_it - E_dn) / np.abs(E_dn))))
    return worst


def invariant_report(cfg: RunConfig) -> List[dict]:
    report: List[dict] = []
    t_f = cfg.t_f or 5.0
    systems = [("cshunt_1q", make_system(cfg, "cshunt_1q"))]
    if cfg.include_two_qubit:
        systems.append(("cjj_2q", make_system(cfg, "cjj_2q")))
    for name, system in systems:
        static = build_static(system, workers=cfg.workers, hellmann_feynman=True)
        ratios = static.gap_ratios()
        _check(report, f"{name}: gap ratio |r-1| max", np.abs(ratios - 1).max(), 0.025)
        _check(report, f"{name}: slice orthonormality", max(sl.orthonormality_error()
                                                           for sl in static.slices), 1e-10)
        for label, M in (("G", static.G), ("G^C", static.GC)):
            err = structure_errors(M)
            _check(report, f"{name}: {label} hermiticity", err["hermitian"], 1e-9)
            _check(report, f"{name}: {label} real part", err["real_part"], 1e-9)
            _check(report, f"{name}: {label} diagonal", err["diagonal"], 1e-9)
        ratio_even = 0.0
        for d in static.pauli():
            odd = max(abs(v) for v in d.odd_y().values())
            even = max([abs(v) for v in d.even_y().values()] or [0.0])
            if odd > 0:
                ratio_even = max(ratio_even, even / odd)
        _check(report, f"{name}: even-Y / odd-Y Pauli weight", ratio_even, 1e-8)
        scale = np.abs(static.G_hf).max()
        _check(report, f"{name}: finite-difference vs Hellmann-Feynman G",
               np.abs(static.G - static.G_hf).max() / scale, 1e-3,
               note=f"{len(static.s)}-point grid")
        res = dynamics_tables(static, t_f, np.linspace(0, 1, 51), backend=cfg.backend,
                              rtol=cfg.rtol, atol=cfg.atol)
        _check(report, f"{name}: end populations, frame agreement", res["frame_difference"], 1e-6)
        drift = max(res[k].norm_drift() for k in ("inst_G", "comp_G", "comp_noG"))
        _check(report, f"{name}: norm drift at t_f={t_f:g}", drift, 1e-8)
        psum = max(np.abs(res[k].populations.sum(axis=1) - 1).max()
                   for k in ("inst_G", "comp_G", "comp_noG"))
        _check(report, f"{name}: populations sum to one", psum, 1e-8)
        fid0 = abs(res["fidelity"][0] - 1)
        _check(report, f"{name}: fidelity equals one at s=0", fid0, 1e-12)

        smooth = build_static(system.__class__(**_rebuild_kwargs(system, cm.SMOOTHSTEP)),
                              workers=cfg.workers)
        _check(report, f"{name}: G independent of kappa", max_frame_deviation(static.frames,
                                                                               smooth.frames), 1e-6)

    one = systems[0][1]
    small = make_system(cfg, "cshunt_1q", points=cfg.dense_points_1q)
    _check(report, "cshunt_1q: iterative vs dense eigenvalues",
           oracle_eigen_error(small, [0.0, 0.5, 1.0], 2), 1e-10,
           note=f"L={cfg.dense_points_1q}")
    if cfg.include_two_qubit:
        small = make_system(cfg, "cjj_2q", points=cfg.dense_points_2q)
        _check(report, "cjj_2q: iterative vs dense eigenvalues",
               oracle_eigen_error(small, [0.0, 0.5, 1.0], 4), 1e-10,
               note=f"L={cfg.dense_points_2q} per axis")

    fine = build_static(one.__class__(**_rebuild_kwargs(one, grid=cm.uniform_grid(cfg.refined_points))),
                        workers=cfg.workers)
    pr = fine.profiles
    gy = analytic_gy(fine.g(), pr.A, pr.B, pr.A_dot, pr.B_dot, pr.model_gap())
    direct = fine.gy_direct()
    _check(report, "cshunt_1q: analytic vs transformed g^y", np.abs(gy - direct).max()
           / np.abs(direct).max(), 1e-3, note=f"{cfg.refined_points}-point grid")
    return report


def _rebuild_kwargs(system, kappa=None, grid=None) -> dict:
    sched = system.sched
    if kappa is not None:
        sched = sched.with_kappa(kappa)
    if grid is not None:
        sched = sched.with_grid(grid)
    kw = {"params": system.params, "sched": sched, "mesh": system.mesh, "tol": system.tol}
    if isinstance(system, CJJPair):
        kw.update(ising=system.ising, points=system.mesh.points, dimension_cap=system.dimension_cap)
    else:
        kw["current_table"] = system.current_table
    return kw


def run_verify(cfg: RunConfig, out: OutputDir) -> dict:
    report = invariant_report(cfg)
    out.json("invariants.json", report)
    failed = [r["invariant"] for r in report if not r["passed"]]
    return {"invariants_checked": len(report), "invariants_failed": failed}


# --------------------------------------------------------------------------

STAGES = {
    "spectrum": run_spectrum,
    "frame": run_frame,
    "dynamics": run_dynamics,
    "sweep": run_sweep,
    "verify": run_verify,
}

EXPERIMENT_STAGE = {
    "figure1": run_figure,
    "figure2": run_figure,
    "figure3": run_sweep,
    "figure6": run_frame,
    "invariants": run_verify,
}


def run_stage(stage: str, cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    out = OutputDir(cfg.output_dir)
    fn = STAGES[stage] if stage in STAGES else EXPERIMENT_STAGE.get(cfg.experiment)
    if fn is None:
        fn = run_figure if cfg.t_f is not None else run_frame
    summary = fn(cfg, out)
    out.manifest(cfg, stage, time.perf_counter() - t0, {"summary": summary})
    return summary


def run_experiment(cfg: RunConfig) -> dict:
    """Run whatever the config's experiment selector asks for."""
    return run_stage("experiment", cfg)
