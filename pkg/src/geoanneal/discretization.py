"""Real-space meshes and sparse finite-difference Hamiltonians (Dirichlet)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .errors import DimensionOverflow, NonFiniteValue, ValidationError

DEFAULT_DIMENSION_CAP = 400_000

Potential = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Mesh:
    lower: float
    upper: float
    points: int = 600

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValidationError("mesh.bounds", f"lower < upper required, got ({self.lower}, {self.upper})")
        if self.points < 3:
            raise ValidationError("mesh.points", "need at least 3 mesh points")

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.lower + self.spacing * np.arange(self.points)

    def widened(self, factor: float) -> "Mesh":
        """Same spacing, domain widened by ``factor`` around its centre."""
        center = 0.5 * (self.lower + self.upper)
        half = 0.5 * (self.upper - self.lower) * factor
        n_half = int(round(half / self.spacing))
        return Mesh(center - n_half * self.spacing, center + n_half * self.spacing, 2 * n_half + 1)


def centered_mesh(center: float, half_width: float, points: int) -> Mesh:
    return Mesh(center - half_width, center + half_width, points)


def cshunt_mesh(points: int = 600) -> Mesh:
    return Mesh(-np.pi, np.pi, points)


def cjj_half_width(josephson_energy, kinetic_energy, inductive_energy, barrier=40.0):
    """Half-width w with E_L w^2 / 2 - 2 E_J = barrier * E_C.

    Beyond w the potential exceeds ``barrier`` charging energies for every
    value of the tunable cosine term.
    """
    return float(np.sqrt(2.0 * (2.0 * josephson_energy + barrier * kinetic_energy) / inductive_energy))


@dataclass(frozen=True)
class SparseOperator:
    """Real symmetric operator in CSR form."""

    matrix: sp.csr_matrix
    symmetric: bool = True

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def entries(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral norm."""
        abs_m = abs(self.matrix)
        return float(np.max(np.asarray(abs_m.sum(axis=1)).ravel()))

    def lower_bound(self) -> float:
        """Gershgorin lower bound on the spectrum."""
        diag = self.matrix.diagonal()
        off = np.asarray(abs(self.matrix).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - off))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _evaluate(potential: Potential, *nodes) -> np.ndarray:
    if callable(potential):
        values = potential(*nodes)
    else:
        values = potential
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise NonFiniteValue(f"potential is not finite at mesh node {tuple(int(i) for i in idx)}")
    return values


def laplacian(mesh: Mesh) -> sp.csr_matrix:
    """Second-difference matrix (1, -2, 1) / h^2 with Dirichlet ends."""
    n = mesh.points
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / mesh.spacing ** 2


def assemble_1q(mesh: Mesh, kinetic_coeff: float, potential: Potential) -> SparseOperator:
    values = _evaluate(potential, mesh.nodes)
    if values.shape != (mesh.points,):
        raise ValidationError("potential", f"expected {mesh.points} values, got shape {values.shape}")
    mat = (-kinetic_coeff * laplacian(mesh) + sp.diags(values)).tocsr()
    return SparseOperator(mat)


def assemble_2q(mesh1: Mesh, mesh2: Mesh, kinetic_coeff: float, pot1: Potential, pot2: Potential,
                pot_int: Potential, cap: int = DEFAULT_DIMENSION_CAP) -> SparseOperator:
    """(H1 x 1) + (1 x H2) + diag(P_int); index i1 * L2 + i2."""
    dim = mesh1.points * mesh2.points
    if dim > cap:
        raise DimensionOverflow(f"two-qubit dimension {dim} exceeds the cap {cap}")
    h1 = assemble_1q(mesh1, kinetic_coeff, pot1).matrix
    h2 = assemble_1q(mesh2, kinetic_coeff, pot2).matrix
    g1, g2 = np.meshgrid(mesh1.nodes, mesh2.nodes, indexing="ij")
    inter = _evaluate(pot_int, g1, g2)
    mat = (sp.kron(h1, sp.identity(mesh2.points), format="csr")
           + sp.kron(sp.identity(mesh1.points), h2, format="csr")
           + sp.diags(inter.ravel()))
    return SparseOperator(mat.tocsr())


def diagonal_operator(values) -> SparseOperator:
    values = _evaluate(np.asarray(values, dtype=float).ravel())
    return SparseOperator(sp.diags(values, format="csr"))


def dump_triplets(op: SparseOperator, path) -> Path:
    """Write ``row col value`` lines (0-based) preceded by a comment header."""
    path = Path(path)
    rows, cols, vals = op.entries()
    with path.open("w") as fh:
        fh.write(f"# dimension {op.dimension} nnz {len(vals)} symmetric {int(op.symmetric)}\n")
        fh.write("# row col value_GHz\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{r} {c} {v:.17g}\n")
    return path


def load_triplets(path) -> SparseOperator:
    path = Path(path)
    dim = None
    with path.open() as fh:
        first = fh.readline().split()
        dim = int(first[first.index("dimension") + 1])
        sym = bool(int(first[first.index("symmetric") + 1]))
    data = np.loadtxt(path, comments="#", ndmin=2)
    mat = sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim))
    return SparseOperator(mat, sym)
