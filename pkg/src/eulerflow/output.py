"""Legacy ASCII VTK output of the conserved fields and a schlieren proxy.

Writes an unstructured grid (quads or hexahedra) with point data: density,
momentum, total energy, pressure, and an exponential schlieren shading of
the nodal density gradient.  Numbers are printed with 17 significant digits
so files are reproducible bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

from . import physics
from .assembly import PrecomputedMatrices
from .mesh import Mesh
from .physics import AIR, GasConstants

__all__ = ["schlieren", "write_vtk"]

_FMT = "%.17g"

_CELL_TYPE = {2: 9, 3: 12}  # VTK_QUAD, VTK_HEXAHEDRON


def schlieren(
    U: np.ndarray, matrices: PrecomputedMatrices, beta: float = 10.0
) -> np.ndarray:
    """Exponential shading exp(-beta |grad rho|_i / max_j |grad rho|_j).

    The nodal gradient is the lumped projection (1/m_i) sum_j c_ij (rho_j -
    rho_i); a globally constant density yields a field of ones.
    """
    rho = U[..., 0]
    rows = np.repeat(np.arange(matrices.n), np.diff(matrices.indptr))
    drho = rho[matrices.indices] - rho[rows]
    grad = np.zeros((matrices.n, matrices.dim))
    for k in range(matrices.dim):
        grad[:, k] = np.add.reduceat(matrices.c[:, k] * drho, matrices.indptr[:-1])
    grad *= matrices.inv_m[:, None]
    mag = np.linalg.norm(grad, axis=1)
    top = mag.max()
    if top == 0.0:
        return np.ones(matrices.n)
    return np.exp(-beta * mag / top)


def _format_rows(rows: np.ndarray) -> str:
    return "\n".join(" ".join(_FMT % v for v in row) for row in rows)


def write_vtk(
    path: str,
    mesh: Mesh,
    U: np.ndarray,
    matrices: PrecomputedMatrices = None,
    gas: GasConstants = AIR,
    schlieren_beta: float = 10.0,
):
    """Write one snapshot; U is given per reduced (solver) node."""
    pts = mesh.points
    if pts.shape[1] == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    U_pt = U[mesh.reduced_index]
    d = mesh.dim
    mom = U_pt[:, 1:-1]
    if d == 2:
        mom = np.hstack([mom, np.zeros((len(mom), 1))])

    lines = [
        "# vtk DataFile Version 3.0",
        "eulerflow snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
        _format_rows(pts),
    ]
    nv = mesh.cells.shape[1]
    lines.append(f"CELLS {len(mesh.cells)} {len(mesh.cells) * (nv + 1)}")
    for cell in mesh.cells:
        lines.append(" ".join([str(nv)] + [str(int(i)) for i in cell]))
    lines.append(f"CELL_TYPES {len(mesh.cells)}")
    lines.extend([str(_CELL_TYPE[d])] * len(mesh.cells))

    lines.append(f"POINT_DATA {len(pts)}")
    lines.append("SCALARS density double")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_FMT % v for v in U_pt[:, 0])
    lines.append("VECTORS momentum double")
    lines.append(_format_rows(mom))
    lines.append("SCALARS total_energy double")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_FMT % v for v in U_pt[:, -1])
    lines.append("SCALARS pressure double")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_FMT % v for v in physics.pressure(U_pt, gas))
    if matrices is not None:
        s = schlieren(U, matrices, schlieren_beta)[mesh.reduced_index]
        lines.append("SCALARS schlieren double")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_FMT % v for v in s)

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
