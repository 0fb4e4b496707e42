"""Quadrilateral/hexahedral meshes for the solver benchmarks.

Provides periodic rectangle meshes (for conservation and accuracy tests) and
the supersonic channel-with-disc benchmark: a coarse block-structured mesh of
a channel [0,4] x [-1,1] with a disc of radius 0.25 removed at (0.6, 0),
optionally extruded to 3D, plus uniform refinement that snaps new boundary
nodes onto the circular arc.

Cell vertex ordering is counterclockwise for quads and the standard
bottom-face-then-top-face ordering for hexahedra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Mesh",
    "rectangle_mesh",
    "cylinder_channel_mesh",
    "refine",
    "boundary_faces",
    "DISC_CENTER",
    "DISC_RADIUS",
]

DISC_CENTER = np.array([0.6, 0.0])
DISC_RADIUS = 0.25
_SNAP_TOL = 1e-9


@dataclass
class Mesh:
    """Unstructured quad/hex mesh.

    points/cells refer to the full (non-identified) node set; periodic
    meshes carry reduced_index, which maps every full node to its
    representative id in [0, n_nodes).  disc holds the (center, radius)
    manifold used for boundary snapping during refinement.
    """

    points: np.ndarray
    cells: np.ndarray
    dim: int
    reduced_index: Optional[np.ndarray] = None
    disc: Optional[tuple] = None
    domain: Optional[tuple] = None

    def __post_init__(self):
        if self.reduced_index is None:
            self.reduced_index = np.arange(len(self.points))

    @property
    def n_nodes(self) -> int:
        return int(self.reduced_index.max()) + 1

    @property
    def n_cells(self) -> int:
        return len(self.cells)


def rectangle_mesh(
    nx: int,
    ny: int,
    x_range=(0.0, 1.0),
    y_range=(0.0, 1.0),
    periodic=(False, False),
) -> Mesh:
    """Tensor-product quad mesh with optional periodic identification."""
    xs = np.linspace(*x_range, nx + 1)
    ys = np.linspace(*y_range, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            cells.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])
    cells = np.asarray(cells, dtype=np.int64)

    # periodic identification: wrap the last grid line onto the first
    rep_i = np.arange(nx + 1)
    rep_j = np.arange(ny + 1)
    if periodic[0]:
        rep_i[nx] = 0
    if periodic[1]:
        rep_j[ny] = 0
    rep = rep_i[:, None] * (ny + 1) + rep_j[None, :]
    full_rep = rep.ravel()
    # compress representative ids to a contiguous range
    uniq, reduced = np.unique(full_rep, return_inverse=True)
    return Mesh(
        points=points,
        cells=cells,
        dim=2,
        reduced_index=reduced,
        domain=(x_range, y_range),
    )


def _square_perimeter_ccw(xs, ys):
    """Perimeter node coordinates of the tensor sub-grid, counterclockwise."""
    pts = []
    for x in xs[:-1]:
        pts.append((x, ys[0]))
    for y in ys[:-1]:
        pts.append((xs[-1], y))
    for x in xs[:0:-1]:
        pts.append((x, ys[-1]))
    for y in ys[:0:-1]:
        pts.append((xs[0], y))
    return np.asarray(pts)


def cylinder_channel_mesh(dim: int = 2) -> Mesh:
    """Coarse channel mesh [0,4] x [-1,1] with a disc of radius 0.25 removed.

    The 2D mesh has 104 nodes and 80 cells: a graded tensor grid with the
    block around the disc replaced by a two-ring O-grid.  The 3D variant
    extrudes one cell layer over z in [-1,1], giving 208 nodes.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    xs = np.array([0.0, 0.1, 0.35, 0.6, 0.85, 1.1, 2.0, 3.0, 4.0])
    ys = np.array([-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0])
    sq_x = (0.1, 1.1)
    sq_y = (-0.5, 0.5)

    coords = {}
    points = []

    def node(x, y):
        key = (round(x, 12), round(y, 12))
        if key not in coords:
            coords[key] = len(points)
            points.append((x, y))
        return coords[key]

    def inside_square_strict(x, y):
        return sq_x[0] < x < sq_x[1] and sq_y[0] < y < sq_y[1]

    cells = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if inside_square_strict(cx, cy):
                continue
            cells.append(
                [
                    node(xs[i], ys[j]),
                    node(xs[i + 1], ys[j]),
                    node(xs[i + 1], ys[j + 1]),
                    node(xs[i], ys[j + 1]),
                ]
            )

    # O-grid between the square perimeter and the disc boundary
    sq_xs = xs[(xs >= sq_x[0] - 1e-12) & (xs <= sq_x[1] + 1e-12)]
    sq_ys = ys[(ys >= sq_y[0] - 1e-12) & (ys <= sq_y[1] + 1e-12)]
    perim = _square_perimeter_ccw(sq_xs, sq_ys)
    n_per = len(perim)
    outer = [node(x, y) for x, y in perim]
    center = DISC_CENTER
    mid_ids = []
    circ_ids = []
    for x, y in perim:
        v = np.array([x, y]) - center
        r = np.linalg.norm(v)
        d = v / r
        r_mid = 0.5 * (r + DISC_RADIUS)
        mid_ids.append(node(*(center + r_mid * d)))
        circ_ids.append(node(*(center + DISC_RADIUS * d)))
    for k in range(n_per):
        kn = (k + 1) % n_per
        cells.append([outer[k], outer[kn], mid_ids[kn], mid_ids[k]])
        cells.append([mid_ids[k], mid_ids[kn], circ_ids[kn], circ_ids[k]])

    points = np.asarray(points, dtype=np.float64)
    cells = np.asarray(cells, dtype=np.int64)
    domain = ((0.0, 4.0), (-1.0, 1.0))

    if dim == 2:
        return Mesh(points=points, cells=cells, dim=2, disc=(DISC_CENTER.copy(), DISC_RADIUS), domain=domain)

    # extrude one layer over z in [-1, 1]
    n = len(points)
    pts3 = np.concatenate(
        [
            np.column_stack([points, np.full(n, -1.0)]),
            np.column_stack([points, np.full(n, 1.0)]),
        ]
    )
    hexes = np.concatenate([cells, cells + n], axis=1)
    return Mesh(
        points=pts3,
        cells=hexes,
        dim=3,
        disc=(DISC_CENTER.copy(), DISC_RADIUS),
        domain=((0.0, 4.0), (-1.0, 1.0), (-1.0, 1.0)),
    )


def _on_disc(points_xy: np.ndarray, disc) -> np.ndarray:
    center, radius = disc
    r = np.linalg.norm(points_xy - center, axis=-1)
    return np.abs(r - radius) < _SNAP_TOL


# child octant corner positions in reference coordinates, per dimension
_REF_CORNERS = {
    2: np.array([(0, 0), (1, 0), (1, 1), (0, 1)]),
    3: np.array(
        [
            (0, 0, 0),
            (1, 0, 0),
            (1, 1, 0),
            (0, 1, 0),
            (0, 0, 1),
            (1, 0, 1),
            (1, 1, 1),
            (0, 1, 1),
        ]
    ),
}


def refine(mesh: Mesh) -> Mesh:
    """Split every cell into 2^d children; snap new disc-boundary nodes.

    New nodes whose generating parent nodes all lie on the disc circle are
    projected radially back onto it, keeping the curved boundary under
    refinement.
    """
    if mesh.reduced_index is not None and not np.array_equal(
        mesh.reduced_index, np.arange(len(mesh.points))
    ):
        raise ValueError("refinement of periodically identified meshes is not supported")
    d = mesh.dim
    ref = _REF_CORNERS[d]
    points = [tuple(p) for p in mesh.points]
    key_to_id = {}
    on_disc = (
        _on_disc(mesh.points[:, :2], mesh.disc)
        if mesh.disc is not None
        else np.zeros(len(mesh.points), dtype=bool)
    )

    def get_point(parent_ids):
        key = frozenset(parent_ids)
        if len(key) == 1:
            return next(iter(key))
        if key in key_to_id:
            return key_to_id[key]
        xy = np.mean([mesh.points[p] for p in key], axis=0)
        if mesh.disc is not None and all(on_disc[p] for p in key):
            center, radius = mesh.disc
            v = xy[:2] - center
            xy = xy.copy()
            xy[:2] = center + radius * v / np.linalg.norm(v)
        key_to_id[key] = len(points)
        points.append(tuple(xy))
        return key_to_id[key]

    new_cells = []
    half = {0.0: (0,), 0.5: (0, 1), 1.0: (1,)}
    for cell in mesh.cells:
        for oct_corner in ref:
            child = []
            for corner in ref:
                r = (np.asarray(oct_corner) + corner) / 2.0
                # generating parent corners of this reference position
                gens = [()]
                for axis in range(d):
                    gens = [g + (v,) for g in gens for v in half[r[axis]]]
                parent_ids = [cell[_corner_index(d, g)] for g in gens]
                child.append(get_point(parent_ids))
            new_cells.append(child)

    return Mesh(
        points=np.asarray(points, dtype=np.float64),
        cells=np.asarray(new_cells, dtype=np.int64),
        dim=d,
        disc=mesh.disc,
        domain=mesh.domain,
    )


def _corner_index(d: int, coords) -> int:
    ref = _REF_CORNERS[d]
    for idx, c in enumerate(ref):
        if tuple(c) == tuple(coords):
            return idx
    raise KeyError(coords)


# local faces of the reference cell, ordered so the induced normal points
# outward; for quads these are edges
_LOCAL_FACES = {
    2: [(0, 1), (1, 2), (2, 3), (3, 0)],
    3: [
        (0, 3, 2, 1),
        (4, 5, 6, 7),
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ],
}


def boundary_faces(mesh: Mesh):
    """Boundary faces with outward normals and measures.

    Returns (faces, normals, measures): faces is an (n_bf, 2 or 4) array of
    full node ids, normals are unit outward vectors, measures are edge
    lengths or face areas (bilinear faces approximated by two triangles).
    """
    face_count = {}
    face_repr = {}
    red = mesh.reduced_index
    for cell in mesh.cells:
        for loc in _LOCAL_FACES[mesh.dim]:
            fnodes = tuple(cell[list(loc)])
            key = frozenset(red[list(fnodes)])
            face_count[key] = face_count.get(key, 0) + 1
            face_repr[key] = (fnodes, cell)
    faces, normals, measures = [], [], []
    for key, cnt in face_count.items():
        if cnt != 1:
            continue
        fnodes, cell = face_repr[key]
        pts = mesh.points[list(fnodes)]
        centroid_cell = mesh.points[cell].mean(axis=0)
        if mesh.dim == 2:
            t = pts[1] - pts[0]
            normal = np.array([t[1], -t[0]])
            measure = np.linalg.norm(t)
        else:
            d1 = pts[2] - pts[0]
            d2 = pts[3] - pts[1]
            normal = 0.5 * np.cross(d1, d2)
            measure = np.linalg.norm(normal)
        nn = np.linalg.norm(normal)
        normal = normal / nn if nn > 0 else normal
        outward = pts.mean(axis=0) - centroid_cell
        if np.dot(normal, outward) < 0.0:
            normal = -normal
        faces.append(fnodes)
        normals.append(normal)
        measures.append(measure)
    return (
        np.asarray(faces, dtype=np.int64),
        np.asarray(normals, dtype=np.float64),
        np.asarray(measures, dtype=np.float64),
    )
