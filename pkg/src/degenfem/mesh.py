"""Conforming triangular meshes of the unit square with a tagged conductor.

Triangles are stored counterclockwise. Every triangle carries a region tag
and lies entirely inside the conductor closure or entirely outside it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Region",
    "TriMesh",
    "MeshError",
    "MeshFormatError",
    "generate_unit_square",
    "refine_uniform",
    "mesh_size",
    "save_mesh",
    "load_mesh",
]

_GRID_TOL = 1e-9


class Region(enum.IntEnum):
    DIELECTRIC = 0
    CONDUCTOR = 1


class MeshError(ValueError):
    """Invalid mesh data (orientation, indexing, conformity)."""


class MeshFormatError(MeshError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


def _signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = nodes[triangles[:, 0]]
    p1 = nodes[triangles[:, 1]]
    p2 = nodes[triangles[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def _edges(triangles: np.ndarray) -> np.ndarray:
    """All (sorted) edges of all triangles, shape (3*M, 2), local edge order 01, 12, 20."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.sort(e, axis=1)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable 2D triangulation.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (M, 3) int array, counterclockwise
    tri_region : (M,) int array of :class:`Region` values
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        region = np.ascontiguousarray(self.tri_region, dtype=np.int8)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError(f"nodes must have shape (N, 2), got {nodes.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError(f"triangles must have shape (M, 3), got {tris.shape}")
        if region.shape != (tris.shape[0],):
            raise MeshError("tri_region must have one entry per triangle")
        bad = np.flatnonzero((tris < 0).any(axis=1) | (tris >= len(nodes)).any(axis=1))
        if bad.size:
            raise MeshError(f"triangle {bad[0]} references a node index outside 0..{len(nodes) - 1}")
        if not np.isin(region, [Region.DIELECTRIC, Region.CONDUCTOR]).all():
            raise MeshError("unknown region tag")
        areas = _signed_areas(nodes, tris)
        bad = np.flatnonzero(~(areas > 0))
        if bad.size:
            raise MeshError(f"triangle {bad[0]} is not counterclockwise (signed area {areas[bad[0]]:.3e})")
        _, counts = np.unique(_edges(tris), axis=0, return_counts=True)
        if (counts > 2).any():
            raise MeshError("non-conforming mesh: an edge is shared by more than two triangles")
        for name, arr in (("nodes", nodes), ("triangles", tris), ("tri_region", region)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.triangles)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Sorted indices of nodes touching an edge that belongs to a single triangle."""
        edges, counts = np.unique(_edges(self.triangles), axis=0, return_counts=True)
        return np.unique(edges[counts == 1])

    @property
    def conductor_mask(self) -> np.ndarray:
        return self.tri_region == Region.CONDUCTOR

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.tri_region, other.tri_region))

    __hash__ = None

    def __repr__(self):
        return (f"TriMesh({self.n_nodes} nodes, {self.n_triangles} triangles, "
                f"{int(self.conductor_mask.sum())} conductor)")


def _on_grid(v: float, n: int) -> bool:
    return abs(v * n - round(v * n)) < _GRID_TOL


def generate_unit_square(n: int, conductor=None) -> TriMesh:
    """Structured mesh of (0,1)^2 with n x n cells, each cut along its SW-NE diagonal.

    ``conductor`` is ``(x0, y0, x1, y1)`` or None for an all-dielectric mesh.
    Its corners must lie on the grid so that no triangle straddles the interface.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if conductor is not None:
        x0, y0, x1, y1 = map(float, conductor)
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise ValueError(f"conductor {conductor} is not a rectangle inside the unit square")
        if not all(_on_grid(v, n) for v in (x0, y0, x1, y1)):
            raise ValueError(f"conductor corners {conductor} are not aligned with the {n}x{n} grid")

    ticks = np.arange(n + 1) / n
    xx, yy = np.meshgrid(ticks, ticks)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    sw = (j * (n + 1) + i).ravel()
    se, nw = sw + 1, sw + n + 1
    ne = nw + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    region = np.full(len(triangles), Region.DIELECTRIC, dtype=np.int8)
    if conductor is not None:
        bary = nodes[triangles].mean(axis=1)
        inside = ((bary[:, 0] > x0) & (bary[:, 0] < x1)
                  & (bary[:, 1] > y0) & (bary[:, 1] < y1))
        region[inside] = Region.CONDUCTOR
    return TriMesh(nodes, triangles, region)


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four by joining its edge midpoints.

    Old nodes keep their indices; midpoint nodes follow in lexicographic edge order.
    """
    tris = mesh.triangles
    m = len(tris)
    all_edges = _edges(tris)
    uniq, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])

    mid = mesh.n_nodes + inverse.reshape(3, m).T  # columns: m01, m12, m20
    a, b, c = tris.T
    m01, m12, m20 = mid.T
    children = np.stack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)
    region = np.repeat(mesh.tri_region, 4)
    return TriMesh(nodes, children, region)


def mesh_size(mesh: TriMesh) -> float:
    """Largest triangle diameter (longest edge)."""
    if mesh.n_triangles == 0:
        raise MeshError("mesh_size of an empty mesh")
    p = mesh.nodes[mesh.triangles]
    lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
    return float(lengths.max())


_REGION_CODE = {Region.CONDUCTOR: "c", Region.DIELECTRIC: "d"}
_CODE_REGION = {v: k for k, v in _REGION_CODE.items()}


def save_mesh(mesh: TriMesh, path) -> None:
    lines = ["trimesh 1", f"nodes {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    for (i, j, k), r in zip(mesh.triangles.tolist(), mesh.tri_region.tolist()):
        lines.append(f"{i} {j} {k} {_REGION_CODE[Region(r)]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _expect_count(line: str, keyword: str, lineno: int) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != keyword:
        raise MeshFormatError(lineno, f"expected '{keyword} <count>', got {line!r}")
    try:
        count = int(parts[1])
    except ValueError:
        raise MeshFormatError(lineno, f"invalid {keyword} count {parts[1]!r}") from None
    if count < 0:
        raise MeshFormatError(lineno, f"negative {keyword} count")
    return count


def load_mesh(path) -> TriMesh:
    """Read a mesh written by :func:`save_mesh`; errors carry the offending line number."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    # a single trailing blank line is tolerated, nothing else
    while lines and not lines[-1].strip():
        lines.pop()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(pos + 1, "unexpected end of file")
        pos += 1
        return lines[pos - 1], pos

    line, ln = take()
    if line.strip() != "trimesh 1":
        raise MeshFormatError(ln, f"bad header {line!r}, expected 'trimesh 1'")
    line, ln = take()
    n_nodes = _expect_count(line, "nodes", ln)
    nodes = np.empty((n_nodes, 2))
    for i in range(n_nodes):
        line, ln = take()
        parts = line.split()
        if len(parts) != 2:
            raise MeshFormatError(ln, f"expected 'x y', got {line!r}")
        try:
            nodes[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(ln, f"invalid coordinate in {line!r}") from None
        if not np.isfinite(nodes[i]).all():
            raise MeshFormatError(ln, "non-finite coordinate")

    line, ln = take()
    n_tris = _expect_count(line, "triangles", ln)
    tris = np.empty((n_tris, 3), dtype=np.int64)
    region = np.empty(n_tris, dtype=np.int8)
    for t in range(n_tris):
        line, ln = take()
        parts = line.split()
        if len(parts) != 4:
            raise MeshFormatError(ln, f"expected 'i j k region', got {line!r}")
        try:
            tris[t] = [int(p) for p in parts[:3]]
        except ValueError:
            raise MeshFormatError(ln, f"invalid node index in {line!r}") from None
        if (tris[t] < 0).any() or (tris[t] >= n_nodes).any():
            raise MeshFormatError(ln, f"triangle {t} references node index outside 0..{n_nodes - 1}")
        if parts[3] not in _CODE_REGION:
            raise MeshFormatError(ln, f"region must be 'c' or 'd', got {parts[3]!r}")
        region[t] = _CODE_REGION[parts[3]]
        if _signed_areas(nodes, tris[t:t + 1])[0] <= 0:
            raise MeshFormatError(ln, f"triangle {t} is not counterclockwise")
    if pos != len(lines):
        raise MeshFormatError(pos + 1, "unexpected content after triangle block")
    try:
        return TriMesh(nodes, tris, region)
    except MeshError as exc:
        raise MeshFormatError(ln, str(exc)) from None
