"""Continuous Lagrange P1/P2 spaces on mesh subdomains and on the interface trace."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np

from .errors import ArgumentError, NumericError
from .mesh import Mesh2D, Region

FAMILIES = ("P1", "P2")

# Reference gradients of the barycentric coordinates w.r.t. (xi, eta).
_GRAD_BARY = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
# Local P2 edge nodes follow the mesh edge convention (v0 v1), (v1 v2), (v2 v0).
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def n_local(family: str, dim: int = 2) -> int:
    if dim == 1:
        return 2 if family == "P1" else 3
    return 3 if family == "P1" else 6


def shape_values(family: str, bary: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points ``(..., 3)``, returned as ``(..., nloc)``."""
    lam = np.asarray(bary, dtype=float)
    if family == "P1":
        return lam.copy()
    if family == "P2":
        l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
        return np.stack(
            [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
            axis=-1,
        )
    raise ArgumentError(f"unknown family {family!r}")


def shape_grads(family: str, bary: np.ndarray) -> np.ndarray:
    """Reference gradients ``(..., nloc, 2)`` at barycentric points ``(..., 3)``."""
    lam = np.asarray(bary, dtype=float)
    g = _GRAD_BARY
    if family == "P1":
        return np.broadcast_to(g, lam.shape[:-1] + (3, 2)).copy()
    if family == "P2":
        out = np.empty(lam.shape[:-1] + (6, 2))
        for i in range(3):
            out[..., i, :] = (4 * lam[..., i, None] - 1) * g[i]
        for k, (i, j) in enumerate(_P2_EDGES):
            out[..., 3 + k, :] = 4 * (lam[..., j, None] * g[i] + lam[..., i, None] * g[j])
        return out
    raise ArgumentError(f"unknown family {family!r}")


def edge_shape_values(family: str, s: np.ndarray) -> np.ndarray:
    """1D Lagrange basis on [0, 1]: nodes (0, 1) for P1 and (0, 1, 1/2) for P2."""
    s = np.asarray(s, dtype=float)
    if family == "P1":
        return np.stack([1 - s, s], axis=-1)
    if family == "P2":
        return np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=-1)
    raise ArgumentError(f"unknown family {family!r}")


def _region(value) -> Region:
    if isinstance(value, str):
        try:
            return Region[value.upper()]
        except KeyError:
            raise ArgumentError(f"unknown subdomain {value!r}") from None
    return Region(int(value))


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    """Lagrange space; vector dofs are blocked by component: dof = comp * n_nodes + node."""

    mesh: Mesh2D
    subdomain: Region
    family: str
    components: int
    cells: np.ndarray         # mesh triangles, or rows of mesh.interface edges
    cell_nodes: np.ndarray    # (n_cells, nloc)
    node_coords: np.ndarray   # (n_nodes, 2)
    vertex_node: np.ndarray   # (n_vertices,), -1 outside the space
    edge_node: np.ndarray     # (n_edges,), -1 where no edge node
    edge_in_space: np.ndarray  # (n_edges,) bool: edge belongs to a cell of the space

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def dimension(self) -> int:
        return self.components * self.n_nodes

    @property
    def nloc(self) -> int:
        return self.cell_nodes.shape[1]

    @property
    def is_interface(self) -> bool:
        return self.subdomain == Region.INTERFACE

    @cached_property
    def dof_map(self) -> np.ndarray:
        """(n_cells, components * nloc) global dofs, component-major within a cell."""
        return np.concatenate([self.cell_nodes + c * self.n_nodes for c in range(self.components)], axis=1)

    @cached_property
    def dof_coords(self) -> np.ndarray:
        return np.tile(self.node_coords, (self.components, 1))

    @cached_property
    def cell_position(self) -> np.ndarray:
        """Map from mesh triangle index to row in ``cells`` (-1 if absent)."""
        out = -np.ones(self.mesh.n_triangles, dtype=np.int64)
        if not self.is_interface:
            out[self.cells] = np.arange(len(self.cells))
        return out

    def split(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients reshaped as (components, n_nodes)."""
        return np.asarray(coeffs).reshape(self.components, self.n_nodes)

    def vertex_values(self, coeffs: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Values at mesh vertices, (n_vertices, components); ``fill`` outside the space."""
        c = self.split(coeffs)
        out = np.full((self.mesh.n_vertices, self.components), fill, dtype=float)
        mask = self.vertex_node >= 0
        out[mask] = c[:, self.vertex_node[mask]].T
        return out


def build_space(mesh: Mesh2D, subdomain, family: str = "P1", components: int = 1) -> FunctionSpace:
    region = _region(subdomain)
    if family not in FAMILIES:
        raise ArgumentError(f"family must be one of {FAMILIES}, got {family!r}")
    if components not in (1, 2):
        raise ArgumentError("components must be 1 or 2")
    nv, ne = mesh.n_vertices, len(mesh.edges)
    vertex_node = -np.ones(nv, dtype=np.int64)
    edge_node = -np.ones(ne, dtype=np.int64)
    edge_in = np.zeros(ne, dtype=bool)
    if region == Region.INTERFACE:
        if components != 1:
            raise ArgumentError("the interface multiplier space is scalar")
        iface = mesh.interface
        if iface.n_edges == 0:
            raise ArgumentError("mesh has no interface edges")
        cells = np.arange(iface.n_edges)
        verts = iface.trace_vertices
        eids = mesh.edge_ids(iface.edges)
        local_edges = eids
        cell_v = iface.edges
    else:
        cells = mesh.region_cells(region)
        if len(cells) == 0:
            raise ArgumentError(f"mesh has no {region.name} cells")
        verts = np.unique(mesh.triangles[cells])
        local_edges = np.unique(mesh.tri_edges[cells])
        eids = mesh.tri_edges[cells]
        cell_v = mesh.triangles[cells]
    edge_in[local_edges] = True
    vertex_node[verts] = np.arange(len(verts))
    coords = [mesh.vertices[verts]]
    cell_nodes = vertex_node[cell_v]
    if family == "P2":
        edge_node[local_edges] = len(verts) + np.arange(len(local_edges))
        e = mesh.edges[local_edges]
        coords.append(0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]]))
        extra = edge_node[eids].reshape(len(cells), -1)
        cell_nodes = np.concatenate([cell_nodes, extra], axis=1)
    node_coords = np.concatenate(coords)
    for a in (cells, cell_nodes, node_coords, vertex_node, edge_node, edge_in):
        a.setflags(write=False)
    return FunctionSpace(mesh, region, family, components, cells, cell_nodes, node_coords, vertex_node, edge_node, edge_in)


# -- evaluation ---------------------------------------------------------------
def _call(f, x: np.ndarray, y: np.ndarray, t: float, components: int) -> np.ndarray:
    """Evaluate data given as a constant or a function of (x, y, t); returns (components, n)."""
    n = len(x)
    val = f(x, y, t) if callable(f) else f
    if components == 1:
        return np.array(np.broadcast_to(np.asarray(val, dtype=float), (n,)), dtype=float).reshape(1, n)
    if np.ndim(val) == 0:
        val = [val] * components
    if len(val) != components:
        raise ArgumentError(f"expected {components} components, got {len(val)}")
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in val]).astype(float)


def interpolate(space: FunctionSpace, f, t: float = 0.0) -> np.ndarray:
    """Nodal interpolation of ``f(x, y, t)`` (scalar, or a pair of arrays for vectors)."""
    x, y = space.node_coords[:, 0], space.node_coords[:, 1]
    vals = _call(f, x, y, t, space.components)
    if not np.all(np.isfinite(vals)):
        raise NumericError("interpolated function is not finite at every node")
    return vals.reshape(-1)


def locate(mesh: Mesh2D, cells: np.ndarray, points: np.ndarray, tol: float = 1e-12):
    """Find a cell among ``cells`` containing each point; returns (row, barycentric)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tri = mesh.triangles[cells]
    p0 = mesh.vertices[tri[:, 0]]
    J = np.stack([mesh.vertices[tri[:, 1]] - p0, mesh.vertices[tri[:, 2]] - p0], axis=2)
    inv = np.linalg.inv(J)
    rows = -np.ones(len(points), dtype=np.int64)
    bary = np.zeros((len(points), 3))
    for k, p in enumerate(points):
        ref = np.einsum("cij,cj->ci", inv, p - p0)
        lam = np.column_stack([1 - ref.sum(axis=1), ref])
        hit = np.flatnonzero(lam.min(axis=1) >= -tol)
        if len(hit):
            c = hit[np.argmax(lam[hit].min(axis=1))]
            rows[k] = c
            bary[k] = lam[c]
    return rows, bary


def evaluate(space: FunctionSpace, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Point values of a finite element function; (n,) for scalars, (n, 2) for vectors."""
    if space.is_interface:
        raise ArgumentError("point evaluation is implemented for volume spaces")
    rows, bary = locate(space.mesh, space.cells, points)
    if np.any(rows < 0):
        raise ArgumentError("point outside the subdomain of the space")
    phi = shape_values(space.family, bary)
    c = space.split(coeffs)
    nodes = space.cell_nodes[rows]
    vals = np.stack([np.einsum("pi,pi->p", phi, c[k][nodes]) for k in range(space.components)], axis=1)
    return vals[:, 0] if space.components == 1 else vals


# -- Dirichlet data -------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BCSet:
    """Essential data on a set of dofs of one space; values follow ``g`` in time."""

    space: FunctionSpace
    dofs: np.ndarray       # space-local dof indices, unique
    g: object = field(repr=False)
    comps: np.ndarray = field(repr=False, default=None)
    nodes: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.dofs)

    def values(self, t: float) -> np.ndarray:
        if len(self.dofs) == 0:
            return np.zeros(0)
        xy = self.space.node_coords[self.nodes]
        vals = _call(self.g, xy[:, 0], xy[:, 1], t, self.space.components)
        out = vals[self.comps, np.arange(len(self.dofs))]
        if not np.all(np.isfinite(out)):
            raise NumericError("boundary data is not finite")
        return out


def boundary_nodes(space: FunctionSpace, markers: Iterable) -> np.ndarray:
    """Scalar nodes of ``space`` lying on marked edges that belong to the space."""
    mesh = space.mesh
    markers = list(markers)
    if not markers:
        return np.zeros(0, dtype=np.int64)
    from .mesh import parse_marker
    wanted = {parse_marker(m) for m in markers}
    missing = wanted - set(mesh.markers)
    if missing:
        raise ArgumentError(f"markers not present in mesh: {sorted(missing)}")
    rows = mesh.marked_edges(wanted)
    eids = mesh.boundary_edge_ids[rows]
    keep = space.edge_in_space[eids]
    rows, eids = rows[keep], eids[keep]
    pairs = mesh.boundary_edges[rows]
    nodes = [space.vertex_node[pairs.reshape(-1)]]
    if space.family == "P2":
        nodes.append(space.edge_node[eids])
    nodes = np.concatenate(nodes)
    return np.unique(nodes[nodes >= 0])


def dirichlet_bcs(space: FunctionSpace, markers: Iterable, g, components: Iterable[int] | None = None) -> BCSet:
    """Constrain every dof on the marked edges to ``g(x, y, t)``.

    ``components`` restricts a vector constraint to selected components, which
    expresses normal or tangential conditions on axis-aligned boundaries.
    """
    comps = list(range(space.components)) if components is None else sorted(set(int(c) for c in components))
    if any(c < 0 or c >= space.components for c in comps):
        raise ArgumentError(f"component index out of range for a {space.components}-component space")
    nodes = boundary_nodes(space, markers)
    all_nodes = np.tile(nodes, len(comps))
    all_comps = np.repeat(np.array(comps, dtype=np.int64), len(nodes))
    dofs = all_comps * space.n_nodes + all_nodes
    return BCSet(space, dofs, g, all_comps, all_nodes)
