"""Triangular meshes with a Stokes and a porous subdomain sharing an interface."""
from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import ArgumentError, FormatError, GeometryError, MeshInvalid, MeshTangled, OutputError


class Region(IntEnum):
    STOKES = 0
    POROUS = 1
    INTERFACE = 2


class Marker(IntEnum):
    INLET = 1
    OUTLET = 2
    WALL_LEFT = 3
    WALL_RIGHT = 4
    WALL_TOP = 5
    WALL_BOTTOM = 6
    INTERFACE = 7


CUSTOM_BASE = 100


def parse_marker(token: str | int) -> int:
    """Accept a marker name, a Marker, or a custom integer >= 100."""
    if isinstance(token, (int, np.integer)):
        value = int(token)
        if value in Marker._value2member_map_ or value >= CUSTOM_BASE:
            return value
        raise ArgumentError(f"unknown marker {token!r}")
    text = str(token).strip()
    if text.upper() in Marker.__members__:
        return int(Marker[text.upper()])
    if text.upper().startswith("CUSTOM"):
        text = text[6:].strip("() ")
    try:
        value = int(text)
    except ValueError:
        raise ArgumentError(f"unknown marker {token!r}") from None
    if value < CUSTOM_BASE:
        raise ArgumentError(f"custom markers must be >= {CUSTOM_BASE}, got {value}")
    return value


def marker_name(value: int) -> str:
    value = int(value)
    if value in Marker._value2member_map_:
        return Marker(value).name
    return str(value)


def _parse_region(token: str) -> int:
    text = token.strip().upper()
    if text in ("STOKES", "0"):
        return int(Region.STOKES)
    if text in ("POROUS", "1"):
        return int(Region.POROUS)
    raise ValueError(token)


@dataclass(frozen=True)
class InterfaceMap:
    """Interface edges oriented so that ``tangent`` runs from ``edges[:,0]`` to ``edges[:,1]``."""

    edges: np.ndarray         # (ne, 2) vertex indices
    stokes_cell: np.ndarray   # (ne,)
    porous_cell: np.ndarray   # (ne,)
    normal_p: np.ndarray      # (ne, 2) outward from the porous side
    tangent: np.ndarray       # (ne, 2)
    lengths: np.ndarray       # (ne,)
    trace_vertices: np.ndarray

    @property
    def normal_s(self) -> np.ndarray:
        return -self.normal_p

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def length(self) -> float:
        return float(self.lengths.sum())


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray
    triangles: np.ndarray
    cell_tag: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray

    def __post_init__(self):
        conv = {
            "vertices": np.array(self.vertices, dtype=float).reshape(-1, 2),
            "triangles": np.array(self.triangles, dtype=np.int64).reshape(-1, 3),
            "cell_tag": np.array(self.cell_tag, dtype=np.int64).reshape(-1),
            "boundary_edges": np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2),
            "boundary_markers": np.array(self.boundary_markers, dtype=np.int64).reshape(-1),
        }
        for name, value in conv.items():
            object.__setattr__(self, name, _freeze(value))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    # -- topology -----------------------------------------------------------
    @cached_property
    def _edge_data(self):
        local = self.triangles[:, [[0, 1], [1, 2], [2, 0]]]
        flat = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        return _freeze(edges), _freeze(inverse.reshape(-1, 3))

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """Edge index of local edges (v0 v1), (v1 v2), (v2 v0) of each triangle."""
        return self._edge_data[1]

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """(n_edges, 2) adjacent triangles, -1 where absent. Raises on >2."""
        te = self.tri_edges.reshape(-1)
        cells = np.repeat(np.arange(self.n_triangles), 3)
        counts = np.bincount(te, minlength=len(self.edges))
        if counts.max(initial=0) > 2:
            bad = int(np.argmax(counts))
            raise MeshInvalid(f"edge {tuple(self.edges[bad])} is shared by {counts[bad]} triangles")
        out = -np.ones((len(self.edges), 2), dtype=np.int64)
        order = np.argsort(te, kind="stable")
        te_sorted, cells_sorted = te[order], cells[order]
        first = np.ones(len(te_sorted), dtype=bool)
        first[1:] = te_sorted[1:] != te_sorted[:-1]
        out[te_sorted[first], 0] = cells_sorted[first]
        out[te_sorted[~first], 1] = cells_sorted[~first]
        return _freeze(out)

    def edge_ids(self, pairs: np.ndarray) -> np.ndarray:
        """Edge index of each vertex pair; -1 where the pair is not a mesh edge."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        key_all = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
        key = pairs[:, 0] * self.n_vertices + pairs[:, 1]
        pos = np.searchsorted(key_all, key)
        pos = np.minimum(pos, len(key_all) - 1)
        return np.where(key_all[pos] == key, pos, -1)

    @cached_property
    def boundary_edge_ids(self) -> np.ndarray:
        return _freeze(self.edge_ids(self.boundary_edges))

    # -- geometry -----------------------------------------------------------
    def signed_areas(self, vertices: np.ndarray | None = None) -> np.ndarray:
        v = self.vertices if vertices is None else vertices
        p0, p1, p2 = (v[self.triangles[:, i]] for i in range(3))
        d1, d2 = p1 - p0, p2 - p0
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return _freeze(self.signed_areas())

    @cached_property
    def h(self) -> float:
        """Largest circumdiameter over all triangles."""
        v = self.vertices
        p = [v[self.triangles[:, i]] for i in range(3)]
        a = np.linalg.norm(p[1] - p[2], axis=1)
        b = np.linalg.norm(p[2] - p[0], axis=1)
        c = np.linalg.norm(p[0] - p[1], axis=1)
        return float(np.max(a * b * c / (2.0 * np.abs(self.areas))))

    def region_cells(self, region: int) -> np.ndarray:
        return np.flatnonzero(self.cell_tag == int(region))

    def region_vertex_mask(self, region: int) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.triangles[self.cell_tag == int(region)].reshape(-1)] = True
        return mask

    @cached_property
    def markers(self) -> frozenset:
        return frozenset(int(m) for m in np.unique(self.boundary_markers))

    def marked_edges(self, markers) -> np.ndarray:
        """Rows of ``boundary_edges`` whose marker is in ``markers``."""
        wanted = np.array(sorted({parse_marker(m) for m in markers}), dtype=np.int64)
        return np.flatnonzero(np.isin(self.boundary_markers, wanted))

    @cached_property
    def interface(self) -> InterfaceMap:
        rows = np.flatnonzero(self.boundary_markers == Marker.INTERFACE)
        pairs = self.boundary_edges[rows].copy()
        eids = self.boundary_edge_ids[rows]
        adj = self.edge_triangles[eids] if len(eids) else np.zeros((0, 2), dtype=np.int64)
        tag0 = self.cell_tag[adj[:, 0]] if len(adj) else adj[:, 0]
        stokes = np.where(tag0 == Region.STOKES, adj[:, 0], adj[:, 1])
        porous = np.where(tag0 == Region.STOKES, adj[:, 1], adj[:, 0])
        v = self.vertices
        d = v[pairs[:, 1]] - v[pairs[:, 0]]
        lengths = np.linalg.norm(d, axis=1)
        n = np.stack([d[:, 1], -d[:, 0]], axis=1) / lengths[:, None] if len(d) else d
        # Orient n outward from the porous triangle.
        if len(d):
            centroid = v[self.triangles[porous]].mean(axis=1)
            flip = np.einsum("ij,ij->i", centroid - v[pairs[:, 0]], n) > 0
            n[flip] *= -1.0
        tangent = np.stack([-n[:, 1], n[:, 0]], axis=1) if len(d) else d
        # Let the parametrization follow the tangent.
        if len(d):
            swap = np.einsum("ij,ij->i", d, tangent) < 0
            pairs[swap] = pairs[swap][:, ::-1]
        return InterfaceMap(
            edges=_freeze(pairs),
            stokes_cell=_freeze(stokes),
            porous_cell=_freeze(porous),
            normal_p=_freeze(n),
            tangent=_freeze(tangent),
            lengths=_freeze(lengths),
            trace_vertices=_freeze(_chain_order(pairs)),
        )

    # -- validation ---------------------------------------------------------
    def validate(self) -> "Mesh2D":
        """Check every structural invariant, raising MeshInvalid with the offending entity."""
        nv = self.n_vertices
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= nv):
            raise MeshInvalid("triangle references a vertex index out of range")
        if len(self.cell_tag) != self.n_triangles:
            raise MeshInvalid("cell_tag length differs from triangle count")
        bad_tag = np.flatnonzero(~np.isin(self.cell_tag, [Region.STOKES, Region.POROUS]))
        if len(bad_tag):
            raise MeshInvalid(f"triangle {bad_tag[0]} has tag {self.cell_tag[bad_tag[0]]}")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshInvalid("non-finite vertex coordinates")
        bad = np.flatnonzero(self.areas <= 0)
        if len(bad):
            raise MeshInvalid(f"triangle {bad[0]} {tuple(self.triangles[bad[0]])} is not counter-clockwise")
        degenerate = np.flatnonzero(
            (self.triangles[:, 0] == self.triangles[:, 1])
            | (self.triangles[:, 1] == self.triangles[:, 2])
            | (self.triangles[:, 0] == self.triangles[:, 2])
        )
        if len(degenerate):
            raise MeshInvalid(f"triangle {degenerate[0]} repeats a vertex")
        adj = self.edge_triangles
        if len(self.boundary_edges) != len(self.boundary_markers):
            raise MeshInvalid("boundary edge and marker counts differ")
        if self.boundary_edges.size and (self.boundary_edges.min() < 0 or self.boundary_edges.max() >= nv):
            raise MeshInvalid("boundary edge references a vertex index out of range")
        for m in np.unique(self.boundary_markers):
            if not (int(m) in Marker._value2member_map_ or m >= CUSTOM_BASE):
                raise MeshInvalid(f"unknown boundary marker {m}")
        eids = self.boundary_edge_ids
        missing = np.flatnonzero(eids < 0)
        if len(missing):
            raise MeshInvalid(f"marked edge {tuple(self.boundary_edges[missing[0]])} is not a mesh edge")
        if len(np.unique(eids)) != len(eids):
            raise MeshInvalid("an edge carries more than one marker")
        is_iface = self.boundary_markers == Marker.INTERFACE
        for row in np.flatnonzero(is_iface):
            t = adj[eids[row]]
            tags = sorted(self.cell_tag[t[t >= 0]].tolist())
            if tags != [Region.STOKES, Region.POROUS]:
                raise MeshInvalid(
                    f"interface edge {tuple(self.boundary_edges[row])} is not shared by one STOKES and one POROUS triangle"
                )
        for row in np.flatnonzero(~is_iface):
            if adj[eids[row], 1] >= 0:
                raise MeshInvalid(f"edge {tuple(self.boundary_edges[row])} is interior but marked {marker_name(self.boundary_markers[row])}")
        two = adj[:, 1] >= 0
        mixed = np.flatnonzero(two & (self.cell_tag[adj[:, 0]] != self.cell_tag[np.where(two, adj[:, 1], adj[:, 0])]))
        unmarked = np.setdiff1d(mixed, eids[is_iface])
        if len(unmarked):
            raise MeshInvalid(f"edge {tuple(self.edges[unmarked[0]])} separates the subdomains but is not marked INTERFACE")
        return self


def _chain_order(pairs: np.ndarray) -> np.ndarray:
    """Order vertices along the chain(s) of edges, starting from an endpoint when possible."""
    if len(pairs) == 0:
        return np.zeros(0, dtype=np.int64)
    nbrs: dict[int, list[int]] = {}
    for a, b in pairs.tolist():
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    seen: set[int] = set()
    order: list[int] = []
    starts = sorted(v for v, n in nbrs.items() if len(n) == 1) + sorted(nbrs)
    for s in starts:
        if s in seen:
            continue
        cur = s
        while cur is not None:
            seen.add(cur)
            order.append(cur)
            cur = next((n for n in nbrs[cur] if n not in seen), None)
    return np.array(order, dtype=np.int64)


# -- builders -------------------------------------------------------------
_SIDES = ("left", "right", "bottom", "top")
_DEFAULT_SIDE = {
    "left": Marker.WALL_LEFT,
    "right": Marker.WALL_RIGHT,
    "bottom": Marker.WALL_BOTTOM,
    "top": Marker.WALL_TOP,
}


def _box(b) -> np.ndarray:
    arr = np.asarray(b, dtype=float)
    if arr.shape != (2, 2):
        raise GeometryError("a box is given as ((x0, y0), (x1, y1))")
    if not np.all(arr[1] > arr[0]):
        raise GeometryError(f"box {arr.tolist()} has nonpositive extent")
    return arr


def _grid(xs: np.ndarray, ys: np.ndarray, diagonal: str):
    """Structured triangulation of a tensor grid."""
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()   # lower-left
    b = idx[:-1, 1:].ravel()    # lower-right
    c = idx[1:, 1:].ravel()     # upper-right
    d = idx[1:, :-1].ravel()    # upper-left
    centers = np.stack([(X[:-1, :-1] + X[1:, 1:]).ravel() / 2, (Y[:-1, :-1] + Y[1:, 1:]).ravel() / 2], axis=1)
    if diagonal == "right":
        tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
        owner = np.concatenate([np.arange(len(a)), np.arange(len(a))])
    elif diagonal == "left":
        tris = np.concatenate([np.stack([a, b, d], 1), np.stack([b, c, d], 1)])
        owner = np.concatenate([np.arange(len(a)), np.arange(len(a))])
    elif diagonal == "crossed":
        m = len(verts) + np.arange(len(a))
        verts = np.concatenate([verts, centers])
        tris = np.concatenate([np.stack(t, 1) for t in ((a, b, m), (b, c, m), (c, d, m), (d, a, m))])
        owner = np.tile(np.arange(len(a)), 4)
    else:
        raise ArgumentError(f"unknown diagonal pattern {diagonal!r}")
    return verts, tris, centers[owner]


def _merge_vertices(verts: np.ndarray, tris: np.ndarray):
    scale = max(1.0, float(np.abs(verts).max()))
    keys = np.round(verts / scale, 11)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return verts[first], inverse.reshape(-1)[tris]


def _mark_boundary(verts, tris, tags, region_side_markers: Mapping[str, int] | None):
    """Classify one-sided edges by bounding-box side and mixed edges as INTERFACE."""
    mesh = Mesh2D(verts, tris, tags, np.zeros((0, 2)), np.zeros(0))
    adj = mesh.edge_triangles
    edges = mesh.edges
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    tol = 1e-10 * max(1.0, float(np.abs(verts).max()))
    out_e, out_m = [], []
    overrides = {k.lower(): parse_marker(v) for k, v in (region_side_markers or {}).items()}
    for e, (t0, t1) in enumerate(adj):
        p, q = verts[edges[e, 0]], verts[edges[e, 1]]
        if t1 >= 0:
            if tags[t0] != tags[t1]:
                out_e.append(edges[e])
                out_m.append(int(Marker.INTERFACE))
            continue
        if abs(p[0] - lo[0]) < tol and abs(q[0] - lo[0]) < tol:
            side = "left"
        elif abs(p[0] - hi[0]) < tol and abs(q[0] - hi[0]) < tol:
            side = "right"
        elif abs(p[1] - lo[1]) < tol and abs(q[1] - lo[1]) < tol:
            side = "bottom"
        elif abs(p[1] - hi[1]) < tol and abs(q[1] - hi[1]) < tol:
            side = "top"
        else:
            side = None
        region = "stokes" if tags[t0] == Region.STOKES else "porous"
        if side is None:
            marker = overrides.get(region, CUSTOM_BASE)
        else:
            marker = overrides.get(f"{region}_{side}", overrides.get(side, _DEFAULT_SIDE[side]))
        out_e.append(edges[e])
        out_m.append(int(marker))
    return np.array(out_e, dtype=np.int64).reshape(-1, 2), np.array(out_m, dtype=np.int64)


def build_two_block_mesh(
    stokes_box,
    porous_box,
    nx: int,
    ny: int,
    diagonal: str = "right",
    side_markers: Mapping[str, int | str] | None = None,
) -> Mesh2D:
    """Structured mesh of two axis-aligned rectangles sharing one full edge.

    ``nx``/``ny`` are cell counts per box. ``side_markers`` overrides the
    geometric markers, keyed by ``"top"`` or ``"stokes_top"`` style names.
    """
    if int(nx) < 1 or int(ny) < 1:
        raise ArgumentError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    sb, pb = _box(stokes_box), _box(porous_box)
    tol = 1e-12 * max(1.0, float(np.abs(np.concatenate([sb, pb])).max()))
    same_x = np.allclose(sb[:, 0], pb[:, 0], atol=tol)
    same_y = np.allclose(sb[:, 1], pb[:, 1], atol=tol)
    vertical = same_x and (abs(sb[1, 1] - pb[0, 1]) < tol or abs(pb[1, 1] - sb[0, 1]) < tol)
    horizontal = same_y and (abs(sb[1, 0] - pb[0, 0]) < tol or abs(pb[1, 0] - sb[0, 0]) < tol)
    if not (vertical or horizontal):
        raise GeometryError("the two boxes must share exactly one full edge")
    parts = []
    for box, tag in ((sb, Region.STOKES), (pb, Region.POROUS)):
        xs = np.linspace(box[0, 0], box[1, 0], int(nx) + 1)
        ys = np.linspace(box[0, 1], box[1, 1], int(ny) + 1)
        v, t, _ = _grid(xs, ys, diagonal)
        parts.append((v, t, np.full(len(t), int(tag))))
    offset = len(parts[0][0])
    verts = np.concatenate([parts[0][0], parts[1][0]])
    tris = np.concatenate([parts[0][1], parts[1][1] + offset])
    tags = np.concatenate([parts[0][2], parts[1][2]])
    verts, tris = _merge_vertices(verts, tris)
    be, bm = _mark_boundary(verts, tris, tags, side_markers)
    return Mesh2D(verts, tris, tags, be, bm).validate()


def _segmented(lo: float, hi: float, cuts: list[float], n: int) -> np.ndarray:
    """Grid coordinates on [lo, hi] containing ``cuts``, with about ``n`` cells in total."""
    knots = np.unique(np.clip([lo, *cuts, hi], lo, hi))
    out = [knots[:1]]
    for a, b in zip(knots[:-1], knots[1:]):
        k = max(1, int(round(n * (b - a) / (hi - lo))))
        out.append(np.linspace(a, b, k + 1)[1:])
    return np.concatenate(out)


def build_channel_mesh(
    domain_box,
    channel_box,
    nx: int,
    ny: int,
    diagonal: str = "right",
    side_markers: Mapping[str, int | str] | None = None,
) -> Mesh2D:
    """Rectangle with an embedded rectangular Stokes channel; the rest is porous.

    Grid lines are aligned with the channel sides. Channel edges on the outer
    boundary are marked INLET unless overridden with ``stokes_<side>`` keys.
    """
    if int(nx) < 1 or int(ny) < 1:
        raise ArgumentError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    db, cb = _box(domain_box), _box(channel_box)
    if np.any(cb[0] < db[0] - 1e-12) or np.any(cb[1] > db[1] + 1e-12):
        raise GeometryError("channel must lie inside the domain")
    xs = _segmented(db[0, 0], db[1, 0], [cb[0, 0], cb[1, 0]], int(nx))
    ys = _segmented(db[0, 1], db[1, 1], [cb[0, 1], cb[1, 1]], int(ny))
    verts, tris, centers = _grid(xs, ys, diagonal)
    inside = np.all((centers > cb[0]) & (centers < cb[1]), axis=1)
    tags = np.where(inside, int(Region.STOKES), int(Region.POROUS))
    if not inside.any() or inside.all():
        raise GeometryError("channel must produce both Stokes and porous cells")
    markers = {f"stokes_{s}": Marker.INLET for s in _SIDES}
    markers.update(side_markers or {})
    be, bm = _mark_boundary(verts, tris, tags, markers)
    return Mesh2D(verts, tris, tags, be, bm).validate()


# -- transformations --------------------------------------------------------
def refine_uniform(mesh: Mesh2D) -> Mesh2D:
    """Split every triangle into four through its edge midpoints."""
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    verts = np.concatenate([mesh.vertices, mid])
    t = mesh.triangles
    m01, m12, m20 = (nv + mesh.tri_edges[:, i] for i in range(3))
    tris = np.concatenate([
        np.stack([t[:, 0], m01, m20], 1),
        np.stack([m01, t[:, 1], m12], 1),
        np.stack([m20, m12, t[:, 2]], 1),
        np.stack([m01, m12, m20], 1),
    ])
    tags = np.tile(mesh.cell_tag, 4)
    m = nv + mesh.boundary_edge_ids
    be = np.concatenate([np.stack([mesh.boundary_edges[:, 0], m], 1), np.stack([m, mesh.boundary_edges[:, 1]], 1)])
    bm = np.tile(mesh.boundary_markers, 2)
    return Mesh2D(verts, tris, tags, be, bm).validate()


def move_nodes(mesh: Mesh2D, displacement: np.ndarray, step: int | None = None, region: int | None = Region.STOKES) -> Mesh2D:
    """Displace vertices of ``region`` triangles (all vertices when ``region`` is None); others stay put."""
    d = np.asarray(displacement, dtype=float)
    if d.shape != (mesh.n_vertices, 2):
        raise ArgumentError(f"displacement must have shape ({mesh.n_vertices}, 2), got {d.shape}")
    mask = np.ones(mesh.n_vertices, dtype=bool) if region is None else mesh.region_vertex_mask(region)
    if not np.all(np.isfinite(d[mask])):
        raise ArgumentError("displacement is not finite on moving vertices")
    new = mesh.vertices.copy()
    new[mask] += d[mask]
    area = mesh.signed_areas(new)
    bad = np.flatnonzero(area <= 0)
    if len(bad):
        raise MeshTangled(f"triangle {bad[0]} has area {area[bad[0]]:.3e} after motion", step=step)
    return Mesh2D(new, mesh.triangles, mesh.cell_tag, mesh.boundary_edges, mesh.boundary_markers)


# -- file format ------------------------------------------------------------
def load_mesh(path: str | os.PathLike) -> Mesh2D:
    """Read the plain-text ``mesh2d 1`` format; see the README for the layout."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in lines if ln]
    pos = 0

    def take(expected: str) -> int:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError(f"missing section '{expected}'")
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != expected:
            raise FormatError(f"line {pos + 1}: expected '{expected} <count>', got {lines[pos]!r}")
        pos += 1
        try:
            n = int(parts[1])
        except ValueError:
            raise FormatError(f"bad count in {lines[pos - 1]!r}") from None
        if n < 0 or pos + n > len(lines):
            raise FormatError(f"section '{expected}' declares {n} rows but the file is too short")
        return n

    if not lines or lines[0].split() != ["mesh2d", "1"]:
        raise FormatError("header must be 'mesh2d 1'")
    pos = 1
    try:
        n = take("vertices")
        verts = [[float(x) for x in lines[pos + i].split()] for i in range(n)]
        if any(len(v) != 2 for v in verts):
            raise FormatError("vertex rows need two coordinates")
        pos += n
        n = take("triangles")
        tris, tags = [], []
        for i in range(n):
            parts = lines[pos + i].split()
            if len(parts) != 4:
                raise FormatError(f"triangle row {i} needs 'i j k tag'")
            tris.append([int(p) for p in parts[:3]])
            tags.append(_parse_region(parts[3]))
        pos += n
        n = take("boundary_edges")
        be, bm = [], []
        for i in range(n):
            parts = lines[pos + i].split()
            if len(parts) != 3:
                raise FormatError(f"boundary edge row {i} needs 'i j marker'")
            be.append([int(parts[0]), int(parts[1])])
            bm.append(parse_marker(parts[2]))
        pos += n
    except (ValueError, ArgumentError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(str(exc)) from exc
    if pos != len(lines):
        raise FormatError(f"unexpected trailing content at line {pos + 1}")
    mesh = Mesh2D(np.array(verts).reshape(-1, 2), np.array(tris).reshape(-1, 3), tags, np.array(be).reshape(-1, 2), bm)
    return mesh.validate()


def save_mesh(mesh: Mesh2D, path: str | os.PathLike) -> None:
    out = ["mesh2d 1", f"vertices {mesh.n_vertices}"]
    out += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    out.append(f"triangles {mesh.n_triangles}")
    out += [f"{a} {b} {c} {Region(t).name}" for (a, b, c), t in zip(mesh.triangles.tolist(), mesh.cell_tag)]
    out.append(f"boundary_edges {len(mesh.boundary_edges)}")
    out += [f"{a} {b} {marker_name(m)}" for (a, b), m in zip(mesh.boundary_edges.tolist(), mesh.boundary_markers)]
    from .io import atomic_write_text
    atomic_write_text(path, "\n".join(out) + "\n")
