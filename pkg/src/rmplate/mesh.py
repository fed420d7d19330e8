"""Triangulations of polygonal domains with holes and tagged boundary edges."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

# local edge i is opposite local vertex i
LOCAL_EDGES = ((1, 2), (0, 2), (0, 1))


class BoundaryTag(str, enum.Enum):
    CLAMPED = "c"
    SIMPLY_SUPPORTED = "s"
    FREE = "f"


class MeshError(ValueError):
    """Raised for malformed mesh files or invalid topology."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with counterclockwise triangles.

    Parameters
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise
    boundary : (B, 2) int array of boundary edge endpoints
    tags : (B,) array of tag characters ``c``, ``s`` or ``f``

    Edges are stored with a global orientation from the lower to the higher
    vertex index.  Construction validates the topology.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    tags: np.ndarray
    edges: np.ndarray = field(init=False, repr=False)
    tri_edges: np.ndarray = field(init=False, repr=False)
    edge_tris: np.ndarray = field(init=False, repr=False)
    edge_tags: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        V = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        T = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        B = np.ascontiguousarray(self.boundary, dtype=np.int64).reshape(-1, 2)
        tags = np.array([BoundaryTag(str(t)).value for t in np.ravel(self.tags)], dtype="<U1")
        for name, val in (("vertices", V), ("triangles", T), ("boundary", B), ("tags", tags)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        self._build_topology()

    # -- construction -------------------------------------------------------
    def _build_topology(self):
        V, T, B = self.vertices, self.triangles, self.boundary
        nv = len(V)
        if len(T) == 0:
            raise MeshError("mesh has no triangles")
        if T.min() < 0 or T.max() >= nv:
            bad = int(np.nonzero((T < 0) | (T >= nv))[0][0])
            raise MeshError(f"triangle {bad} references a vertex index outside [0, {nv})")
        if len(B) and (B.min() < 0 or B.max() >= nv):
            bad = int(np.nonzero((B < 0) | (B >= nv))[0][0])
            raise MeshError(f"boundary edge {bad} references a vertex index outside [0, {nv})")
        if len(self.tags) != len(B):
            raise MeshError("number of boundary tags does not match boundary edges")
        area2 = signed_area2(V[T])
        if np.any(area2 <= 0):
            bad = int(np.nonzero(area2 <= 0)[0][0])
            raise MeshError(f"triangle {bad} {tuple(T[bad])} is not counterclockwise (signed area {area2[bad] / 2:.3g})")

        loc = np.array(LOCAL_EDGES)
        raw = T[:, loc]  # (T, 3, 2)
        key = np.sort(raw, axis=2).reshape(-1, 2)
        edges, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            bad = edges[np.nonzero(counts > 2)[0][0]]
            raise MeshError(f"edge {tuple(bad)} is shared by more than two triangles")
        tri_edges = inv.reshape(-1, 3)
        edge_tris = -np.ones((len(edges), 2), dtype=np.int64)
        tri_ids = np.repeat(np.arange(len(T)), 3)
        order = np.argsort(inv, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv[order][1:] != inv[order][:-1]
        edge_tris[inv[order][first], 0] = tri_ids[order][first]
        edge_tris[inv[order][~first], 1] = tri_ids[order][~first]

        # triangle orientation must be consistent across interior edges
        dirs = raw.reshape(-1, 2)
        same = dirs[:, 0] < dirs[:, 1]
        ccw_dir = np.where(np.tile([True, False, True], len(T)), same, ~same)
        pair = order[~first]  # second occurrence of every interior edge
        mate = order[np.nonzero(~first)[0] - 1]
        clash = ccw_dir[pair] == ccw_dir[mate]
        if np.any(clash):
            a, b = mate[clash][0], pair[clash][0]
            raise MeshError(f"triangles {tri_ids[a]} and {tri_ids[b]} overlap across edge {tuple(edges[inv[a]])}")

        edge_index = {tuple(e): i for i, e in enumerate(edges.tolist())}
        edge_tags = np.full(len(edges), "", dtype="<U1")
        for i, (a, b) in enumerate(B.tolist()):
            k = edge_index.get((min(a, b), max(a, b)))
            if k is None:
                raise MeshError(f"boundary edge {i} ({a}, {b}) is not an edge of any triangle")
            if counts[k] != 1:
                raise MeshError(f"boundary edge {i} ({a}, {b}) is interior (shared by two triangles)")
            if edge_tags[k]:
                raise MeshError(f"boundary edge {i} ({a}, {b}) is listed twice")
            edge_tags[k] = self.tags[i]
        missing = np.nonzero((counts == 1) & (edge_tags == ""))[0]
        if len(missing):
            raise MeshError(f"dangling edge {tuple(edges[missing[0]])}: on the boundary but has no tag")
        if len(B) and not np.any(self.tags != BoundaryTag.FREE.value):
            raise MeshError("at least one boundary edge must be clamped or simply supported")

        bverts, deg = np.unique(B.ravel(), return_counts=True)
        if np.any(deg != 2):
            bad = int(bverts[np.nonzero(deg != 2)[0][0]])
            raise MeshError(f"boundary loop is open or pinched at vertex {bad}")

        for name, val in (("edges", edges), ("tri_edges", tri_edges), ("edge_tris", edge_tris), ("edge_tags", edge_tags)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    # -- basic quantities ---------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def tri_edge_reversed(self) -> np.ndarray:
        """(T, 3) True where local edge direction opposes the global one."""
        loc = np.array(LOCAL_EDGES)
        raw = self.triangles[:, loc]
        return raw[:, :, 0] > raw[:, :, 1]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_tags != "")[0]

    @cached_property
    def h(self) -> float:
        """Largest element diameter."""
        P = self.vertices[self.triangles]
        d = [np.linalg.norm(P[:, a] - P[:, b], axis=1) for a, b in LOCAL_EDGES]
        return float(np.max(d))

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * signed_area2(self.vertices[self.triangles])

    def area(self) -> float:
        return float(self.areas.sum())

    def __repr__(self):
        return f"Mesh(V={self.n_vertices}, T={self.n_triangles}, E={self.n_edges})"


def signed_area2(P: np.ndarray) -> np.ndarray:
    """Twice the signed area of triangles ``P`` (..., 3, 2)."""
    a, b, c = P[..., 0, :], P[..., 1, :], P[..., 2, :]
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def polygon_area(P: np.ndarray) -> float:
    """Signed shoelace area of a closed polygon given as (n, 2)."""
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


# -- file format -------------------------------------------------------------
HEADER = "plate-mesh v1"


def load_mesh(text: str) -> Mesh:
    """Parse the ``plate-mesh v1`` text format."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != HEADER:
        raise MeshError(f"line 1: expected {HEADER!r}")
    try:
        nv, nt, nb = (int(s) for s in lines[1].split())
    except (IndexError, ValueError):
        raise MeshError("line 2: expected '<nv> <nt> <nb>'") from None
    if len(lines) != 2 + nv + nt + nb:
        raise MeshError(f"expected {2 + nv + nt + nb} non-empty lines, found {len(lines)}")

    def parse(block, start, conv, width, what):
        out = []
        for i, ln in enumerate(block):
            parts = ln.split()
            try:
                if len(parts) != width:
                    raise ValueError
                out.append(conv(parts))
            except ValueError:
                raise MeshError(f"{what} {i} (line {start + i}): malformed entry {ln!r}") from None
        return out

    verts = parse(lines[2:2 + nv], 3, lambda p: [float(p[0]), float(p[1])], 2, "vertex")
    tris = parse(lines[2 + nv:2 + nv + nt], 3 + nv, lambda p: [int(x) for x in p], 3, "triangle")

    def bconv(p):
        if p[2] not in ("c", "s", "f"):
            raise ValueError
        return (int(p[0]), int(p[1]), p[2])

    bnd = parse(lines[2 + nv + nt:], 3 + nv + nt, bconv, 3, "boundary edge")
    return Mesh(
        np.array(verts, dtype=float).reshape(-1, 2),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
        np.array([b[:2] for b in bnd], dtype=np.int64).reshape(-1, 2),
        np.array([b[2] for b in bnd]),
    )


def dump_mesh(m: Mesh) -> str:
    out = [HEADER, f"{m.n_vertices} {m.n_triangles} {len(m.boundary)}"]
    out += [f"{x!r} {y!r}" for x, y in m.vertices.tolist()]
    out += [f"{i} {j} {k}" for i, j, k in m.triangles.tolist()]
    out += [f"{a} {b} {t}" for (a, b), t in zip(m.boundary.tolist(), m.tags.tolist())]
    return "\n".join(out) + "\n"


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        return load_mesh(fh.read())


def builtin_mesh(name: str) -> Mesh:
    """Load a mesh shipped with the package (``two_hole``, ``square``, ``annulus``, ``fig1``)."""
    text = resources.files("rmplate.data").joinpath(f"{name}.msh").read_text()
    return load_mesh(text)


# -- refinement --------------------------------------------------------------
def refine_uniform(m: Mesh) -> Mesh:
    """Split every triangle into four congruent children through edge midpoints."""
    nv = m.n_vertices
    mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    verts = np.vstack([m.vertices, mid])
    v0, v1, v2 = m.triangles.T
    m0, m1, m2 = (nv + m.tri_edges[:, i] for i in range(3))
    tris = np.stack(
        [
            np.stack([v0, m2, m1], 1),
            np.stack([m2, v1, m0], 1),
            np.stack([m1, m0, v2], 1),
            np.stack([m0, m1, m2], 1),
        ],
        axis=1,
    ).reshape(-1, 3)
    lookup = {tuple(e): i for i, e in enumerate(m.edges.tolist())}
    bnd, tags = [], []
    for (a, b), t in zip(m.boundary.tolist(), m.tags.tolist()):
        c = nv + lookup[(min(a, b), max(a, b))]
        bnd += [(a, c), (c, b)]
        tags += [t, t]
    return Mesh(verts, tris, np.array(bnd, dtype=np.int64).reshape(-1, 2), np.array(tags))


def alfeld_split(m: Mesh) -> Mesh:
    """Split every triangle into three by joining its barycenter to the vertices."""
    nv, nt = m.n_vertices, m.n_triangles
    bary = m.vertices[m.triangles].mean(axis=1)
    verts = np.vstack([m.vertices, bary])
    c = nv + np.arange(nt)
    v0, v1, v2 = m.triangles.T
    tris = np.stack([np.stack([v0, v1, c], 1), np.stack([v1, v2, c], 1), np.stack([v2, v0, c], 1)], axis=1)
    return Mesh(verts, tris.reshape(-1, 3), m.boundary, m.tags)


def refine(m: Mesh, times: int) -> Mesh:
    for _ in range(times):
        m = refine_uniform(m)
    return m


# -- boundary topology --------------------------------------------------------
@dataclass(frozen=True)
class Component:
    """A maximal run of boundary edges of one kind on one loop."""

    loop: int
    edges: tuple  # global edge indices, in loop order


@dataclass(frozen=True)
class BoundaryTopology:
    """Loops and boundary-condition components.

    ``loops[0]`` is the outer boundary, ``loops[1:]`` the holes; each is a
    vertex cycle listed counterclockwise.  ``cs_components`` are maximal runs of
    clamped or simply supported edges, ``free_components`` runs of free edges.
    """

    loops: tuple
    cs_components: tuple
    free_components: tuple
    index_set: tuple
    reduced_index_set: tuple

    @property
    def n_holes(self) -> int:
        return len(self.loops) - 1

    @property
    def n_cs(self) -> int:
        return len(self.cs_components)

    @property
    def n_free(self) -> int:
        return len(self.free_components)

    @property
    def harmonic_dimension(self) -> int:
        """|I*| + N_cs - 1."""
        return len(self.reduced_index_set) + self.n_cs - 1


def boundary_topology(m: Mesh) -> BoundaryTopology:
    """Trace the boundary loops and classify their tagged runs."""
    T = m.triangles
    # boundary edges oriented with the domain on their left
    nxt = {}
    for e in m.boundary_edges:
        t = m.edge_tris[e, 0]
        a, b = m.edges[e]
        tri = T[t].tolist()
        ia = tri.index(a)
        if tri[(ia + 1) % 3] == b:
            nxt[a] = (b, e)
        else:
            nxt[b] = (a, e)
    seen = set()
    raw_loops = []
    for start in sorted(nxt):
        if start in seen:
            continue
        verts, edges = [], []
        v = start
        while v not in seen:
            seen.add(v)
            verts.append(v)
            w, e = nxt[v]
            edges.append(int(e))
            v = w
        if v != start:
            raise MeshError(f"boundary loop through vertex {start} does not close")
        raw_loops.append((verts, edges))

    areas = [polygon_area(m.vertices[v]) for v, _ in raw_loops]
    outer = [i for i, a in enumerate(areas) if a > 0]
    if len(outer) != 1:
        raise MeshError(f"expected one outer boundary loop, found {len(outer)}")
    holes = [i for i, a in enumerate(areas) if a <= 0]

    def hole_key(i):
        P = m.vertices[raw_loops[i][0]]
        j = np.lexsort((P[:, 1], P[:, 0]))[0]
        return (P[j, 0], P[j, 1])

    holes.sort(key=hole_key)
    ordered = [raw_loops[outer[0]]] + [raw_loops[i] for i in holes]

    loops = []
    cs, free = [], []
    index_set = []
    for li, (verts, edges) in enumerate(ordered):
        # store loops counterclockwise
        loops.append(tuple(verts) if li == 0 else tuple([verts[0]] + verts[:0:-1]))
        kinds = [m.edge_tags[e] == BoundaryTag.FREE.value for e in edges]
        if any(kinds):
            index_set.append(li)
        n = len(edges)
        if all(k == kinds[0] for k in kinds):
            (free if kinds[0] else cs).append(Component(li, tuple(edges)))
            continue
        # rotate so the loop starts at a change of kind
        s = next(i for i in range(n) if kinds[i] != kinds[i - 1])
        run = [edges[s]]
        for j in range(1, n + 1):
            i = (s + j) % n
            if j < n and kinds[i] == kinds[(i - 1) % n]:
                run.append(edges[i])
                continue
            (free if kinds[(i - 1) % n] else cs).append(Component(li, tuple(run)))
            run = [edges[i]]
    index_set = tuple(index_set)
    return BoundaryTopology(
        loops=tuple(loops),
        cs_components=tuple(cs),
        free_components=tuple(free),
        index_set=index_set,
        reduced_index_set=index_set[1:],
    )


def loop_polygon(m: Mesh, topo: BoundaryTopology, i: int) -> np.ndarray:
    return m.vertices[list(topo.loops[i])]
