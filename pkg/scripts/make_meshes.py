"""Regenerate the meshes shipped in ``src/rmplate/data``.

The structured meshes need only numpy.  The mixed-boundary ``fig1`` domain is meshed
with the ``triangle`` package, which is needed only when running this script.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from rmplate.mesh import Mesh, boundary_topology, dump_mesh  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "rmplate" / "data"


def grid_mesh(xs, ys, skip, tag_of):
    """Structured mesh on the tensor grid, dropping cells in ``skip``.

    ``tag_of(p, q)`` returns the tag of the boundary segment from p to q.
    """
    nx, ny = len(xs), len(ys)
    vid = -np.ones((nx, ny), dtype=int)
    verts, tris = [], []
    cells = [(i, j) for i in range(nx - 1) for j in range(ny - 1) if not skip(xs[i], xs[i + 1], ys[j], ys[j + 1])]

    def v(i, j):
        if vid[i, j] < 0:
            vid[i, j] = len(verts)
            verts.append((xs[i], ys[j]))
        return vid[i, j]

    for i, j in cells:
        a, b, c, d = v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)
        tris += [(a, b, c), (a, c, d)]
    verts = np.array(verts, dtype=float)
    tris = np.array(tris)
    edges = {}
    for t in tris:
        for k in range(3):
            a, b = t[k], t[(k + 1) % 3]
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    bnd, tags = [], []
    for (a, b), n in sorted(edges.items()):
        if n == 1:
            bnd.append((a, b))
            tags.append(tag_of(verts[a], verts[b]))
    return Mesh(verts, tris, np.array(bnd), np.array(tags))


def two_hole():
    xs = np.arange(9) / 4
    ys = np.arange(5) / 4
    holes = [(0.25, 0.75, 0.25, 0.75), (1.25, 1.75, 0.25, 0.75)]

    def skip(x0, x1, y0, y1):
        return any(h[0] <= x0 and x1 <= h[1] and h[2] <= y0 and y1 <= h[3] for h in holes)

    def tag(p, q):
        if p[0] == 0 and q[0] == 0:
            return "c"
        if p[0] == 2 and q[0] == 2:
            return "s"
        return "f"

    return grid_mesh(xs, ys, skip, tag)


def square():
    xs = ys = np.arange(3) / 2
    return grid_mesh(xs, ys, lambda *a: False, lambda p, q: "c")


def annulus():
    xs = ys = np.arange(4) / 3
    return grid_mesh(xs, ys, lambda x0, x1, y0, y1: x0 > 0.3 and x1 < 0.7 and y0 > 0.3 and y1 < 0.7, lambda p, q: "c")


FIG1_OUTER = [(-3, 0), (1, 0.5), (3, 2), (2, 3), (4, 4), (0.5, 4), (-1.8, 4), (-6, 2)]
FIG1_OUTER_TAGS = ["f", "c", "s", "s", "s", "f", "f", "s"]
FIG1_HOLE_B = [(-4, 1.5), (-2, 1.5), (-3, 2.5), (-4, 2)]
FIG1_HOLE_B_TAGS = ["f", "f", "f", "f"]
FIG1_HOLE_C = [(0, 2), (1, 2), (0.5, 3)]
FIG1_HOLE_C_TAGS = ["c", "s", "f"]


def fig1(max_area=0.25):
    import triangle

    loops = [(FIG1_OUTER, FIG1_OUTER_TAGS), (FIG1_HOLE_B, FIG1_HOLE_B_TAGS), (FIG1_HOLE_C, FIG1_HOLE_C_TAGS)]
    pts, segs, marks = [], [], []
    for li, (P, tags) in enumerate(loops):
        off = len(pts)
        pts += P
        for k in range(len(P)):
            segs.append((off + k, off + (k + 1) % len(P)))
            marks.append(1 + 3 * li + "csf".index(tags[k]))
    holes = [np.mean(FIG1_HOLE_B, axis=0), np.mean(FIG1_HOLE_C, axis=0)]
    geom = dict(vertices=np.array(pts, float), segments=np.array(segs), segment_markers=np.array(marks), holes=np.array(holes))
    out = triangle.triangulate(geom, f"pq30a{max_area}")
    V, T = out["vertices"], out["triangles"]
    area = (V[T[:, 1], 0] - V[T[:, 0], 0]) * (V[T[:, 2], 1] - V[T[:, 0], 1]) - (V[T[:, 1], 1] - V[T[:, 0], 1]) * (V[T[:, 2], 0] - V[T[:, 0], 0])
    T = np.where((area < 0)[:, None], T[:, [0, 2, 1]], T)
    S, M = out["segments"], out["segment_markers"].ravel()
    tags = ["csf"[(int(k) - 1) % 3] for k in M]
    return Mesh(V, T, S, np.array(tags))


def main():
    DATA.mkdir(exist_ok=True)
    for name, fn in [("two_hole", two_hole), ("square", square), ("annulus", annulus), ("fig1", fig1)]:
        m = fn()
        topo = boundary_topology(m)
        print(name, m, "H", topo.n_holes, "Ncs", topo.n_cs, "I", topo.index_set, "I*", topo.reduced_index_set)
        (DATA / f"{name}.msh").write_text(dump_mesh(m))


if __name__ == "__main__":
    main()
