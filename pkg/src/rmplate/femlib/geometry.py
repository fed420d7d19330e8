"""Affine element maps x = x0 + J xhat."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import Mesh


@dataclass(frozen=True)
class Geometry:
    x0: np.ndarray  # (T, 2)
    J: np.ndarray  # (T, 2, 2), columns are v1 - v0 and v2 - v0
    Jinv: np.ndarray  # (T, 2, 2)
    detJ: np.ndarray  # (T,)
    centroid: np.ndarray  # (T, 2)
    diam: np.ndarray  # (T,)

    def map(self, pts, cells=slice(None)):
        """Physical coordinates (nc, npts, 2) of reference points ``pts``."""
        return self.x0[cells, None, :] + np.einsum("tij,qj->tqi", self.J[cells], pts)

    def pull(self, x, cells=slice(None)):
        """Reference coordinates of physical points ``x`` (nc, npts, 2)."""
        return np.einsum("tij,tqj->tqi", self.Jinv[cells], x - self.x0[cells, None, :])


def geometry(m: Mesh) -> Geometry:
    """Element maps of ``m``, computed once and cached on the mesh."""
    cached = m.__dict__.get("_geometry")
    if cached is not None:
        return cached
    g = _build(m)
    m.__dict__["_geometry"] = g
    return g


def _build(m: Mesh) -> Geometry:
    P = m.vertices[m.triangles]
    J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / det
    Jinv[:, 1, 1] = J[:, 0, 0] / det
    Jinv[:, 0, 1] = -J[:, 0, 1] / det
    Jinv[:, 1, 0] = -J[:, 1, 0] / det
    diam = np.max(np.stack([np.linalg.norm(P[:, a] - P[:, b], axis=1) for a, b in ((1, 2), (0, 2), (0, 1))]), axis=0)
    return Geometry(P[:, 0].copy(), J, Jinv, det, P.mean(axis=1), diam)
