"""Coarse boundary-fitted mesh for the flow-around-a-cylinder channel.

Cross-section: channel [0, 2.5] x [0, 0.41] with a circular hole of diameter
0.1 centered at (0.5, 0.2).  An O-grid ring blends the circle into a square
frame that is surrounded by structured blocks; the 2D quads are extruded in z
and every hexahedron is split into six tetrahedra coned from its smallest-id
corner, cutting each quad face along the diagonal from its smallest global
vertex id so that neighbouring hexes agree on shared faces.

Boundary tags: 1 inlet (x=0), 2 outlet (x=2.5), 3 channel walls, 4 cylinder.
"""

from __future__ import annotations

import numpy as np

from .mesh import FeMesh

CENTER = np.array([0.5, 0.2])
RADIUS = 0.05
FRAME_HALF = 0.15
LENGTH = 2.5
HEIGHT = 0.41


def _frame_point(theta):
    """Point on the square frame perimeter at polar angle theta."""
    c, s = np.cos(theta), np.sin(theta)
    scale = FRAME_HALF / max(abs(c), abs(s))
    return CENTER + scale * np.array([c, s])


def _quad_blocks(n_theta=12, n_r=3, west_nx=4, east_nx=13):
    """2D node list plus quad connectivity (indices into the node list)."""
    if n_theta % 4 != 0:
        raise ValueError("n_theta must be a multiple of 4 so frame corners align")
    nodes = []
    index = {}

    def nid(p):
        key = (round(float(p[0]), 9), round(float(p[1]), 9))
        if key not in index:
            index[key] = len(nodes)
            nodes.append([key[0], key[1]])
        return index[key]

    quads = []

    # O-grid ring: circle -> frame, corners of the frame at 45 degrees
    thetas = np.pi / 4.0 + 2.0 * np.pi * np.arange(n_theta) / n_theta
    svals = np.linspace(0.0, 1.0, n_r + 1)
    ring = np.empty((n_theta, n_r + 1, 2))
    for it, th in enumerate(thetas):
        inner = CENTER + RADIUS * np.array([np.cos(th), np.sin(th)])
        outer = _frame_point(th)
        for ir, s in enumerate(svals):
            ring[it, ir] = (1.0 - s) * inner + s * outer
    for it in range(n_theta):
        jt = (it + 1) % n_theta
        for ir in range(n_r):
            quads.append(
                (
                    nid(ring[it, ir]),
                    nid(ring[jt, ir]),
                    nid(ring[jt, ir + 1]),
                    nid(ring[it, ir + 1]),
                )
            )

    # frame-side coordinates (shared with the surrounding blocks)
    per_side = n_theta // 4
    south = sorted(
        {
            round(float(_frame_point(th)[0]), 9)
            for th in thetas
            if abs(_frame_point(th)[1] - (CENTER[1] - FRAME_HALF)) < 1e-9
        }
    )
    west = sorted(
        {
            round(float(_frame_point(th)[1]), 9)
            for th in thetas
            if abs(_frame_point(th)[0] - (CENTER[0] - FRAME_HALF)) < 1e-9
        }
    )
    assert len(south) == per_side + 1 and len(west) == per_side + 1

    y_frame = [0.0, CENTER[1] - FRAME_HALF] + west[1:-1] + [CENTER[1] + FRAME_HALF, HEIGHT]
    x_west = list(np.linspace(0.0, CENTER[0] - FRAME_HALF, west_nx + 1))
    ratio = np.linspace(0.0, 1.0, east_nx + 1) ** 1.15
    x_east = list((CENTER[0] + FRAME_HALF) + ratio * (LENGTH - CENTER[0] - FRAME_HALF))

    def add_grid(xs, ys):
        for a in range(len(xs) - 1):
            for b in range(len(ys) - 1):
                quads.append(
                    (
                        nid((xs[a], ys[b])),
                        nid((xs[a + 1], ys[b])),
                        nid((xs[a + 1], ys[b + 1])),
                        nid((xs[a], ys[b + 1])),
                    )
                )

    add_grid(x_west, y_frame)  # west block
    add_grid(x_east, y_frame)  # east block
    add_grid(south, [0.0, CENTER[1] - FRAME_HALF])  # south strip
    add_grid(south, [CENTER[1] + FRAME_HALF, HEIGHT])  # north strip

    return np.asarray(nodes), quads


def cylinder_channel_mesh(nz=7, n_theta=12, n_r=3, west_nx=4, east_nx=13):
    """Tetrahedral mesh of the cylinder channel (tags 1..4, see module doc)."""
    nodes2d, quads = _quad_blocks(n_theta=n_theta, n_r=n_r, west_nx=west_nx, east_nx=east_nx)
    zs = np.linspace(0.0, HEIGHT, nz + 1)
    n2d = len(nodes2d)

    verts = np.empty((n2d * (nz + 1), 3))
    for kz, z in enumerate(zs):
        verts[kz * n2d : (kz + 1) * n2d, :2] = nodes2d
        verts[kz * n2d : (kz + 1) * n2d, 2] = z

    tets = []

    def split_quad(p, q, r, s):
        """Two triangles cutting along the diagonal from the smallest vertex id."""
        if min(p, r) < min(q, s):
            return [(p, q, r), (p, r, s)]
        return [(q, r, s), (q, s, p)]

    for kz in range(nz):
        lo = kz * n2d
        hi = (kz + 1) * n2d
        for (a, b, c, d) in quads:
            c8 = [lo + a, lo + b, lo + c, lo + d, hi + a, hi + b, hi + c, hi + d]
            faces = [
                (c8[0], c8[1], c8[2], c8[3]),  # bottom
                (c8[4], c8[5], c8[6], c8[7]),  # top
                (c8[0], c8[1], c8[5], c8[4]),
                (c8[1], c8[2], c8[6], c8[5]),
                (c8[2], c8[3], c8[7], c8[6]),
                (c8[3], c8[0], c8[4], c8[7]),
            ]
            # cone from the smallest-id corner: the three faces containing it are
            # cut by diagonals through it (min-id rule), so coning over the other
            # faces' min-id triangles tiles the hex and conforms across cells
            apex = min(c8)
            for f in faces:
                if apex in f:
                    continue
                for tri in split_quad(*f):
                    tets.append((tri[0], tri[1], tri[2], apex))

    tets = np.asarray(tets, dtype=np.int64)

    # boundary faces: those appearing exactly once
    local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    all_faces = tets[:, local].reshape(-1, 3)
    key = np.sort(all_faces, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    bfaces = uniq[counts == 1]

    pts = verts[bfaces]
    centroid = pts.mean(axis=1)
    rad = np.linalg.norm(pts[:, :, :2] - CENTER, axis=2)
    on_cyl = np.all(np.abs(rad - RADIUS) < 1e-7, axis=1)
    tags = np.full(bfaces.shape[0], 3, dtype=np.int64)
    tags[np.abs(centroid[:, 0]) < 1e-9] = 1
    tags[np.abs(centroid[:, 0] - LENGTH) < 1e-9] = 2
    tags[on_cyl] = 4
    return FeMesh(verts, tets, bfaces, tags)
