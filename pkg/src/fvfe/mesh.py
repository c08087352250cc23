"""Tetrahedral finite-element mesh and its face-type dual finite-volume mesh.

The solver is staggered: conservative variables live on the *dual* mesh whose
nodes are the barycenters of the faces of the tetrahedra, while the pressure
perturbation lives on the vertices of the tetrahedral mesh itself.

Dual-cell geometry.  The cell of an interior face is the union of the two
pyramids joining that face to the barycenters of its two adjacent elements
(each pyramid holds a quarter of its element volume); a boundary face keeps
the single pyramid.  Inside one element the four pyramids meet pairwise on
triangles (edge, element barycenter): those triangles are the interfaces of
the dual mesh.  Every interior dual node therefore has six neighbours (three
per adjacent element) and every boundary node has three, plus one boundary
patch lying on the domain boundary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, MeshFormatError, MeshTopologyError

# local face k of a tet is opposite local vertex k
_LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass
class FeMesh:
    """Conforming tetrahedral mesh.

    vertices       : (nv, 3) float, coordinates in metres
    tets           : (nt, 4) int, vertex indices, positive signed volume
    boundary_faces : (nbf, 3) int, vertex triples on the domain boundary
    boundary_tags  : (nbf,) int, user tag per boundary face
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    boundary_tags: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)
        self.boundary_faces = np.asarray(self.boundary_faces, dtype=np.int64).reshape(-1, 3)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype=np.int64).reshape(-1)
        self._fix_orientation()

    def _fix_orientation(self):
        """Reorder tet vertices so every signed volume is positive."""
        vol6 = self.signed_volumes() * 6.0
        flip = vol6 < 0.0
        if np.any(flip):
            self.tets[flip, 2], self.tets[flip, 3] = (
                self.tets[flip, 3].copy(),
                self.tets[flip, 2].copy(),
            )
            vol6 = self.signed_volumes() * 6.0
        if np.any(vol6 <= 0.0):
            bad = int(np.argmin(vol6))
            raise DegenerateGeometryError(f"element {bad} has non-positive volume")

    def signed_volumes(self):
        v = self.vertices[self.tets]
        a, b, c = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0], v[:, 3] - v[:, 0]
        return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_tets(self):
        return self.tets.shape[0]


@dataclass
class DualMesh:
    """Face-type dual finite-volume mesh with all per-interface geometry.

    Node arrays (one entry per FE face):
      nodes         (nn, 3)  face barycenters N_i
      cell_volume   (nn,)    |C_i|
      cell_surface  (nn,)    S(C_i), total boundary area of the cell
      char_length   (nn,)    |C_i| / S(C_i)
      face_vertices (nn, 3)  vertex triple of the FE face
      face_to_tets  (nn, 2)  adjacent elements, -1 on the open side
      boundary_node (nn,)    bool
      node_tag      (nn,)    boundary tag (-1 for interior nodes)

    Interface arrays (one entry per interior interface, oriented i -> j):
      iface_i, iface_j   (ni,)    dual node pair
      iface_normal       (ni, 3)  eta_ij, ||eta_ij|| = Area(Gamma_ij)
      iface_unit_normal  (ni, 3)
      iface_area         (ni,)
      iface_center       (ni, 3)  N_ij
      iface_dist         (ni,)    (N_j - N_i) . unit normal  (> 0)
      iface_tet          (ni,)    common element T_ij containing the interface
      iface_tet_L/R      (ni,)    upwind elements behind N_i / N_j
      iface_edge         (ni, 2)  shared-edge vertices V1, V2
      iface_far          (ni, 2)  remaining element vertices V3, V4

    Boundary patch arrays (one per boundary face, lying on the boundary):
      bpatch_node    (nb,)    owning dual node
      bpatch_normal  (nb, 3)  outward, ||.|| = face area
      bpatch_tet     (nb,)    adjacent element
      bpatch_tag     (nb,)

    grad_weights (nt, 4, 3): per-element weights turning the 4 face-node
    values into the gradient of their linear interpolant.
    """

    fe: FeMesh
    nodes: np.ndarray
    cell_volume: np.ndarray
    cell_surface: np.ndarray
    char_length: np.ndarray
    face_vertices: np.ndarray
    face_to_tets: np.ndarray
    boundary_node: np.ndarray
    node_tag: np.ndarray
    tet_faces: np.ndarray
    iface_i: np.ndarray
    iface_j: np.ndarray
    iface_normal: np.ndarray
    iface_unit_normal: np.ndarray
    iface_area: np.ndarray
    iface_center: np.ndarray
    iface_dist: np.ndarray
    iface_tet: np.ndarray
    iface_tet_L: np.ndarray
    iface_tet_R: np.ndarray
    iface_edge: np.ndarray
    iface_far: np.ndarray
    bpatch_node: np.ndarray
    bpatch_normal: np.ndarray
    bpatch_tet: np.ndarray
    bpatch_tag: np.ndarray
    grad_weights: np.ndarray
    vertex_grad_weights: np.ndarray
    _node_tets_padded: np.ndarray = field(default=None, repr=False)
    _node_tets_count: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_interfaces(self):
        return self.iface_i.shape[0]

    def element_gradients(self, values):
        """Gradient per element of the linear interpolant of a dual-node field.

        values: (nn,) or (nn, m).  Returns (nt, 3) or (nt, m, 3).
        """
        vals = values[self.tet_faces]  # (nt, 4[, m])
        if vals.ndim == 2:
            return np.einsum("tk,tkd->td", vals, self.grad_weights)
        return np.einsum("tkm,tkd->tmd", vals, self.grad_weights)

    def vertex_field_gradients(self, values):
        """Per-element P1 gradient of a field given on FE vertices."""
        vals = values[self.fe.tets]
        if vals.ndim == 2:
            return np.einsum("tk,tkd->td", vals, self.vertex_grad_weights)
        return np.einsum("tkm,tkd->tmd", vals, self.vertex_grad_weights)

    def node_average_from_tets(self, tet_values):
        """Average a per-element quantity onto dual nodes (1 or 2 adjacent elements)."""
        t0 = self.face_to_tets[:, 0]
        t1 = self.face_to_tets[:, 1]
        v0 = tet_values[t0]
        interior = t1 >= 0
        out = v0.astype(float).copy()
        out[interior] = 0.5 * (v0[interior] + tet_values[t1[interior]])
        return out


def generate_cube_mesh(n, extents=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))):
    """Uniform tetrahedralization of an axis-aligned box.

    Each of the nx*ny*nz sub-boxes is split into six tetrahedra sharing the
    main diagonal, which keeps every interior quad face conforming.  `n` is
    either a single subdivision count used on all axes or a (nx, ny, nz)
    triple.  Boundary faces are tagged 1..6 for x-min, x-max, y-min, y-max,
    z-min, z-max.
    """
    if np.isscalar(n):
        counts = (int(n),) * 3
    else:
        counts = tuple(int(k) for k in n)
    if len(counts) != 3 or any(k < 1 for k in counts):
        raise ValueError(f"subdivision counts must be >= 1, got {counts}")
    ext = np.asarray(extents, dtype=float).reshape(3, 2)
    if np.any(ext[:, 1] <= ext[:, 0]):
        raise ValueError("degenerate box extents")

    nx, ny, nz = counts
    xs = [np.linspace(ext[d, 0], ext[d, 1], counts[d] + 1) for d in range(3)]
    X, Y, Z = np.meshgrid(xs[0], xs[1], xs[2], indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    corner = np.empty((I.size, 2, 2, 2), dtype=np.int64)
    for di, dj, dk in itertools.product((0, 1), repeat=3):
        corner[:, di, dj, dk] = vid(I + di, J + dj, K + dk)

    # six tets per cube: paths 0 -> e_s1 -> e_s1+e_s2 -> (1,1,1)
    tets = []
    for perm in itertools.permutations(range(3)):
        steps = np.zeros((4, 3), dtype=int)
        for m, axis in enumerate(perm):
            steps[m + 1 :, axis] = 1
        tets.append(np.stack([corner[:, s[0], s[1], s[2]] for s in steps], axis=1))
    tets = np.concatenate(tets, axis=0)

    bfaces = []
    btags = []

    def add_quads(fixed_axis, fixed_idx, tag):
        axes = [a for a in range(3) if a != fixed_axis]
        u = np.arange(counts[axes[0]])
        v = np.arange(counts[axes[1]])
        U, V = np.meshgrid(u, v, indexing="ij")
        U, V = U.ravel(), V.ravel()

        def corner_id(du, dv):
            idx = [0, 0, 0]
            idx[fixed_axis] = fixed_idx
            idx[axes[0]] = U + du
            idx[axes[1]] = V + dv
            return vid(*idx)

        c00, c10, c01, c11 = (corner_id(0, 0), corner_id(1, 0), corner_id(0, 1), corner_id(1, 1))
        # split along the same diagonal as the hexahedral Kuhn decomposition:
        # quad diagonal joins the corner with all-zero offsets to all-one offsets
        tris = np.concatenate(
            [np.stack([c00, c10, c11], axis=1), np.stack([c00, c11, c01], axis=1)]
        )
        bfaces.append(tris)
        btags.append(np.full(tris.shape[0], tag, dtype=np.int64))

    add_quads(0, 0, 1)
    add_quads(0, nx, 2)
    add_quads(1, 0, 3)
    add_quads(1, ny, 4)
    add_quads(2, 0, 5)
    add_quads(2, nz, 6)

    return FeMesh(vertices, tets, np.concatenate(bfaces), np.concatenate(btags))


def read_mesh(path):
    """Read the plain ASCII mesh format (see `write_mesh`)."""
    tokens = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if body:
                tokens.extend((lineno, tok) for tok in body.split())
    pos = 0

    def take(count, conv, what):
        nonlocal pos
        if pos + count > len(tokens):
            last_line = tokens[-1][0] if tokens else 0
            raise MeshFormatError(f"line {last_line}: truncated file while reading {what}")
        out = []
        for lineno, tok in tokens[pos : pos + count]:
            try:
                out.append(conv(tok))
            except ValueError:
                raise MeshFormatError(f"line {lineno}: bad token {tok!r} in {what}") from None
        pos += count
        return out

    nv, nt, nbf = take(3, int, "header")
    verts = np.array(take(3 * nv, float, "vertices")).reshape(nv, 3)
    tets = np.array(take(4 * nt, int, "tetrahedra"), dtype=np.int64).reshape(nt, 4)
    braw = np.array(take(4 * nbf, int, "boundary faces"), dtype=np.int64).reshape(nbf, 4)
    if pos != len(tokens):
        raise MeshFormatError(f"line {tokens[pos][0]}: trailing data after boundary faces")
    if nt and (tets.min() < 0 or tets.max() >= nv):
        raise MeshFormatError("tetrahedron vertex index out of range")
    return FeMesh(verts, tets, braw[:, :3], braw[:, 3])


def write_mesh(fe, path):
    """Write the plain ASCII mesh format: counts header, vertices, tets, tagged boundary faces."""
    with open(path, "w") as fh:
        fh.write(f"{fe.n_vertices} {fe.n_tets} {fe.boundary_faces.shape[0]}\n")
        for v in fe.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in fe.tets:
            fh.write(f"{t[0]} {t[1]} {t[2]} {t[3]}\n")
        for f, tag in zip(fe.boundary_faces, fe.boundary_tags):
            fh.write(f"{f[0]} {f[1]} {f[2]} {tag}\n")


def _interp_gradient_weights(points):
    """Weights w (..., 4, 3) with grad = sum_k w[k] * value[k] for the linear
    interpolant through four non-coplanar points (..., 4, 3)."""
    n = points.shape[0]
    mats = np.empty((n, 4, 4))
    mats[:, :, 0] = 1.0
    mats[:, :, 1:] = points
    det = np.linalg.det(mats)
    if np.any(np.abs(det) < 1e-300):
        raise DegenerateGeometryError("coplanar interpolation points")
    inv = np.linalg.inv(mats)
    return np.transpose(inv[:, 1:, :], (0, 2, 1))  # rows 1..3 of inverse give the gradient


def galerkin_gradient(points, values):
    """Gradient of the unique linear interpolant through four (point, value) pairs.

    Exact for affine fields; raises DegenerateGeometryError when the four
    points are coplanar.
    """
    pts = np.asarray(points, dtype=float).reshape(1, 4, 3)
    w = _interp_gradient_weights(pts)[0]
    vals = np.asarray(values, dtype=float)
    if vals.shape[0] != 4:
        raise ValueError("need exactly four values")
    return np.einsum("k,kd->d", vals, w) if vals.ndim == 1 else np.einsum("km,kd->md", vals, w)


def build_dual_mesh(fe):
    """Build the dual mesh of the face-type, with all geometry the schemes use."""
    nt = fe.n_tets
    verts = fe.vertices
    tets = fe.tets

    # enumerate unique faces via sorted vertex triples
    all_faces = tets[:, _LOCAL_FACES].reshape(nt * 4, 3)
    key = np.sort(all_faces, axis=1)
    uniq, face_of = np.unique(key, axis=0, return_inverse=True)
    nn = uniq.shape[0]
    tet_faces = face_of.reshape(nt, 4)

    counts = np.bincount(face_of, minlength=nn)
    if counts.max() > 2:
        raise MeshTopologyError("a face is shared by more than two tetrahedra")

    face_to_tets = np.full((nn, 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(nt), 4)
    order = np.argsort(face_of, kind="stable")
    sorted_faces = face_of[order]
    sorted_owner = owner[order]
    first = np.searchsorted(sorted_faces, np.arange(nn), side="left")
    face_to_tets[:, 0] = sorted_owner[first]
    second = counts == 2
    face_to_tets[second, 1] = sorted_owner[first[second] + 1]

    boundary_node = counts == 1
    if fe.boundary_faces.shape[0] != int(boundary_node.sum()):
        raise MeshTopologyError(
            f"mesh lists {fe.boundary_faces.shape[0]} boundary faces, "
            f"found {int(boundary_node.sum())} open faces"
        )

    # map listed boundary faces (and their tags) to face ids
    node_tag = np.full(nn, -1, dtype=np.int64)
    bkey = np.sort(fe.boundary_faces, axis=1)
    locate = _rows_lookup(uniq, bkey)
    if np.any(locate < 0) or np.any(~boundary_node[locate]):
        raise MeshTopologyError("listed boundary face is not an open mesh face")
    node_tag[locate] = fe.boundary_tags

    nodes = verts[uniq].mean(axis=1)
    bary = verts[tets].mean(axis=1)
    vols = fe.signed_volumes()

    cell_volume = np.zeros(nn)
    np.add.at(cell_volume, tet_faces.ravel(), np.repeat(vols / 4.0, 4))

    # interfaces: per tet, per pair of local faces, triangle (shared edge, barycenter)
    pair_a, pair_b = zip(*itertools.combinations(range(4), 2))
    pair_a, pair_b = np.array(pair_a), np.array(pair_b)  # 6 pairs
    iface_i = tet_faces[:, pair_a].reshape(-1)
    iface_j = tet_faces[:, pair_b].reshape(-1)
    iface_tet = np.repeat(np.arange(nt), 6)

    # shared edge of local faces a,b = vertices not in {a, b} (face k is opposite vertex k)
    edge_mask = np.ones((6, 4), dtype=bool)
    edge_mask[np.arange(6), pair_a] = False
    edge_mask[np.arange(6), pair_b] = False
    edge_local = np.array([np.flatnonzero(m) for m in edge_mask])  # (6, 2)
    far_local = np.stack([pair_a, pair_b], axis=1)  # opposite vertices (6, 2)

    iface_edge = tets[:, edge_local].reshape(-1, 2)
    iface_far = tets[:, far_local].reshape(-1, 2)

    e1 = verts[iface_edge[:, 0]]
    e2 = verts[iface_edge[:, 1]]
    bb = np.repeat(bary, 6, axis=0)
    normal = 0.5 * np.cross(e2 - e1, bb - e1)
    area = np.linalg.norm(normal, axis=1)
    if np.any(area <= 0.0):
        raise DegenerateGeometryError("zero-area dual interface")
    center = (e1 + e2 + bb) / 3.0

    dvec = nodes[iface_j] - nodes[iface_i]
    sign = np.sign(np.einsum("ij,ij->i", normal, dvec))
    if np.any(sign == 0.0):
        raise DegenerateGeometryError("interface normal orthogonal to its node pair")
    normal *= sign[:, None]
    unit_normal = normal / area[:, None]
    dist = np.einsum("ij,ij->i", unit_normal, dvec)

    # upwind elements: behind each node, falling back to the common element
    t_common = iface_tet
    f2t_i = face_to_tets[iface_i]
    f2t_j = face_to_tets[iface_j]
    other_i = np.where(f2t_i[:, 0] == t_common, f2t_i[:, 1], f2t_i[:, 0])
    other_j = np.where(f2t_j[:, 0] == t_common, f2t_j[:, 1], f2t_j[:, 0])
    iface_tet_L = np.where(other_i >= 0, other_i, t_common)
    iface_tet_R = np.where(other_j >= 0, other_j, t_common)

    cell_surface = np.zeros(nn)
    np.add.at(cell_surface, iface_i, area)
    np.add.at(cell_surface, iface_j, area)

    # boundary patches: the boundary faces themselves, outward oriented
    bidx = np.flatnonzero(boundary_node)
    btris = verts[uniq[bidx]]
    bnormal = 0.5 * np.cross(btris[:, 1] - btris[:, 0], btris[:, 2] - btris[:, 0])
    btet = face_to_tets[bidx, 0]
    outward = nodes[bidx] - bary[btet]
    flip = np.einsum("ij,ij->i", bnormal, outward) < 0.0
    bnormal[flip] *= -1.0
    np.add.at(cell_surface, bidx, np.linalg.norm(bnormal, axis=1))

    char_length = cell_volume / cell_surface

    grad_weights = _interp_gradient_weights(nodes[tet_faces])
    vertex_grad_weights = _interp_gradient_weights(verts[tets])

    return DualMesh(
        fe=fe,
        nodes=nodes,
        cell_volume=cell_volume,
        cell_surface=cell_surface,
        char_length=char_length,
        face_vertices=uniq,
        face_to_tets=face_to_tets,
        boundary_node=boundary_node,
        node_tag=node_tag,
        tet_faces=tet_faces,
        iface_i=iface_i,
        iface_j=iface_j,
        iface_normal=normal,
        iface_unit_normal=unit_normal,
        iface_area=area,
        iface_center=center,
        iface_dist=dist,
        iface_tet=iface_tet,
        iface_tet_L=iface_tet_L,
        iface_tet_R=iface_tet_R,
        iface_edge=iface_edge,
        iface_far=iface_far,
        bpatch_node=bidx,
        bpatch_normal=bnormal,
        bpatch_tet=btet,
        bpatch_tag=node_tag[bidx],
        grad_weights=grad_weights,
        vertex_grad_weights=vertex_grad_weights,
    )


def associate_upwind_tets(dual):
    """Return (T_ijL, T_ijR, T_ij) per interface.

    T_ij is the element containing the interface (and the segment N_i N_j);
    T_ijL / T_ijR are the elements reached by continuing past N_i / N_j, i.e.
    the second element of each face, degenerating to T_ij at the boundary.
    """
    return dual.iface_tet_L, dual.iface_tet_R, dual.iface_tet


def _rows_lookup(sorted_rows, query):
    """Indices of `query` rows inside lexicographically sorted `sorted_rows` (-1 if absent)."""
    nmax = max(sorted_rows.max(initial=0), query.max(initial=0)) + 1
    enc = (sorted_rows[:, 0].astype(np.int64) * nmax + sorted_rows[:, 1]) * nmax + sorted_rows[:, 2]
    qenc = (query[:, 0].astype(np.int64) * nmax + query[:, 1]) * nmax + query[:, 2]
    pos = np.searchsorted(enc, qenc)
    pos = np.clip(pos, 0, enc.size - 1)
    found = enc[pos] == qenc
    return np.where(found, pos, -1)
