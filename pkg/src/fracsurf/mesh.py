"""Triangulated 2-d surfaces embedded in R^3: generators, a Gmsh reader, validation.

A mesh is valid when every triangle is non-degenerate, every edge is shared by
at most two triangles (exactly one marks a boundary edge), and the two
triangles of an interior edge traverse it in opposite directions (consistent
orientation). Boundary vertices are always detected from edge incidence, never
taken from file tags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SurfaceMesh",
    "mesh_validate",
    "gen_sphere",
    "gen_torus",
    "gen_graded_square",
    "gen_unit_square",
    "read_gmsh",
    "write_off",
    "write_vertex_csv",
]

MODE_DIRICHLET = "dirichlet"
MODE_REACTION = "positive-reaction"
MODE_ZERO_MEAN = "zero-mean"
MODES = (MODE_DIRICHLET, MODE_REACTION, MODE_ZERO_MEAN)


@dataclass(frozen=True)
class SurfaceMesh:
    """Vertex coordinates (n,3), triangle index triples (t,3), boundary mask, mode hint."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray  # bool mask, length n
    mode_hint: str

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def euler_characteristic(self) -> int:
        edges = np.sort(_directed_edges(self.triangles), axis=1)
        n_edges = len(np.unique(_edge_keys(edges, self.num_vertices)))
        return self.num_vertices - n_edges + self.num_triangles

    def is_closed(self) -> bool:
        return not bool(self.boundary_vertices.any())

    def triangle_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


def _directed_edges(tris: np.ndarray) -> np.ndarray:
    return np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])


def _edge_keys(edges: np.ndarray, n: int) -> np.ndarray:
    # encode a vertex pair as one integer so uniqueness scans stay fast on
    # million-edge meshes
    return edges[:, 0].astype(np.int64) * n + edges[:, 1]


def _boundary_mask(n: int, tris: np.ndarray) -> np.ndarray:
    edges = np.sort(_directed_edges(tris), axis=1)
    keys, counts = np.unique(_edge_keys(edges, n), return_counts=True)
    single = keys[counts == 1]
    mask = np.zeros(n, dtype=bool)
    mask[single // n] = True
    mask[single % n] = True
    return mask


def mesh_validate(mesh: SurfaceMesh) -> dict:
    """Check all mesh invariants; return summary stats. Raises ValueError on violation."""
    v, tris = mesh.vertices, mesh.triangles
    n = len(v)
    if v.ndim != 2 or v.shape[1] != 3:
        raise ValueError("vertices must be an (n, 3) array")
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise ValueError("triangles must be a (t, 3) index array")
    if tris.min(initial=0) < 0 or tris.max(initial=-1) >= n:
        raise ValueError("triangle indices out of range")
    if mesh.mode_hint not in MODES:
        raise ValueError(f"unknown mode hint {mesh.mode_hint!r}")

    diam = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
    areas = mesh.triangle_areas()
    bad = np.nonzero(areas <= 1e-14 * diam * diam)[0]
    if bad.size:
        raise ValueError(f"degenerate triangle at index {bad[0]} (area {areas[bad[0]]:.3e})")

    directed = _directed_edges(tris)
    ukeys, counts = np.unique(_edge_keys(np.sort(directed, axis=1), n), return_counts=True)
    if np.any(counts > 2):
        key = int(ukeys[np.argmax(counts > 2)])
        raise ValueError(f"edge ({key // n}, {key % n}) shared by more than two triangles")
    dkeys, dcounts = np.unique(_edge_keys(directed, n), return_counts=True)
    if np.any(dcounts > 1):
        key = int(dkeys[np.argmax(dcounts > 1)])
        raise ValueError(
            f"inconsistent orientation: directed edge ({key // n}, {key % n}) repeated"
        )

    single = ukeys[counts == 1]
    expected_boundary = np.zeros(n, dtype=bool)
    expected_boundary[single // n] = True
    expected_boundary[single % n] = True
    if not np.array_equal(expected_boundary, mesh.boundary_vertices):
        raise ValueError("boundary_vertices mask does not match edge incidence")

    ei, ej = ukeys // n, ukeys % n
    return {
        "vertices": n,
        "edges": len(ukeys),
        "triangles": len(tris),
        "boundary_vertices": int(expected_boundary.sum()),
        "euler_characteristic": n - len(ukeys) + len(tris),
        "max_edge": float(np.max(np.linalg.norm(v[ei] - v[ej], axis=1))),
        "min_area": float(areas.min()),
    }


def _finalize(vertices, triangles, mode_hint) -> SurfaceMesh:
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    mesh = SurfaceMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertices=_boundary_mask(len(vertices), triangles),
        mode_hint=mode_hint,
    )
    mesh_validate(mesh)
    for arr in (mesh.vertices, mesh.triangles, mesh.boundary_vertices):
        arr.setflags(write=False)
    return mesh


# icosahedron with consistently outward-oriented faces
_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _GOLDEN, 0], [1, _GOLDEN, 0], [-1, -_GOLDEN, 0], [1, -_GOLDEN, 0],
        [0, -1, _GOLDEN], [0, 1, _GOLDEN], [0, -1, -_GOLDEN], [0, 1, -_GOLDEN],
        [_GOLDEN, 0, -1], [_GOLDEN, 0, 1], [-_GOLDEN, 0, -1], [-_GOLDEN, 0, 1],
    ],
    dtype=float,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [5, 4, 9], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def gen_sphere(refinement_level: int) -> SurfaceMesh:
    """Unit sphere: icosahedron subdivided `refinement_level` times, vertices projected."""
    if not 0 <= refinement_level <= 7:
        raise ValueError("refinement level must be in [0, 7]")
    verts = list(_ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1)[:, None])
    faces = _ICO_FACES
    for _ in range(refinement_level):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
        for t, (a, b, c) in enumerate(faces):
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces[4 * t : 4 * t + 4] = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        faces = new_faces
    return _finalize(np.array(verts), faces, MODE_ZERO_MEAN)


def gen_torus(R: float, r: float, n1: int, n2: int) -> SurfaceMesh:
    """Structured torus: n1 x n2 grid in the (phi1, phi2) angles, quads split into triangles."""
    if not 0.0 < r < R:
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    if n1 < 3 or n2 < 3:
        raise ValueError("need at least 3 subdivisions in each angle")
    phi1 = 2.0 * np.pi * np.arange(n1) / n1
    phi2 = 2.0 * np.pi * np.arange(n2) / n2
    P1, P2 = np.meshgrid(phi1, phi2, indexing="ij")
    ring = R + r * np.cos(P1)
    verts = np.column_stack(
        [(ring * np.cos(P2)).ravel(), (ring * np.sin(P2)).ravel(), (r * np.sin(P1)).ravel()]
    )
    i = np.repeat(np.arange(n1), n2)
    j = np.tile(np.arange(n2), n1)
    v00 = i * n2 + j
    v10 = ((i + 1) % n1) * n2 + j
    v11 = ((i + 1) % n1) * n2 + (j + 1) % n2
    v01 = i * n2 + (j + 1) % n2
    tris = np.concatenate(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    return _finalize(verts, tris, MODE_REACTION)


def _graded_axis(N0: int, p: int) -> np.ndarray:
    # uniform subdivision of [-1,1] into 2*N0 intervals, then p extra nodes in the
    # first/last interval and the two around 0, clustered at -1+, 0-, 0+, 1- with
    # offsets h*2^-n measured from the clustered endpoint
    N1 = 2 * N0
    h = 2.0 / N1
    base = -1.0 + h * np.arange(N1 + 1)
    offs = h * 0.5 ** np.arange(1, p + 1)
    extra = np.concatenate([-1.0 + offs, -offs, offs, 1.0 - offs]) if p else np.empty(0)
    nodes = np.unique(np.concatenate([base, extra]))
    if len(nodes) != N1 + 4 * p + 1:
        raise AssertionError("graded node construction produced duplicate nodes")
    return nodes


def gen_graded_square(N0: int, p: int) -> SurfaceMesh:
    """Tensor mesh of [-1,1]^2 graded toward the boundary and both axes.

    Per direction 2*N0 uniform intervals plus p exponentially clustered nodes
    in each of the four marked intervals, so the spacing ratio is exactly 2^p.
    Every cell is split along the same diagonal, keeping the triangulation
    deterministic.
    """
    if N0 < 2:
        raise ValueError("N0 must be at least 2")
    if p < 0:
        raise ValueError("p must be non-negative")
    return _tensor_square(_graded_axis(N0, p))


def gen_unit_square(n: int) -> SurfaceMesh:
    """Uniform n x n cell mesh of [0,1]^2 (flat, Dirichlet mode)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return _tensor_square(np.linspace(0.0, 1.0, n + 1))


def _tensor_square(axis: np.ndarray) -> SurfaceMesh:
    k = len(axis)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(k * k)])
    i = np.repeat(np.arange(k - 1), k - 1)
    j = np.tile(np.arange(k - 1), k - 1)
    v00 = i * k + j
    v10 = (i + 1) * k + j
    v11 = (i + 1) * k + j + 1
    v01 = i * k + j + 1
    tris = np.concatenate(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    return _finalize(verts, tris, MODE_DIRICHLET)


def read_gmsh(path) -> SurfaceMesh:
    """Read an ASCII Gmsh .msh file (format 2.2 or 4.1) holding 3-node triangles.

    Point and line elements (boundary markers) are skipped; boundary vertices
    are recomputed from edge incidence. Any other element type is an error.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    sections: dict[str, tuple[int, int]] = {}
    i = 0
    while i < len(lines):
        token = lines[i].strip()
        if token.startswith("$") and not token.startswith("$End"):
            name = token[1:]
            end = f"$End{name}"
            j = i + 1
            while j < len(lines) and lines[j].strip() != end:
                j += 1
            if j == len(lines):
                raise ValueError(f"line {i + 1}: section {token} never closed")
            sections[name] = (i + 1, j)
            i = j + 1
        else:
            i += 1
    if "MeshFormat" not in sections:
        raise ValueError("not a Gmsh file: missing $MeshFormat")
    fmt_line = sections["MeshFormat"][0]
    fmt = lines[fmt_line].split()
    version = fmt[0]
    if fmt[1] != "0":
        raise ValueError(f"line {fmt_line + 1}: binary .msh not supported")
    if version.startswith("2."):
        verts, tag_map = _read_nodes_v2(lines, sections)
        tris = _read_elements_v2(lines, sections, tag_map)
    elif version.startswith("4.1"):
        verts, tag_map = _read_nodes_v41(lines, sections)
        tris = _read_elements_v41(lines, sections, tag_map)
    else:
        raise ValueError(f"line {fmt_line + 1}: unsupported .msh version {version}")
    if len(tris) == 0:
        raise ValueError("no triangle elements found")
    mesh_arrays = np.asarray(verts), np.asarray(tris, dtype=np.int64)
    mode = MODE_DIRICHLET if _boundary_mask(len(verts), mesh_arrays[1]).any() else MODE_ZERO_MEAN
    return _finalize(mesh_arrays[0], mesh_arrays[1], mode)


def _read_nodes_v2(lines, sections):
    if "Nodes" not in sections:
        raise ValueError("missing $Nodes section")
    start, end = sections["Nodes"]
    count = int(lines[start].split()[0])
    verts = np.empty((count, 3))
    tag_map = {}
    for k in range(count):
        ln = start + 1 + k
        if ln >= end:
            raise ValueError(f"line {ln + 1}: node list shorter than declared count {count}")
        parts = lines[ln].split()
        tag_map[int(parts[0])] = k
        verts[k] = [float(x) for x in parts[1:4]]
    return verts, tag_map


def _read_elements_v2(lines, sections, tag_map):
    if "Elements" not in sections:
        raise ValueError("missing $Elements section")
    start, end = sections["Elements"]
    count = int(lines[start].split()[0])
    tris = []
    for k in range(count):
        ln = start + 1 + k
        if ln >= end:
            raise ValueError(f"line {ln + 1}: element list shorter than declared count {count}")
        parts = lines[ln].split()
        etype = int(parts[1])
        ntags = int(parts[2])
        conn = parts[3 + ntags :]
        if etype in (15, 1, 8):  # points and (quadratic) lines: boundary markers
            continue
        if etype != 2:
            raise ValueError(f"line {ln + 1}: unsupported element type {etype} (need 3-node triangles)")
        if len(conn) != 3:
            raise ValueError(f"line {ln + 1}: triangle with {len(conn)} nodes")
        try:
            tris.append([tag_map[int(t)] for t in conn])
        except KeyError as exc:
            raise ValueError(f"line {ln + 1}: element references unknown node {exc.args[0]}") from None
    return tris


def _read_nodes_v41(lines, sections):
    if "Nodes" not in sections:
        raise ValueError("missing $Nodes section")
    start, end = sections["Nodes"]
    header = lines[start].split()
    n_blocks, n_nodes = int(header[0]), int(header[1])
    verts = np.empty((n_nodes, 3))
    tag_map = {}
    ln = start + 1
    filled = 0
    for _ in range(n_blocks):
        if ln >= end:
            raise ValueError(f"line {ln + 1}: node blocks shorter than declared")
        blk = lines[ln].split()
        in_block = int(blk[3])
        ln += 1
        tags = []
        for k in range(in_block):
            tags.append(int(lines[ln + k].split()[0]))
        ln += in_block
        for k in range(in_block):
            parts = lines[ln + k].split()
            tag_map[tags[k]] = filled
            verts[filled] = [float(x) for x in parts[:3]]
            filled += 1
        ln += in_block
    if filled != n_nodes:
        raise ValueError(f"declared {n_nodes} nodes, found {filled}")
    return verts, tag_map


def _read_elements_v41(lines, sections, tag_map):
    if "Elements" not in sections:
        raise ValueError("missing $Elements section")
    start, end = sections["Elements"]
    n_blocks = int(lines[start].split()[0])
    tris = []
    ln = start + 1
    for _ in range(n_blocks):
        if ln >= end:
            raise ValueError(f"line {ln + 1}: element blocks shorter than declared")
        blk = lines[ln].split()
        dim, etype, in_block = int(blk[0]), int(blk[2]), int(blk[3])
        ln += 1
        if dim <= 1:
            ln += in_block
            continue
        if etype != 2:
            raise ValueError(f"line {ln + 1}: unsupported element type {etype} (need 3-node triangles)")
        for k in range(in_block):
            parts = lines[ln + k].split()
            if len(parts) != 4:
                raise ValueError(f"line {ln + k + 1}: triangle with {len(parts) - 1} nodes")
            try:
                tris.append([tag_map[int(t)] for t in parts[1:]])
            except KeyError as exc:
                raise ValueError(
                    f"line {ln + k + 1}: element references unknown node {exc.args[0]}"
                ) from None
        ln += in_block
    return tris


def write_off(mesh: SurfaceMesh, path) -> None:
    """Write the mesh in OFF format (vertex scalars go in a separate CSV)."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def write_vertex_csv(path, values: np.ndarray, name: str = "value") -> None:
    """Companion per-vertex scalar export keyed by vertex index."""
    values = np.asarray(values)
    with open(path, "w") as fh:
        fh.write(f"vertex,{name}\n")
        for k, x in enumerate(values):
            fh.write(f"{k},{x:.17g}\n")
