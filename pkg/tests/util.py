"""Shared test helpers: fixture writers for Gmsh files and small meshes."""

import numpy as np


def write_msh22(path, vertices, triangles):
    """Minimal ASCII Gmsh 2.2 writer for test fixtures."""
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{len(vertices)}\n")
        for k, v in enumerate(vertices, start=1):
            fh.write(f"{k} {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{len(triangles)}\n")
        for k, t in enumerate(triangles, start=1):
            fh.write(f"{k} 2 2 0 1 {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        fh.write("$EndElements\n")


def write_msh41(path, vertices, triangles):
    """Minimal ASCII Gmsh 4.1 writer (single entity block each)."""
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n1 {len(vertices)} 1 {len(vertices)}\n")
        fh.write(f"2 1 0 {len(vertices)}\n")
        for k in range(1, len(vertices) + 1):
            fh.write(f"{k}\n")
        for v in vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n1 {len(triangles)} 1 {len(triangles)}\n")
        fh.write(f"2 1 2 {len(triangles)}\n")
        for k, t in enumerate(triangles, start=1):
            fh.write(f"{k} {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        fh.write("$EndElements\n")


def two_triangle_patch():
    """Unit square split along its diagonal: 4 vertices, 2 triangles, all on the boundary."""
    vertices = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    return vertices, triangles


def fibonacci_sphere_mesh(n_points):
    """Closed triangulated sphere with exactly n_points vertices (convex hull)."""
    from scipy.spatial import ConvexHull

    k = np.arange(n_points, dtype=float)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * k + 1.0) / n_points
    theta = 2.0 * np.pi * k / golden
    rho = np.sqrt(1.0 - z * z)
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])
    hull = ConvexHull(pts)
    tris = hull.simplices.copy()
    # orient every face outward (positive volume with the centroid)
    p0, p1, p2 = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    centers = (p0 + p1 + p2) / 3.0
    flip = np.einsum("ij,ij->i", np.cross(p1 - p0, p2 - p0), centers) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return pts, tris
