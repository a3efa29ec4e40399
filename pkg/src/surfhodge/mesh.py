"""Oriented manifold triangle meshes embedded in R^3.

A SurfaceMesh owns all combinatorial and geometric data needed by the
finite element layers: edge adjacency, globally consistent orientation,
per-triangle frames for the Piola map, and per-edge tangent/conormal frames
for inter-element (DG) terms.

Edge conventions
----------------
* Edges are stored as vertex pairs (lo, hi) with lo < hi; the unit tangent
  tau points from lo to hi (deterministic, independent of visit order).
* For an interior edge, edge_tris[e, 0] is the adjacent triangle that
  traverses the edge against tau and edge_tris[e, 1] the one along tau.
  With this labelling nu1 = n|_T1 x tau and nu2 = -n|_T2 x tau are both
  outward-pointing in-plane conormals.
* For a boundary edge, edge_tris[e, 0] is the only adjacent triangle and
  nu1 is its outward conormal regardless of traversal direction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTriangle,
    IndexOutOfRange,
    NonManifold,
    NonOrientable,
    NonTriangle,
    ParseError,
)

_DEGENERACY_REL_TOL = 1e-12  # area threshold relative to (bbox diagonal)^2


@dataclass
class TopologySummary:
    """Entity counts, Euler characteristic and Betti numbers of a mesh.

    For disconnected meshes the Betti numbers are summed over components and
    component_betti lists the per-component (b0, b1, b2) triples.
    """

    n_vertices: int
    n_edges: int
    n_triangles: int
    n_interior_edges: int
    n_boundary_edges: int
    n_interior_vertices: int
    n_boundary_vertices: int
    euler_characteristic: int
    n_components: int
    b0: int
    b1: int
    b2: int
    closed: bool
    component_betti: tuple = field(default_factory=tuple)

    @classmethod
    def closed_surface(cls, n_triangles: int, genus: int) -> "TopologySummary":
        """Synthetic summary of a closed connected surface of given genus.

        Only the combinatorics implied by closedness are filled in
        (3T = 2E, chi = V - E + T = 2 - 2g); no mesh is required.
        """
        if n_triangles % 2:
            raise ValueError("a closed surface has an even number of triangles")
        n_edges = 3 * n_triangles // 2
        chi = 2 - 2 * genus
        n_vertices = chi + n_edges - n_triangles
        b1 = 2 * genus
        return cls(
            n_vertices=n_vertices,
            n_edges=n_edges,
            n_triangles=n_triangles,
            n_interior_edges=n_edges,
            n_boundary_edges=0,
            n_interior_vertices=n_vertices,
            n_boundary_vertices=0,
            euler_characteristic=chi,
            n_components=1,
            b0=1,
            b1=b1,
            b2=1,
            closed=True,
            component_betti=((1, b1, 1),),
        )

    def to_dict(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_triangles": self.n_triangles,
            "n_interior_edges": self.n_interior_edges,
            "n_boundary_edges": self.n_boundary_edges,
            "n_interior_vertices": self.n_interior_vertices,
            "n_boundary_vertices": self.n_boundary_vertices,
            "euler_characteristic": self.euler_characteristic,
            "n_components": self.n_components,
            "b0": self.b0,
            "b1": self.b1,
            "b2": self.b2,
            "closed": self.closed,
            "component_betti": [list(c) for c in self.component_betti],
        }


class SurfaceMesh:
    """Oriented manifold-with-boundary triangle mesh embedded in R^3.

    The constructor validates the input (triangle-only, manifold edges,
    manifold vertex umbrellas, non-degenerate triangles), repairs
    inconsistent triangle windings when the mesh is orientable, and derives
    all edge-level structures.  Instances are immutable after construction
    and safe to share across threads.
    """

    def __init__(self, vertices, triangles):
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ParseError("vertices must be an (n, 3) array")
        if triangles.size == 0:
            raise ParseError("mesh contains no triangles")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise NonTriangle("faces must have exactly 3 vertices")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise ParseError("triangle vertex index out of range")
        if any(len(set(t)) != 3 for t in triangles):
            raise DegenerateTriangle("triangle with repeated vertex")

        # Drop unreferenced vertices (common in OBJ exports) and reindex.
        used = np.zeros(len(vertices), dtype=bool)
        used[triangles.ravel()] = True
        if not used.all():
            remap = -np.ones(len(vertices), dtype=np.int64)
            remap[used] = np.arange(used.sum())
            vertices = vertices[used]
            triangles = remap[triangles]

        self.vertices = vertices
        self.triangles = triangles
        self._check_degenerate()
        self._orient()
        self._build_edges()
        self._check_umbrellas()
        self._build_boundary_loops()
        self._build_geometry()
        self._build_components()
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    # ------------------------------------------------------------ validation
    def _check_degenerate(self):
        p = self.vertices[self.triangles]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        diag = np.linalg.norm(self.vertices.max(0) - self.vertices.min(0))
        tol = _DEGENERACY_REL_TOL * max(diag, 1e-300) ** 2
        if (areas <= tol).any():
            bad = int(np.argmax(areas <= tol))
            raise DegenerateTriangle(f"triangle {bad} has (near-)zero area")

    def _edge_adjacency(self):
        """Map sorted vertex pair -> list of (triangle, local_edge, along)."""
        adj: dict[tuple[int, int], list[tuple[int, int, bool]]] = {}
        for t, tri in enumerate(self.triangles):
            for le in range(3):
                a, b = int(tri[le]), int(tri[(le + 1) % 3])
                key = (a, b) if a < b else (b, a)
                adj.setdefault(key, []).append((t, le, a < b))
        for key, tris in adj.items():
            if len(tris) > 2:
                raise NonManifold(f"edge {key} adjacent to {len(tris)} triangles")
        return adj

    def _orient(self):
        """Flip triangle windings (BFS over the dual graph) until every
        interior edge is traversed in opposite directions by its two
        triangles; raise NonOrientable if impossible."""
        adj = self._edge_adjacency()
        n_tri = len(self.triangles)
        neighbors: list[list[tuple[int, bool]]] = [[] for _ in range(n_tri)]
        for tris in adj.values():
            if len(tris) == 2:
                (t1, _, d1), (t2, _, d2) = tris
                # same_dir: both traverse the shared edge the same way
                neighbors[t1].append((t2, d1 == d2))
                neighbors[t2].append((t1, d1 == d2))
        flip = np.zeros(n_tri, dtype=np.int8)  # 0 unvisited, +1 keep, -1 flip
        any_flipped = False
        for seed in range(n_tri):
            if flip[seed]:
                continue
            flip[seed] = 1
            stack = [seed]
            while stack:
                t = stack.pop()
                for u, same_dir in neighbors[t]:
                    want = -flip[t] if same_dir else flip[t]
                    if flip[u] == 0:
                        flip[u] = want
                        stack.append(u)
                    elif flip[u] != want:
                        raise NonOrientable("mesh admits no consistent orientation")
        if (flip < 0).any():
            any_flipped = True
            tris = self.triangles.copy()
            tris[flip < 0] = tris[flip < 0][:, ::-1]
            self.triangles = tris
        self.orientation_repaired = bool(any_flipped)

    # ---------------------------------------------------------- connectivity
    def _build_edges(self):
        adj = self._edge_adjacency()
        keys = sorted(adj.keys())
        self.edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
        n_edges = len(keys)
        index = {k: i for i, k in enumerate(keys)}

        self.edge_tris = -np.ones((n_edges, 2), dtype=np.int64)
        self.tri_edges = np.zeros((len(self.triangles), 3), dtype=np.int64)
        self.tri_edge_along = np.zeros((len(self.triangles), 3), dtype=bool)
        for key, tris in adj.items():
            e = index[key]
            if len(tris) == 2:
                (ta, la, da), (tb, lb, db) = tris
                if da == db:  # cannot happen after _orient
                    raise NonOrientable("inconsistent orientation survived repair")
                anti, along = ((ta, la), (tb, lb)) if not da else ((tb, lb), (ta, la))
                self.edge_tris[e] = (anti[0], along[0])
            else:
                (t0, l0, d0) = tris[0]
                self.edge_tris[e] = (t0, -1)
            for t, le, d in tris:
                self.tri_edges[t, le] = e
                self.tri_edge_along[t, le] = d

        self.boundary_edge_mask = self.edge_tris[:, 1] < 0
        self.n_edges = n_edges
        self.n_vertices = len(self.vertices)
        self.n_triangles = len(self.triangles)
        bverts = np.zeros(self.n_vertices, dtype=bool)
        bverts[self.edges[self.boundary_edge_mask].ravel()] = True
        self.boundary_vertex_mask = bverts

    def _check_umbrellas(self):
        """Require the triangles around each vertex to form a single fan."""
        incident: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for t, tri in enumerate(self.triangles):
            for v in tri:
                incident[int(v)].append(t)
        # union by shared edges containing v
        for v, tris in enumerate(incident):
            if len(tris) <= 1:
                continue
            parent = {t: t for t in tris}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for e in np.flatnonzero((self.edges == v).any(axis=1)):
                t1, t2 = self.edge_tris[e]
                if t2 >= 0:
                    r1, r2 = find(int(t1)), find(int(t2))
                    if r1 != r2:
                        parent[r1] = r2
            roots = {find(t) for t in tris}
            if len(roots) > 1:
                raise NonManifold(f"vertex {v} has a non-manifold umbrella")

    def _build_boundary_loops(self):
        self.boundary_loops: list[list[int]] = []
        b_edges = np.flatnonzero(self.boundary_edge_mask)
        if len(b_edges) == 0:
            return
        v2be: dict[int, list[int]] = {}
        for e in b_edges:
            for v in self.edges[e]:
                v2be.setdefault(int(v), []).append(int(e))
        for v, es in v2be.items():
            if len(es) != 2:
                raise NonManifold(f"boundary vertex {v} on {len(es)} boundary edges")
        seen = set()
        for start in b_edges:
            if int(start) in seen:
                continue
            loop = [int(start)]
            seen.add(int(start))
            v_prev, v_cur = (int(x) for x in self.edges[start])
            while True:
                nxt = [e for e in v2be[v_cur] if e not in seen]
                if not nxt:
                    break
                e = nxt[0]
                loop.append(e)
                seen.add(e)
                a, b = (int(x) for x in self.edges[e])
                v_cur = b if a == v_cur else a
            self.boundary_loops.append(loop)

    # -------------------------------------------------------------- geometry
    def _build_geometry(self):
        P = self.vertices
        tri = self.triangles
        p0, p1, p2 = P[tri[:, 0]], P[tri[:, 1]], P[tri[:, 2]]
        cross = np.cross(p1 - p0, p2 - p0)
        nrm = np.linalg.norm(cross, axis=1)
        self.tri_normals = cross / nrm[:, None]
        self.tri_areas = 0.5 * nrm
        # Affine map x = p0 + F xhat with F = [p1-p0 | p2-p0]  (3x2)
        self.F = np.stack([p1 - p0, p2 - p0], axis=2)
        self.Jdet = nrm  # sqrt(det(F^T F)) for a triangle = |(p1-p0)x(p2-p0)|
        FtF = np.einsum("tia,tib->tab", self.F, self.F)
        self.G = np.einsum("tia,tab->tib", self.F, np.linalg.inv(FtF))  # F (F^T F)^-1

        e = self.edges
        vec = P[e[:, 1]] - P[e[:, 0]]
        self.edge_lengths = np.linalg.norm(vec, axis=1)
        self.edge_tangents = vec / self.edge_lengths[:, None]
        self.h_min = float(self.edge_lengths.min())
        self.bbox_diagonal = float(np.linalg.norm(P.max(0) - P.min(0)))

        # Outward conormal of triangle t on its local edge le.
        self.conormals = np.zeros((self.n_triangles, 3, 3))
        for le in range(3):
            a = tri[:, le]
            b = tri[:, (le + 1) % 3]
            d = P[b] - P[a]
            d = d / np.linalg.norm(d, axis=1)[:, None]
            nu = np.cross(d, self.tri_normals)  # = -n x d
            self.conormals[:, le, :] = nu

        # Per-edge frames nu1 (side of edge_tris[:,0]) and nu2.
        self.nu1 = np.full((self.n_edges, 3), np.nan)
        self.nu2 = np.full((self.n_edges, 3), np.nan)
        for e_id in range(self.n_edges):
            t1, t2 = self.edge_tris[e_id]
            le1 = int(np.flatnonzero(self.tri_edges[t1] == e_id)[0])
            self.nu1[e_id] = self.conormals[t1, le1]
            if t2 >= 0:
                le2 = int(np.flatnonzero(self.tri_edges[t2] == e_id)[0])
                self.nu2[e_id] = self.conormals[t2, le2]

    def _build_components(self):
        parent = np.arange(self.n_triangles)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e_id in range(self.n_edges):
            t1, t2 = self.edge_tris[e_id]
            if t2 >= 0:
                r1, r2 = find(int(t1)), find(int(t2))
                if r1 != r2:
                    parent[r1] = r2
        roots = np.array([find(t) for t in range(self.n_triangles)])
        _, self.tri_component = np.unique(roots, return_inverse=True)
        self.n_components = int(self.tri_component.max()) + 1

    # ------------------------------------------------------------------- API
    @property
    def is_closed(self) -> bool:
        return not self.boundary_edge_mask.any()

    def local_edge_of(self, tri: int, edge: int) -> int:
        loc = np.flatnonzero(self.tri_edges[tri] == edge)
        if len(loc) == 0:
            raise IndexOutOfRange(f"edge {edge} not on triangle {tri}")
        return int(loc[0])

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles).tobytes())
        return h.hexdigest()


def edge_frames(mesh: SurfaceMesh, edge: int):
    """Return (tau, nu1, nu2) for an edge; nu2 is None on boundary edges.

    tau points from the lower to the higher vertex index; nu1/nu2 are the
    outward in-plane conormals of the first/second adjacent triangle.
    """
    if not 0 <= edge < mesh.n_edges:
        raise IndexOutOfRange(f"edge index {edge} out of range")
    tau = mesh.edge_tangents[edge]
    nu1 = mesh.nu1[edge]
    nu2 = None if mesh.boundary_edge_mask[edge] else mesh.nu2[edge]
    return tau, nu1, nu2


def analyze_topology(mesh: SurfaceMesh) -> TopologySummary:
    """Entity counts, Euler characteristic and Betti numbers.

    Betti numbers are computed per connected component from the
    Euler-Poincare formula (b0 = 1, b2 = 1 for closed components, 0
    otherwise, b1 = b0 + b2 - chi) and summed.
    """
    comp_betti = []
    b0 = mesh.n_components
    b1 = b2 = 0
    for c in range(mesh.n_components):
        tmask = mesh.tri_component == c
        verts = np.unique(mesh.triangles[tmask])
        emask = mesh.tri_component[mesh.edge_tris[:, 0]] == c
        n_v, n_e, n_t = len(verts), int(emask.sum()), int(tmask.sum())
        chi = n_v - n_e + n_t
        closed = not (emask & mesh.boundary_edge_mask).any()
        c_b2 = 1 if closed else 0
        c_b1 = 1 + c_b2 - chi
        comp_betti.append((1, c_b1, c_b2))
        b1 += c_b1
        b2 += c_b2

    n_be = int(mesh.boundary_edge_mask.sum())
    n_bv = int(mesh.boundary_vertex_mask.sum())
    return TopologySummary(
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_triangles=mesh.n_triangles,
        n_interior_edges=mesh.n_edges - n_be,
        n_boundary_edges=n_be,
        n_interior_vertices=mesh.n_vertices - n_bv,
        n_boundary_vertices=n_bv,
        euler_characteristic=mesh.n_vertices - mesh.n_edges + mesh.n_triangles,
        n_components=mesh.n_components,
        b0=b0,
        b1=b1,
        b2=b2,
        closed=mesh.is_closed,
        component_betti=tuple(comp_betti),
    )


# ---------------------------------------------------------------------- I/O
def load_mesh(path, fmt: str | None = None) -> SurfaceMesh:
    """Load an OFF or OBJ triangle mesh; the format defaults to the file
    extension.  Non-manifold or non-orientable input is rejected;
    inconsistent windings of orientable meshes are repaired."""
    path = str(path)
    if fmt is None:
        lower = path.lower()
        if lower.endswith(".off"):
            fmt = "OFF"
        elif lower.endswith(".obj"):
            fmt = "OBJ"
        else:
            raise ParseError(f"cannot infer mesh format from path {path!r}")
    fmt = fmt.upper()
    with open(path, "r") as fh:
        text = fh.read()
    if fmt == "OFF":
        verts, tris = _parse_off(text)
    elif fmt == "OBJ":
        verts, tris = _parse_obj(text)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    return SurfaceMesh(verts, tris)


def _significant_lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text: str):
    lines = list(_significant_lines(text))
    if not lines:
        raise ParseError("empty OFF file")
    header = lines[0]
    body = lines[1:]
    if header.split()[0] != "OFF":
        raise ParseError("missing OFF header")
    if len(header.split()) == 4:  # counts on the header line
        counts = header.split()[1:]
    else:
        if not body:
            raise ParseError("missing OFF counts line")
        counts, body = body[0].split(), body[1:]
    try:
        n_v, n_f = int(counts[0]), int(counts[1])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"bad OFF counts line: {counts}") from exc
    if len(body) < n_v + n_f:
        raise ParseError("truncated OFF file")
    try:
        verts = np.array(
            [[float(x) for x in body[i].split()[:3]] for i in range(n_v)]
        ).reshape(n_v, 3)
    except ValueError as exc:
        raise ParseError("bad OFF vertex line") from exc
    tris = []
    for i in range(n_f):
        parts = body[n_v + i].split()
        try:
            cnt = int(parts[0])
        except ValueError as exc:
            raise ParseError("bad OFF face line") from exc
        if cnt != 3:
            raise NonTriangle(f"OFF face with {cnt} vertices")
        tris.append([int(parts[1]), int(parts[2]), int(parts[3])])
    return verts, np.array(tris, dtype=np.int64)


def _parse_obj(text: str):
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    for line in _significant_lines(text):
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise ParseError(f"bad OBJ vertex line: {line!r}") from exc
        elif tag == "f":
            refs = parts[1:]
            if len(refs) != 3:
                raise NonTriangle(f"OBJ face with {len(refs)} vertices")
            idx = []
            for r in refs:
                try:
                    i = int(r.split("/")[0])
                except ValueError as exc:
                    raise ParseError(f"bad OBJ face line: {line!r}") from exc
                if i < 0:
                    i = len(verts) + 1 + i  # relative indexing
                idx.append(i - 1)
            tris.append(idx)
        # all other record types (vn, vt, usemtl, ...) are ignored
    if not verts or not tris:
        raise ParseError("OBJ file without vertices or faces")
    return np.array(verts), np.array(tris, dtype=np.int64)


def save_off(mesh_or_arrays, path):
    """Write an ASCII OFF file."""
    verts, tris = _as_arrays(mesh_or_arrays)
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(verts)} {len(tris)} 0\n")
        for v in verts:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in tris:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def save_obj(mesh_or_arrays, path):
    """Write an ASCII OBJ file (1-based indices)."""
    verts, tris = _as_arrays(mesh_or_arrays)
    with open(path, "w") as fh:
        for v in verts:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in tris:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def _as_arrays(mesh_or_arrays):
    if isinstance(mesh_or_arrays, SurfaceMesh):
        return mesh_or_arrays.vertices, mesh_or_arrays.triangles
    verts, tris = mesh_or_arrays
    return np.asarray(verts), np.asarray(tris, dtype=np.int64)
