"""Triangulated topological spheres with stable indexing.

Topology only: vertex positions live in the corpus generators and in
:class:`weylab.embed.EmbeddingState`.  Edges are kept in a canonical order
(sorted pairs, lexicographic) so that edge indices are a pure function of
the face list and per-edge data round-trips deterministically.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

MAX_ICOSPHERE_LEVEL = 8

# Golden-ratio icosahedron, faces counterclockwise seen from outside.
_PHI = (1.0 + 5.0**0.5) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def canonical_edges(faces: np.ndarray) -> np.ndarray:
    """Unique sorted vertex pairs of a face list, lexicographically ordered."""
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


@dataclass
class TriSphere:
    """Closed oriented genus-0 triangle mesh with canonical edge indexing."""

    faces: np.ndarray
    level: int = -1
    edges: np.ndarray = field(init=False, repr=False)
    edge_faces: np.ndarray = field(init=False, repr=False)
    face_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError("faces must be an (F, 3) index array")
        self.faces = faces
        self.vertex_count = int(faces.max()) + 1
        if np.unique(faces).size != self.vertex_count:
            raise MeshError("vertex indices are not contiguous from 0")

        self.edges = canonical_edges(faces)
        self._edge_index = {
            (int(u), int(v)): k for k, (u, v) in enumerate(self.edges)
        }

        # face_edges[f, c] = edge opposite corner c of face f
        F = len(faces)
        self.face_edges = np.empty((F, 3), dtype=np.int64)
        for c, (a, b) in enumerate(((1, 2), (2, 0), (0, 1))):
            for f in range(F):
                u, v = faces[f, a], faces[f, b]
                self.face_edges[f, c] = self._edge_index[
                    (int(min(u, v)), int(max(u, v)))
                ]

        ef: list[list[int]] = [[] for _ in range(len(self.edges))]
        for f in range(F):
            for k in self.face_edges[f]:
                ef[k].append(f)
        bad = [k for k, fs in enumerate(ef) if len(fs) != 2]
        if bad:
            u, v = self.edges[bad[0]]
            raise MeshError(
                f"edge ({u}, {v}) belongs to {len(ef[bad[0]])} faces, expected 2"
            )
        self.edge_faces = np.array(ef, dtype=np.int64)

        self._build_vertex_adjacency()
        self._validate()
        self._hash: str | None = None

    def _build_vertex_adjacency(self):
        V = self.vertex_count
        vf: list[list[int]] = [[] for _ in range(V)]
        for f, (i, j, k) in enumerate(self.faces):
            vf[i].append(f)
            vf[j].append(f)
            vf[k].append(f)
        ve: list[list[int]] = [[] for _ in range(V)]
        nbr: list[list[int]] = [[] for _ in range(V)]
        for k, (u, v) in enumerate(self.edges):
            ve[u].append(k)
            ve[v].append(k)
            nbr[u].append(int(v))
            nbr[v].append(int(u))
        self.vertex_faces = tuple(np.array(a, dtype=np.int64) for a in vf)
        self.vertex_edges = tuple(np.array(a, dtype=np.int64) for a in ve)
        self.neighbors = tuple(np.array(sorted(a), dtype=np.int64) for a in nbr)

    def _validate(self):
        V, E, F = self.vertex_count, len(self.edges), len(self.faces)
        if V - E + F != 2:
            raise MeshError(f"Euler characteristic {V - E + F} != 2")
        # Orientability: every edge traversed once in each direction.
        seen: dict[tuple[int, int], int] = {}
        for f, (i, j, k) in enumerate(self.faces):
            for u, v in ((i, j), (j, k), (k, i)):
                key = (int(u), int(v))
                if key in seen:
                    raise MeshError(f"halfedge {key} repeated; inconsistent orientation")
                seen[key] = f
        for (u, v) in list(seen):
            if (v, u) not in seen:
                raise MeshError(f"halfedge ({v}, {u}) missing; mesh not closed")
        # Connectivity via BFS on the 1-skeleton.
        reached = np.zeros(V, dtype=bool)
        queue = deque([0])
        reached[0] = True
        while queue:
            u = queue.popleft()
            for w in self.neighbors[u]:
                if not reached[w]:
                    reached[w] = True
                    queue.append(int(w))
        if not reached.all():
            raise MeshError("mesh is not connected")

    def edge_id(self, u: int, v: int) -> int:
        return self._edge_index[(min(u, v), max(u, v))]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def topology_hash(self) -> str:
        if self._hash is None:
            doc = {"level": self.level, "faces": self.faces.tolist()}
            blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
            self._hash = hashlib.sha256(blob.encode()).hexdigest()
        return self._hash

    def to_json_dict(self) -> dict:
        return {"level": self.level, "faces": self.faces.tolist()}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TriSphere":
        return cls(faces=np.asarray(doc["faces"], dtype=np.int64),
                   level=int(doc.get("level", -1)))


@dataclass
class PatchCover:
    """One breadth-first ball per vertex; discrete stand-in for small cubes."""

    patches: list[np.ndarray]
    radius_hops: int

    def __len__(self) -> int:
        return len(self.patches)


def _subdivide_faces(faces: np.ndarray, n_vertices: int) -> np.ndarray:
    """One topological midpoint split; midpoint of canonical edge k gets index
    n_vertices + k, so child indexing is a pure function of parent topology."""
    edges = canonical_edges(faces)
    eidx = {(int(u), int(v)): k for k, (u, v) in enumerate(edges)}

    def mid(a, b):
        return n_vertices + eidx[(int(min(a, b)), int(max(a, b)))]

    out = np.empty((4 * len(faces), 3), dtype=np.int64)
    for f, (i, j, k) in enumerate(faces):
        mij, mjk, mki = mid(i, j), mid(j, k), mid(k, i)
        out[4 * f + 0] = (i, mij, mki)
        out[4 * f + 1] = (j, mjk, mij)
        out[4 * f + 2] = (k, mki, mjk)
        out[4 * f + 3] = (mij, mjk, mki)
    return out


def icosphere(level: int) -> TriSphere:
    """Icosahedron subdivided ``level`` times; V = 10*4**level + 2."""
    if not (0 <= level <= MAX_ICOSPHERE_LEVEL):
        raise MeshError(f"icosphere level must be in [0, {MAX_ICOSPHERE_LEVEL}], got {level}")
    faces = _ICO_FACES
    n = 12
    for _ in range(level):
        new_faces = _subdivide_faces(faces, n)
        n += len(canonical_edges(faces))
        faces = new_faces
    return TriSphere(faces=faces, level=level)


def _pole_rotation() -> np.ndarray:
    """Fixed rotation putting base vertex 0 at the north pole (+z) and its
    antipode (base vertex 3) at the south pole."""
    w = _ICO_VERTS[0] / np.linalg.norm(_ICO_VERTS[0])
    u = _ICO_VERTS[1] - np.dot(_ICO_VERTS[1], w) * w
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return np.stack([u, v, w])  # rows: maps u -> e_x, v -> e_y, w -> e_z


def icosphere_positions(level: int) -> np.ndarray:
    """Canonical unit-sphere positions matching :func:`icosphere` indexing.

    Vertex 0 sits exactly on the +z pole at every level (the base vertex is a
    5-fold symmetry axis, preserved by midpoint subdivision).
    """
    if not (0 <= level <= MAX_ICOSPHERE_LEVEL):
        raise MeshError(f"icosphere level must be in [0, {MAX_ICOSPHERE_LEVEL}], got {level}")
    R = _pole_rotation()
    pos = _ICO_VERTS @ R.T
    pos /= np.linalg.norm(pos, axis=1)[:, None]
    faces = _ICO_FACES
    for _ in range(level):
        edges = canonical_edges(faces)
        mids = pos[edges[:, 0]] + pos[edges[:, 1]]
        mids /= np.linalg.norm(mids, axis=1)[:, None]
        faces = _subdivide_faces(faces, len(pos))
        pos = np.vstack([pos, mids])
    return pos


def build_patches(mesh: TriSphere, radius_hops: int) -> PatchCover:
    """Per-vertex ``radius_hops``-ring neighborhoods (center included)."""
    if radius_hops < 1:
        raise MeshError(f"radius_hops must be >= 1, got {radius_hops}")
    patches = []
    for v in range(mesh.vertex_count):
        ball = {v}
        frontier = [v]
        for _ in range(radius_hops):
            nxt = []
            for u in frontier:
                for w in mesh.neighbors[u]:
                    w = int(w)
                    if w not in ball:
                        ball.add(w)
                        nxt.append(w)
            frontier = nxt
        patches.append(np.array(sorted(ball), dtype=np.int64))
    return PatchCover(patches=patches, radius_hops=radius_hops)
