import networkx as nx
import numpy as np
import pytest

from weylab.errors import MeshError
from weylab.mesh import TriSphere, build_patches, icosphere, icosphere_positions


def bfs_ball_oracle(mesh, center, hops):
    """Independent patch oracle via networkx shortest paths."""
    G = nx.Graph()
    G.add_edges_from(map(tuple, mesh.edges.tolist()))
    dists = nx.single_source_shortest_path_length(G, center, cutoff=hops)
    return set(dists)


@pytest.mark.parametrize("level,V", [(0, 12), (1, 42), (2, 162), (4, 2562)])
def test_icosphere_counts(level, V):
    m = icosphere(level)
    assert m.vertex_count == V
    assert m.vertex_count - m.edge_count + m.face_count == 2


def test_icosphere_level_guard():
    with pytest.raises(MeshError):
        icosphere(-1)
    with pytest.raises(MeshError):
        icosphere(9)


def test_every_edge_has_two_faces():
    m = icosphere(2)
    assert m.edge_faces.shape == (m.edge_count, 2)
    assert (m.edge_faces[:, 0] != m.edge_faces[:, 1]).all()


def test_edges_canonical_order():
    m = icosphere(2)
    assert (m.edges[:, 0] < m.edges[:, 1]).all()
    order = np.lexsort((m.edges[:, 1], m.edges[:, 0]))
    assert (order == np.arange(m.edge_count)).all()


def test_icosphere_deterministic():
    a = icosphere(3)
    b = icosphere(3)
    assert (a.faces == b.faces).all()
    assert a.topology_hash() == b.topology_hash()


def test_nonmanifold_rejected():
    # two triangles sharing an edge leave boundary edges: not a closed sphere
    with pytest.raises(MeshError):
        TriSphere(faces=np.array([[0, 1, 2], [0, 2, 3]]))


def test_positions_on_unit_sphere_with_polar_vertex():
    for level in (0, 2, 3):
        pos = icosphere_positions(level)
        assert np.abs(np.linalg.norm(pos, axis=1) - 1).max() < 1e-12
        assert np.linalg.norm(pos[0] - [0, 0, 1]) < 1e-12
        assert np.linalg.norm(pos[3] - [0, 0, -1]) < 1e-12


def test_faces_counterclockwise_outward():
    m = icosphere(2)
    pos = icosphere_positions(2)
    f = m.faces
    n = np.cross(pos[f[:, 1]] - pos[f[:, 0]], pos[f[:, 2]] - pos[f[:, 0]])
    centroids = (pos[f[:, 0]] + pos[f[:, 1]] + pos[f[:, 2]]) / 3
    assert (np.einsum("ij,ij->i", n, centroids) > 0).all()


def test_patches_icosahedron_one_hop():
    m = icosphere(0)
    cover = build_patches(m, 1)
    assert len(cover.patches) == 12
    for v, patch in enumerate(cover.patches):
        assert len(patch) == 6  # center + 5 neighbors (valence 5)
        assert v in patch


def test_patches_match_bfs_oracle():
    m = icosphere(2)
    cover = build_patches(m, 2)
    for v in range(0, m.vertex_count, 17):
        assert set(cover.patches[v].tolist()) == bfs_ball_oracle(m, v, 2)


def test_patch_sizes_level2_two_hops():
    m = icosphere(2)
    cover = build_patches(m, 2)
    sizes = np.array([len(p) for p in cover.patches])
    assert sizes.min() >= 13 and sizes.max() <= 19


def test_patches_cover_and_connected():
    m = icosphere(1)
    cover = build_patches(m, 1)
    covered = set()
    G = nx.Graph()
    G.add_edges_from(map(tuple, m.edges.tolist()))
    for patch in cover.patches:
        covered.update(patch.tolist())
        assert nx.is_connected(G.subgraph(patch.tolist()))
    assert covered == set(range(m.vertex_count))


def test_patches_hops_guard():
    with pytest.raises(MeshError):
        build_patches(icosphere(0), 0)


def test_topology_json_roundtrip():
    m = icosphere(2)
    m2 = TriSphere.from_json_dict(m.to_json_dict())
    assert (m2.faces == m.faces).all()
    assert (m2.edges == m.edges).all()
    assert m2.topology_hash() == m.topology_hash()
