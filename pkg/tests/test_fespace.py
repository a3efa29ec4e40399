import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surfhodge import meshes
from surfhodge.errors import DisconnectedMesh, IndexOutOfRange, UnsupportedCombination
from surfhodge.fespace import (
    FeField,
    build_space,
    count_dofs,
    edge_ref_points,
    eval_basis,
    piola_div,
    piola_map,
    shifted_legendre,
)
from surfhodge.mesh import SurfaceMesh, TopologySummary, analyze_topology
from surfhodge.quadrature import edge_rule

ALL_KINDS = [
    ("lagrange", [1, 2, 3, 4], ["none", "zero_boundary_trace", "zero_mean"]),
    ("bdm", [0, 1, 2, 3], ["none", "zero_normal_trace"]),
    ("dg_pressure", [0, 1, 2], ["none"]),
    ("dg_vector", [0, 1], ["none"]),
    ("crouzeix_raviart", [1], ["none", "zero_mean"]),
    ("facet_tangential", [0, 1, 3], ["none"]),
]


def test_count_matches_build_everywhere(corpus):
    for mesh in corpus.values():
        topo = analyze_topology(mesh)
        for kind, degrees, constraints in ALL_KINDS:
            for d in degrees:
                for c in constraints:
                    space = build_space(mesh, kind, d, c)
                    assert space.total_dofs == count_dofs(topo, kind, d, c), (
                        kind, d, c)


def test_count_examples(tetra):
    topo = analyze_topology(tetra)
    assert count_dofs(topo, "bdm", 0, "zero_normal_trace") == 6  # one per edge
    space = build_space(tetra, "lagrange", 1, "zero_mean")
    assert space.total_dofs == 4
    assert space.constrained_dim == 3

    sq = meshes.square_two_triangles()
    cr = build_space(sq, "crouzeix_raviart", 1, "zero_mean")
    assert cr.total_dofs == 5  # one per edge, mean constraint at solve time


def test_table_counts_synthetic_genus1():
    topo = TopologySummary.closed_surface(3490, genus=1)
    assert count_dofs(topo, "lagrange", 4, "zero_mean") == 27920
    assert count_dofs(topo, "bdm", 3) == 48860
    assert count_dofs(topo, "dg_pressure", 2) == 20940
    assert count_dofs(topo, "facet_tangential", 3) == 20940


def test_unsupported_combinations(tetra):
    with pytest.raises(UnsupportedCombination):
        build_space(tetra, "lagrange", 0)
    with pytest.raises(UnsupportedCombination):
        build_space(tetra, "crouzeix_raviart", 2)
    with pytest.raises(UnsupportedCombination):
        build_space(tetra, "bdm", 1, "zero_mean")
    with pytest.raises(UnsupportedCombination):
        count_dofs(analyze_topology(tetra), "lagrange", 99)


def test_zero_mean_needs_connected_mesh(tetra):
    verts = np.vstack([tetra.vertices, tetra.vertices + 10.0])
    tris = np.vstack([tetra.triangles, tetra.triangles + 4])
    mesh = SurfaceMesh(verts, tris)
    with pytest.raises(DisconnectedMesh):
        build_space(mesh, "lagrange", 1, "zero_mean")


# ------------------------------------------------------------------- bases
def test_lagrange_vertex_pattern(tetra):
    space = build_space(tetra, "lagrange", 1)
    bv = eval_basis(space, 0, np.eye(3))
    assert np.allclose(bv.values, np.eye(3), atol=1e-13)


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=999))
def test_partition_of_unity(degree, seed):
    mesh = meshes.torus_structured(3, 3)
    space = build_space(mesh, "lagrange", degree)
    pts = np.random.default_rng(seed).dirichlet([1.0, 1.0, 1.0], size=50)
    bv = eval_basis(space, seed % mesh.n_triangles, pts)
    assert np.allclose(bv.values.sum(axis=0), 1.0, atol=1e-11)


def test_bdm_edge_trace_is_prescribed_polynomial(torus):
    """The basis dual to an edge moment has the matching Legendre trace on
    its own edge (up to normalization) and zero trace on the other edges."""
    k = 1
    space = build_space(torus, "bdm", k, "zero_normal_trace")
    mesh = torus
    t = 5
    tq, tw = edge_rule(2 * k + 2)
    for le in range(3):
        xy = edge_ref_points(le, tq)
        bv = eval_basis(space, t, np.column_stack([1 - xy.sum(1), xy]))
        e = mesh.tri_edges[t, le]
        nu = mesh.conormals[t, le]
        for i, (le_i, m_i) in enumerate(space.ref.edge_dofs):
            trace = bv.values[i] @ nu  # (n_q,)
            if le_i != le:
                assert np.abs(trace).max() < 1e-12
            else:
                # trace proportional to L_m along the local edge direction
                L = shifted_legendre(m_i, tq)
                denom = float(L @ (L * tw))
                coef = float(trace @ (L * tw)) / denom
                assert np.abs(trace - coef * L).max() < 1e-12 * max(1, abs(coef))
        # interior dofs have vanishing normal trace everywhere
        for i in range(space.ref.n_edge_dofs, space.ref.n_local):
            assert np.abs(bv.values[i] @ nu).max() < 1e-11


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_bdm_normal_continuity(corpus, k):
    """Normal jumps of random fields vanish at edge quadrature points."""
    for name, mesh in corpus.items():
        space = build_space(mesh, "bdm", k, "zero_normal_trace")
        coeffs = np.random.default_rng(0).standard_normal(space.total_dofs)
        loc = space.local_coefficients(coeffs)
        tq, _ = edge_rule(2 * k + 2)
        scale = np.abs(coeffs).max()
        for e in range(mesh.n_edges):
            if mesh.boundary_edge_mask[e]:
                continue
            traces = []
            for side in range(2):
                t = int(mesh.edge_tris[e, side])
                le = mesh.local_edge_of(t, e)
                xy = edge_ref_points(le, tq, flip=not mesh.tri_edge_along[t, le])
                phys = np.einsum("ic,lqc->lqi", mesh.F[t] / mesh.Jdet[t],
                                 space.ref.eval(xy))
                v = np.einsum("l,lqi->qi", loc[t], phys)
                traces.append(v @ mesh.conormals[t, le])
            assert np.abs(traces[0] + traces[1]).max() <= 1e-12 * scale, (name, e)


def test_bdm_zero_normal_trace_on_boundary(sphere4):
    space = build_space(sphere4, "bdm", 2, "zero_normal_trace")
    coeffs = np.random.default_rng(1).standard_normal(space.total_dofs)
    loc = space.local_coefficients(coeffs)
    tq, _ = edge_rule(6)
    for e in np.flatnonzero(sphere4.boundary_edge_mask):
        t = int(sphere4.edge_tris[e, 0])
        le = sphere4.local_edge_of(t, e)
        xy = edge_ref_points(le, tq)
        phys = np.einsum("ic,lqc->lqi", sphere4.F[t] / sphere4.Jdet[t],
                         space.ref.eval(xy))
        v = np.einsum("l,lqi->qi", loc[t], phys)
        assert np.abs(v @ sphere4.conormals[t, le]).max() < 1e-12 * np.abs(coeffs).max()


# -------------------------------------------------------------------- Piola
def test_piola_identity_embedding():
    mesh = meshes.single_triangle()  # reference triangle embedded at z = 0
    ref_vals = np.array([[1.0, 0.0], [0.25, -0.5]])
    out = piola_map(mesh, 0, ref_vals)
    assert np.allclose(out[:, :2], ref_vals, atol=1e-15)
    assert np.allclose(out[:, 2], 0.0)


def test_piola_scaling():
    # reference triangle scaled by 2 in-plane: J = 4, constant fields map to
    # (1/2) of their aligned reference values
    verts = 2.0 * np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    mesh = SurfaceMesh(verts, np.array([[0, 1, 2]]))
    assert mesh.Jdet[0] == pytest.approx(4.0)
    out = piola_map(mesh, 0, np.array([[1.0, 0.0]]))
    assert np.allclose(out, [[0.5, 0.0, 0.0]])
    assert piola_div(mesh, 0, np.array([2.0]))[0] == pytest.approx(0.5)


def test_piola_div_identity(torus):
    """div of the mapped field equals J^-1 times the reference divergence."""
    space = build_space(torus, "bdm", 2)
    t = 3
    pts = np.random.default_rng(2).dirichlet([1, 1, 1], size=8)
    bv = eval_basis(space, t, pts)
    ref_div = space.ref.div(pts[:, 1:])
    assert np.allclose(bv.divergences, ref_div / torus.Jdet[t], atol=1e-12)
    # the ambient-gradient trace reproduces the divergence
    tr = np.einsum("lqii->lq", bv.gradients)
    assert np.allclose(tr, bv.divergences, atol=1e-10)


def test_eval_basis_errors(tetra):
    space = build_space(tetra, "lagrange", 1)
    with pytest.raises(IndexOutOfRange):
        eval_basis(space, 99, np.array([[1.0, 0.0, 0.0]]))
    facet = build_space(tetra, "facet_tangential", 1)
    with pytest.raises(UnsupportedCombination):
        eval_basis(facet, 0, np.array([[1.0, 0.0, 0.0]]))


def test_fefield_validation(tetra):
    space = build_space(tetra, "lagrange", 1)
    with pytest.raises(ValueError):
        FeField(space, np.zeros(3))
