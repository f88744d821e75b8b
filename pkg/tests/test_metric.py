import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylab.corpus import gen_round
from weylab.errors import MetricError
from weylab.metric import (
    MetricField,
    AmbientSpec,
    angle_defect_curvature,
    conformal_equation_residual,
    conformal_scale,
    cotan_laplacian,
    mixed_voronoi_areas,
    regularize,
)

RNG = np.random.default_rng(42)


def test_unit_sphere_curvature(round_lvl3):
    intr = angle_defect_curvature(round_lvl3.metric)
    assert intr.K.min() > 0.97 and intr.K.max() < 1.03


def test_gauss_bonnet(round_lvl3, spheroid_lvl3, flatpole_lvl3):
    for surf in (round_lvl3, spheroid_lvl3, flatpole_lvl3):
        intr = angle_defect_curvature(surf.metric)
        assert abs(intr.total_defect - 4 * np.pi) <= 1e-9 * 4 * np.pi
        assert np.allclose(intr.K, intr.angle_defect / intr.area)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(min_value=0.1, max_value=10.0, allow_nan=False))
def test_metric_scaling_law(c):
    g = gen_round(1, 1.0).metric
    scaled = MetricField(g.mesh, c * g.lengths)
    a = angle_defect_curvature(g)
    b = angle_defect_curvature(scaled)
    assert np.allclose(b.angle_defect, a.angle_defect, atol=1e-12)
    assert np.allclose(b.K, a.K / c**2, rtol=1e-9)


def test_triangle_inequality_reported():
    g = gen_round(0).metric
    bad = g.lengths.copy()
    bad[0] = bad.sum()  # one absurdly long edge
    with pytest.raises(MetricError, match="face"):
        MetricField(g.mesh, bad)


def test_laplacian_constant_in_kernel(round_lvl3):
    L = cotan_laplacian(round_lvl3.metric)
    u = np.full(round_lvl3.mesh.vertex_count, 3.7)
    assert np.abs(L @ u).max() < 1e-12


def test_laplacian_symmetric_exact(round_lvl3):
    L = cotan_laplacian(round_lvl3.metric)
    assert (L != L.T).nnz == 0


def test_laplacian_self_adjoint(round_lvl3):
    L = cotan_laplacian(round_lvl3.metric)
    n = round_lvl3.mesh.vertex_count
    for _ in range(5):
        u = RNG.standard_normal(n)
        v = RNG.standard_normal(n)
        a, b = u @ (L @ v), v @ (L @ u)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_laplacian_sphere_harmonic(round_lvl4):
    # z restricted to the unit sphere is an l=1 eigenfunction: Delta u = -2u
    from weylab.mesh import icosphere_positions

    g = round_lvl4.metric
    u = icosphere_positions(4)[:, 2]
    L = cotan_laplacian(g)
    area = mixed_voronoi_areas(g)
    lap = -(L @ u) / area
    rel = np.linalg.norm(lap + 2 * u) / np.linalg.norm(2 * u)
    assert rel < 0.05


def test_conformal_scale_identity(round_lvl3):
    g = round_lvl3.metric
    out = conformal_scale(g, np.zeros(g.mesh.vertex_count))
    assert np.array_equal(out.lengths, g.lengths)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(min_value=0.2, max_value=5.0, allow_nan=False))
def test_conformal_scale_constant(c):
    g = gen_round(1, 1.0).metric
    out = conformal_scale(g, np.full(g.mesh.vertex_count, np.log(c)))
    assert np.allclose(out.lengths, c * g.lengths, rtol=1e-12)


def test_conformal_scale_bump_locality(round_lvl3):
    g = round_lvl3.metric
    u = np.zeros(g.mesh.vertex_count)
    u[17] = 0.3
    out = conformal_scale(g, u)
    touched = np.nonzero(out.lengths != g.lengths)[0]
    assert set(touched.tolist()) == set(g.mesh.vertex_edges[17].tolist())


def test_regularize_round_is_identity(round_lvl3):
    step = regularize(round_lvl3.metric, 1e-2)
    assert np.array_equal(step.lam, np.zeros_like(step.lam))
    assert np.array_equal(step.metric.lengths, round_lvl3.metric.lengths)
    assert step.min_K > 0.97


def test_regularize_flat_pole(flatpole_lvl3):
    g = flatpole_lvl3.metric
    step = regularize(g, 1e-2)
    assert step.min_K > 0.0
    assert abs(step.lam.mean()) < 1e-12
    sup_K = angle_defect_curvature(g).K.max()
    resid = conformal_equation_residual(g, step)
    assert np.sqrt((resid**2).mean()) < 1e-6 * sup_K
    # the lifted metric still satisfies Gauss-Bonnet
    intr = angle_defect_curvature(step.metric)
    assert abs(intr.total_defect - 4 * np.pi) <= 1e-9 * 4 * np.pi


def test_regularize_deterministic(flatpole_lvl3):
    a = regularize(flatpole_lvl3.metric, 3e-3)
    b = regularize(flatpole_lvl3.metric, 3e-3)
    assert np.array_equal(a.lam, b.lam)
    assert np.array_equal(a.metric.lengths, b.metric.lengths)
    assert a.min_K == b.min_K


def test_regularize_rejects_bad_epsilon(round_lvl3):
    with pytest.raises(MetricError):
        regularize(round_lvl3.metric, -1.0)


def test_regularize_rejects_negatively_curved():
    # a saddle-heavy metric: stretch interior edges of a sphere mesh
    g = gen_round(2).metric
    lengths = g.lengths * (1 + 0.35 * RNG.random(g.mesh.edge_count))
    try:
        bumpy = MetricField(g.mesh, lengths)
    except MetricError:
        pytest.skip("random stretch broke triangle inequality")
    intr = angle_defect_curvature(bumpy)
    if intr.K.min() >= 0:
        pytest.skip("random stretch stayed nonnegatively curved")
    with pytest.raises(MetricError):
        regularize(bumpy, 1e-2)


def test_ambient_spec_guard():
    with pytest.raises(MetricError):
        AmbientSpec(kind="hyperbolic")
    with pytest.raises(MetricError):
        AmbientSpec(K0=-1.0)
    assert AmbientSpec().K0 == 0.0
