import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmplate.femlib.forms import cross_mass, load_vector, mass_matrix, mean_vector, rot_coupling, stiffness_matrix
from rmplate.femlib.quadrature import interval_rule, triangle_rule
from rmplate.femlib.reference import reference_element
from rmplate.femlib.spaces import (
    DegreeError, DiscreteField, Family, build_space, eval_field, integrate, interpolate,
)
from rmplate.mesh import refine_uniform
from rmplate.system import MaterialParams, PlateSystem, Scheme

from conftest import single_triangle, structured_square

FAMILIES = [
    Family.lagrange(1), Family.lagrange(3), Family.lagrange_vector(2), Family.bubble_vector(2),
    Family.bubble_vector(3), Family.rt(1), Family.rt(2), Family.rt(3), Family.bdm(1), Family.bdm(2), Family.dg(0), Family.dg(2),
]


# -- quadrature ---------------------------------------------------------------------------
def _monomial_integral(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(0, 40), data=st.data())
def test_triangle_rule_exact(d, data):
    rule = triangle_rule(d)
    a = data.draw(st.integers(0, d))
    b = data.draw(st.integers(0, d - a))
    x, y = rule.points.T
    approx = np.sum(rule.weights * x ** a * y ** b)
    assert approx == pytest.approx(_monomial_integral(a, b), rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("d", [0, 1, 5, 12, 25, 40])
def test_triangle_rule_weights(d):
    rule = triangle_rule(d)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    x, y = rule.points.T
    assert np.all((x >= 0) & (y >= 0) & (x + y <= 1))


def test_triangle_rule_degree_range():
    with pytest.raises(ValueError):
        triangle_rule(41)


@pytest.mark.parametrize("d", [0, 3, 10, 21])
def test_interval_rule_exact(d):
    s, w = interval_rule(d)
    for k in range(d + 1):
        assert np.sum(w * s ** k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


# -- reference elements ---------------------------------------------------------------------
@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_lagrange_nodal_and_partition_of_unity(k):
    ref = reference_element("lagrange", k)
    v, _ = ref.tabulate(ref.nodes)
    np.testing.assert_allclose(v[:, :, 0], np.eye(ref.ndof), atol=1e-12)
    pts = triangle_rule(7).points
    v, g = ref.tabulate(pts)
    np.testing.assert_allclose(v[:, :, 0].sum(0), 1.0, atol=1e-12)
    np.testing.assert_allclose(g[:, :, 0, :].sum(0), 0.0, atol=1e-10)


@pytest.mark.parametrize("p", [2, 3])
def test_bubble_element_nodal(p):
    ref = reference_element("bubble", p)
    v, _ = ref.tabulate(ref.nodes)
    np.testing.assert_allclose(v[:, :, 0], np.eye(ref.ndof), atol=1e-10)
    assert ref.ndof == (p + 1) * (p + 2) // 2 + p - 1


def test_degree_validation():
    with pytest.raises(DegreeError):
        Family.bubble_vector(1)
    with pytest.raises(ValueError):
        Family("nedelec", 1)


# -- spaces ---------------------------------------------------------------------------------
def test_clamped_triangle_p2_has_no_free_dofs():
    assert build_space(single_triangle(), Family.lagrange(2)).nfree == 0


def test_single_triangle_dg1_mean_zero():
    Q = build_space(single_triangle(), Family.dg(1))
    assert Q.mean_zero
    assert (Q.ndof, Q.nfree, Q.dim) == (3, 3, 2)


def test_dg_not_mean_zero_with_free_boundary(two_hole):
    assert not build_space(two_hole, Family.dg(1)).mean_zero


def test_rt2_dimension(two_hole):
    U = build_space(two_hole, Family.rt(2), bc="none")
    assert U.ndof == 2 * two_hole.n_edges + 2 * two_hole.n_triangles


def test_bdm2_dimension(two_hole):
    U = build_space(two_hole, Family.bdm(2), bc="none")
    assert U.ndof == 3 * two_hole.n_edges + 3 * two_hole.n_triangles


def test_constraint_basis_orthonormal(two_hole):
    for fam in FAMILIES:
        Z = build_space(two_hole, fam).Z
        np.testing.assert_allclose((Z.T @ Z).toarray(), np.eye(Z.shape[1]), atol=1e-14)


@pytest.mark.parametrize("fam", [Family.lagrange_vector(1), Family.bubble_vector(2)])
def test_simply_supported_keeps_normal_rotation(two_hole, fam, rng):
    V = build_space(two_hole, fam)
    f = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
    m = two_hole
    tang, norm = 0.0, 0.0
    for e in m.boundary_edges:
        if m.edge_tags[e] != "s":
            continue
        t = m.edge_tris[e, 0]
        a, b = m.vertices[m.edges[e]]
        X = a[None] + np.linspace(0, 1, 5)[:, None] * (b - a)[None]
        vals = f.evaluate(V.geom.pull(X[None], slice(t, t + 1))[0], slice(t, t + 1))[0][0]
        d = (b - a) / np.linalg.norm(b - a)
        tang = max(tang, np.abs(vals @ d).max())
        norm = max(norm, np.abs(vals @ [-d[1], d[0]]).max())
    assert tang < 1e-13
    assert norm > 1e-3


def _edge_samples(space, field, n=5):
    """Values from both neighbouring cells at points of every interior edge."""
    m = space.mesh
    s = np.linspace(0.1, 0.9, n)
    out = []
    for e in np.nonzero(m.edge_tris[:, 1] >= 0)[0]:
        a, b = m.vertices[m.edges[e]]
        X = a[None] + s[:, None] * (b - a)[None]
        vals = []
        for t in m.edge_tris[e]:
            ref = space.geom.pull(X[None], slice(t, t + 1))[0]
            vals.append(field.evaluate(ref, slice(t, t + 1))[0][0])
        out.append((b - a, vals[0], vals[1]))
    return out


@pytest.mark.parametrize("fam", [Family.rt(1), Family.rt(2), Family.rt(3), Family.bdm(1), Family.bdm(2)])
def test_tangential_continuity(two_hole, fam, rng):
    U = build_space(two_hole, fam)
    f = DiscreteField.from_free(U, rng.standard_normal(U.nfree))
    worst = 0.0
    for tan, v0, v1 in _edge_samples(U, f):
        worst = max(worst, np.abs((v0 - v1) @ tan).max())
    assert worst <= 1e-11


@pytest.mark.parametrize("fam", [Family.lagrange(3), Family.bubble_vector(2)])
def test_h1_continuity(two_hole, fam, rng):
    S = build_space(two_hole, fam)
    f = DiscreteField.from_free(S, rng.standard_normal(S.nfree))
    for _, v0, v1 in _edge_samples(S, f):
        np.testing.assert_allclose(v0, v1, atol=1e-11)


def test_boundary_values_vanish_for_clamped(two_hole, rng):
    W = build_space(two_hole, Family.lagrange(2))
    f = DiscreteField.from_free(W, rng.standard_normal(W.nfree))
    m = two_hole
    for e in m.boundary_edges:
        if m.edge_tags[e] == "f":
            continue
        t = m.edge_tris[e, 0]
        a, b = m.vertices[m.edges[e]]
        X = a[None] + np.linspace(0, 1, 4)[:, None] * (b - a)[None]
        ref = W.geom.pull(X[None], slice(t, t + 1))[0]
        np.testing.assert_allclose(f.evaluate(ref, slice(t, t + 1))[0], 0.0, atol=1e-13)


# -- fields and interpolation ---------------------------------------------------------------
def test_constant_field(two_hole):
    W = build_space(two_hole, Family.lagrange(2), bc="none")
    f = DiscreteField(W, np.ones(W.ndof))
    fv = eval_field(f, 7, [0.2, 0.3, 0.5])
    assert fv.value == pytest.approx(1.0)
    np.testing.assert_allclose(fv.grad, 0.0, atol=1e-12)


def test_linear_field(two_hole):
    W = build_space(two_hole, Family.lagrange(1), bc="none")
    f = interpolate(W, lambda x, y: x)
    m = two_hole
    bary = np.array([0.2, 0.3, 0.5])
    x = bary @ m.vertices[m.triangles[11]]
    fv = eval_field(f, 11, bary)
    assert fv.value == pytest.approx(x[0], abs=1e-14)
    np.testing.assert_allclose(fv.grad, [1.0, 0.0], atol=1e-12)


def test_eval_field_rejects_bad_barycentric(two_hole):
    W = build_space(two_hole, Family.lagrange(1))
    with pytest.raises(ValueError):
        eval_field(DiscreteField(W), 0, [0.5, 0.6, -0.1])


@pytest.mark.parametrize("fam", [Family.rt(1), Family.rt(2), Family.bdm(1), Family.bdm(2)])
def test_perp_position_has_rot_two(two_hole, fam):
    U = build_space(two_hole, fam, bc="none")
    f = interpolate(U, lambda x, y: (-y, x))
    for k in range(0, two_hole.n_triangles, 5):
        assert eval_field(f, k, [0.1, 0.6, 0.3]).rot == pytest.approx(2.0, abs=1e-11)


def test_zero_interpolant(two_hole):
    for fam in FAMILIES:
        S = build_space(two_hole, fam, bc="none")
        g = (lambda x, y: (0 * x, 0 * x)) if fam.vector else (lambda x, y: 0 * x)
        assert not np.any(interpolate(S, g).coeffs)


def _poly(vector, deg, seed):
    r = np.random.default_rng(seed)
    c = r.standard_normal((2, deg + 1, deg + 1))
    exps = [(a, b) for a in range(deg + 1) for b in range(deg + 1 - a)]

    def g(x, y):
        parts = [sum(c[k, a, b] * x ** a * y ** b for a, b in exps) for k in range(2)]
        return tuple(parts) if vector else parts[0]

    return g


@pytest.mark.parametrize(
    "fam, deg",
    [(Family.lagrange(3), 3), (Family.lagrange_vector(2), 2), (Family.bubble_vector(2), 2), (Family.dg(2), 2),
     (Family.rt(2), 1), (Family.bdm(2), 2), (Family.bdm(1), 1)],
)
def test_polynomial_reproduction(two_hole, fam, deg):
    S = build_space(two_hole, fam, bc="none")
    g = _poly(fam.vector, deg, 7)
    f = interpolate(S, g)
    pts = triangle_rule(5).points
    X = S.geom.map(pts)
    want = np.stack(g(X[..., 0], X[..., 1]), -1) if fam.vector else g(X[..., 0], X[..., 1])[..., None]
    np.testing.assert_allclose(f.evaluate(pts)[0], want, atol=1e-11)


def test_integrate_area(two_hole):
    assert integrate(two_hole, lambda x, y: np.ones_like(x), 0) == pytest.approx(1.5, abs=1e-14)


def test_rt2_interpolation_rate():
    from rmplate.study import ManufacturedSolution

    g = ManufacturedSolution(MaterialParams()).grad_w
    rule = triangle_rule(14)
    errs = []
    m = refine_uniform(refine_uniform(structured_square(2)))
    for _ in range(3):
        U = build_space(m, Family.rt(2), bc="none")
        f = interpolate(U, lambda x, y: g(x, y))
        X = U.geom.map(rule.points)
        d = f.evaluate(rule.points)[0] - g(X[..., 0], X[..., 1])
        errs.append(math.sqrt(np.sum(np.sum(d ** 2, -1) * rule.weights * np.abs(U.geom.detJ)[:, None])))
        m = refine_uniform(m)
    rate = math.log2(errs[-2] / errs[-1])
    assert 1.8 <= rate <= 2.2


# -- forms ----------------------------------------------------------------------------------
def test_mass_matrix_total_is_area(two_hole):
    for fam in (Family.lagrange(2), Family.bubble_vector(2), Family.dg(1)):
        S = build_space(two_hole, fam, bc="none")
        M = mass_matrix(S)
        if fam.vector:
            # sum over x-components only
            n = S.nscalar
            assert M[:n, :n].sum() == pytest.approx(1.5, rel=1e-13)
        else:
            assert M.sum() == pytest.approx(1.5, rel=1e-13)
        if not fam.vector:
            assert mean_vector(S).sum() == pytest.approx(1.5, rel=1e-13)


def test_stiffness_kills_constants(two_hole):
    W = build_space(two_hole, Family.lagrange(3), bc="none")
    assert np.abs(stiffness_matrix(W) @ np.ones(W.ndof)).max() < 1e-12


def test_cross_mass_transpose(two_hole):
    a = build_space(two_hole, Family.rt(2), bc="none")
    b = build_space(two_hole, Family.bubble_vector(2), bc="none")
    np.testing.assert_allclose(cross_mass(a, b).toarray(), cross_mass(b, a).toarray().T, atol=1e-14)


def test_rot_coupling_perp(two_hole):
    U = build_space(two_hole, Family.rt(2), bc="none")
    Q = build_space(two_hole, Family.dg(1), bc="none")
    f = interpolate(U, lambda x, y: (-y, x))
    assert mean_vector(Q) @ np.zeros(Q.ndof) == 0.0
    # int rot f * 1 = 2 |Omega| with the constant expressed in DG
    ones = np.ones(Q.ndof)
    assert ones @ (rot_coupling(Q, U) @ f.coeffs) == pytest.approx(3.0, rel=1e-12)


def test_load_vector_matches_mass(two_hole):
    S = build_space(two_hole, Family.lagrange(2), bc="none")
    f = interpolate(S, lambda x, y: x * y)
    b = load_vector(S, lambda x, y: x * y, 6)
    np.testing.assert_allclose(b, mass_matrix(S) @ f.coeffs, atol=1e-14)


def test_bending_energy_of_linear_field(two_hole):
    sysm = PlateSystem(two_hole, Scheme("rt", 2), MaterialParams())
    V = build_space(two_hole, Family.bubble_vector(2), bc="none")
    th = interpolate(V, lambda x, y: (x, 0 * x)).coeffs
    A = sysm.assemble_a()
    assert th @ (A @ th) == pytest.approx(1.5 / 10.92, rel=1e-12)
    assert 1.5 / 10.92 == pytest.approx(0.137363, abs=5e-7)
    tr = interpolate(V, lambda x, y: (1 + 0 * x, 0 * x)).coeffs
    assert abs(tr @ (A @ tr)) < 1e-13
    rot = interpolate(V, lambda x, y: (-y, x)).coeffs
    assert abs(rot @ (A @ rot)) < 1e-13


def test_bending_form_psd(two_hole, rng):
    sysm = PlateSystem(two_hole, Scheme("rt", 2))
    A = sysm.Z.T @ sysm.A @ sysm.Z
    for _ in range(20):
        x = rng.standard_normal(A.shape[0])
        assert x @ (A @ x) >= -1e-12 * np.linalg.norm(x) ** 2
