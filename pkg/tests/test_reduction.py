import math

import numpy as np
import pytest

from rmplate.femlib.forms import mass_matrix
from rmplate.femlib.quadrature import interval_rule, triangle_rule
from rmplate.femlib.spaces import DiscreteField, Family, build_space, interpolate
from rmplate.mesh import builtin_mesh, refine_uniform
from rmplate.reduction import (
    gradient_operator, make_reduction, measure_CR, project_Q, project_U, reduce, xi_R,
)

from conftest import two_element_square


def _triple(m, kind="rt", p=2):
    W = build_space(m, Family.lagrange(p if kind == "rt" else p + 1))
    V = build_space(m, Family.bubble_vector(p))
    U = build_space(m, Family(kind, p))
    return W, V, U


@pytest.fixture(scope="module", params=["rt", "bdm"])
def triple(request):
    m = builtin_mesh("two_hole")
    W, V, U = _triple(m, request.param)
    return W, V, U, make_reduction(V, U)


def _l2(space, coeffs):
    return math.sqrt(max(coeffs @ (mass_matrix(space) @ coeffs), 0.0))


def test_identity_reduction(two_hole, rng):
    V = build_space(two_hole, Family.lagrange_vector(2))
    r = make_reduction(V)
    psi = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
    np.testing.assert_array_equal(reduce(r, psi).coeffs, psi.coeffs)
    assert measure_CR(r) == 1.0


def test_reduction_of_target_field_is_projection(triple, rng):
    _, _, U, _ = triple
    rr = make_reduction(U, U)
    eta = DiscreteField.from_free(U, rng.standard_normal(U.nfree))
    d = reduce(rr, eta).coeffs - eta.coeffs
    assert _l2(U, d) <= 1e-12 * _l2(U, eta.coeffs)


def test_reduction_lands_in_constrained_space(triple, rng):
    _, V, U, r = triple
    psi = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
    u = reduce(r, psi).coeffs
    np.testing.assert_allclose(U.constrain(u), u, atol=1e-13)


def test_gradients_commute(triple, rng):
    W, _, U, _ = triple
    _, G = gradient_operator(W, U)
    v = DiscreteField.from_free(W, rng.standard_normal(W.nfree))
    g = DiscreteField(U, G @ v.coeffs)
    pts = triangle_rule(4).points
    np.testing.assert_allclose(g.evaluate(pts)[0], v.evaluate(pts)[1][..., 0, :], atol=1e-10)
    # the same holds for the canonical interpolant of an analytic gradient
    Wf = build_space(W.mesh, W.family, bc="none")
    vf = interpolate(Wf, lambda x, y: x ** 2 * y - 3 * y ** 2 + x)
    _, Gf = gradient_operator(Wf, U)
    gi = reduce(make_reduction(build_space(W.mesh, Family.bubble_vector(2), bc="none"), U),
                lambda x, y: (2 * x * y + 1, x ** 2 - 6 * y))
    np.testing.assert_allclose(gi.coeffs, Gf @ vf.coeffs, atol=1e-10)


def test_edge_moments_preserved_two_element_square():
    m = two_element_square()
    V = build_space(m, Family.bubble_vector(2), bc="none")
    U = build_space(m, Family.rt(2), bc="none")
    r = make_reduction(V, U)
    f = lambda x, y: (y ** 2, 0 * y)  # noqa: E731
    Rpsi = reduce(r, f)
    s, w = interval_rule(10)
    for e, (a, b) in enumerate(m.edges):
        A, B = m.vertices[a], m.vertices[b]
        X = A[None] + s[:, None] * (B - A)[None]
        t = m.edge_tris[e, 0]
        ref = U.geom.pull(X[None], slice(t, t + 1))[0]
        vals = Rpsi.evaluate(ref, slice(t, t + 1))[0][0]
        exact = np.stack(f(X[:, 0], X[:, 1]), -1)
        assert np.sum(w * (vals @ (B - A))) == pytest.approx(np.sum(w * (exact @ (B - A))), abs=1e-13)


def test_project_Q_constants(two_hole, square):
    Q = build_space(two_hole, Family.dg(1))
    q = project_Q(Q, lambda x, y: 3.0 + 0 * x)
    np.testing.assert_allclose(q.coeffs, 3.0, atol=1e-12)
    Q0 = build_space(square, Family.dg(1))
    assert Q0.mean_zero
    np.testing.assert_allclose(project_Q(Q0, lambda x, y: 3.0 + 0 * x).coeffs, 0.0, atol=1e-12)


def test_commuting_square(triple, rng):
    _, V, U, r = triple
    Q = build_space(V.mesh, Family.dg(1))
    psi = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
    lhs = project_Q(Q, ("rot", psi))
    rhs = project_Q(Q, ("rot", reduce(r, psi)))
    assert _l2(Q, lhs.coeffs - rhs.coeffs) <= 1e-10 * _l2(Q, lhs.coeffs)


def test_project_U_identity_and_orthogonal(triple, rng):
    _, V, U, _ = triple
    eta = DiscreteField.from_free(U, rng.standard_normal(U.nfree))
    np.testing.assert_allclose(project_U(U, eta).coeffs, eta.coeffs, atol=1e-10)
    # residual of a bubble field against U is orthogonal to U
    psi = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
    p = project_U(U, psi)
    from rmplate.femlib.forms import cross_mass

    MU = mass_matrix(U)
    res = U.Z.T @ (cross_mass(U, V) @ psi.coeffs - MU @ p.coeffs)
    assert np.abs(res).max() <= 1e-10 * np.abs(U.Z.T @ (MU @ p.coeffs)).max()
    # the residual psi - P psi is orthogonal to U, so projecting it gives zero
    Uf = build_space(V.mesh, Family.bubble_vector(2), bc="none")
    lhs = DiscreteField(Uf, psi.coeffs)
    from rmplate.reduction import _project, _rhs

    assert np.abs(_project(U, _rhs(U, lhs) - MU @ p.coeffs)).max() < 1e-10 * np.abs(p.coeffs).max()


def test_project_U_rate():
    from rmplate.study import ManufacturedSolution
    from rmplate.system import MaterialParams

    g = ManufacturedSolution(MaterialParams()).gamma
    rule = triangle_rule(12)
    m = refine_uniform(builtin_mesh("two_hole"))
    errs = []
    for _ in range(3):
        U = build_space(m, Family.rt(2), bc="none")
        f = project_U(U, g)
        X = U.geom.map(rule.points)
        d = f.evaluate(rule.points)[0] - g(X[..., 0], X[..., 1])
        errs.append(math.sqrt(np.sum(np.sum(d ** 2, -1) * rule.weights * np.abs(U.geom.detJ)[:, None])))
        m = refine_uniform(m)
    assert 1.7 <= math.log2(errs[-2] / errs[-1]) <= 2.3


def test_xi_R(triple, rng):
    W, V, U, r = triple
    psi = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
    zero = DiscreteField(W)
    np.testing.assert_allclose(xi_R(zero, psi, r).coeffs, -reduce(r, psi).coeffs, atol=1e-13)
    v = DiscreteField.from_free(W, rng.standard_normal(W.nfree))
    _, G = gradient_operator(W, U)
    np.testing.assert_allclose(xi_R(v, DiscreteField(V), r).coeffs, G @ v.coeffs, atol=1e-13)


def test_xi_R_rejects_identity(two_hole):
    V = build_space(two_hole, Family.lagrange_vector(2))
    W = build_space(two_hole, Family.lagrange(3))
    with pytest.raises(ValueError):
        xi_R(DiscreteField(W), DiscreteField(V), make_reduction(V))


@pytest.mark.parametrize("kind", ["rt", "bdm"])
def test_CR_stable(kind):
    m = builtin_mesh("two_hole")
    vals = []
    for _ in range(3):
        _, V, U = _triple(m, kind)
        vals.append(measure_CR(make_reduction(V, U), exact=True))
        m = refine_uniform(m)
    assert min(vals) >= 1.0 - 1e-10
    assert max(vals) <= 1.1 * min(vals)


def test_CR_sampled_below_exact(square):
    _, V, U = _triple(square, "bdm")
    r = make_reduction(V, U)
    assert measure_CR(r, trials=30) <= measure_CR(r, exact=True) * (1 + 1e-12)


def test_reduction_rejects_bad_target(two_hole):
    V = build_space(two_hole, Family.bubble_vector(2))
    with pytest.raises(ValueError):
        make_reduction(V, build_space(two_hole, Family.dg(1)))
    with pytest.raises(ValueError):
        make_reduction(V, build_space(refine_uniform(two_hole), Family.rt(2)))


def test_locality(two_hole, rng):
    """Changing psi on one cell only changes R psi on that cell's dofs."""
    _, V, U = _triple(two_hole)
    r = make_reduction(V, U)
    k = 17
    interior = V.cell_dofs[k][np.isin(V.cell_dofs[k], V.cell_dofs[np.arange(two_hole.n_triangles) != k].ravel(), invert=True)]
    d = np.zeros(V.ndof)
    d[interior] = rng.standard_normal(len(interior))
    changed = np.nonzero(np.abs(r.matrix @ d) > 1e-14)[0]
    assert set(changed) <= set(U.cell_dofs[k])
