import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obcd.driver import _planar_stack, block_harmonics, solve_block_exact
from obcd.exceptions import EmptyModel, InfeasibleSubproblem, NotTrigPolynomial
from obcd.linalg import Branch, PlanarOrthogonal, WorkingSet, apply_planar_update, gram_residual
from obcd.problems import NlepData, init_random_orthogonal, make_nlep, make_quadratic
from obcd.subproblem import (
    QPolicy,
    RegularizerSpec,
    SubproblemCoeffs,
    TrigPoly,
    assemble_pqz,
    branch_coefficients,
    bsm_solve,
    enumerate_breakpoints,
    eval_reduced_objective,
    fim_solve,
    fit_harmonics,
)
from oracles import block_grid_min, block_value

ROT, REF = Branch.ROTATION, Branch.REFLECTION


def coeffs(a=0.0, b=0.0, w=0.0, d=0.0, x=(), y=(), e=0.0, branch=ROT):
    return SubproblemCoeffs(a, b, d, w, e, np.array(x, float), np.array(y, float), branch)


def both(P, Q, Z):
    return branch_coefficients(P, Q, Z, ROT), branch_coefficients(P, Q, Z, REF)


def random_psd(k, rng):
    A = rng.standard_normal((k, k))
    return A @ A.T


def reg_for(kind, lam):
    return {
        "zero": RegularizerSpec.zero(),
        "l0": RegularizerSpec.l0(lam),
        "l1": RegularizerSpec.l1(lam),
        "nonneg": RegularizerSpec.nonneg(),
    }[kind]


# assemble_pqz


def test_assemble_zero_gradient():
    X = np.eye(3, 2)
    P, Q, Z = assemble_pqz(np.zeros((3, 2)), X, WorkingSet(0, 1), QPolicy.zero(), 0.5)
    np.testing.assert_array_equal(P, -0.5 * np.eye(2))
    assert Q is None
    np.testing.assert_array_equal(Z, X[[0, 1]])


def test_assemble_spca_identity():
    X = np.eye(4, 2)
    P, _, _ = assemble_pqz(-X, X, WorkingSet(0, 1), QPolicy.zero(), 0.0)
    np.testing.assert_array_equal(P, -np.eye(2))


def test_assemble_kronecker(rng):
    n, r, L = 5, 3, 2.5
    X = init_random_orthogonal(n, r, 1)
    G = rng.standard_normal((n, r))
    B = WorkingSet(1, 4)
    P, Q, Z = assemble_pqz(G, X, B, QPolicy.kronecker(np.eye(r), L * np.eye(n)), 0.1)
    np.testing.assert_allclose(Q, np.kron(L * Z @ Z.T, np.eye(2)), atol=1e-14)
    QI = (Q @ np.eye(2).reshape(-1, order="F")).reshape(2, 2, order="F")
    np.testing.assert_allclose(P, (G @ X.T)[np.ix_(B, B)] - QI - 0.1 * np.eye(2), atol=1e-14)


def test_assemble_diagonal_folds_sigma(rng):
    X = init_random_orthogonal(4, 2, 2)
    G = rng.standard_normal((4, 2))
    P, Q, _ = assemble_pqz(G, X, WorkingSet(0, 2), QPolicy.diagonal(3.0), 0.0)
    np.testing.assert_array_equal(Q, 3.0 * np.eye(4))
    np.testing.assert_allclose(P, (G @ X.T)[np.ix_([0, 2], [0, 2])] - 3.0 * np.eye(2), atol=1e-14)


# branch_coefficients


def test_coefficients_identity_rotation():
    k = branch_coefficients(np.eye(2), None, np.zeros((2, 1)), ROT)
    assert (k.a, k.b, k.w, k.d) == (2.0, 0.0, 0.0, 0.0)


def test_coefficients_identity_reflection():
    k = branch_coefficients(np.eye(2), None, np.zeros((2, 1)), REF)
    assert (k.a, k.b) == (0.0, 0.0)


def test_coefficients_match_matrix_form():
    rng = np.random.default_rng(3)
    phis = np.linspace(-np.pi, np.pi, 64, endpoint=False)
    for _ in range(100):
        P = rng.standard_normal((2, 2))
        Q = rng.standard_normal((4, 4))
        Q = Q + Q.T
        Z = rng.standard_normal((2, 3))
        for br in (ROT, REF):
            k = branch_coefficients(P, Q, Z, br)
            for phi in phis:
                M = PlanarOrthogonal(br, phi).matrix()
                ref = block_value(P, Q, Z, "zero", 0.0, M)
                val = eval_reduced_objective(math.cos(phi), math.sin(phi), k, RegularizerSpec.zero())
                assert val == pytest.approx(ref, abs=1e-10)
                # x, y reproduce vec(M Z) row by row
                W = M @ Z
                np.testing.assert_allclose(math.cos(phi) * k.x + math.sin(phi) * k.y, W.ravel(), atol=1e-12)


# eval_reduced_objective


def test_eval_linear():
    assert eval_reduced_objective(1.0, 0.0, coeffs(a=3.0), RegularizerSpec.zero()) == 3.0


def test_eval_l0():
    k = coeffs(b=-1.0, x=[0.0], y=[1.0])
    assert eval_reduced_objective(0.0, 1.0, k, RegularizerSpec.l0(2.0)) == 1.0


def test_eval_nonneg_infeasible():
    k = coeffs(x=[-1.0], y=[0.0])
    assert eval_reduced_objective(1.0, 0.0, k, RegularizerSpec.nonneg()) == math.inf


# enumerate_breakpoints


def test_breakpoints_l0_kinks_only():
    k = coeffs(x=[1.0, 2.0], y=[1.0, 1.0])
    for sign in (1, -1):
        assert sorted(enumerate_breakpoints(k, RegularizerSpec.l0(1.0), sign).t) == [-2.0, -1.0]


def test_breakpoints_nonneg_lower_bound():
    k = coeffs(x=[1.0, -1.0], y=[1.0, 1.0])
    bp = enumerate_breakpoints(k, RegularizerSpec.nonneg(), 1)
    assert bp.feasible and 1.0 in bp.t


def test_breakpoints_nonneg_infeasible_flag():
    k = coeffs(x=[-1.0], y=[0.0])
    assert not enumerate_breakpoints(k, RegularizerSpec.nonneg(), 1).feasible


def test_breakpoints_l1_count_bound(rng):
    Z = rng.standard_normal((2, 2))
    k = branch_coefficients(rng.standard_normal((2, 2)), None, Z, ROT)
    for sign in (1, -1):
        t = enumerate_breakpoints(k, RegularizerSpec.l1(0.7), sign).t
        assert len(t) <= 4 + 9 * 4


def test_breakpoints_zero_at_most_four(rng):
    Q = random_psd(4, rng)
    k = branch_coefficients(rng.standard_normal((2, 2)), Q, rng.standard_normal((2, 3)), REF)
    assert len(enumerate_breakpoints(k, RegularizerSpec.zero(), 1).t) <= 4


# bsm_solve


def test_bsm_trace_maximization():
    V, q = bsm_solve(*both(-np.eye(2), None, np.zeros((2, 1))), RegularizerSpec.zero())
    assert V.is_identity and q == -2.0


def test_bsm_proximal_only():
    theta = 1.0
    V, q = bsm_solve(*both(-theta * np.eye(2), None, np.zeros((2, 1))), RegularizerSpec.zero())
    assert V.is_identity and q == -2.0


@pytest.mark.parametrize("kind", ["zero", "l0", "l1"])
@pytest.mark.parametrize("curved", [False, True])
def test_bsm_against_grid(kind, curved, grid):
    rng = np.random.default_rng(11)
    for _ in range(4):
        r = int(rng.integers(1, 4))
        P = rng.standard_normal((2, 2))
        Q = random_psd(4, rng) if curved else None
        Z = rng.standard_normal((2, r))
        lam = 0.5
        V, q = bsm_solve(*both(P, Q, Z), reg_for(kind, lam))
        assert q == pytest.approx(block_value(P, Q, Z, kind, lam, V.matrix()), abs=1e-10)
        assert q <= block_grid_min(P, Q, Z, kind, lam, grid) + 1e-6


def test_bsm_nonneg_against_grid(grid):
    rng = np.random.default_rng(5)
    Z = np.eye(2)
    for _ in range(5):
        P = rng.standard_normal((2, 2))
        V, q = bsm_solve(*both(P, None, Z), RegularizerSpec.nonneg())
        W = V.matrix() @ Z
        assert W.min() >= -1e-12
        assert q <= block_grid_min(P, None, Z, "nonneg", 0.0, grid) + 1e-6


def test_bsm_nonneg_infeasible():
    # rows of opposite sign cannot both be kept nonnegative by any 2x2 orthogonal map
    Z = np.array([[1.0, -1.0], [-1.0, 1.0]])
    with pytest.raises(InfeasibleSubproblem):
        bsm_solve(*both(np.eye(2), None, Z), RegularizerSpec.nonneg())


def test_bsm_requires_a_branch():
    with pytest.raises(ValueError):
        bsm_solve(None, None, RegularizerSpec.zero())


@settings(max_examples=150, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.sampled_from(["zero", "l0", "l1", "nonneg"]),
    st.booleans(),
)
def test_bsm_never_worse_than_identity(seed, kind, curved):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, 5))
    P = rng.standard_normal((2, 2))
    Q = random_psd(4, rng) if curved else None
    Z = rng.standard_normal((2, r))
    if kind == "nonneg":
        Z = np.abs(Z)
    reg = reg_for(kind, float(rng.uniform(0, 2)))
    rot, ref = both(P, Q, Z)
    V, q = bsm_solve(rot, ref, reg)
    assert q <= eval_reduced_objective(1.0, 0.0, rot, reg) + 1e-12


def procrustes_two_by_two(target):
    """``min ||X - target||_F^2`` over 2x2 orthogonal X."""
    return make_quadratic(2.0 * np.eye(2), -2.0 * target, 2, const=float(np.sum(target**2)))


@pytest.mark.parametrize("start", [0.0, 0.3, -2.0])
def test_reflection_is_necessary(start):
    target = PlanarOrthogonal(REF, 7.0).matrix()
    prob = procrustes_two_by_two(target)
    X0 = PlanarOrthogonal(ROT, start).matrix()
    B = WorkingSet(0, 1)

    state = prob.state(X0)
    V, _ = solve_block_exact(state, B, 1e-5)
    assert prob.eval_F(apply_planar_update(X0, B, V)) <= 1e-10

    state = prob.state(X0)
    V, _ = solve_block_exact(state, B, 1e-5, branches=(ROT,))
    # a rotation times a rotation is a rotation, and every rotation is at
    # squared distance 4 from every reflection
    assert prob.eval_F(apply_planar_update(X0, B, V)) >= 0.1


# fit_harmonics


def test_fit_constant():
    p = fit_harmonics(lambda phi: 2.0, 4)
    assert p.alpha[0] == pytest.approx(2.0)
    assert np.abs(p.alpha[1:]).max() <= 1e-14 and np.abs(p.beta).max() <= 1e-14


def test_fit_sine():
    p = fit_harmonics(lambda phi: 3.0 * math.sin(2 * phi), 4)
    expected = np.zeros(5)
    expected[2] = 3.0
    np.testing.assert_allclose(p.beta, expected, atol=1e-14)
    np.testing.assert_allclose(p.alpha, 0.0, atol=1e-14)


def test_fit_quartic_in_cos_sin(rng):
    coef = rng.standard_normal((5, 5))

    def p(phi):
        c, s = math.cos(phi), math.sin(phi)
        return sum(coef[i, j] * c**i * s**j for i in range(5) for j in range(5 - i))

    poly = fit_harmonics(p, 4)
    probes = rng.uniform(-10, 10, 200)
    assert max(abs(poly(t) - p(t)) for t in probes) <= 1e-10


def test_fit_rejects_wrong_degree():
    with pytest.raises(NotTrigPolynomial):
        fit_harmonics(lambda phi: math.cos(5 * phi), 4)


def test_fit_vectorized_matches():
    f = lambda phis: np.cos(phis) - 0.5 * np.sin(3 * phis)  # noqa: E731
    a = fit_harmonics(f, 3, vectorized=True)
    b = fit_harmonics(lambda t: float(f(np.array(t))), 3)
    np.testing.assert_allclose(a.alpha, b.alpha, atol=1e-15)
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-15)


# TrigPoly


def test_trig_derivatives_finite_difference(rng):
    p = TrigPoly(rng.standard_normal(5), rng.standard_normal(5))
    phi, h = 0.7, 1e-4
    d = p.derivatives(phi)
    for k in range(4):
        fd = (p.derivatives(phi + h)[k] - p.derivatives(phi - h)[k]) / (2 * h)
        assert fd == pytest.approx(d[k + 1], rel=1e-6, abs=1e-6)


def test_fifth_derivative_bound(rng):
    p = TrigPoly(rng.standard_normal(5), rng.standard_normal(5))
    bound = p.fifth_derivative_bound()
    phis = np.linspace(0, 2 * np.pi, 2001)
    m = np.arange(5)
    d5 = -np.sin(np.outer(phis, m)) @ (m**5 * p.alpha) + np.cos(np.outer(phis, m)) @ (m**5 * p.beta)
    assert np.abs(d5).max() <= bound + 1e-12


# fim_solve


def test_fim_identity_minimum():
    V, K = fim_solve(TrigPoly([1.0, -1.0]), 0.0)
    assert V.is_identity and K == pytest.approx(0.0, abs=1e-15)


def test_fim_antipodal():
    V, K = fim_solve(TrigPoly([0.0, 1.0]), 0.0)
    assert abs(V.angle) == pytest.approx(math.pi, abs=1e-10)
    assert K == pytest.approx(-1.0, abs=1e-15)


def test_fim_empty():
    with pytest.raises(EmptyModel):
        fim_solve({}, 1e-5)
    with pytest.raises(EmptyModel):
        fim_solve(TrigPoly([]), 1e-5)


def prox_penalty(br, phis, theta):
    if br is ROT:
        return theta * (2.0 - 2.0 * np.cos(phis))
    return np.full_like(phis, 2.0 * theta)


@pytest.mark.parametrize("seed", range(3))
def test_fim_on_nlep_harmonics(seed):
    rng = np.random.default_rng(seed)
    n, r, theta = 6, 2, 1e-5
    A = rng.standard_normal((8, n))
    prob = make_nlep(NlepData(A.T @ A, rng.standard_normal((n, r)), 1.0), r)
    state = prob.state(init_random_orthogonal(n, r, seed))
    B = WorkingSet(1, 4)
    harm = block_harmonics(state, B)
    V, K = fim_solve(harm, theta)

    phis = np.linspace(-np.pi, np.pi, 1_000_000, endpoint=False)
    K_grid = state.delta_f(B, _planar_stack(V.branch, phis)) + prox_penalty(V.branch, phis, theta)
    assert K <= K_grid.min() + 1e-8
    # K(I) = f(X) - f(X) + 0
    assert K <= 1e-12
    # the reported value is the true one at V
    true = float(state.delta_f(B, V.matrix())[0]) + 0.5 * theta * V.step_norm() ** 2
    assert K == pytest.approx(true, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=5, max_size=5),
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=5, max_size=5),
    st.floats(0.0, 1.0),
)
def test_fim_never_worse_than_identity(alpha, beta, theta):
    p = TrigPoly(alpha, beta)
    p_ref = TrigPoly(beta, alpha)
    V, K = fim_solve({ROT: p, REF: p_ref}, theta)
    assert K <= p(0.0) + 1e-12
    # and it is a critical point of the visited branch
    poly = p if V.branch is ROT else p_ref
    g = poly.derivatives(V.angle, 1)[1]
    if V.branch is ROT:
        g += 2.0 * theta * math.sin(V.angle)
    scale = 1.0 + poly.fifth_derivative_bound()
    assert abs(g) <= 1e-6 * scale


def test_nlep_trig_degree_along_sections():
    rng = np.random.default_rng(21)
    n, r = 7, 3
    A = rng.standard_normal((10, n))
    prob = make_nlep(NlepData(A.T @ A, rng.standard_normal((n, r)), 2.0), r)
    for s in range(50):
        X = init_random_orthogonal(n, r, s)
        i, j = sorted(rng.choice(n, 2, replace=False))
        B = WorkingSet(int(i), int(j))
        state = prob.state(X)
        for br in (ROT, REF):
            # fit_harmonics raises unless the degree-4 fit reproduces f off grid
            poly = fit_harmonics(lambda phis: state.delta_f(B, _planar_stack(br, phis)), 4, vectorized=True)
            assert poly.degree == 4
    assert gram_residual(X) <= 1e-12
