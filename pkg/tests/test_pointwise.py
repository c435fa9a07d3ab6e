"""Algebraic layer: eigenvalues, exponent intervals, pointwise verdicts."""

import math

import numpy as np
import pytest

from dissipate import (
    NonnegativityError,
    check_p_condition,
    constant_coeff_verdict,
    decompose,
    jacobi_eigh,
    lambda_of,
    min_eigenvalue,
    p_interval,
    q_sufficiency,
)
from dissipate.pointwise import TOL_PSD, trace_norm

from conftest import seeded_matrices

SQ2 = math.sqrt(2.0)


def lam_oracle(S_r, S_i):
    """Bisection for the admissible pencil ratio using numpy eigenvalues.

    Independent of the library's Jacobi sweep solver, same tolerance
    semantics.
    """
    tol = TOL_PSD * (1.0 + trace_norm(S_r))

    def feasible(t):
        return (
            np.linalg.eigvalsh(S_r + t * S_i).min() >= -tol
            and np.linalg.eigvalsh(S_r - t * S_i).min() >= -tol
        )

    if np.linalg.norm(S_i) == 0.0:
        return math.inf
    if feasible(1.0):
        lo, hi = 1.0, 2.0
        while feasible(hi):
            lo = hi
            hi *= 2.0
            if hi > 2.0**60:
                return math.inf
    else:
        lo, hi = 0.0, 1.0
    while hi - lo > 1e-12 * (1.0 + hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


class TestDecompose:
    def test_splits_into_the_four_parts(self):
        A = np.array([[1.0, 2.0 + 3.0j], [0.0, 1.0j]])
        d = decompose(A)
        np.testing.assert_allclose(d.S_r, [[1.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(d.K_r, [[0.0, 1.0], [-1.0, 0.0]])
        np.testing.assert_allclose(d.S_i, [[0.0, 1.5], [1.5, 1.0]])
        np.testing.assert_allclose(d.K_i, [[0.0, 1.5], [-1.5, 0.0]])

    def test_parts_reassemble(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        d = decompose(A)
        np.testing.assert_allclose(d.S_r + d.K_r + 1j * (d.S_i + d.K_i), A, atol=1e-15)


class TestJacobi:
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 6])
    def test_agrees_with_numpy(self, n):
        rng = np.random.default_rng(n)
        for _ in range(20):
            H = rng.normal(size=(n, n))
            S = 0.5 * (H + H.T)
            w, V = jacobi_eigh(S)
            w = np.asarray(w)
            V = np.asarray(V)
            np.testing.assert_allclose(w, np.linalg.eigvalsh(S), atol=1e-10 * (1 + abs(S).max()))
            assert np.all(np.diff(w) >= -1e-12)
            scale = max(1.0, float(np.abs(S).max()))
            np.testing.assert_allclose(S @ V, V @ np.diag(w), atol=1e-9 * scale)
            np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-10)

    def test_accepts_nested_lists(self):
        w, _ = jacobi_eigh([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(np.asarray(w), [1.0, 3.0], atol=1e-12)

    def test_min_eigenvalue_closed_form(self):
        S = 2.0 * SQ2 * np.eye(2) - np.array([[0.0, 1.0], [1.0, 0.0]])
        assert min_eigenvalue(S) == pytest.approx(2.0 * SQ2 - 1.0, abs=1e-12)


class TestPCondition:
    def test_holds_inside_the_admissible_band(self):
        d = decompose((1.0 + 1.0j) * np.eye(2))
        for p in (4.0 - 2.0 * SQ2, 2.0, 3.0, 4.0 + 2.0 * SQ2):
            assert check_p_condition(d, p)

    def test_fails_outside_the_band(self):
        d = decompose((1.0 + 1.0j) * np.eye(2))
        assert not check_p_condition(d, 1.1)
        assert not check_p_condition(d, 12.0)

    def test_always_holds_at_two_for_psd_real_part(self):
        for A in seeded_matrices(count=40, seed=5):
            assert check_p_condition(decompose(A), 2.0)

    def test_indefinite_real_part_fails_even_at_two(self):
        d = decompose(np.diag([1.0, -1.0]).astype(complex))
        assert not check_p_condition(d, 2.0)

    def test_exponent_validation(self):
        d = decompose(np.eye(2).astype(complex))
        with pytest.raises(ValueError):
            check_p_condition(d, 1.0)
        with pytest.raises(ValueError):
            check_p_condition(d, math.inf)

    def test_self_dual_in_the_exponent(self):
        # same verdict for (A, p) and (A conjugate transposed, p/(p-1))
        for A in seeded_matrices(count=60, seed=8):
            d = decompose(A)
            dstar = decompose(A.conj().T)
            for p in (1.2, 1.5, 3.0, 7.0):
                assert check_p_condition(d, p) == check_p_condition(dstar, p / (p - 1.0))


class TestLambda:
    def test_unit_complex_diagonal(self):
        res = lambda_of(decompose((1.0 + 1.0j) * np.eye(2)))
        assert res.lam == pytest.approx(1.0, abs=1e-8)

    def test_anisotropic_imaginary_part(self):
        A = np.eye(2) + 1j * np.diag([2.0, 0.0])
        res = lambda_of(decompose(A))
        assert res.lam == pytest.approx(0.5, abs=1e-8)

    def test_real_matrix_gives_infinity(self):
        res = lambda_of(decompose(np.array([[2.0, 0.5], [-0.5, 1.0]], dtype=complex)))
        assert math.isinf(res.lam)
        assert res.witness_xi is None

    def test_zero_ratio_when_imaginary_escapes_the_kernel(self):
        # the pencil [[1, t], [t, 0]] dips below zero only like -t^2, so
        # the PSD slack inflates the located ratio to about sqrt(slack)
        A = np.diag([1.0, 0.0]) + 1j * np.array([[0.0, 1.0], [1.0, 0.0]])
        res = lambda_of(decompose(A))
        assert 0.0 <= res.lam <= 2e-5

    def test_negative_real_part_is_rejected(self):
        with pytest.raises(NonnegativityError):
            lambda_of(decompose(np.diag([1.0, -0.5]).astype(complex)))

    def test_witness_attains_the_ratio(self):
        A = np.eye(2) + 1j * np.diag([2.0, 0.0])
        res = lambda_of(decompose(A))
        xi = np.asarray(res.witness_xi)
        num = float(xi @ (np.eye(2) @ xi))
        den = abs(float(xi @ (np.diag([2.0, 0.0]) @ xi)))
        assert num == pytest.approx(res.lam * den, rel=1e-6)

    def test_matches_the_numpy_bisection_oracle(self):
        for A in seeded_matrices(count=60, seed=21):
            d = decompose(A)
            lam = lambda_of(d).lam
            ref = lam_oracle(d.S_r, d.S_i)
            if math.isinf(ref) or math.isinf(lam):
                assert math.isinf(ref) and math.isinf(lam)
            else:
                assert lam == pytest.approx(ref, abs=1e-8 * (1.0 + ref))


class TestPInterval:
    def test_unit_ratio_endpoints(self):
        itv = p_interval(1.0)
        assert itv.p_min == pytest.approx(4.0 - 2.0 * SQ2, abs=1e-9)
        assert itv.p_max == pytest.approx(4.0 + 2.0 * SQ2, abs=1e-9)

    def test_zero_ratio_pins_the_interval_to_two(self):
        itv = p_interval(0.0)
        assert itv.p_min == 2.0
        assert itv.p_max == 2.0
        assert itv.contains(2.0)
        assert not itv.contains(2.0000001)

    def test_infinite_ratio_is_the_open_full_range(self):
        itv = p_interval(math.inf)
        assert itv.is_full
        assert itv.contains(1.0000001)
        assert itv.contains(1e12)
        assert not itv.contains(1.0)

    def test_endpoints_are_conjugate(self):
        for lam in (0.1, 0.5, 1.0, 3.0, 17.0, 1e4):
            itv = p_interval(lam)
            assert abs(1.0 / itv.p_min + 1.0 / itv.p_max - 1.0) <= 1e-12

    def test_endpoints_are_monotone_in_the_ratio(self):
        maxes = [p_interval(lam).p_max for lam in (0.0, 0.5, 1.0, 2.0, 8.0)]
        assert maxes == sorted(maxes)
        mins = [p_interval(lam).p_min for lam in (0.0, 0.5, 1.0, 2.0, 8.0)]
        assert mins == sorted(mins, reverse=True)

    def test_closed_endpoints_are_inside(self):
        itv = p_interval(1.0)
        assert itv.contains(itv.p_min)
        assert itv.contains(itv.p_max)


def skew2(gamma):
    return np.eye(2) + 1j * gamma * np.array([[0.0, 1.0], [-1.0, 0.0]])


class TestQSufficiency:
    def test_skew_family_threshold(self):
        # with A = I + i gamma J the polynomial is nonnegative exactly
        # when gamma^2 <= 4 / (p p')
        zero = np.zeros(2)
        for p in (2.0, 4.0):
            pc = p / (p - 1.0)
            crit = 2.0 / math.sqrt(p * pc)
            below = q_sufficiency(skew2(0.98 * crit), zero, zero, 0.0, 0.0, 0.0, p)
            above = q_sufficiency(skew2(1.02 * crit), zero, zero, 0.0, 0.0, 0.0, p)
            assert below.ok
            assert not above.ok
            assert above.min_eig < 0.0
            assert above.min_value == -math.inf

    def test_boundary_case_is_accepted(self):
        zero = np.zeros(2)
        res = q_sufficiency(skew2(1.0), zero, zero, 0.0, 0.0, 0.0, 2.0)
        assert res.ok
        assert res.min_value == pytest.approx(0.0, abs=1e-12)

    def test_linear_part_escaping_the_range_is_unbounded(self):
        # one dimensional operator with imaginary drift at p = 4: the
        # eta block is degenerate in the direction the drift pushes
        A = np.array([[1.0 + 1j * math.sqrt(3.0)]])
        res = q_sufficiency(A, [2.0j], [0.0], -1.0, 0.0, 0.0, 4.0)
        assert not res.ok
        assert res.min_value == -math.inf
        assert res.linear_residual > 1e-8

    def test_real_drift_shifts_the_minimum(self):
        A = np.eye(1).astype(complex)
        res = q_sufficiency(A, [2.0], [0.0], 0.0, 0.0, 0.0, 2.0, alpha=1.0)
        assert not res.ok
        assert res.min_value == pytest.approx(-1.0, abs=1e-10)

    def test_divergence_weighting(self):
        A = np.eye(1).astype(complex)
        base = dict(b=[0.0], c=[0.0], a=0.0, div_c=0.0, p=2.0)
        lo = q_sufficiency(A, base["b"], base["c"], base["a"], 5.0, base["div_c"], base["p"], alpha=0.0)
        mid = q_sufficiency(A, base["b"], base["c"], base["a"], 5.0, base["div_c"], base["p"], alpha=1.0)
        hi = q_sufficiency(A, base["b"], base["c"], base["a"], 5.0, base["div_c"], base["p"], alpha=3.0)
        assert lo.ok and lo.min_value == pytest.approx(2.5)
        assert mid.ok and mid.min_value == pytest.approx(0.0, abs=1e-12)
        assert not hi.ok and hi.min_value == pytest.approx(-5.0)

    def test_negative_zero_order_term_helps(self):
        A = np.eye(2).astype(complex)
        good = q_sufficiency(A, np.zeros(2), np.zeros(2), -2.0, 0.0, 0.0, 3.0)
        bad = q_sufficiency(A, np.zeros(2), np.zeros(2), 2.0, 0.0, 0.0, 3.0)
        assert good.ok and good.min_value == pytest.approx(2.0)
        assert not bad.ok and bad.min_value == pytest.approx(-2.0)


class TestConstantVerdict:
    def test_endpoint_case_sits_at_equality(self):
        A = np.array([[1.0 + 1j * math.sqrt(3.0)]])
        v = constant_coeff_verdict(A, [2.0j], -1.0, 4.0)
        assert v.ok
        assert v.reason is None
        assert abs(v.margin) <= 1e-9
        assert abs(v.corollary_margin) <= 1e-9
        np.testing.assert_allclose(np.asarray(v.V), [-1.0], atol=1e-9)

    def test_small_zero_order_perturbation_flips_it(self):
        A = np.array([[1.0 + 1j * math.sqrt(3.0)]])
        v = constant_coeff_verdict(A, [2.0j], -1.0 + 0.01, 4.0)
        assert not v.ok
        assert v.reason == "zero_order_positive"
        assert v.margin == pytest.approx(0.01, abs=1e-9)

    def test_exponent_outside_the_band(self):
        A = np.array([[1.0 + 1j * math.sqrt(3.0)]])
        v = constant_coeff_verdict(A, [2.0j], -1.0, 12.0)
        assert not v.ok
        assert v.reason == "p_condition_failed"
        assert math.isnan(v.margin)
        assert v.V is None

    def test_inconsistent_drift_system(self):
        A = np.diag([1.0, 0.0]).astype(complex)
        v = constant_coeff_verdict(A, [0.0, 2.0j], -1.0, 2.0)
        assert not v.ok
        assert v.reason == "system_inconsistent"
        assert v.residual == pytest.approx(1.0, abs=1e-12)
        assert v.corollary_margin is None

    def test_corollary_margin_is_four_times_the_margin(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            n = int(rng.integers(1, 4))
            G = rng.normal(size=(n, n))
            A = G @ G.T + 0.5 * np.eye(n) + 1j * np.zeros((n, n))
            b = rng.normal(size=n) * 1j + rng.normal(size=n)
            a = complex(rng.normal(), rng.normal())
            v = constant_coeff_verdict(A, b, a, 2.0)
            assert v.corollary_margin is not None
            assert v.corollary_margin == pytest.approx(4.0 * v.margin, abs=1e-9 * (1.0 + abs(v.margin)))

    def test_skew_real_part_is_immaterial(self):
        A = np.array([[2.0, 0.3], [0.3, 1.0]]) + 0j
        K = np.array([[0.0, 0.7], [-0.7, 0.0]])
        b = [1.0j, -0.5j]
        va = constant_coeff_verdict(A, b, -1.0, 3.0)
        vb = constant_coeff_verdict(A + K, b, -1.0, 3.0)
        assert va.ok == vb.ok
        assert va.margin == pytest.approx(vb.margin, abs=1e-12)

    def test_solution_satisfies_the_halved_system(self):
        A = np.array([[2.0, 0.3], [0.3, 1.0]]) + 0j
        b = np.array([1.0j, -0.5j])
        v = constant_coeff_verdict(A, b, -10.0, 2.0)
        S_r = A.real
        np.testing.assert_allclose(S_r @ np.asarray(v.V), -0.5 * b.imag, atol=1e-10)
