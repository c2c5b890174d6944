import math
import time

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from coinsim.objective import (
    ROUNDED_COEFFS, ObjectiveParams, SizingError, convexity_table, energy_inter, energy_intra,
    energy_total, enumerate_argmin, exact_coefficients, minimize, second_derivative,
    second_derivative_rounded, verify_convexity, verify_unimodal,
)

CANON = dict(N=6000, A=1.0, p1=0.25, p2=0.22)


def symbolic_coefficients(p1, p2):
    """Differentiate the uniform closed form twice and read off each monomial's coefficient."""
    k, N = sp.symbols("k N", positive=True)
    P1, P2 = sp.Rational(str(p1)), sp.Rational(str(p2))
    E = P1 * (N ** sp.Rational(5, 2) * k ** sp.Rational(-3, 2) - N ** sp.Rational(3, 2) * k ** sp.Rational(-1, 2)) \
        + P2 * N**2 * (k ** sp.Rational(1, 2) - k ** sp.Rational(-1, 2))
    d2 = sp.expand(sp.diff(E, k, 2))
    terms = sp.Add.make_args(d2)

    def coeff(npow, kpow):
        mono = N**npow * k**kpow
        return float(-sum(t / mono for t in terms if sp.simplify(t / mono).free_symbols == set()))

    return {
        "n52_k72": -coeff(sp.Rational(5, 2), sp.Rational(-7, 2)),
        "n2_k32": coeff(2, sp.Rational(-3, 2)),
        "n2_k52": coeff(2, sp.Rational(-5, 2)),
        "n32_k52": coeff(sp.Rational(3, 2), sp.Rational(-5, 2)),
    }


class TestEnergyTerms:
    def test_intra_trivial(self):
        assert energy_intra(1, ObjectiveParams(2, 1, 1, 0, 1, 1)) == pytest.approx(2 * math.sqrt(2))

    def test_intra_zero(self):
        p = ObjectiveParams(6000, 1, 0, 0.22)
        assert all(energy_intra(k, p) == 0 for k in range(1, 50))

    def test_intra_canonical(self):
        p = ObjectiveParams(**{**CANON, "p2": 0})
        hand = 0.25 * (6000**2.5 * 16**-1.5 - 6000**1.5 * 16**-0.5)
        assert energy_intra(16, p) == pytest.approx(hand, rel=1e-12)
        assert energy_intra(16, p) == pytest.approx(1.089e7, rel=5e-3)

    def test_inter_k1(self):
        assert energy_inter(1, ObjectiveParams(**CANON)) == 0

    def test_inter_canonical(self):
        assert energy_inter(16, ObjectiveParams(**CANON)) == pytest.approx(0.22 * 36e6 * 3.75, rel=1e-12)
        assert energy_inter(16, ObjectiveParams(**CANON)) == pytest.approx(2.97e7, rel=5e-3)

    def test_inter_one_node_per_ce(self):
        assert energy_inter(4, ObjectiveParams(4, 1, 0, 1, 1, 4)) == pytest.approx(24)

    def test_total(self):
        intra, inter, total = energy_total(16, ObjectiveParams(**CANON))
        assert total == intra + inter
        assert total == pytest.approx(4.06e7, rel=5e-3)

    def test_nonuniform_matches_uniform(self):
        p = ObjectiveParams(**CANON)
        k = 8
        q = ObjectiveParams(6000, 1, np.full(k, 0.25), np.full((k, k), 0.22) * (1 - np.eye(k)))
        assert energy_total(k, q)[2] == pytest.approx(energy_total(k, p)[2], rel=1e-12)

    def test_callable_probabilities(self):
        p = ObjectiveParams(6000, 1, lambda k: np.full(k, 0.25), lambda k: 0.22)
        assert energy_total(12, p)[2] == pytest.approx(energy_total(12, ObjectiveParams(**CANON))[2])

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            energy_intra(4, ObjectiveParams(6000, 1, [0.1, 0.2], 0.1))

    @given(st.floats(0.5, 20), st.floats(0.01, 1), st.floats(0.01, 1), st.integers(2, 5000))
    def test_scaling_in_A(self, c, p1, p2, N):
        p = ObjectiveParams(N, 1.0, p1, p2)
        q = ObjectiveParams(N, c, p1, p2)
        for k in (1, 4, 17):
            assert energy_total(k, q)[2] == pytest.approx(c * energy_total(k, p)[2], rel=1e-9)

    @given(st.integers(2, 10**5), st.floats(1e-4, 1), st.floats(1e-4, 1), st.data())
    def test_positive_up_to_N(self, N, p1, p2, data):
        k = data.draw(st.integers(1, N))
        assert energy_total(k, ObjectiveParams(N, 1, p1, p2, 1, 1))[2] > 0


class TestSecondDerivative:
    def test_exact_coefficients_match_symbolic(self):
        sym = symbolic_coefficients(0.25, 0.22)
        ex = exact_coefficients(0.25, 0.22)
        for key in ex:
            assert sym[key] == pytest.approx(ex[key], rel=1e-12)

    def test_rounded_close_to_exact(self):
        ex = exact_coefficients(0.25, 0.22)
        for key, v in ROUNDED_COEFFS.items():
            assert abs(ex[key] - v) <= 0.01

    @pytest.mark.parametrize("k", [4, 10, 16])
    def test_rounded_positive_small_k(self, k):
        assert second_derivative_rounded(k, 6000) > 0

    def test_rounded_sign_at_k100(self):
        # the rounded expression turns negative once k exceeds roughly 4 N^(1/4)
        assert second_derivative_rounded(100, 6000) < 0
        assert second_derivative_rounded(30, 6000) > 0

    def test_finite_differences_agree(self):
        for row in convexity_table(ObjectiveParams(**CANON)):
            assert row["agree"], row

    @pytest.mark.parametrize("N", [2000, 6000, 19717, 65755])
    def test_analytic_vs_fd_all_N(self, N):
        p = ObjectiveParams(N, 1.0, 0.25, 0.22)
        for k in range(4, 101):
            a = second_derivative(k, p)
            h = 1e-3 * k
            fd = (energy_total(k + h, p)[2] - 2 * energy_total(k, p)[2] + energy_total(k - h, p)[2]) / h**2
            assert abs(fd - a) / abs(a) < 1e-3


class TestConvexity:
    def test_restricted_range_verifies(self):
        assert verify_convexity(ObjectiveParams(6000, 1, 0.25, 0.22, 4, 30))

    def test_full_range_does_not(self):
        assert not verify_convexity(ObjectiveParams(**CANON))

    def test_small_N_runs(self):
        verify_convexity(ObjectiveParams(10, 1, 0.25, 0.22, 4, 10))

    @pytest.mark.parametrize("N", [2000, 6000, 19717, 65755])
    def test_unimodal(self, N):
        assert verify_unimodal(ObjectiveParams(N, 1, 0.25, 0.22))


class TestMinimize:
    def test_canonical_k16(self):
        r = minimize(ObjectiveParams(**CANON))
        k_enum, curve = enumerate_argmin(ObjectiveParams(**CANON))
        assert r.k_star == 16 == k_enum
        assert len(r.energy_curve) == 97
        assert all(r.energy_at_k_star <= c[3] for c in r.energy_curve)

    def test_no_inter(self):
        assert minimize(ObjectiveParams(6000, 1, 0.25, 0.0)).k_star == 100

    def test_no_intra(self):
        assert minimize(ObjectiveParams(6000, 1, 0.0, 0.22)).k_star == 4

    def test_nonuniform_uses_enumeration(self):
        p = ObjectiveParams(6000, 1, lambda k: np.full(k, 0.25), lambda k: 0.22)
        r = minimize(p)
        assert r.method == "enumeration" and r.k_star == 16

    def test_overflow_is_sizing_error(self):
        with pytest.raises(SizingError):
            minimize(ObjectiveParams(1e200, 1, 0.25, 0.22))

    def test_fast(self):
        p = ObjectiveParams(**CANON)
        t = time.perf_counter()
        minimize(p)
        assert time.perf_counter() - t < 0.1

    @given(st.floats(2000, 70000), st.floats(1e-3, 1), st.floats(1e-3, 1))
    @settings(max_examples=200, deadline=None)
    def test_matches_enumeration(self, N, p1, p2):
        p = ObjectiveParams(N, 1, p1, p2)
        r = minimize(p)
        k_enum, curve = enumerate_argmin(p)
        e = {c[0]: c[3] for c in curve}
        # equal argmin, or an exact floating tie
        assert r.k_star == k_enum or e[r.k_star] == e[k_enum]

    @given(st.floats(2000, 70000), st.floats(1e-3, 1), st.floats(1e-3, 1), st.floats(1e-3, 1e3))
    @settings(max_examples=100, deadline=None)
    def test_argmin_invariant_to_scaling(self, N, p1, p2, c):
        a = minimize(ObjectiveParams(N, 1, p1, p2)).k_star
        assert minimize(ObjectiveParams(N, c, p1, p2)).k_star == a
        if p1 * c <= 1 and p2 * c <= 1:
            k2, curve = enumerate_argmin(ObjectiveParams(N, 1, p1 * c, p2 * c))
            e = {x[0]: x[3] for x in curve}
            assert k2 == a or math.isclose(e[k2], e[a], rel_tol=1e-12)
