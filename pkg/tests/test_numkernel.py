import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excepta import numkernel as nk


def poly_from_roots(roots, lead=1.0):
    acc = np.array([lead], dtype=complex)
    for r in roots:
        acc = np.convolve(acc, [-r, 1.0])
    return acc


class TestPolyRoots:
    def test_quadratic_factorable(self):
        roots = sorted(nk.poly_roots([-1.0, 0.0, 1.0]), key=lambda z: z.real)
        assert np.allclose(roots, [-1.0, 1.0], atol=1e-12)

    def test_biquadratic_against_quadratic_formula(self):
        # Oracle: w^4 - (a+b) w^2 + ab factors over w^2.
        a, b = 1.070711, 0.929289
        expected = sorted(
            [np.sqrt(a), -np.sqrt(a), np.sqrt(b), -np.sqrt(b)], key=lambda z: z.real
        )
        got = np.sort_complex(nk.poly_roots([a * b, 0.0, -(a + b), 0.0, 1.0]))
        assert multimax(got, expected) < 1e-10
        assert np.allclose(sorted(abs(r) for r in got), [0.963996, 0.963996, 1.034752, 1.034752], atol=1e-6)

    def test_triple_root_residual(self):
        c = poly_from_roots([1 + 2j] * 3)
        roots = nk.poly_roots(c)
        resid = np.max(np.abs(nk.poly_eval(c, roots))) / np.max(np.abs(c))
        assert resid < 1e-12
        assert np.allclose(roots, 1 + 2j, atol=1e-3)

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(
            st.complex_numbers(min_magnitude=0, max_magnitude=3, allow_nan=False, allow_infinity=False),
            min_size=2,
            max_size=8,
        )
    )
    def test_reconstruction(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        c[-1] = c[-1] if abs(c[-1]) > 0.1 else 1.0
        roots = nk.poly_roots(c)
        recon = poly_from_roots(roots, lead=c[-1])
        assert np.max(np.abs(recon - c)) / np.max(np.abs(c)) < 1e-8

    def test_deterministic(self):
        c = [0.3 - 1j, 2.0, -0.5j, 1.0]
        r1 = nk.poly_roots(c)
        r2 = nk.poly_roots(c)
        assert np.array_equal(r1, r2)

    def test_rejects_degree_zero(self):
        with pytest.raises(ValueError):
            nk.poly_roots([1.0])

    def test_rejects_zero_leading(self):
        with pytest.raises(ValueError):
            nk.poly_roots([1.0, 2.0, 0.0])


def multimax(a, b):
    return float(np.max(np.abs(np.sort_complex(np.asarray(a)) - np.sort_complex(np.asarray(b)))))


class TestEigDense:
    def test_identity_degenerate_orthonormal(self):
        d = nk.eig_dense(np.eye(2))
        assert np.allclose(d.values, 1.0)
        assert d.near_defective == ()
        overlap = abs(np.vdot(d.vectors[:, 0], d.vectors[:, 1]))
        assert overlap < 1e-9

    def test_diagonal(self):
        d = nk.eig_dense(np.diag([3.0, -1j]))
        assert multimax(d.values, [3.0, -1j]) < 1e-12
        for i in range(2):
            assert np.abs(d.vectors[:, i]).max() == pytest.approx(1.0, abs=1e-12)

    def test_jordan_block_flagged(self):
        d = nk.eig_dense(np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert len(d.near_defective) == 1

    def test_trace_det_property(self):
        rng = np.random.default_rng(2)
        for _ in range(60):
            m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            d = nk.eig_dense(m)
            assert abs(d.values.sum() - np.trace(m)) / abs(np.trace(m)) < 1e-8
            assert abs(np.prod(d.values) - np.linalg.det(m)) / abs(np.linalg.det(m)) < 1e-8

    def test_residual_contract(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(6, 6))
        d = nk.eig_dense(m)
        norm = np.linalg.norm(m, 2)
        for i in range(6):
            r = np.linalg.norm(m @ d.vectors[:, i] - d.values[i] * d.vectors[:, i])
            assert r < 1e-9 * norm

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            nk.eig_dense(np.eye(65))


class TestSolveLinear:
    def test_identity(self):
        b = np.array([1.0, 2.0, 3.0])
        assert np.allclose(nk.solve_linear(np.eye(3), b), b)

    def test_diagonal(self):
        assert np.allclose(nk.solve_linear(np.diag([2.0, 4.0]), [2.0, 8.0]), [1.0, 2.0])

    def test_recovers_constructed_solution(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(4, 4)) + np.eye(4) * 3
        x0 = rng.normal(size=4) + 1j * rng.normal(size=4)
        x = nk.solve_linear(a, a @ x0)
        assert np.abs(x - x0).max() < 1e-12

    def test_singular_raises_with_rank(self):
        a = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(nk.SingularMatrixError) as err:
            nk.solve_linear(a, [1.0, 1.0])
        assert err.value.rank == 1


class TestCharPoly:
    def test_known_diagonal(self):
        # (w-1)(w-2) = 2 - 3w + w^2
        assert np.allclose(nk.char_poly(np.diag([1.0, 2.0])), [2.0, -3.0, 1.0])

    def test_roots_match_eigvals(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        roots = nk.poly_roots(nk.char_poly(m))
        assert multimax(roots, np.linalg.eigvals(m)) < 1e-8


class TestHelpers:
    def test_gauge_fix_first_component_real_positive(self):
        v = np.array([0.0, 1j, 1.0])
        g = nk.gauge_fix(v)
        assert g[1].imag == pytest.approx(0.0, abs=1e-15)
        assert g[1].real > 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=11))
    def test_gauge_fix_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        g = nk.gauge_fix(v)
        assert np.abs(nk.gauge_fix(g) - g).max() < 1e-14

    def test_as_matrix_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            nk.as_matrix([[1.0, np.inf], [0.0, 1.0]])


def test_eig_dense_on_companion_form():
    # Companion form of the two-oscillator problem at gamma = kappa = 0,
    # chi = 0.1, dchi = -0.05: K eigenvalues kbar +- sqrt(chi (chi + dchi)),
    # frequencies their square roots.
    k = np.array([[1.0, -0.1], [-0.05, 1.0]])
    h = 1j * np.block([[np.zeros((2, 2)), np.eye(2)], [-k, np.zeros((2, 2))]])
    d = nk.eig_dense(h)
    expected = sorted(
        [np.sqrt(1 + np.sqrt(0.005)), np.sqrt(1 - np.sqrt(0.005))], key=abs
    )
    expected = [-expected[1], -expected[0], expected[0], expected[1]]
    assert multimax(d.values, expected) < 1e-10
