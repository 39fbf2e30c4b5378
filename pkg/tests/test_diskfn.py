import numpy as np
import numpy.polynomial.polynomial as npp
import pytest

from oplab.diskfn import (
    BlaschkeProduct,
    RationalFunction,
    blaschke_eval,
    blaschke_log_modulus,
    divided_difference,
    h2_inner,
    h2_norm,
    pseudohyperbolic,
)
from oplab.errors import (
    ConvergenceError,
    DegenerateInputError,
    InvariantViolation,
    PoleLocationError,
)


class TestBlaschkeEval:
    def test_zero_of_own_factor(self):
        b = BlaschkeProduct([0.5])
        assert b(0.5) == 0.0

    def test_inner_on_boundary(self):
        b = BlaschkeProduct([0.5])
        for t in (0.0, 1.0, 2.5, np.pi):
            assert abs(abs(b(np.exp(1j * t))) - 1.0) < 1e-12

    def test_direct_formula_at_origin(self):
        # (|lam|/lam)(lam - 0)/(1 - 0) = |lam|
        b = BlaschkeProduct([0.5])
        assert abs(b(0.0) - 0.5) < 1e-15

    def test_factor_at_zero_is_z(self):
        b = BlaschkeProduct([0.0])
        z = 0.3 + 0.2j
        assert b(z) == z

    def test_vectorized_matches_scalar(self):
        b = BlaschkeProduct([0.5, -0.2 + 0.3j, 0.0])
        zs = np.array([0.1, 0.2 + 0.1j, -0.4j])
        vals = b(zs)
        for z, v in zip(zs, vals):
            assert abs(b(complex(z)) - v) < 1e-15

    def test_boundary_zero_rejected(self):
        with pytest.raises(InvariantViolation):
            BlaschkeProduct([1.0 - 1e-9])

    def test_duplicate_zeros_rejected(self):
        with pytest.raises(InvariantViolation):
            BlaschkeProduct([0.5, 0.5])

    def test_pole_proximity_rejected(self):
        b = BlaschkeProduct([0.5])
        with pytest.raises(DegenerateInputError):
            blaschke_eval(b, 2.0)  # pole of the factor at 1/conj(0.5)

    def test_log_modulus_matches_direct(self):
        rng = np.random.default_rng(1)
        zeros = 0.8 * (rng.standard_normal(6) + 1j * rng.standard_normal(6)) / 3
        b = BlaschkeProduct(zeros)
        z = 0.3 - 0.55j
        assert abs(blaschke_log_modulus(b, z) - np.log(abs(b(z)))) < 1e-12

    def test_boundary_modulus_many_factors(self):
        # |B| = 1 on the circle for every finite product (module invariant).
        rng = np.random.default_rng(7)
        for trial in range(5):
            k = rng.integers(1, 9)
            zeros = []
            while len(zeros) < k:
                z = complex(*rng.uniform(-0.7, 0.7, 2))
                if abs(z) < 0.95 and all(abs(z - w) > 1e-3 for w in zeros):
                    zeros.append(z)
            b = BlaschkeProduct(zeros)
            ts = rng.uniform(0, 2 * np.pi, 16)
            assert np.max(np.abs(np.abs(b(np.exp(1j * ts))) - 1.0)) < 1e-10


class TestPseudohyperbolic:
    def test_metric_at_origin(self):
        assert pseudohyperbolic(0.0, 0.3 + 0.4j) == abs(0.3 + 0.4j)

    def test_coincidence(self):
        assert pseudohyperbolic(0.25 - 0.1j, 0.25 - 0.1j) == 0.0

    def test_hand_value(self):
        # |0.5 - 0.75| / |1 - 0.75 * 0.5| = 0.25 / 0.625
        assert abs(pseudohyperbolic(0.5, 0.75) - 0.4) < 1e-15

    def test_symmetry_and_triangle_bound(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            pts = [complex(*rng.uniform(-0.65, 0.65, 2)) for _ in range(3)]
            lam, mu, nu = pts
            ab = pseudohyperbolic(lam, mu)
            assert abs(ab - pseudohyperbolic(mu, lam)) < 1e-15
            bc = pseudohyperbolic(mu, nu)
            ac = pseudohyperbolic(lam, nu)
            assert ac <= (ab + bc) / (1.0 + ab * bc) + 1e-12


class TestRationalFunction:
    def test_identity_element(self):
        f = RationalFunction([1.0, 2.0], [1.0, -0.5])
        g = f * RationalFunction([1.0])
        z = np.exp(1j * np.linspace(0, 2 * np.pi, 17))
        assert np.max(np.abs(f(z) - g(z))) < 1e-14

    def test_additive_inverse(self):
        f = RationalFunction([1.0, 2.0, 0.5j], [1.0, 0.0, -0.25])
        s = f + (-f)
        assert s.is_zero()

    def test_product_zeros(self):
        b = BlaschkeProduct([0.5]).as_rational() * BlaschkeProduct([0.25]).as_rational()
        roots = sorted(npp.polyroots(b.num).real)
        assert np.allclose(roots, [0.25, 0.5], atol=1e-12)

    def test_pole_in_disk_rejected(self):
        with pytest.raises(PoleLocationError):
            RationalFunction([1.0], [1.0, -2.0])  # pole at 0.5

    def test_common_root_cancellation(self):
        # (z - 2)(z - 0.3) / (z - 2) -> z - 0.3 after cancellation
        num = npp.polyfromroots([2.0, 0.3])
        den = npp.polyfromroots([2.0])
        f = RationalFunction(num, den)
        assert f.degree() == (1, 0)
        assert abs(f(0.3)) < 1e-10

    def test_derivative_quotient_rule(self):
        f = RationalFunction([0.0, 1.0, 1.0], [1.0, -0.5])  # (z + z^2)/(1 - z/2)
        df = f.derivative()
        z = 0.37 - 0.11j
        h = 1e-7
        fd = (f(z + h) - f(z - h)) / (2 * h)
        assert abs(df(z) - fd) < 1e-6

    def _random_rational(self, rng):
        nz = rng.integers(0, 3)
        dz = rng.integers(0, 3)
        num_roots = [complex(*rng.uniform(-0.6, 0.6, 2)) for _ in range(nz)]
        den_roots = [
            (1.5 + rng.uniform(0, 2)) * np.exp(2j * np.pi * rng.uniform())
            for _ in range(dz)
        ]
        num = npp.polyfromroots(num_roots) if num_roots else np.array([1.0 + 0j])
        den = npp.polyfromroots(den_roots) if den_roots else np.array([1.0 + 0j])
        return RationalFunction(rng.uniform(0.5, 2.0) * num, den)

    def test_algebra_commutative_associative(self):
        rng = np.random.default_rng(23)
        z = 0.9 * np.exp(1j * np.linspace(0, 2 * np.pi, 13))
        for _ in range(20):
            f, g, h = (self._random_rational(rng) for _ in range(3))
            for op in (lambda a, b: a + b, lambda a, b: a * b):
                left = op(op(f, g), h)(z)
                right = op(f, op(g, h))(z)
                comm = op(g, f)(z)
                scale = max(1.0, np.max(np.abs(left)))
                assert np.max(np.abs(left - right)) < 1e-10 * scale
                assert np.max(np.abs(op(f, g)(z) - comm)) < 1e-10 * scale


class TestDividedDifference:
    def test_square_distinct(self):
        f = RationalFunction([0.0, 0.0, 1.0])  # z^2
        assert abs(divided_difference(f, 0.3, 0.1) - 0.4) < 1e-14

    def test_square_confluent(self):
        f = RationalFunction([0.0, 0.0, 1.0])
        assert abs(divided_difference(f, 0.3, 0.3) - 0.6) < 1e-14

    def test_blaschke_derivative_fd_oracle(self):
        b = BlaschkeProduct([0.5]).as_rational()
        # finite differences at step 1e-6
        h = 1e-6
        fd = (b(0.5 + h) - b(0.5 - h)) / (2 * h)
        val = divided_difference(b, 0.5, 0.5)
        assert abs(val - fd) < 1e-8
        assert abs(val - (-1.0 / 0.75)) < 1e-12

    def test_branch_continuity(self):
        # |lam - mu| = 1e-7: quotient and derivative branches agree to 1e-5.
        f = BlaschkeProduct([0.3, -0.4j]).as_rational()
        lam = 0.21 + 0.05j
        mu = lam + 1e-7
        quotient = (f(lam) - f(mu)) / (lam - mu)
        assert abs(quotient - divided_difference(f, lam, lam)) < 1e-5


class TestH2Inner:
    def test_constant(self):
        one = RationalFunction([1.0])
        assert abs(h2_inner(one, one) - 1.0) < 1e-14

    def test_cauchy_kernel_geometric_series(self):
        # <k, k> = sum 4^{-j} = 4/3 for k = 1/(1 - z/2)
        k = RationalFunction([1.0], [1.0, -0.5])
        expected = sum(4.0**-j for j in range(60))
        assert abs(h2_inner(k, k) - expected) < 1e-12

    def test_monomial_orthogonality(self):
        one = RationalFunction([1.0])
        z = RationalFunction([0.0, 1.0])
        assert abs(h2_inner(one, z)) < 1e-14

    def test_norm_helper(self):
        k = RationalFunction([1.0], [1.0, -0.5])
        assert abs(h2_norm(k) - np.sqrt(4.0 / 3.0)) < 1e-12

    def test_point_count_validation(self):
        one = RationalFunction([1.0])
        with pytest.raises(InvariantViolation):
            h2_inner(one, one, 300)
        with pytest.raises(InvariantViolation):
            h2_inner(one, one, 128)

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("OPLAB_QUAD_POINTS", "512")
        k = RationalFunction([1.0], [1.0, -0.5])
        assert abs(h2_inner(k, k) - 4.0 / 3.0) < 1e-10
        monkeypatch.setenv("OPLAB_QUAD_POINTS", "100")
        with pytest.raises(InvariantViolation):
            h2_inner(k, k)
