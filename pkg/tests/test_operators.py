import numpy as np
import numpy.polynomial.polynomial as npp
import pytest

from oplab.diskfn import BlaschkeProduct, blaschke_eval
from oplab.errors import (
    DimensionError,
    DivergenceError,
    InvariantViolation,
    NotAContractionError,
    SpectralRadiusError,
)
from oplab.operators import (
    BlockOperator,
    as_operator,
    assemble_blocks,
    blaschke_of_operator,
    bound_report,
    load_matrix,
    load_matrix_json,
    permute_R0,
    poly_bound_lower,
    poly_of_operator,
    power_bound,
    r0_blocks,
    save_matrix,
    save_matrix_json,
    schaffer_dilation_trunc,
    spectral_norm,
    tadmor_ritt,
)


def random_contraction(rng, n, norm=0.8):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return norm * g / np.linalg.norm(g, 2)


class TestBlaschkeCalculus:
    def test_annihilation_on_spectrum(self):
        zeros = [0.2, 0.5 + 0.1j, -0.3j]
        b = BlaschkeProduct(zeros)
        t = np.diag(zeros)
        assert np.max(np.abs(blaschke_of_operator(b, t))) < 1e-10

    def test_zero_operator(self):
        b = BlaschkeProduct([0.5])
        out = blaschke_of_operator(b, np.zeros((3, 3)))
        assert np.allclose(out, 0.5 * np.eye(3), atol=1e-15)

    def test_scalar_oracle_on_diagonal(self):
        b = BlaschkeProduct([0.5])
        out = blaschke_of_operator(b, np.diag([0.3]))
        assert abs(out[0, 0] - blaschke_eval(b, 0.3)) < 1e-14

    def test_diagonal_matches_scalar_eval(self):
        rng = np.random.default_rng(2)
        lams = [complex(*rng.uniform(-0.5, 0.5, 2)) for _ in range(4)]
        b = BlaschkeProduct([0.4, -0.2 + 0.3j])
        t = np.diag(lams)
        out = blaschke_of_operator(b, t)
        expected = np.diag([blaschke_eval(b, lam) for lam in lams])
        assert np.max(np.abs(out - expected)) < 1e-10

    def test_factor_order_immaterial(self):
        rng = np.random.default_rng(4)
        t = random_contraction(rng, 6, 0.7)
        zeros = [0.3, -0.2 + 0.4j, 0.1j, 0.55]
        fwd = blaschke_of_operator(BlaschkeProduct(zeros), t)
        rev = blaschke_of_operator(BlaschkeProduct(zeros[::-1]), t)
        assert np.linalg.norm(fwd - rev, 2) < 1e-9

    def test_matches_poly_for_zero_at_origin(self):
        rng = np.random.default_rng(6)
        t = random_contraction(rng, 5, 0.9)
        out = blaschke_of_operator(BlaschkeProduct([0.0]), t)
        assert np.array_equal(out, poly_of_operator([0.0, 1.0], t))

    def test_radius_precondition(self):
        with pytest.raises(SpectralRadiusError):
            blaschke_of_operator(BlaschkeProduct([0.5]), np.diag([1.0]))


class TestPolyOfOperator:
    def test_constant_and_identity(self):
        t = np.array([[0.1, 0.2], [0.0, 0.3]])
        assert np.array_equal(poly_of_operator([1.0], t), np.eye(2))
        assert np.array_equal(poly_of_operator([0.0, 1.0], t), t)

    def test_minimal_polynomial_annihilates(self):
        rng = np.random.default_rng(8)
        lams = rng.uniform(-0.8, 0.8, 5) + 1j * rng.uniform(-0.5, 0.5, 5)
        s = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        t = s @ np.diag(lams) @ np.linalg.inv(s)
        coeffs = npp.polyfromroots(lams)
        out = poly_of_operator(coeffs, t)
        bound = 1e-9 * np.linalg.norm(t, 2) ** 5 * np.linalg.cond(s)
        assert np.linalg.norm(out, 2) < bound


class TestPowerBound:
    def test_unitary_diagonal(self):
        t = np.diag(np.exp(1j * np.array([0.3, 1.1, 2.0])))
        assert abs(power_bound(t, 32) - 1.0) < 1e-12

    def test_nilpotent_jordan(self):
        j2 = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert abs(power_bound(j2, 8) - 1.0) < 1e-12

    def test_transient_growth(self):
        t = np.array([[0.9, 5.0], [0.0, 0.9]])
        val = power_bound(t, 128)
        assert val > 5.0
        # the max is attained at an interior power, not at n = 0 or n_max
        assert val > spectral_norm(np.linalg.matrix_power(t, 128))

    def test_divergence_flag(self):
        t = np.array([[2.0]])
        with pytest.raises(DivergenceError) as info:
            power_bound(t, 64)
        assert info.value.step is not None


class TestPolyBoundLower:
    def test_unitary_diagonal_von_neumann(self):
        t = np.diag(np.exp(1j * np.array([0.1, 0.7, 2.3, 4.0])))
        est = poly_bound_lower(t, degree=8, trials=6, seed=0)
        assert 1.0 - 1e-6 <= est <= 1.0 + 1e-12

    def test_zero_operator(self):
        est = poly_bound_lower(np.zeros((3, 3)), degree=6, trials=4, seed=1)
        assert abs(est - 1.0) < 1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        t = random_contraction(rng, 4)
        a = poly_bound_lower(t, degree=6, trials=4, seed=42)
        b = poly_bound_lower(t, degree=6, trials=4, seed=42)
        assert a == b


class TestTadmorRitt:
    def test_zero_operator_approaches_two(self):
        # scalar oracle: value is max over grid of |z-1|/|z|
        radii = (1.001, 1.000001)
        angles = 256
        val = tadmor_ritt(np.zeros((1, 1)), radii=radii, angles=angles)
        zs = np.concatenate(
            [r * np.exp(2j * np.pi * np.arange(angles) / angles) for r in radii]
        )
        oracle = np.max(np.abs(zs - 1) / np.abs(zs))
        assert abs(val - oracle) < 1e-12
        assert abs(val - 2.0) < 1e-2

    def test_scalar_resolvent_formula(self):
        val = tadmor_ritt(np.diag([0.5]), radii=(1.1,), angles=128)
        zs = 1.1 * np.exp(2j * np.pi * np.arange(128) / 128)
        oracle = np.max(np.abs(zs - 1) / np.abs(zs - 0.5))
        assert abs(val - oracle) < 1e-12

    def test_grid_refinement_stability(self):
        t = np.diag([0.5])
        coarse = tadmor_ritt(t, angles=256)
        fine = tadmor_ritt(t, angles=1024)
        assert abs(coarse - fine) < 1e-2 * fine

    def test_eigenvalue_on_grid_skipped(self):
        t = np.diag([1.1])
        val, skipped = tadmor_ritt(
            t, radii=(1.1,), angles=4, with_report=True
        )
        assert len(skipped) == 1
        assert np.isfinite(val)

    def test_radius_validation(self):
        with pytest.raises(InvariantViolation):
            tadmor_ritt(np.zeros((1, 1)), radii=(0.9,))


class TestSchafferDilation:
    def test_scalar_zero_shift(self):
        v = assemble_blocks(schaffer_dilation_trunc(np.zeros((1, 1)), 3))
        expected = np.zeros((4, 4))
        expected[1, 0] = expected[2, 1] = expected[3, 2] = 1.0
        assert np.array_equal(v, expected)

    def test_unitary_zero_defect(self):
        u = np.diag(np.exp(1j * np.array([0.4, 1.9])))
        blocks = schaffer_dilation_trunc(u, 2)
        assert np.max(np.abs(blocks.block(1, 0))) == 0.0
        assert np.array_equal(blocks.block(0, 0), u)

    def test_dilation_identity(self):
        rng = np.random.default_rng(12)
        t1 = random_contraction(rng, 2, 0.95)
        m = 8
        v = assemble_blocks(schaffer_dilation_trunc(t1, m))
        vk = np.eye(v.shape[0], dtype=complex)
        tk = np.eye(2, dtype=complex)
        for _ in range(m):
            vk = vk @ v
            tk = tk @ t1
            assert np.linalg.norm(vk[:2, :2] - tk, 2) < 1e-10

    def test_truncated_isometry_power_bound(self):
        rng = np.random.default_rng(13)
        t1 = random_contraction(rng, 3, 0.9)
        m = 6
        v = assemble_blocks(schaffer_dilation_trunc(t1, m))
        assert abs(power_bound(v, m) - 1.0) < 1e-10
        # V^*V = I except on the final defect slot
        gram = v.conj().T @ v
        d = 3
        assert np.linalg.norm(gram[: -d, : -d] - np.eye(v.shape[0] - d), 2) < 1e-12

    def test_not_a_contraction(self):
        with pytest.raises(NotAContractionError):
            schaffer_dilation_trunc(np.diag([1.5]), 2)


class TestBlocksAndPermutation:
    def test_all_zero_blocks(self):
        spec = BlockOperator([[np.zeros((2, 2)), None], [None, np.zeros((3, 3))]])
        assert np.array_equal(spec.assemble(), np.zeros((5, 5)))

    def test_nonconforming_rejected(self):
        with pytest.raises(DimensionError):
            BlockOperator([[np.zeros((2, 2)), np.zeros((3, 3))]])

    def test_direct_sum_when_uncoupled(self):
        t0 = np.diag([0.1, 0.2])
        v1 = np.diag([1.0j])
        t1 = np.diag([0.5])
        r0 = r0_blocks(t0, v1, np.zeros((1, 1)), np.zeros((2, 1)), t1)
        out = permute_R0(r0)
        assert np.array_equal(out.block(0, 0), v1)
        r = out.block(1, 1)
        assert np.array_equal(r[:2, :2], t0)
        assert np.array_equal(r[2:, 2:], t1)
        assert np.max(np.abs(out.block(0, 1))) == 0.0

    def test_random_r0_zero_pattern(self):
        rng = np.random.default_rng(15)
        d0, k1, h1 = 3, 2, 4
        t0 = random_contraction(rng, d0)
        v1 = random_contraction(rng, k1)
        t1 = random_contraction(rng, h1)
        k = rng.standard_normal((k1, h1)) + 1j * rng.standard_normal((k1, h1))
        a = rng.standard_normal((d0, h1)) + 1j * rng.standard_normal((d0, h1))
        out = permute_R0(r0_blocks(t0, v1, k, a, t1))
        m = out.assemble()
        # lower-left block of the 2x2 form is exactly zero
        assert np.all(m[k1:, :k1] == 0.0)
        r = out.block(1, 1)
        assert np.array_equal(r[:d0, :d0], t0)
        assert np.array_equal(r[:d0, d0:], a)
        assert np.array_equal(r[d0:, d0:], t1)
        assert np.all(r[d0:, :d0] == 0.0)
        top = out.block(0, 1)
        assert np.all(top[:, :d0] == 0.0)
        assert np.array_equal(top[:, d0:], k)

    def test_power_identity_of_r0(self):
        # powers of the 3x3 form keep the lower-triangular block profile,
        # so power bounds stay finite whenever the pieces are contractive
        rng = np.random.default_rng(16)
        t0 = random_contraction(rng, 2, 0.9)
        v1 = np.diag(np.exp(1j * np.array([0.2, 1.4])))
        t1 = random_contraction(rng, 2, 0.9)
        k = 0.5 * rng.standard_normal((2, 2))
        a = 0.5 * rng.standard_normal((2, 2))
        r0 = r0_blocks(t0, v1, k, a, t1).assemble()
        assert power_bound(r0, 200) < 50.0


class TestBoundReport:
    def test_unitary_reference_values(self):
        u = np.diag(np.exp(1j * np.array([0.5, 2.2])))
        rep = bound_report(u, n_max=16, degree=6, trials=4, seed=0, angles=128)
        assert abs(rep.power_bound - 1.0) < 1e-12
        assert rep.poly_lower <= 1.0 + 1e-12
        assert np.isfinite(rep.tadmor_ritt)
        assert rep.to_json()["horizon"] == 16


class TestMatrixIO:
    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(21)
        a = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        path = tmp_path / "m.bin"
        save_matrix(path, a)
        assert path.stat().st_size == 16 + 3 * 5 * 16
        b = load_matrix(path)
        assert np.array_equal(a, b)

    def test_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(22)
        a = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        path = tmp_path / "m.json"
        save_matrix_json(path, a)
        b = load_matrix_json(path)
        assert np.array_equal(a, b)

    def test_operator_validation(self):
        with pytest.raises(DimensionError):
            as_operator(np.zeros((2, 3)))
        with pytest.raises(InvariantViolation):
            as_operator(np.array([[np.inf, 0], [0, 1]]))
