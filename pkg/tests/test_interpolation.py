import numpy as np
import pytest

from oplab.diskfn import BlaschkeProduct, pseudohyperbolic
from oplab.errors import DegenerateInputError, InvariantViolation
from oplab.interpolation import (
    PickData,
    carleson_delta,
    default_disk_grid,
    generalized_carleson_ratio,
    np_interpolate,
    pick_feasible,
)


def brute_force_delta(zeros):
    vals = []
    for n, lam in enumerate(zeros):
        prod = 1.0
        for k, mu in enumerate(zeros):
            if k != n:
                prod *= pseudohyperbolic(mu, lam)
        vals.append(prod)
    return min(vals), int(np.argmin(vals))


class TestCarlesonDelta:
    def test_single_zero_empty_product(self):
        rep = carleson_delta([0.5])
        assert rep.delta == 1.0 and rep.argmin == 0 and rep.values == (1.0,)

    def test_three_zero_hand_value(self):
        rep = carleson_delta([0.5, 0.75, 0.875])
        # 0.4 * (0.125 / 0.34375) at the middle zero
        assert abs(rep.delta - 0.4 * (0.125 / 0.34375)) < 1e-14
        assert rep.argmin == 1

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            zeros = [complex(*rng.uniform(-0.6, 0.6, 2)) for _ in range(6)]
            rep = carleson_delta(zeros)
            delta, argmin = brute_force_delta(zeros)
            assert abs(rep.delta - delta) < 1e-12
            assert rep.argmin == argmin

    def test_geometric_family_stable(self):
        # Classical interpolating family: delta stays bounded away from 0
        # and stabilizes as the family deepens.
        d12 = carleson_delta(1 - 2.0 ** -np.arange(1, 13)).delta
        d20 = carleson_delta(1 - 2.0 ** -np.arange(1, 21)).delta
        assert d12 > 0.014
        assert d20 > 0.014
        assert d20 / d12 > 0.85

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        zeros = [complex(*rng.uniform(-0.5, 0.5, 2)) for _ in range(5)]
        base = carleson_delta(zeros)
        perm = rng.permutation(5)
        shuffled = carleson_delta([zeros[i] for i in perm])
        assert abs(base.delta - shuffled.delta) < 1e-14
        assert np.allclose(
            sorted(base.values), sorted(shuffled.values), atol=1e-14
        )

    def test_duplicates_rejected(self):
        with pytest.raises(InvariantViolation):
            carleson_delta([0.3, 0.3])

    def test_report_json(self):
        doc = carleson_delta([0.5, 0.75]).to_json()
        assert set(doc) == {"delta", "argmin", "values"}


class TestGeneralizedCarleson:
    def test_single_factor_is_one(self):
        est = generalized_carleson_ratio([BlaschkeProduct([0.4])])
        assert est == 1.0

    def test_geometric_factors_positive(self):
        zeros = 1 - 2.0 ** -np.arange(1, 7)
        factors = [BlaschkeProduct([z]) for z in zeros]
        est = generalized_carleson_ratio(factors)
        delta = carleson_delta(zeros).delta
        assert est > 0.0
        # same order of magnitude as the interpolation constant
        assert est > delta / 10

    def test_violated_condition_decays_near_common_zero(self):
        # Two factors sharing the zero 0.5: the ratio collapses there.
        factors = [BlaschkeProduct([0.5]), BlaschkeProduct([0.5])]
        coarse = generalized_carleson_ratio(
            factors, grid=0.5 + np.array([1e-2, 2e-2])
        )
        fine = generalized_carleson_ratio(
            factors, grid=0.5 + np.array([1e-4, 2e-4])
        )
        assert fine < coarse
        assert fine < 1e-3

    def test_skip_counting_and_degenerate(self):
        factors = [BlaschkeProduct([0.5]), BlaschkeProduct([0.25])]
        est, skipped = generalized_carleson_ratio(
            factors, grid=np.array([0.5, 0.1]), return_skipped=True
        )
        assert skipped == 1  # the factor vanishes at its own zero
        with pytest.raises(DegenerateInputError):
            generalized_carleson_ratio(factors, grid=np.array([0.5]))

    def test_default_grid_shape(self):
        grid = default_disk_grid(radii=8, angles=16)
        assert grid.size == 128
        assert np.max(np.abs(grid)) < 1.0


class TestPick:
    def test_trivial_single_node(self):
        ok, smallest = pick_feasible(PickData([0.0], [0.0]))
        assert ok and abs(smallest - 1.0) < 1e-14

    def test_one_by_one_threshold(self):
        ok, smallest = pick_feasible(PickData([0.0], [0.8]))
        assert ok and abs(smallest - (1 - 0.64)) < 1e-14
        ok, _ = pick_feasible(PickData([0.0], [1.2]))
        assert not ok

    def test_two_by_two_eigen_oracle(self):
        nodes, targets = [0.0, 0.5], [0.0, 0.9]
        p = np.array(
            [
                [1.0, 1.0],
                [1.0, (1 - 0.81) / (1 - 0.25)],
            ]
        )
        expected = np.linalg.eigvalsh(p)[0]
        ok, smallest = pick_feasible(PickData(nodes, targets))
        assert abs(smallest - expected) < 1e-12
        assert ok == (expected >= -1e-10)


class TestNPInterpolate:
    def test_constant_interpolant(self):
        phi, m = np_interpolate([0.0], [0.5])
        assert m == 0.5
        assert abs(phi(0.3) - 0.5) < 1e-15

    def test_all_targets_equal(self):
        phi, m = np_interpolate([0.0, 0.3, -0.2j], [0.7j, 0.7j, 0.7j])
        assert m == abs(0.7j)
        assert abs(phi(0.11) - 0.7j) < 1e-15

    def test_zero_targets(self):
        phi, m = np_interpolate([0.1, 0.2], [0.0, 0.0])
        assert m == 0.0 and phi.is_zero()

    def test_two_node_closed_form(self):
        # nodes {0, r}, targets {0, mu}: minimal norm |mu|/r from the 2x2
        # Pick determinant.
        for r, mu in [(0.5, 0.25), (0.5, 0.9), (0.7, -0.3 + 0.1j)]:
            phi, m = np_interpolate([0.0, r], [0.0, mu])
            assert abs(m - abs(mu) / r) < 2e-6 * max(1.0, abs(mu) / r)
            assert abs(phi(r) - mu) < 1e-10

    def test_residual_and_boundary_norm(self):
        rng = np.random.default_rng(17)
        grid = np.exp(2j * np.pi * np.arange(4096) / 4096)
        for _ in range(8):
            k = rng.integers(2, 6)
            nodes = []
            while len(nodes) < k:
                z = complex(*rng.uniform(-0.6, 0.6, 2))
                if all(abs(z - w) > 0.15 for w in nodes):
                    nodes.append(z)
            targets = [complex(*rng.uniform(-1, 1, 2)) for _ in range(k)]
            phi, m = np_interpolate(nodes, targets)
            residual = max(abs(phi(z) - t) for z, t in zip(nodes, targets))
            assert residual < 1e-8
            assert np.max(np.abs(phi(grid))) <= m * (1 + 1e-6)

    def test_scaling_monotonicity(self):
        nodes = [0.0, 0.4, -0.3 + 0.2j]
        targets = np.array([0.2, -0.5, 0.3 + 0.3j])
        _, m1 = np_interpolate(nodes, targets)
        for t in (0.5, 0.1):
            _, mt = np_interpolate(nodes, t * targets)
            assert abs(mt - t * m1) < 2e-6 * m1

    def test_feasible_at_one_when_norm_below_one(self):
        nodes = [0.0, 0.4]
        targets = [0.1, 0.2]
        phi, m = np_interpolate(nodes, targets)
        assert m <= 1.0
        ok, _ = pick_feasible(PickData(nodes, targets))
        assert ok
