import numpy as np
import pytest

from cradl import allocation as al
from cradl import problem
from cradl.adversary import sample_identities
from cradl.allocation import Allocation
from cradl.coding import encode_all, encode_device, honest_average

CYCLIC = Allocation(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]]), 2)


class TestEncodeDevice:
    def test_hand_example(self):
        grads = {0: np.array([1.0]), 1: np.array([2.0]), 2: np.array([3.0])}
        g = [encode_device(i, CYCLIC, {k: grads[k] for k in CYCLIC.subsets_of(i)}).vector[0] for i in range(3)]
        assert g == [1.5, 2.5, 2.0]
        assert sum(g) == 6.0

    def test_single_subset(self):
        A = al.allocate_non_redundant(1)
        out = encode_device(0, A, {0: np.array([4.0, -1.0])})
        np.testing.assert_array_equal(out.vector, [4.0, -1.0])
        assert out.device == 0

    def test_missing_or_extra(self):
        with pytest.raises(ValueError, match="missing"):
            encode_device(0, CYCLIC, {0: np.zeros(1)})
        with pytest.raises(ValueError, match="unexpected"):
            encode_device(0, CYCLIC, {0: np.zeros(1), 1: np.zeros(1), 2: np.zeros(1)})


class TestEncodeAll:
    def test_matches_device_encoding_bitwise(self):
        data = problem.generate_dataset(60, 4, 0.5, seed=1)
        A = al.allocate_uniform_random(9, 60, 17, seed=1)
        grads = problem.subset_grads(np.ones(4), data)
        G = encode_all(A, grads)
        for i in range(A.N):
            local = {int(k): grads[k] for k in A.subsets_of(i)}
            np.testing.assert_array_equal(G[i], encode_device(i, A, local).vector)

    def test_sum_identity(self):
        rng = np.random.default_rng(0)
        data = problem.generate_dataset(200, 6, 1.0, seed=0)
        for seed in range(10):
            A = al.allocate_uniform_random(25, 200, int(rng.integers(8, 200)), seed=seed)
            grads = problem.subset_grads(rng.normal(size=6), data)
            full = problem.ordered_sum(grads)
            err = np.abs(encode_all(A, grads).sum(axis=0) - full).max()
            assert err / (1 + np.abs(full).max()) < 1e-9

    def test_full_replication_rows_identical(self):
        data = problem.generate_dataset(12, 3, seed=2)
        A = al.allocate_full_replication(5, 12)
        grads = problem.subset_grads(np.ones(3), data)
        G = encode_all(A, grads)
        assert np.all(G == G[0])
        np.testing.assert_allclose(G[0], problem.ordered_sum(grads) / 5, rtol=1e-14)

    def test_non_redundant_is_local_gradient(self):
        data = problem.generate_dataset(8, 3, seed=3)
        grads = problem.subset_grads(np.ones(3), data)
        np.testing.assert_array_equal(encode_all(al.allocate_non_redundant(8), grads), grads)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            encode_all(CYCLIC, np.zeros((4, 2)))


class TestHonestAverage:
    def test_all_devices(self):
        data = problem.generate_dataset(30, 3, seed=4)
        A = al.allocate_uniform_random(6, 30, 9, seed=4)
        grads = problem.subset_grads(np.ones(3), data)
        G = encode_all(A, grads)
        np.testing.assert_allclose(honest_average(G, range(6)), problem.ordered_sum(grads) / 6, rtol=1e-12)

    def test_full_replication_any_subset(self):
        data = problem.generate_dataset(10, 2, seed=5)
        grads = problem.subset_grads(np.ones(2), data)
        G = encode_all(al.allocate_full_replication(4, 10), grads)
        np.testing.assert_allclose(honest_average(G, [2]), problem.ordered_sum(grads) / 4, rtol=1e-14)

    def test_unbiased_over_identities(self):
        data = problem.generate_dataset(20, 3, 0.5, seed=6)
        A = al.allocate_uniform_random(10, 20, 5, seed=6)
        grads = problem.subset_grads(np.array([1.0, -1.0, 0.5]), data)
        G = encode_all(A, grads)
        draws = np.array([honest_average(G, sample_identities(10, 0.3, t, 0).honest) for t in range(10_000)])
        target = problem.ordered_sum(grads) / 10
        se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
        assert np.all(np.abs(draws.mean(axis=0) - target) <= 3.5 * se)

    def test_empty(self):
        with pytest.raises(ValueError):
            honest_average(np.zeros((3, 2)), [])
