import numpy as np
import pytest

from rks import (
    BankComponent,
    KernelFamily,
    KernelSpec,
    ProjectionBank,
    combine_banks,
    feature_map,
    feature_map_batch,
    kernel_exact,
    kernel_exact_pairs,
    load_bank,
    rebuild_bank,
    sample_projection_bank,
    save_bank,
)

RBF1 = KernelSpec(KernelFamily.GAUSSIAN_RBF, 1.0)


def manual_bank(frequencies, phases, spec=RBF1):
    frequencies = np.asarray(frequencies, dtype=np.float32)
    phases = np.asarray(phases, dtype=np.float32)
    return ProjectionBank(
        frequencies=frequencies,
        phases=phases,
        input_dim=frequencies.shape[1],
        num_features=frequencies.shape[0],
        components=(BankComponent(spec, frequencies.shape[0], 0),),
    )


class TestSampling:
    def test_shape_contract(self):
        bank = sample_projection_bank(RBF1, input_dim=3, num_features=1, seed=0)
        assert bank.frequencies.shape == (1, 3)
        assert bank.phases.shape == (1,)
        assert 0.0 <= bank.phases[0] < 2.0 * np.pi

    def test_phases_in_range(self):
        bank = sample_projection_bank(RBF1, 2, 50000, seed=3)
        assert np.all(bank.phases >= 0.0)
        assert np.all(bank.phases.astype(np.float64) < 2.0 * np.pi)

    def test_gaussian_frequency_variance(self):
        # Normal(0, 1/sigma^2): sigma=2 gives variance 0.25
        spec = KernelSpec(KernelFamily.GAUSSIAN_RBF, 2.0)
        bank = sample_projection_bank(spec, 1, 10**6, seed=7)
        var = bank.frequencies.astype(np.float64).var()
        assert abs(var - 0.25) < 0.01

    def test_cauchy_frequency_median(self):
        # |Cauchy(scale 1/sigma)| has median 1/sigma: sigma=2 gives 0.5
        spec = KernelSpec(KernelFamily.LAPLACIAN, 2.0)
        bank = sample_projection_bank(spec, 1, 10**6, seed=7)
        med = np.median(np.abs(bank.frequencies.astype(np.float64)))
        assert abs(med - 0.5) < 0.01

    def test_deterministic_given_seed(self):
        for family in KernelFamily:
            spec = KernelSpec(family, 1.5)
            a = sample_projection_bank(spec, 4, 100, seed=11)
            b = sample_projection_bank(spec, 4, 100, seed=11)
            np.testing.assert_array_equal(a.frequencies, b.frequencies)
            np.testing.assert_array_equal(a.phases, b.phases)

    def test_different_seeds_differ(self):
        a = sample_projection_bank(RBF1, 4, 100, seed=11)
        b = sample_projection_bank(RBF1, 4, 100, seed=12)
        assert not np.array_equal(a.frequencies, b.frequencies)

    def test_invalid_dims_rejected(self):
        with pytest.raises(ValueError):
            sample_projection_bank(RBF1, 0, 10, seed=0)
        with pytest.raises(ValueError):
            sample_projection_bank(RBF1, 3, 0, seed=0)


class TestFeatureMap:
    def test_zero_frequency_zero_phase(self):
        # cos(0) = 1 scaled by sqrt(2/1)
        bank = manual_bank(np.zeros((1, 4)), [0.0])
        phi = feature_map(bank, np.array([1.0, 2.0, 3.0, 4.0]))
        assert phi[0] == pytest.approx(np.sqrt(2.0), rel=1e-6)

    def test_quarter_phase_gives_zero(self):
        bank = manual_bank(np.zeros((1, 2)), [np.pi / 2.0])
        phi = feature_map(bank, np.array([5.0, -3.0]))
        assert abs(float(phi[0])) < 1e-7  # float32 storage of cos(pi/2)

    def test_dimension_mismatch_rejected(self):
        bank = sample_projection_bank(RBF1, 3, 10, seed=0)
        with pytest.raises(ValueError):
            feature_map(bank, np.zeros(4))
        with pytest.raises(ValueError):
            feature_map_batch(bank, np.zeros((5, 4)))

    def test_inner_product_approximates_kernel(self):
        # 1000 random unit-scale pairs, D=25000: estimator std ~ sqrt(2/D)
        rng = np.random.default_rng(5)
        bank = sample_projection_bank(RBF1, 5, 25000, seed=1)
        X = rng.standard_normal((1000, 5))
        Z = rng.standard_normal((1000, 5))
        approx = np.sum(
            feature_map_batch(bank, X).astype(np.float64) * feature_map_batch(bank, Z).astype(np.float64),
            axis=1,
        )
        exact = kernel_exact_pairs(RBF1, X, Z)
        assert np.max(np.abs(approx - exact)) < 0.05

    def test_empty_batch(self):
        bank = sample_projection_bank(RBF1, 3, 10, seed=0)
        out = feature_map_batch(bank, np.zeros((0, 3)))
        assert out.shape == (0, 10)
        assert out.dtype == np.float32

    def test_single_row_batch_matches_feature_map(self):
        bank = sample_projection_bank(RBF1, 3, 64, seed=2)
        x = np.array([0.1, -0.7, 2.2])
        np.testing.assert_array_equal(feature_map_batch(bank, x[None, :])[0], feature_map(bank, x))

    def test_batch_bitwise_equals_looped_rows(self):
        rng = np.random.default_rng(9)
        bank = sample_projection_bank(RBF1, 6, 128, seed=4)
        X = rng.standard_normal((100, 6))
        batch = feature_map_batch(bank, X)
        looped = np.stack([feature_map(bank, row) for row in X])
        np.testing.assert_array_equal(batch, looped)

    def test_boundedness(self):
        rng = np.random.default_rng(3)
        for D in (1, 7, 100):
            bank = sample_projection_bank(RBF1, 4, D, seed=D)
            phi = feature_map_batch(bank, rng.standard_normal((50, 4)) * 10.0)
            bound = np.float32(np.sqrt(2.0 / D))
            assert np.all(np.abs(phi) <= bound)

    def test_self_similarity(self):
        # phi(x).phi(x) is (2/D) sum cos^2, always in [0, 2], mean 1 over phases
        rng = np.random.default_rng(8)
        bank = sample_projection_bank(RBF1, 3, 50000, seed=6)
        X = rng.standard_normal((20, 3))
        phi = feature_map_batch(bank, X).astype(np.float64)
        norms = np.sum(phi * phi, axis=1)
        assert np.all(norms >= 0.0) and np.all(norms <= 2.0)
        np.testing.assert_allclose(norms, 1.0, atol=0.02)


class TestUnbiasedness:
    def test_mean_over_banks_converges(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal(4)
        z = rng.standard_normal(4)
        for family in KernelFamily:
            spec = KernelSpec(family, 1.5)
            estimates = []
            for seed in range(200):
                bank = sample_projection_bank(spec, 4, 2000, seed=seed)
                fx = feature_map(bank, x).astype(np.float64)
                fz = feature_map(bank, z).astype(np.float64)
                estimates.append(float(fx @ fz))
            assert abs(np.mean(estimates) - kernel_exact(spec, x, z)) < 0.01


class TestCombineBanks:
    def test_single_bank_unchanged(self):
        bank = sample_projection_bank(RBF1, 3, 32, seed=0)
        combined = combine_banks([bank])
        x = np.array([0.5, -0.5, 1.0])
        np.testing.assert_array_equal(feature_map(combined, x), feature_map(bank, x))

    def test_equal_banks_still_approximate_kernel(self):
        # average of two draws of the same kernel is that kernel
        rng = np.random.default_rng(4)
        banks = [sample_projection_bank(RBF1, 4, 20000, seed=s) for s in (1, 2)]
        combined = combine_banks(banks)
        X = rng.standard_normal((200, 4))
        Z = rng.standard_normal((200, 4))
        approx = np.sum(
            feature_map_batch(combined, X).astype(np.float64)
            * feature_map_batch(combined, Z).astype(np.float64),
            axis=1,
        )
        exact = kernel_exact_pairs(RBF1, X, Z)
        assert np.max(np.abs(approx - exact)) < 0.05

    def test_mixed_families_average(self):
        # gaussian + laplacian blocks approximate (k_rbf + k_lap)/2
        rng = np.random.default_rng(5)
        lap = KernelSpec(KernelFamily.LAPLACIAN, 1.0)
        combined = combine_banks(
            [
                sample_projection_bank(RBF1, 4, 25000, seed=3),
                sample_projection_bank(lap, 4, 25000, seed=4),
            ]
        )
        X = rng.standard_normal((300, 4))
        Z = rng.standard_normal((300, 4))
        approx = np.sum(
            feature_map_batch(combined, X).astype(np.float64)
            * feature_map_batch(combined, Z).astype(np.float64),
            axis=1,
        )
        target = 0.5 * (kernel_exact_pairs(RBF1, X, Z) + kernel_exact_pairs(lap, X, Z))
        assert np.max(np.abs(approx - target)) < 0.05

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            combine_banks([])

    def test_mismatched_input_dim_rejected(self):
        with pytest.raises(ValueError):
            combine_banks(
                [sample_projection_bank(RBF1, 3, 8, seed=0), sample_projection_bank(RBF1, 4, 8, seed=0)]
            )


class TestSerialization:
    def test_round_trip_bit_identical(self, tmp_path):
        for family in KernelFamily:
            spec = KernelSpec(family, 0.7)
            bank = sample_projection_bank(spec, 5, 200, seed=9)
            path = tmp_path / f"bank_{family.value}.rffb"
            save_bank(bank, path)
            loaded = load_bank(path)
            np.testing.assert_array_equal(loaded.frequencies, bank.frequencies)
            np.testing.assert_array_equal(loaded.phases, bank.phases)
            assert loaded.components == bank.components

    def test_reconstruction_from_recipe(self, tmp_path):
        bank = sample_projection_bank(RBF1, 3, 100, seed=21)
        path = tmp_path / "bank.rffb"
        save_bank(bank, path)
        loaded = load_bank(path)
        rebuilt = rebuild_bank(loaded.components, loaded.input_dim)
        np.testing.assert_array_equal(rebuilt.frequencies, bank.frequencies)
        np.testing.assert_array_equal(rebuilt.phases, bank.phases)

    def test_combined_round_trip(self, tmp_path):
        lap = KernelSpec(KernelFamily.LAPLACIAN, 2.0)
        combined = combine_banks(
            [sample_projection_bank(RBF1, 3, 40, seed=1), sample_projection_bank(lap, 3, 24, seed=2)]
        )
        path = tmp_path / "combined.rffb"
        save_bank(combined, path)
        loaded = load_bank(path)
        np.testing.assert_array_equal(loaded.frequencies, combined.frequencies)
        np.testing.assert_array_equal(loaded.phases, combined.phases)
        assert loaded.components == combined.components
        with pytest.raises(ValueError):
            loaded.spec  # no single kernel spec for a mixture

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.rffb"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(ValueError, match="magic"):
            load_bank(path)

    def test_truncated_rejected(self, tmp_path):
        bank = sample_projection_bank(RBF1, 3, 50, seed=0)
        path = tmp_path / "bank.rffb"
        save_bank(bank, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            load_bank(path)
