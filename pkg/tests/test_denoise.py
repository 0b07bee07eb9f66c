import math

import numpy as np
import pytest

from myriadkit.denoise import (
    DenoiseConfig,
    Patch,
    denoise_image,
    denoise_image_detailed,
    denoise_s1_image,
    denoise_s1_image_detailed,
    dist_student,
    dist_wrapped_cauchy,
    extract_patch,
    minimal_patchwise_k,
    select_similar,
)
from myriadkit.distributions import wrap_angle
from myriadkit.errors import ConfigError, InsufficientCandidates
from myriadkit.imaging import (
    Image,
    S1Image,
    add_student_t_noise,
    add_wrapped_cauchy_noise,
    synthetic_blocks,
    synthetic_s1_blocks,
)


def small_cfg(**kw):
    base = dict(patch_size=3, window=9, k=10, nu=1.0, sigma=5.0, mode="pixelwise")
    base.update(kw)
    return DenoiseConfig(**base)


class TestExtractPatch:
    def test_single_pixel_image(self):
        img = Image(np.array([[7.0]]))
        p = extract_patch(img, (0, 0), 5)
        assert np.all(p.values == 7.0)

    def test_interior_verbatim(self):
        ramp = Image(np.arange(25, dtype=float).reshape(5, 5))
        p = extract_patch(ramp, (2, 2), 3)
        expect = ramp.pixels[1:4, 1:4].reshape(-1)
        assert np.array_equal(p.values, expect)

    def test_corner_mirroring(self):
        img = Image(np.array([[1.0, 2.0], [3.0, 4.0]]))
        p = extract_patch(img, (0, 0), 3)
        expect = np.array([[4, 3, 4], [2, 1, 2], [4, 3, 4]], dtype=float)
        assert np.array_equal(p.values, expect.reshape(-1))


class TestDistances:
    def test_student_self_distance(self):
        p = Patch(3, np.arange(9.0))
        assert dist_student(p, p, 2.0, 1.0) == pytest.approx(9 * math.log(2.0))

    def test_student_single_pixel(self):
        assert dist_student([1.0], [0.0], 1.0, 0.5) == pytest.approx(math.log(2.0))

    def test_student_monotone_in_gap(self):
        rng = np.random.default_rng(0)
        base = rng.standard_normal(9)
        gaps = [0.1, 0.5, 1.0, 5.0, 50.0]
        vals = [dist_student(base, base + g, 1.0, 2.0) for g in gaps]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_wc_self_distance(self):
        p = Patch(3, np.linspace(-3, 3, 9))
        expect = 9 * math.log((1 - 0.7) ** 2)
        assert dist_wrapped_cauchy(p, p, 0.7) == pytest.approx(expect)

    def test_wc_half_turn(self):
        got = dist_wrapped_cauchy([0.0], [-math.pi], 0.6)
        assert got == pytest.approx(math.log(1 + 0.36))

    def test_wc_minimized_at_equality(self):
        rho = 0.8
        ref = np.array([0.3])
        sweep = np.linspace(-math.pi, math.pi, 201, endpoint=False)
        vals = [dist_wrapped_cauchy(ref, np.array([t]), rho) for t in sweep]
        best = sweep[int(np.argmin(vals))]
        assert abs(wrap_angle(best - 0.3)) < 0.05

    def test_wc_representative_independence(self):
        # equal circular differences must give equal distances across the seam
        a = dist_wrapped_cauchy([math.pi - 0.05], [-math.pi + 0.05], 0.7)
        b = dist_wrapped_cauchy([0.05], [-0.05], 0.7)
        assert a == pytest.approx(b, abs=1e-12)


class TestSelectSimilar:
    def test_constant_image(self):
        img = Image(np.full((12, 12), 3.0))
        cfg = small_cfg()
        ss = select_similar(img, (6, 6), cfg)
        t = cfg.patch_size**2
        assert np.allclose(ss.distances, t * math.log(cfg.nu))
        assert ss.members[0] == ss.center
        # remaining members are the lowest scan-order candidates
        h = cfg.window // 2
        scan = [
            (6 + dr) * 12 + (6 + dc)
            for dr in range(-h, h + 1)
            for dc in range(-h, h + 1)
        ]
        expect = [ss.center] + [i for i in scan if i != ss.center][: cfg.k - 1]
        assert list(ss.members) == expect

    def test_repeated_texture_ranks_first(self):
        rng = np.random.default_rng(1)
        px = rng.uniform(0, 255, (20, 20))
        block = rng.uniform(0, 255, (3, 3))
        px[4:7, 4:7] = block
        px[4:7, 10:13] = block  # exact copy inside the search window
        img = Image(px)
        ss = select_similar(img, (5, 5), small_cfg(window=13, k=2))
        assert ss.members[0] == 5 * 20 + 5
        assert ss.members[1] == 5 * 20 + 11
        assert ss.distances[1] == pytest.approx(ss.distances[0])

    def test_k_equals_window_squared(self):
        img = Image(np.arange(144, dtype=float).reshape(12, 12))
        cfg = small_cfg(window=5, k=25)
        ss = select_similar(img, (6, 6), cfg)
        assert len(ss.members) == 25

    def test_k_too_large(self):
        with pytest.raises(InsufficientCandidates):
            small_cfg(window=3, k=10)

    def test_distances_non_decreasing(self):
        img = Image(np.random.default_rng(2).uniform(0, 255, (15, 15)))
        ss = select_similar(img, (7, 7), small_cfg())
        assert np.all(np.diff(ss.distances) >= 0)

    def test_self_inclusion_at_analytic_distance(self):
        rng = np.random.default_rng(3)
        img = Image(rng.uniform(0, 255, (15, 15)))
        cfg = small_cfg(nu=2.0)
        ss = select_similar(img, (7, 7), cfg)
        t = cfg.patch_size**2
        assert ss.members[0] == ss.center
        assert ss.distances[0] == pytest.approx(t * math.log(cfg.nu))

        ang = S1Image(rng.uniform(-math.pi, math.pi, (15, 15)))
        cfg_wc = small_cfg(nu=0.0, sigma=0.25)
        ss_wc = select_similar(ang, (7, 7), cfg_wc, metric="wrapped-cauchy")
        rho = math.exp(-0.25)
        assert ss_wc.members[0] == ss_wc.center
        assert ss_wc.distances[0] == pytest.approx(t * math.log((1 - rho) ** 2))


class TestConfig:
    def test_patchwise_k_bound(self):
        with pytest.raises(ConfigError, match=r"k >= 27"):
            DenoiseConfig(patch_size=5, k=20, nu=1.0, mode="patchwise")
        assert minimal_patchwise_k(5, 1.0) == 27

    def test_default_windows(self):
        assert DenoiseConfig(patch_size=5).window == 21
        assert DenoiseConfig(patch_size=3).window == 13

    def test_even_patch_rejected(self):
        with pytest.raises(ConfigError):
            DenoiseConfig(patch_size=4)


class TestDenoiseImage:
    def test_constant_image_identity(self):
        img = Image(np.full((16, 16), 42.0))
        for mode in ("pixelwise", "patchwise", "adaptive"):
            cfg = small_cfg(mode=mode, k=12)
            out, summary = denoise_image_detailed(img, cfg)
            assert np.array_equal(out.pixels, img.pixels)
            assert summary.constant_fallbacks > 0

    def test_shift_equivariance(self):
        ref = synthetic_blocks(24)
        noisy = add_student_t_noise(ref, 1.0, 10.0, seed=3)
        cfg = small_cfg(sigma=10.0)
        base = denoise_image(noisy, cfg)
        shifted = denoise_image(Image(noisy.pixels + 37.0, peak=noisy.peak), cfg)
        assert np.allclose(shifted.pixels, base.pixels + 37.0, atol=1e-8)

    def test_thread_determinism(self):
        ref = synthetic_blocks(48)
        noisy = add_student_t_noise(ref, 1.0, 10.0, seed=4)
        cfg = small_cfg(sigma=10.0, mode="adaptive", k=12)
        one = denoise_image(noisy, cfg, threads=1)
        many = denoise_image(noisy, cfg, threads=8)
        assert np.array_equal(one.pixels, many.pixels)

    def test_adaptive_threshold_degenerate_branches(self):
        ref = synthetic_blocks(24)
        noisy = add_student_t_noise(ref, 1.0, 10.0, seed=5)
        pix = denoise_image(noisy, small_cfg(sigma=10.0, mode="pixelwise", k=12))
        pat = denoise_image(noisy, small_cfg(sigma=10.0, mode="patchwise", k=12))
        ada0 = denoise_image(
            noisy, small_cfg(sigma=10.0, mode="adaptive", k=12, var_threshold=0.0)
        )
        ada_inf = denoise_image(
            noisy,
            small_cfg(sigma=10.0, mode="adaptive", k=12, var_threshold=math.inf),
        )
        assert np.array_equal(ada0.pixels, pix.pixels)
        assert np.array_equal(ada_inf.pixels, pat.pixels)

    def test_patchwise_contribution_counts(self):
        ref = synthetic_blocks(24)
        noisy = add_student_t_noise(ref, 1.0, 10.0, seed=6)
        cfg = small_cfg(sigma=10.0, mode="patchwise", k=12)
        _, summary = denoise_image_detailed(noisy, cfg)
        counts = summary.patch_contributions
        assert counts.min() >= 1
        # independent counting pass: patches covering pixel (r, c)
        s = cfg.patch_size
        h = s // 2
        H = W = 24
        for r, c in [(0, 0), (0, 5), (12, 12), (23, 23)]:
            n_cover = sum(
                1
                for dr in range(-h, h + 1)
                for dc in range(-h, h + 1)
                if 0 <= r + dr < H and 0 <= c + dc < W
            )
            assert counts[r, c] == n_cover

    def test_blue_active_above_nu_two(self):
        ref = synthetic_blocks(24)
        noisy = add_student_t_noise(ref, 1000.0, 10.0, seed=7)
        cfg = small_cfg(nu=1000.0, sigma=10.0, mode="patchwise", k=12)
        out = denoise_image(noisy, cfg)
        # shrinkage keeps some high-frequency content: not equal to the
        # plain patch-mean result
        cfg_mean = small_cfg(nu=1.0, sigma=10.0, mode="patchwise", k=12)
        mean_out = denoise_image(noisy, cfg_mean)
        assert not np.array_equal(out.pixels, mean_out.pixels)

    def test_requires_nu_at_least_one(self):
        with pytest.raises(ConfigError):
            denoise_image(Image(np.zeros((8, 8))), small_cfg(nu=0.5))


class TestDenoiseS1:
    def test_constant_identity(self):
        img = S1Image(np.full((16, 16), 1.25))
        cfg = small_cfg(nu=0.0, sigma=0.1, k=12)
        out, summary = denoise_s1_image_detailed(img, cfg)
        assert np.array_equal(out.angles, img.angles)
        assert summary.constant_fallbacks == 256

    def test_rotation_equivariance(self):
        ref = synthetic_s1_blocks(24)
        noisy = add_wrapped_cauchy_noise(ref, 0.1, seed=8)
        cfg = small_cfg(nu=0.0, sigma=0.1, k=12)
        base = denoise_s1_image(noisy, cfg)
        for c in (0.4, -0.9, 1.7):
            rotated = S1Image(wrap_angle(noisy.angles + c))
            out = denoise_s1_image(rotated, cfg)
            diff = wrap_angle(out.angles - base.angles - c)
            assert np.max(np.abs(diff)) <= 1e-6

    def test_thread_determinism(self):
        ref = synthetic_s1_blocks(48)
        noisy = add_wrapped_cauchy_noise(ref, 0.1, seed=9)
        cfg = small_cfg(nu=0.0, sigma=0.1, k=12)
        one = denoise_s1_image(noisy, cfg, threads=1)
        many = denoise_s1_image(noisy, cfg, threads=8)
        assert np.array_equal(one.angles, many.angles)

    def test_two_value_pathology_falls_back_to_circular_median(self):
        # every sample set contains exactly the two antipodal values
        ang = np.empty((12, 12))
        ang[:, ::2] = 0.5
        ang[:, 1::2] = 0.5 - math.pi
        img = S1Image(ang)
        # k exceeds the count of same-parity (identical) candidates, so every
        # gathered set contains both antipodal values
        cfg = small_cfg(nu=0.0, sigma=0.1, window=9, k=50)
        out, summary = denoise_s1_image_detailed(img, cfg)
        assert summary.degenerate_fallbacks > 0
        # circular median of a two-valued set is one of the values
        assert np.all(np.isin(out.angles, [0.5, 0.5 - math.pi]))

    def test_output_range(self):
        ref = synthetic_s1_blocks(24)
        noisy = add_wrapped_cauchy_noise(ref, 0.3, seed=10)
        out = denoise_s1_image(noisy, small_cfg(nu=0.0, sigma=0.3, k=12))
        assert np.all(out.angles >= -math.pi) and np.all(out.angles < math.pi)
