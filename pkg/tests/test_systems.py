"""Fiber map families: formulas, enclosures, certified diagnostics."""

import math

import numpy as np
import pytest

from fiberdim.errors import ConfigError, DomainEscape, InvalidWord
from fiberdim.systems import (
    Disk,
    FiberWordContext,
    PastWord,
    SimilaritySchedule,
    fiber_derivative_mod,
    fiber_derivative_mod_at,
    fiber_map,
    fiber_map_at,
    image_disk,
    invert_disk,
    make_system,
    pi2_hat,
    sample_fiber_limit_set,
    verify_system,
)
from fiberdim.words import pair_alphabet


@pytest.fixture(scope="module")
def conj():
    return make_system("inverse_conjugate")


@pytest.fixture(scope="module")
def square():
    return make_system("inverse_square")


class TestDiskGeometry:
    def test_invert_disk_exact_example(self):
        out = invert_disk(Disk(3 + 0j, 1.0))
        assert out.center == pytest.approx(0.375)
        assert out.radius == pytest.approx(0.125)

    def test_invert_disk_boundary_maps_to_boundary(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            r = rng.uniform(0.05, 0.9) * abs(c)
            if abs(c) <= r:
                continue
            out = invert_disk(Disk(c, r))
            for t in np.linspace(0.0, 2 * np.pi, 17):
                z = c + r * complex(math.cos(t), math.sin(t))
                assert abs(1.0 / z - out.center) == pytest.approx(out.radius, abs=1e-12)

    def test_invert_disk_rejects_origin(self):
        with pytest.raises(ValueError):
            invert_disk(Disk(0.5 + 0j, 1.0))

    def test_containment_predicates(self):
        big = Disk(0j, 1.0)
        assert big.contains(0.5 + 0.5j)
        assert not big.contains(1.2 + 0j)
        assert big.contains_disk(Disk(0.25j, 0.5))
        assert not big.contains_disk(Disk(0.75 + 0j, 0.5))


class TestScheduleValidation:
    def test_ratio_cap(self):
        with pytest.raises(ConfigError):
            SimilaritySchedule(kind="equal", ratio=0.34)

    def test_inner_factor_range(self):
        with pytest.raises(ConfigError):
            SimilaritySchedule(inner_factor=0.0)
        with pytest.raises(ConfigError):
            SimilaritySchedule(inner_factor=0.6)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            SimilaritySchedule(kind="affine")

    def test_grid_symbol_out_of_range(self):
        sched = SimilaritySchedule(kind="equal", ratio=0.2, grid_digit=2)
        with pytest.raises(InvalidWord):
            sched.translation_of((3, 1))

    def test_custom_missing_symbol(self):
        sched = SimilaritySchedule(kind="custom", table=((1, 1, 0.25, 0.0, 0.0),))
        with pytest.raises(InvalidWord):
            sched.ratio_of((1, 2))

    def test_two_ratio_dispatch(self):
        sched = SimilaritySchedule(kind="two_ratio", ratio_a=0.125, ratio_b=0.0625)
        assert sched.ratio_of((1, 2)) == 0.125
        assert sched.ratio_of((2, 1)) == 0.0625


class TestMakeSystem:
    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            make_system("horseshoe")

    def test_schedule_only_for_similarity(self):
        with pytest.raises(ConfigError):
            make_system("inverse_conjugate", schedule=SimilaritySchedule())

    def test_domain_touching_singularity(self):
        with pytest.raises(ConfigError):
            make_system("inverse_conjugate", center=-1 + 1j, radius=0.5)

    def test_escaping_similarity_image(self):
        sched = SimilaritySchedule(kind="custom", table=((1, 1, 0.25, 2.0, 0.0),))
        with pytest.raises(ConfigError):
            make_system("similarity", schedule=sched)

    def test_certified_contraction(self, conj, square):
        assert conj.contraction == pytest.approx(1.697224362268005)
        assert square.contraction > 1.0
        sim = make_system("similarity")
        # geometric schedule: strongest branch has ratio 1/4, inner factor 1/2
        assert sim.contraction == pytest.approx(8.0)


class TestFiberFormulas:
    def test_conjugate_map_value(self, conj):
        assert fiber_map_at(conj, 2 + 2j, 0j) == pytest.approx(0.25 - 0.25j)

    def test_square_map_value(self, square):
        assert fiber_map_at(square, 2 + 2j, 0j) == pytest.approx(0.125 - 0.125j)

    def test_similarity_map_value(self):
        sched = SimilaritySchedule(kind="custom", table=((1, 1, 0.25, 0.5, 0.0),))
        sim = make_system("similarity", schedule=sched)
        assert fiber_map_at(sim, 0j, 1 + 0j, (1, 1)) == pytest.approx(0.625 + 0j)

    def test_conjugate_derivative_value(self, conj):
        assert fiber_derivative_mod_at(conj, 2 + 2j, 0j) == pytest.approx(0.125)

    def test_square_derivative_value(self, square):
        got = fiber_derivative_mod_at(square, 2 + 2j, 0.5 + 0j)
        assert got == pytest.approx(1.0 / 34.0625)

    def test_derivative_matches_finite_differences(self, conj, square):
        rng = np.random.default_rng(3)
        h = 1e-7
        for system in (conj, square):
            checked = 0
            while checked < 200:
                u = rng.random() + 1j * rng.random()
                w = system.domain.center + 0.9 * system.domain.radius * (2 * u - (1 + 1j))
                if abs(w - system.domain.center) > 0.9 * system.domain.radius:
                    continue
                theta = rng.random() * 2 * math.pi
                e = complex(math.cos(theta), math.sin(theta))
                fd = abs(fiber_map_at(system, 1.6 + 1.6j, w + h * e)
                         - fiber_map_at(system, 1.6 + 1.6j, w - h * e)) / (2 * h)
                ref = fiber_derivative_mod_at(system, 1.6 + 1.6j, w)
                assert abs(fd - ref) <= 1e-6 * ref
                checked += 1

    def test_checked_layer_rejects_escapes(self, conj):
        ctx = FiberWordContext(((1, 1),) * 12)
        with pytest.raises(DomainEscape):
            fiber_map(conj, ctx, 2.0 + 0j)
        with pytest.raises(DomainEscape):
            fiber_derivative_mod(conj, ctx, -1.0 + 0j)

    def test_checked_layer_matches_formula(self, conj):
        ctx = FiberWordContext(((2, 3),) * 12)
        w = 0.4 + 0.1j
        assert fiber_map(conj, ctx, w) == fiber_map_at(conj, ctx.pi_value, w)


class TestPastSelection:
    def test_constant_past_converges_to_fixed_point(self, conj):
        past = PastWord.constant((1, 1), 40)
        w, err = pi2_hat(conj, past)
        p = past.context(1).pi_value
        z = conj.domain.center
        for _ in range(300):
            z = 1.0 / (np.conj(z) + p)
        assert abs(w - z) <= err + 1e-10
        assert err == pytest.approx(conj.contraction ** -40 * conj.domain.diameter)

    def test_error_bound_decays_geometrically(self, conj):
        past = PastWord.constant((1, 1), 40)
        ref, _ = pi2_hat(conj, past)
        prev = math.inf
        for depth in (5, 10, 20):
            w, err = pi2_hat(conj, PastWord.constant((1, 1), depth))
            assert abs(w - ref) <= err
            assert err < prev
            prev = err

    def test_context_slices_two_sided_word(self):
        past = PastWord(symbols=((1, 2), (3, 4)), forward=((5, 5),) * 12)
        # level 1 applies the most recent symbol
        assert past.context(1).first_symbol == (1, 2)
        assert past.context(2).forward_word[:2] == ((3, 4), (1, 2))
        with pytest.raises(InvalidWord):
            past.context(3)

    def test_forward_word_required(self):
        with pytest.raises(InvalidWord):
            PastWord(symbols=((1, 1),), forward=())


class TestImageGeometry:
    def test_depth_one_images_nest_in_domain(self, conj, square):
        for system in (conj, square):
            margin = math.inf
            for sym in pair_alphabet(8):
                for tail in (((1, 1),) * 11, ((8, 8),) * 11):
                    img = image_disk(system, sym, tail)
                    margin = min(margin,
                                 system.domain.radius
                                 - abs(img.center - system.domain.center)
                                 - img.radius)
            assert margin > 0.0

    def test_similarity_image_exact(self):
        sched = SimilaritySchedule(kind="equal", ratio=0.2, grid_digit=2,
                                   inner_factor=0.5)
        sim = make_system("similarity", schedule=sched)
        img = image_disk(sim, (1, 2))
        assert img.center == pytest.approx(-0.5 + 0.5j)
        assert img.radius == pytest.approx(0.1)

    def test_conjugate_image_contains_sampled_points(self, conj):
        # the enclosure is exact for this family, so sampled images stay inside
        tail = ((2, 1),) * 11
        img = image_disk(conj, (1, 3), tail)
        ctx = FiberWordContext(((1, 3),) + tail)
        rng = np.random.default_rng(1)
        for _ in range(100):
            u = rng.random() + 1j * rng.random()
            w = conj.domain.center + conj.domain.radius * (2 * u - (1 + 1j))
            if abs(w - conj.domain.center) > conj.domain.radius:
                continue
            assert img.contains(fiber_map(conj, ctx, w), tol=1e-9)


class TestLimitSetSampling:
    def test_points_stay_in_domain(self, conj):
        pts = sample_fiber_limit_set(conj, ((1, 1),), 3, 25, 400, seed=2)
        assert pts.shape == (400,)
        assert np.all(np.abs(pts - conj.domain.center) <= conj.domain.radius + 1e-9)

    def test_equal_schedule_depth_one_cover(self):
        sched = SimilaritySchedule(kind="equal", ratio=0.2, grid_digit=2,
                                   inner_factor=0.5)
        sim = make_system("similarity", schedule=sched)
        pts = sample_fiber_limit_set(sim, ((1, 1),), 2, 25, 500, seed=4)
        covered = np.zeros(len(pts), dtype=bool)
        for sym in pair_alphabet(2):
            img = image_disk(sim, sym)
            covered |= np.abs(pts - img.center) <= img.radius + 1e-9
        assert covered.all()

    def test_seed_determinism(self):
        sched = SimilaritySchedule(kind="equal", ratio=0.2, grid_digit=2,
                                   inner_factor=0.5)
        sim = make_system("similarity", schedule=sched)
        a = sample_fiber_limit_set(sim, ((1, 1),), 2, 25, 500, seed=4)
        b = sample_fiber_limit_set(sim, ((1, 1),), 2, 25, 500, seed=4)
        assert np.array_equal(a, b)

    def test_empty_forward_rejected(self, conj):
        with pytest.raises(InvalidWord):
            sample_fiber_limit_set(conj, (), 3, 25, 10, seed=0)


class TestVerifyReports:
    def test_conjugate_separation_and_band(self, conj):
        report = verify_system(conj, 5)
        assert report.osc_ok
        # images over distinct first symbols share boundary points exactly
        assert abs(report.min_image_gap) < 1e-12
        assert 0.0 < report.derivative_band[0] < report.derivative_band[1] < 1.0
        assert report.lambda_hat == pytest.approx(1.0 / report.derivative_band[1])
        assert report.lambda_hat > 1.0

    def test_square_separation_is_strict(self, square):
        report = verify_system(square, 5)
        assert report.osc_ok
        assert report.min_image_gap > 0.0
        assert 0.0 < report.derivative_band[0] < report.derivative_band[1] < 1.0

    def test_single_digit_band_matches_analytic_envelope(self, conj):
        # with one symbol the translate is the golden point, so the one-step
        # derivative range over the domain disk has a closed form
        report = verify_system(conj, 1)
        phi = (1 + math.sqrt(5)) / 2
        c = abs(0.5 + phi * (1 + 1j))
        lo, hi = 1.0 / (c + 0.5) ** 2, 1.0 / (c - 0.5) ** 2
        assert lo <= report.derivative_band[0] <= 1.1 * lo
        assert 0.9 * hi <= report.derivative_band[1] <= hi

    def test_overlapping_similarity_flagged(self):
        table = ((1, 1, 0.3, -0.4, -0.4), (1, 2, 0.3, -0.4, -0.35),
                 (2, 1, 0.3, 0.4, 0.4), (2, 2, 0.3, 0.35, 0.4))
        system = make_system("similarity",
                             schedule=SimilaritySchedule(kind="custom", table=table))
        report = verify_system(system, 2)
        assert not report.osc_ok
        assert report.min_image_gap == pytest.approx(-0.25)

    def test_distortion_constant_recorded(self, conj, square):
        assert verify_system(conj, 3).distortion_H_hat > 0.0
        # similarity maps have constant derivative, no log-derivative drift
        sim = make_system("similarity")
        assert verify_system(sim, 3).distortion_H_hat == 0.0
