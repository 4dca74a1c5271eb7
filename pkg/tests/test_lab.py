import math

import numpy as np
import pytest

from curveext import engine as eng
from curveext import lab
from curveext import measures as ms
from curveext.curves import CurveSpec, model_curve


DEG_23 = CurveSpec(d=2, coeffs=((0.0, 0.0, 1.0), (0.0, 0.0, 0.0, 1.0)),
                   label="(t^2,t^3)")


# ---------------------------------------------------------------------------
# exponent pairs and the region
# ---------------------------------------------------------------------------


class TestExponentPair:
    def test_d3_full_regularity_node(self):
        # beta(3) = 6 at d=3, so q > 7 is the binding corner at p = inf
        pair = lab.ExponentPair(p=math.inf, q=8.0, d=3, alpha=3.0)
        assert pair.admissible and pair.status == "admissible"
        assert not lab.ExponentPair(p=math.inf, q=7.0, d=3, alpha=3.0).admissible

    def test_edge_line_is_necessary_only(self):
        # d=2, alpha=1: beta = 2, so (p, q) = (inf, 2) sits on beta/q + 1/p = 1
        pair = lab.ExponentPair(p=math.inf, q=2.0, d=2, alpha=1.0)
        assert pair.necessary and not pair.admissible
        assert pair.status == "necessary"

    def test_p_equal_one_excluded(self):
        pair = lab.ExponentPair(p=1.0, q=10.0, d=2, alpha=2.0)
        assert pair.status == "excluded"

    def test_region_monotone_in_alpha(self):
        grids = {}
        for alpha in (2.0, 1.5, 1.0):
            rows = lab.admissible_region(2, alpha, steps=20)
            grids[alpha] = {(a, b) for a, b, s in rows if s == "admissible"}
        assert grids[2.0] <= grids[1.5] <= grids[1.0]

    def test_region_beta_consistency(self):
        pair = lab.ExponentPair(p=4.0, q=8.0, d=2, alpha=2.0)
        from curveext.curves import beta_alpha
        assert pair.beta == beta_alpha(2.0, 2)


class TestFitLine:
    def test_exact_power_law(self):
        lams = [2.0**k for k in range(4, 10)]
        vals = [3.0 * l**-0.75 for l in lams]
        slope, intercept, stderr = lab.fit_line(lams, vals)
        assert abs(slope + 0.75) < 1e-12
        assert stderr < 1e-10

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            lab.fit_line([4.0], [1.0])


# ---------------------------------------------------------------------------
# families and grids
# ---------------------------------------------------------------------------


class TestFamilies:
    def test_knapp_family_counts(self):
        fam = lab.knapp_family(2, 256.0)
        # 16 positions x 6 widths, some clipped away near t = 1
        assert 80 <= len(fam) <= 96
        for _, f in fam:
            assert 0.0 <= f.lo < f.hi <= 1.0

    def test_default_family_composition(self):
        fam = lab.default_test_family(2, 64.0, seed=5)
        kinds = {f.kind for _, f in fam}
        assert kinds == {"indicator", "bump", "trig"}
        assert sum(1 for _, f in fam if f.kind == "trig") == lab.FAMILY_TRIG

    def test_knapp_interval(self):
        lo, hi = lab.knapp_interval(2, 64.0)
        assert hi == 1.0 and abs((hi - lo) - 64.0**-0.5) < 1e-15


class TestGradedGrid:
    def test_measure_matches_constructor(self):
        grid = lab.GradedGrid(2, 4.0, 16, 3)
        mu = grid.measure()
        ref = ms.make_lebesgue(2, box=(-4.0, 4.0), resolution=16,
                               grading_levels=3)
        assert mu.n == ref.n
        assert abs(float(np.sum(mu.weights)) - 64.0) < 1e-9

    def test_norm_agrees_with_direct_path(self):
        grid = lab.GradedGrid(2, 2.0, 8, 2)
        mu = grid.measure()
        c = model_curve(2)
        f = eng.indicator(0.2, 0.8)
        viagrid = grid.extension_lq(c, 32.0, f, 4.0)
        vals = eng.extension_eval(c, 32.0, mu.atoms, f)
        direct = eng.lq_norm(vals, mu, 4.0)
        assert abs(viagrid - direct) < 1e-10 * max(direct, 1.0)

    def test_sup_norm_mode(self):
        grid = lab.GradedGrid(2, 2.0, 8, 2)
        f = eng.indicator(0.0, 1.0)
        peak = grid.extension_lq(model_curve(2), 8.0, f, math.inf)
        assert 0 < peak <= f.lp_norm(1.0) + 1e-12


# ---------------------------------------------------------------------------
# scaling experiments
# ---------------------------------------------------------------------------


class TestScaling:
    def test_model_curve_passes(self):
        grid = lab.GradedGrid(2, 4.0, 64, 4)
        lams = [2.0**k for k in range(2, 8)]
        rep = lab.scaling_experiment(
            model_curve(2), math.inf, 8.0, 2.0, lams, grid=grid,
            family_fn=lambda lam: lab.knapp_family(2, lam, positions=4),
            npw=8)
        assert rep.kind == "family-sup"
        assert rep.verdict == "PASS"
        assert rep.slope <= rep.target_slope + rep.tol

    def test_zero_family_vacuous(self):
        grid = lab.GradedGrid(2, 2.0, 8, 1)
        lams = [2.0**k for k in range(2, 8)]
        rep = lab.scaling_experiment(
            model_curve(2), 2.0, 8.0, 2.0, lams, grid=grid,
            family_fn=lambda lam: [("zero", eng.zero_function())])
        assert rep.verdict == "vacuous"

    def test_q_infinity_flat(self):
        # ||T f||_inf is attained near x = 0 at ||f||_1, so the slope is 0,
        # matching the -alpha/q target at q = infinity
        grid = lab.GradedGrid(2, 2.0, 16, 2)
        lams = [2.0**k for k in range(2, 8)]
        rep = lab.scaling_experiment(
            model_curve(2), 1.0, math.inf, 2.0, lams, grid=grid,
            family_fn=lambda lam: [("full", eng.indicator(0.0, 1.0))])
        assert rep.target_slope == 0.0
        assert abs(rep.slope) <= rep.tol
        assert rep.verdict == "PASS"

    def test_ladder_validation(self):
        with pytest.raises(ValueError):
            lab.scaling_experiment(model_curve(2), 2.0, 8.0, 2.0,
                                   [4.0, 8.0], grid=lab.GradedGrid(2, 2, 8, 1))


# ---------------------------------------------------------------------------
# sharpness
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def line_measure():
    return ms.make_appendix_a(2, 1.0, 1, extent=1.0, resolution=2048)


class TestSharpness:
    LAMS = [2.0**k for k in range(4, 11)]

    def test_edge_pair_flat(self, line_measure):
        rep = lab.sharpness_experiment(
            model_curve(2), line_measure, 1.0, math.inf, 2.0, self.LAMS)
        assert abs(rep.mass_slope - rep.mass_target) <= 0.07
        assert rep.lower_bound_ok and rep.min_peak_fraction >= 0.5
        assert abs(rep.ratio_slope) <= 0.1
        assert abs(lab.quotient_slope_prediction(1.0, 2, math.inf, 2.0)) < 1e-15

    def test_interior_pair_decays(self, line_measure):
        rep = lab.sharpness_experiment(
            model_curve(2), line_measure, 1.0, math.inf, 4.0, self.LAMS)
        assert rep.ratio_slope < -0.05
        pred = lab.quotient_slope_prediction(1.0, 2, math.inf, 4.0)
        assert abs(rep.ratio_slope - pred) <= 0.07

    def test_lebesgue_rectangle_closed_form(self):
        masses = [lab.lebesgue_rectangle_mass(2, l) for l in self.LAMS]
        slope = lab.fit_line(self.LAMS, masses)[0]
        assert abs(slope + 0.5) < 1e-12  # -alpha + beta/d at alpha=2, d=2

    def test_rectangle_mask(self):
        atoms = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.05]])
        mask = lab.knapp_rectangle_mask(atoms, 2, 16.0, c=0.1)
        # |x1| <= 0.1 * 16^{-1/2} = 0.025, |x2| <= 0.1
        assert mask.tolist() == [True, False, True]


# ---------------------------------------------------------------------------
# multilinear L^q and the Knapp slope
# ---------------------------------------------------------------------------


class TestMultilinearLq:
    def test_q2_bound_holds(self):
        mu = ms.make_lebesgue(2, box=(-4.0, 4.0), resolution=96)
        fs = [eng.indicator(0.05, 0.3), eng.indicator(0.65, 0.95)]
        res = lab.multilinear_lq_check(model_curve(2), fs, mu, 128.0, 2.0,
                                       box_r=32.0)
        assert res.ratio <= 1.0
        assert res.lhs > 0

    def test_q4_bound_holds(self):
        mu = ms.make_lebesgue(2, box=(-4.0, 4.0), resolution=96)
        fs = [eng.indicator(0.05, 0.3), eng.indicator(0.65, 0.95)]
        res = lab.multilinear_lq_check(model_curve(2), fs, mu, 128.0, 4.0,
                                       box_r=32.0)
        assert res.ratio <= 1.0

    def test_zero_factor(self):
        mu = ms.make_lebesgue(2, box=(-2.0, 2.0), resolution=32)
        fs = [eng.zero_function(), eng.indicator(0.6, 0.9)]
        res = lab.multilinear_lq_check(model_curve(2), fs, mu, 64.0, 2.0,
                                       box_r=16.0)
        assert res.lhs == 0.0

    def test_q_below_two_rejected(self):
        mu = ms.make_lebesgue(2, box=(-2.0, 2.0), resolution=16)
        with pytest.raises(ValueError):
            lab.multilinear_lq_check(model_curve(2), [eng.indicator(0, 1)],
                                     mu, 16.0, 1.5)

    def test_knapp_slope_d2(self):
        lams = [2.0**k for k in range(4, 9)]
        slope, vals = lab.multilinear_knapp_slope(model_curve(2), lams)
        assert abs(slope + 1.0) <= 0.15
        assert all(v > 0 for v in vals)


# ---------------------------------------------------------------------------
# pushforward mass probe
# ---------------------------------------------------------------------------


class TestPushforwardProbe:
    def test_lebesgue_mass_law(self):
        mu = ms.make_lebesgue(2, box=(-8.0, 8.0), resolution=1024)
        hs = [0.5, 0.25, 0.125]
        fit, pred, masses = lab.pushforward_mass_exponent(mu, (1, 2), hs, 0.1)
        assert pred == -3.0
        assert abs(fit - pred) < 0.05
        for h, m in zip(hs, masses):
            assert abs(m / (math.pi * 0.01 * h**-3) - 1.0) < 0.05

    def test_appendix_a_mass_law(self, line_measure=None):
        mu = ms.make_appendix_a(2, 1.0, 1, extent=1.0, resolution=2048)
        hs = [0.5, 0.25, 0.125]
        fit, pred, _ = lab.pushforward_mass_exponent(mu, (1, 2), hs, 0.01)
        assert pred == -2.0
        assert abs(fit - pred) < 0.05


# ---------------------------------------------------------------------------
# rescaling identity
# ---------------------------------------------------------------------------


class TestRescaling:
    def test_model_curve_identity_chain(self):
        mu = ms.make_lebesgue(2, box=(-4.0, 4.0), resolution=96)
        f = eng.indicator(0.1, 0.45)
        chk = lab.rescaling_inequality_check(
            model_curve(2), 0.0, 0.5, mu, 2.0, 2.0, 8.0, 64.0, f)
        assert abs(chk.ratio - 1.0) < 1e-9
        assert abs(chk.h_exponent - 0.125) < 1e-15

    def test_exponent_scan_perturbed(self):
        mu = ms.make_lebesgue(2, box=(-4.0, 4.0), resolution=96)
        pert = CurveSpec(d=2, coeffs=((0.0, 1.0, 0.03),
                                      (0.0, 0.0, 0.5, 0.02)))
        fitted, target, _ = lab.rescaling_exponent_scan(
            pert, 0.0, mu, 2.0, 2.0, 8.0, 64.0,
            [2.0**-k for k in range(3, 8)])
        assert abs(fitted - target) <= 0.03

    def test_zero_function_zero_ratio(self):
        mu = ms.make_lebesgue(2, box=(-2.0, 2.0), resolution=32)
        chk = lab.rescaling_inequality_check(
            model_curve(2), 0.0, 0.5, mu, 2.0, 2.0, 8.0, 16.0,
            eng.zero_function())
        assert chk.ratio == 0.0 and chk.lhs == 0.0

    def test_support_validation(self):
        mu = ms.make_lebesgue(2, box=(-2.0, 2.0), resolution=16)
        with pytest.raises(ValueError):
            lab.rescaling_inequality_check(
                model_curve(2), 0.0, 0.25, mu, 2.0, 2.0, 8.0, 16.0,
                eng.indicator(0.1, 0.5))


# ---------------------------------------------------------------------------
# finite-type pipeline
# ---------------------------------------------------------------------------


class TestFiniteType:
    def test_worked_example_rate_formula(self):
        assert abs(lab.block_decay_rate((2, 3), 2.0, 4.0, 8.0) - 0.625) < 1e-12

    def test_inadmissible_pair_rejected(self):
        grid = lab.GradedGrid(2, 2.0, 8, 1)
        with pytest.raises(ValueError):
            lab.finite_type_pipeline(DEG_23, 0.0, grid, 2.0, 2.0, 2.0,
                                     [2.0**k for k in range(2, 8)])

    def test_translate_curve_pointwise(self):
        shifted = lab.translate_curve(DEG_23, 0.25)
        for t in (0.0, 0.1, 0.6):
            ref = DEG_23.point(t + 0.25) - DEG_23.point(0.25)
            got = shifted.point(t)
            assert np.allclose(got, ref, atol=1e-12)

    def test_small_pipeline_runs_and_decays(self):
        grid = lab.GradedGrid(2, 4.0, 64, 5)
        lams = [2.0**k for k in range(4, 10)]
        reports, slope, target, verdict = lab.finite_type_pipeline(
            DEG_23, 0.0, grid, 2.0, 4.0, 8.0, lams, n_blocks=4,
            fit_blocks=4, npw=8)
        top = reports[-1]
        assert len(top.block_norms) == 4
        assert all(a > b for a, b in zip(top.block_norms, top.block_norms[1:]))
        assert slope <= target + lab.SLOPE_TOL
        assert verdict == "PASS"

    def test_blocks_summable_ratio(self):
        # partial sums converge: every observed per-block ratio <= 2^{-0.4}
        grid = lab.GradedGrid(2, 4.0, 64, 6)
        rep = lab.finite_type_blocks(DEG_23, grid, (2, 3), 2.0, 4.0, 8.0,
                                     512.0, n_blocks=4, fit_blocks=4, npw=8)
        for a, b in zip(rep.block_norms, rep.block_norms[1:]):
            assert b / a <= 2.0**-0.4
