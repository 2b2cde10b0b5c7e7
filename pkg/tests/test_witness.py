import itertools
import math

import numpy as np
import pytest

from oracles import refined_lp_norm_p
from transchaos import witness as W
from transchaos.errors import GridTooCoarse, HorizonExhausted, NoSmallWeightSites, NormDiverged
from transchaos.space import Mode, SpaceSpec, norm, norm_p, restrict, translate
from transchaos.weights import WeightFunction, certify_admissibility, grid

LN2 = math.log(2)


def brute_force_levels(v, seq, x_max, step):
    """Every level's pair must satisfy the ratio test; check all admissible pairs exist."""
    lv = v.log_evaluate(grid(x_max, step))
    for n, (y, z) in enumerate(zip(seq.y_idx, seq.z_idx), start=1):
        assert lv[y] - lv[z] > n * LN2
        # no earlier z could have worked
        lo = 0 if n == 1 else seq.z_idx[n - 2] + 1
        for zz in range(lo + seq.gamma_steps + 1, z):
            best = np.max(lv[lo:zz - seq.gamma_steps])
            assert best - lv[zz] <= n * LN2 + 1e-12


class TestEscape:
    def test_spike_train(self, spike, spike_cert):
        seq = W.find_escape_sequences(spike, spike_cert, 4, 60.0, 0.01)
        assert seq.violations() == []
        assert np.allclose(seq.y, spike.spike_positions(60)[:4])
        brute_force_levels(spike, seq, 60.0, 0.01)

    def test_integrable_exp(self, expw, exp_cert):
        seq = W.find_escape_sequences(expw, exp_cert, 3, 40.0, 0.01)
        assert seq.violations() == []
        assert np.all(seq.z - seq.y > np.arange(1, 4) * LN2)

    def test_constant(self):
        v = WeightFunction.constant(1.0)
        cert = certify_admissibility(v, 20.0, 0.01)
        with pytest.raises(HorizonExhausted) as info:
            W.find_escape_sequences(v, cert, 1, 20.0, 0.01)
        assert info.value.levels == 0

    def test_horizon_reports_levels(self, expw, exp_cert):
        with pytest.raises(HorizonExhausted) as info:
            W.find_escape_sequences(expw, exp_cert, 10, 12.0, 0.01)
        assert 0 < info.value.levels < 10

    def test_t_lower_bound(self, spike, spike_cert):
        seq = W.find_escape_sequences(spike, spike_cert, 6, 60.0, 0.01)
        n = np.arange(1, 7)
        bound = (n * LN2 - math.log(seq.M)) / seq.w - seq.gamma
        assert np.all(seq.t >= bound - 1e-9)
        assert np.all(np.diff(seq.t) > 0)

    def test_grid_too_coarse(self, spike):
        cert = certify_admissibility(spike, 60.0, 0.5)
        with pytest.raises(GridTooCoarse):
            W.find_escape_sequences(spike, cert, 2, 60.0, 0.5)


@pytest.fixture(params=[(Mode.LP, 1.0), (Mode.LP, 2.0), (Mode.C0V, 1.0)], ids=["L1", "L2", "C0v"])
def spike_setup(request, spike, spike_cert):
    mode, p = request.param
    spec = SpaceSpec(mode, spike, 60.0, 0.01, p)
    seq = W.find_escape_sequences(spike, spike_cert, 4, 60.0, 0.01)
    return spec, seq


class TestNonvanishing:
    def test_all_checks_pass(self, spike_setup):
        spec, seq = spike_setup
        f = W.build_nonvanishing_witness(seq, spec)
        rows = W.verify_nonvanishing(f, seq, spec)
        assert all(r["passed"] for r in rows), [r for r in rows if not r["passed"]]

    def test_support_inside_intervals(self, spike_setup):
        spec, seq = spike_setup
        f = W.build_nonvanishing_witness(seq, spec)
        inside = np.zeros(spec.n_cells + 1, bool)
        for z in seq.z_idx:
            inside[z - seq.gamma_steps:z + 1] = True
        assert not np.any(f.samples[~inside])

    def test_quadrature_oracle(self, spike, spike_setup):
        spec, seq = spike_setup
        if spec.mode is Mode.C0V:
            pytest.skip("sup norm")
        f = W.build_nonvanishing_witness(seq, spec)
        assert norm_p(f, spec) == pytest.approx(refined_lp_norm_p(f, spike, spec.p), rel=1e-2)


class TestSeparated:
    def test_level_separation(self, spike_setup):
        spec, seq = spike_setup
        a = W.a_schedule("factorial", 4)
        seq = W.find_escape_sequences(spec.weight, certify_admissibility(spec.weight, 60.0, 0.01), 4,
                                      60.0, 0.01, cell_multiple=W.required_cell_multiple(a, spec.mode))
        fam = W.build_separated_family(seq, a, 0, spec)
        bound = W.separation_bound(seq, spec)
        for n in range(1, 5):
            members = fam.level_members(n)
            assert len(members) == a[n - 1]
            for f, g in itertools.combinations(members, 2):
                assert norm_p(translate(f - g, seq.t[n - 1]), spec) >= bound * 0.95

    def test_intervals_tile(self, spike, spike_cert):
        a = (1, 2, 6, 24)
        spec = SpaceSpec(Mode.LP, spike, 60.0, 0.01)
        seq = W.find_escape_sequences(spike, spike_cert, 4, 60.0, 0.01,
                                      cell_multiple=W.required_cell_multiple(a, Mode.LP))
        fam = W.build_separated_family(seq, a, 0, spec)
        for n in range(1, 5):
            iv = sorted(fam.intervals(n))
            assert iv[0][0] == pytest.approx(seq.z[n - 1] - seq.gamma)
            assert iv[-1][1] == pytest.approx(seq.z[n - 1])
            assert all(math.isclose(b[0], a_[1]) for a_, b in zip(iv, iv[1:]))

    def test_agreement_implies_closeness(self, spike, spike_cert):
        a = (1, 2, 6, 24)
        for mode, p in [(Mode.LP, 1.0), (Mode.LP, 2.0)]:
            spec = SpaceSpec(mode, spike, 60.0, 0.01, p)
            seq = W.find_escape_sequences(spike, spike_cert, 4, 60.0, 0.01,
                                          cell_multiple=W.required_cell_multiple(a, mode))
            fam = W.build_separated_family(seq, a, 30, spec, rng=np.random.default_rng(3))
            for phi, psi in itertools.combinations(fam.samples, 2):
                agree = next((k for k in range(4) if phi[k] != psi[k]), 4)
                d = norm(fam.member(phi) - fam.member(psi), spec)
                # each member's tail beyond level N carries at most sum_{n>N} M gamma / 2^(n-1)
                tail = seq.M * seq.gamma / 2 ** (agree - 1)
                assert d <= 2 * tail ** (1 / p) * 1.01

    def test_trivial_schedule_matches_witness_shape(self, spike, spike_cert):
        spec = SpaceSpec(Mode.LP, spike, 60.0, 0.01)
        seq = W.find_escape_sequences(spike, spike_cert, 4, 60.0, 0.01)
        fam = W.build_separated_family(seq, (1, 1, 1, 1), 0, spec)
        f = W.build_nonvanishing_witness(seq, spec)
        assert np.array_equal(fam.member((1, 1, 1, 1)).samples != 0, f.samples != 0)

    def test_grid_too_coarse(self, spike, spike_cert):
        spec = SpaceSpec(Mode.LP, spike, 60.0, 0.01)
        seq = W.find_escape_sequences(spike, spike_cert, 3, 60.0, 0.01)
        with pytest.raises(GridTooCoarse):
            W.build_separated_family(seq, (1, 64, 64), 0, spec)

    def test_square_schedule_is_clipped(self):
        a = W.a_schedule("square", 4, gamma_steps=69)
        assert a == (2, 16, 34, 34)

    def test_epsilon(self, spike_setup):
        spec, seq = spike_setup
        eps = W.separation_epsilon(seq, spec)
        if spec.mode is Mode.LP:
            assert eps == pytest.approx(0.5 * (seq.gamma / seq.M) ** (1 / spec.p))
        else:
            assert eps == pytest.approx(0.25 / seq.M)


class TestPeriodic:
    def test_geometric_series(self, expw):
        spec = SpaceSpec(Mode.LP, expw, 40.0, 0.001)
        shape = spec.indicator(0, 1).samples[:2001]
        f = W.build_periodic_witness(spec, 2.0, shape)
        expected = (1 - math.exp(-1)) / (1 - math.exp(-2))
        assert norm(f, spec) == pytest.approx(expected, rel=1e-4)
        Tf = translate(f, 2.0)
        k = spec.n_cells - 2000
        assert np.array_equal(Tf.samples[:k], f.samples[:k])

    def test_constant_shape_c0v(self, expw):
        spec = SpaceSpec(Mode.C0V, expw, 40.0, 0.01)
        f = W.build_periodic_witness(spec, 1.0, np.ones(101))
        for t in (0.01, 0.5, 3.0):
            k = spec.n_cells - spec.steps(t)
            assert np.array_equal(translate(f, t).samples[:k], f.samples[:k])

    def test_constant_weight_diverges(self):
        spec = SpaceSpec(Mode.LP, WeightFunction.constant(1.0), 40.0, 0.1)
        with pytest.raises(NormDiverged):
            W.build_periodic_witness(spec, 2.0, spec.indicator(0, 1).samples[:21])


class TestWindowed:
    def test_rational_decay(self):
        v = WeightFunction.rational_decay()
        spec = SpaceSpec(Mode.LP, v, 2000.0, 0.01)
        ww = W.build_windowed_witness(spec, 1.0, 5)
        assert norm(ww.f, spec) < 1.0
        for t in ww.visit_times:
            assert norm(restrict(translate(ww.f, t), 1.0), spec) >= ww.c0 * (1 - 1e-12)
        assert ww.c0 == pytest.approx(math.log(2), rel=1e-4)
        assert np.all(ww.bump_norms <= 2.0 ** -np.arange(1, 6))

    def test_c0v(self):
        spec = SpaceSpec(Mode.C0V, WeightFunction.rational_decay(), 200.0, 0.01)
        ww = W.build_windowed_witness(spec, 1.0, 4)
        assert norm(ww.f, spec) <= 0.5
        for t in ww.visit_times:
            assert norm(restrict(translate(ww.f, t), 1.0), spec) >= ww.c0 * (1 - 1e-12)

    def test_spike_train_has_no_sites(self, spike):
        spec = SpaceSpec(Mode.LP, spike, 60.0, 0.01)
        with pytest.raises(NoSmallWeightSites) as info:
            W.build_windowed_witness(spec, 1.0, 3)
        assert info.value.found == 0
