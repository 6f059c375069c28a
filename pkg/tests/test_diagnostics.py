import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhnscale import (
    AdaptationCloud,
    FHNParams,
    InvariantViolation,
    MacroFields,
    ParticleCloud,
    SpatialGrid,
    deposit_moments,
    dissipation,
    entropy,
    entropy_balance_residual,
    error_term,
    moment_inequality_residual,
    moments,
    relative_entropy,
    remainder_terms,
    velocity_variance,
    weak_convergence_gap,
)
from fhnscale.diagnostics import MomentRecord, entropy_balance_series

from oracles import pair_energy_oracle


def unit_grid(cells=1, length=None):
    return SpatialGrid(dim=1, box_length=float(cells if length is None else length), cells_per_axis=cells)


def single_cell_cloud(vs, weights, ws=None):
    vs = np.asarray(vs, float)
    ws = np.zeros_like(vs) if ws is None else np.asarray(ws, float)
    return ParticleCloud(cell=np.zeros(vs.size, dtype=int), v=vs, w=ws, weight=weights)


class TestMoments:
    def test_mu0_is_three_times_total_mass(self, rng):
        grid = unit_grid(cells=4)
        cloud = ParticleCloud(
            cell=rng.integers(0, 4, 10), v=rng.standard_normal(10),
            w=rng.standard_normal(10), weight=np.full(10, 0.1),
        )
        rec = moments(cloud, grid)
        assert rec.mu_total[0] == pytest.approx(3.0 * cloud.total_mass(), rel=1e-14)

    def test_single_particle_powers(self):
        grid = SpatialGrid(dim=1, box_length=1.0, cells_per_axis=1)  # centre at x = 0
        cloud = single_cell_cloud([2.0], weights=[1.0])
        rec = moments(cloud, grid)
        assert rec.mu_v[2] == 4.0
        assert rec.mu_v[4] == 16.0
        assert rec.mu_v[6] == 64.0
        assert rec.mu_x[2] == 0.0

    def test_empty_cloud_all_zero(self):
        grid = unit_grid(cells=2)
        rec = moments(ParticleCloud(cell=[], v=[], w=[], weight=[]), grid)
        assert rec.mu_total[0] == 0.0 and rec.mu_v[6] == 0.0

    def test_unsupported_order_rejected(self):
        grid = unit_grid()
        cloud = single_cell_cloud([1.0], weights=[1.0])
        with pytest.raises(ValueError, match="orders"):
            moments(cloud, grid, orders=(1, 2))


class TestDissipation:
    def test_monokinetic_cloud_dissipates_nothing(self):
        grid = unit_grid()
        cloud = single_cell_cloud([0.7, 0.7], weights=[0.5, 0.5])
        mom = deposit_moments(cloud, grid)
        assert dissipation(cloud, mom, 1) == 0.0
        assert dissipation(cloud, mom, 2) == 0.0

    def test_symmetric_pair_hand_value(self):
        # direct sum: 0.5*1*1 + 0.5*(-1)*(-1) = 1 for both p = 1 and p = 2
        grid = unit_grid()
        cloud = single_cell_cloud([1.0, -1.0], weights=[0.5, 0.5])
        mom = deposit_moments(cloud, grid)  # rho = 1, V = 0
        assert mom.rho[0] == 1.0 and mom.V[0] == 0.0
        assert dissipation(cloud, mom, 1) == pytest.approx(1.0)
        assert dissipation(cloud, mom, 2) == pytest.approx(1.0)

    def test_inconsistent_moments_raise(self):
        grid = unit_grid()
        cloud = single_cell_cloud([1.0, 0.0], weights=[0.5, 0.5])
        mom = deposit_moments(cloud, grid)
        mom.V[0] = 5.0  # force a negative association
        with pytest.raises(InvariantViolation):
            dissipation(cloud, mom, 1)

    def test_bad_order_rejected(self):
        grid = unit_grid()
        cloud = single_cell_cloud([1.0], weights=[1.0])
        with pytest.raises(ValueError):
            dissipation(cloud, deposit_moments(cloud, grid), 3)


class TestMomentInequality:
    @staticmethod
    def records(times, mu2, mu4, mu6, mu2w=None, mu4w=None):
        recs = []
        for i, t in enumerate(times):
            r = MomentRecord(t=float(t))
            r.mu_v = {2: mu2[i], 4: mu4[i], 6: mu6[i]}
            r.mu_w = {2: (mu2w or mu2)[i], 4: (mu4w or mu4)[i]}
            recs.append(r)
        return recs

    def test_static_equilibrium_is_slack(self):
        times = np.linspace(0, 1, 11)
        zeros = np.zeros(11)
        recs = self.records(times, zeros, zeros, zeros)
        residual = moment_inequality_residual(recs, zeros, eps=0.1, p=1, tau=0.2, a=0.1)
        assert residual <= 0.0

    def test_detector_flags_injected_violation(self):
        times = np.linspace(0, 1, 11)
        zeros = np.zeros(11)
        recs = self.records(times, zeros, zeros, zeros)
        const = max((2 - 1) / 2 + 0.2 * 1 + 1, 0.2 * 0.1**2 / 2)
        # inject a dissipation series violating the bound by one unit
        bad = np.full(11, (const + 1.0) * 0.1)
        assert moment_inequality_residual(recs, bad, eps=0.1, p=1, tau=0.2, a=0.1) >= 1.0

    def test_needs_two_records(self):
        with pytest.raises(ValueError):
            moment_inequality_residual(self.records([0.0], [0], [0], [0]), [0.0], 0.1, 1, 0.2, 0.1)


class TestEntropies:
    def test_entropy_zero_fields(self, grid64):
        fields = MacroFields(rho0=np.ones(64), V=np.zeros(64), W=np.zeros(64), params=FHNParams())
        assert entropy(fields, grid64) == 0.0

    def test_entropy_single_cell_value(self):
        grid = unit_grid()
        fields = MacroFields(rho0=np.array([2.0]), V=np.array([1.0]), W=np.array([3.0]), params=FHNParams())
        assert entropy(fields, grid) == pytest.approx(10.0)

    def test_entropy_linear_in_density(self, grid64, rng):
        rho = np.abs(rng.standard_normal(64))
        V = rng.standard_normal(64)
        W = rng.standard_normal(64)
        base = entropy(MacroFields(rho0=rho, V=V, W=W, params=FHNParams()), grid64)
        double = entropy(MacroFields(rho0=2 * rho, V=V, W=W, params=FHNParams()), grid64)
        assert double == pytest.approx(2.0 * base, rel=1e-12)

    def test_relative_entropy_of_identical_states_is_zero(self, grid64, rng):
        rho = np.abs(rng.standard_normal(64))
        V = rng.standard_normal(64)
        W = rng.standard_normal(64)
        cloudless = MacroFields(rho0=rho, V=V, W=W, params=FHNParams())
        assert relative_entropy(cloudless, cloudless, grid64) == 0.0

    def test_relative_entropy_single_cell_value(self):
        grid = unit_grid()
        a = MacroFields(rho0=np.array([2.0]), V=np.array([0.0]), W=np.array([0.0]), params=FHNParams())
        b = MacroFields(rho0=np.array([7.0]), V=np.array([1.0]), W=np.array([3.0]), params=FHNParams())
        assert relative_entropy(a, b, grid) == pytest.approx(10.0)

    def test_zero_mass_cells_contribute_nothing(self):
        grid = unit_grid(cells=2)
        a = MacroFields(rho0=np.array([1.0, 0.0]), V=np.zeros(2), W=np.zeros(2), params=FHNParams())
        b = MacroFields(rho0=np.array([1.0, 0.0]), V=np.array([0.0, 99.0]), W=np.zeros(2), params=FHNParams())
        assert relative_entropy(a, b, grid) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_relative_entropy_nonnegative(self, data):
        n = 6
        grid = unit_grid(cells=n)
        draw = lambda lo, hi: np.array(data.draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n)))
        a = MacroFields(rho0=draw(0, 3), V=draw(-3, 3), W=draw(-3, 3), params=FHNParams())
        b = MacroFields(rho0=draw(0, 3), V=draw(-3, 3), W=draw(-3, 3), params=FHNParams())
        assert relative_entropy(a, b, grid) >= 0.0


class TestErrorTerm:
    def test_monokinetic_cell_has_no_closure_defect(self):
        grid = unit_grid()
        cloud = single_cell_cloud([0.8, 0.8], weights=[0.5, 0.5])
        e = error_term(cloud, deposit_moments(cloud, grid), grid)
        assert e[0] == 0.0

    def test_symmetric_spread_cubic_expansion(self):
        # N(V+d) + N(V-d) - 2 N(V) = -6 V d^2; with V = 1, d = 1: E = -3
        grid = unit_grid()
        cloud = single_cell_cloud([0.0, 2.0], weights=[0.5, 0.5])
        mom = deposit_moments(cloud, grid)
        assert mom.V[0] == 1.0
        e = error_term(cloud, mom, grid)
        assert e[0] == pytest.approx(-3.0)

    def test_linear_reaction_commutes_with_averaging(self, rng):
        grid = unit_grid(cells=2)
        cloud = ParticleCloud(
            cell=rng.integers(0, 2, 12), v=rng.standard_normal(12),
            w=rng.standard_normal(12), weight=np.full(12, 0.25),
        )
        e = error_term(cloud, deposit_moments(cloud, grid), grid, reaction=lambda v: v)
        np.testing.assert_allclose(e, 0.0, atol=1e-14)


class TestRemainderTerms:
    def make_pair(self, grid, kernel, rng, equal=False):
        rho = np.abs(rng.standard_normal(grid.n_cells)) + 0.1
        V = rng.standard_normal(grid.n_cells)
        W = rng.standard_normal(grid.n_cells)
        z = MacroFields(rho0=rho, V=V, W=W, params=FHNParams())
        if equal:
            from fhnscale.kinetic import CellMoments

            zeps = CellMoments(rho=rho, j=rho * V, q=rho * W, V=V, W=W)
        else:
            from fhnscale.kinetic import CellMoments

            V2 = rng.standard_normal(grid.n_cells)
            W2 = rng.standard_normal(grid.n_cells)
            rho2 = np.abs(rng.standard_normal(grid.n_cells))
            zeps = CellMoments(rho=rho2, j=rho2 * V2, q=rho2 * W2, V=V2, W=W2)
        return zeps, z

    def test_equal_states_have_zero_r_terms(self, gaussian_kernel, grid64, rng):
        zeps, z = self.make_pair(grid64, gaussian_kernel, rng, equal=True)
        rl, rnl, _, _ = remainder_terms(zeps, z, gaussian_kernel)
        assert rl == 0.0 and rnl == 0.0

    def test_constant_probe_potential_kills_snl(self, gaussian_kernel, grid64, rng):
        zeps, z = self.make_pair(grid64, gaussian_kernel, rng)
        zeps.V[:] = 1.3
        _, _, _, snl = remainder_terms(zeps, z, gaussian_kernel)
        assert snl == 0.0

    def test_zero_probe_fields_kill_sl(self, gaussian_kernel, grid64, rng):
        zeps, z = self.make_pair(grid64, gaussian_kernel, rng)
        zeps.V[:] = 0.0
        zeps.W[:] = 0.0
        _, _, sl, _ = remainder_terms(zeps, z, gaussian_kernel)
        assert sl == 0.0

    def test_snl_matches_double_sum_oracle_and_is_nonpositive(self, rng):
        grid = SpatialGrid(dim=1, box_length=4.0, cells_per_axis=8)
        from fhnscale import KernelSpec, build_kernel
        from fhnscale.kinetic import CellMoments

        kernel = build_kernel(grid, KernelSpec(shape="gaussian", amplitude=1.0, length_scale=1.0))
        rho = np.abs(rng.standard_normal(8))
        V = rng.standard_normal(8)
        zeps = CellMoments(rho=rho, j=rho * V, q=np.zeros(8), V=V, W=np.zeros(8))
        z = MacroFields(rho0=rho, V=V, W=np.zeros(8), params=FHNParams())
        _, _, _, snl = remainder_terms(zeps, z, kernel)
        oracle = -0.5 * pair_energy_oracle(kernel.samples, rho, V, grid.cell_volume)
        assert snl == pytest.approx(oracle, rel=1e-12)
        assert snl <= 1e-12


class TestEntropyBalance:
    def test_identical_states_zero_residual(self):
        times = np.linspace(0, 1, 21)
        zeros = np.zeros(21)
        assert entropy_balance_residual(times, zeros, zeros, zeros, zeros) == 0.0

    def test_detector_flags_injected_offset(self):
        times = np.linspace(0, 1, 21)
        zeros = np.zeros(21)
        assert entropy_balance_residual(times, zeros, zeros, zeros + 1.0, zeros) >= 1.0

    def test_exact_linear_balance_closes(self):
        # eta(t) = t with coupling + Rl + Rnl = 1 is in perfect balance
        times = np.linspace(0, 1, 21)
        eta = times.copy()
        ones = np.ones(21)
        series = entropy_balance_series(times, eta, ones, np.zeros(21), np.zeros(21))
        np.testing.assert_allclose(series, 0.0, atol=1e-13)

    def test_misaligned_series_rejected(self):
        with pytest.raises(ValueError):
            entropy_balance_residual(np.zeros(3), np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(3))


class TestVelocityVariance:
    def test_monokinetic_zero(self):
        grid = unit_grid()
        cloud = single_cell_cloud([0.4, 0.4], weights=[0.5, 0.5])
        mom = deposit_moments(cloud, grid)
        assert velocity_variance(cloud, mom, weighted=True) == 0.0
        assert velocity_variance(cloud, mom, weighted=False) == 0.0

    def test_unit_spread_both_weightings(self):
        grid = unit_grid()
        cloud = single_cell_cloud([1.0, -1.0], weights=[0.5, 0.5])
        mom = deposit_moments(cloud, grid)  # rho = 1
        assert velocity_variance(cloud, mom, weighted=True) == pytest.approx(1.0)
        assert velocity_variance(cloud, mom, weighted=False) == pytest.approx(1.0)

    def test_weighting_scales_with_density(self):
        grid = unit_grid(cells=2)
        cloud = ParticleCloud(cell=[0, 0], v=[1.0, -1.0], w=[0.0, 0.0], weight=[1.0, 1.0])
        mom = deposit_moments(cloud, grid)  # rho = 2 in cell 0
        assert velocity_variance(cloud, mom, weighted=True) == pytest.approx(
            2.0 * velocity_variance(cloud, mom, weighted=False)
        )


class TestWeakConvergenceGap:
    def test_matched_monokinetic_pair_has_zero_gap(self, grid64):
        rho = np.full(64, 0.125)
        V = np.linspace(-0.5, 0.5, 64)
        W = np.linspace(0.2, -0.2, 64)
        cloud = ParticleCloud(cell=np.arange(64), v=V.copy(), w=W.copy(), weight=np.full(64, 1 / 64))
        fcloud = AdaptationCloud(cell=np.arange(64), w=W.copy(), weight=np.full(64, 1 / 64))
        fields = MacroFields(rho0=rho, V=V, W=W, params=FHNParams())
        phi = lambda x, v, w: np.cos(x[:, 0]) + v * w
        assert weak_convergence_gap(cloud, fcloud, fields, phi, grid64) == 0.0

    def test_constant_test_function_measures_mass_gap(self, grid64):
        cloud = ParticleCloud(cell=[0], v=[0.0], w=[0.0], weight=[1.0])
        fcloud = AdaptationCloud(cell=np.array([0]), w=np.array([0.0]), weight=np.array([1.0]))
        fields = MacroFields(rho0=np.ones(64), V=np.zeros(64), W=np.zeros(64), params=FHNParams())
        phi = lambda x, v, w: np.ones_like(v)
        assert weak_convergence_gap(cloud, fcloud, fields, phi, grid64) == 0.0

    def test_linear_test_function_matches_moment_identity(self):
        # phi = v on one cell: gap = |j - V rho| * vol with mass-weighted sums
        grid = unit_grid()
        cloud = single_cell_cloud([1.0, 3.0], weights=[0.5, 0.5])
        fcloud = AdaptationCloud(cell=np.array([0]), w=np.array([0.0]), weight=np.array([1.0]))
        fields = MacroFields(rho0=np.array([1.0]), V=np.array([1.5]), W=np.array([0.0]), params=FHNParams())
        phi = lambda x, v, w: v
        mom = deposit_moments(cloud, grid)
        expected = abs(mom.j[0] - fields.V[0] * mom.rho[0]) * grid.cell_volume
        assert weak_convergence_gap(cloud, fcloud, fields, phi, grid) == pytest.approx(expected)
