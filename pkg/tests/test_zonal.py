import math

import numpy as np
import pytest
from scipy import integrate

from svdshape.errors import DomainError, SeriesTruncationError
from svdshape.special import LogSign, Partition, enumerate_partitions, gen_pochhammer
from svdshape.zonal import (SeriesControl, ZonalSumTable, exp_trace_integral_series,
                            hypergeom_0F1, log_stiefel_volume,
                            power_trace_integral_series, signed_logsumexp,
                            stiefel_mc_integral, zonal_poly, zonal_series)


def sum_identity_error(eigs, f):
    total = sum(zonal_poly(k, eigs) for k in enumerate_partitions(f, len(eigs)))
    target = sum(eigs) ** f
    return abs(total - target) / abs(target)


class TestZonalPoly:
    def test_hand_values_identity_2x2(self):
        # weight 2 at the 2x2 identity: C_(2) = 8/3, C_(1,1) = 4/3
        assert zonal_poly(Partition((2,)), [1.0, 1.0]) == pytest.approx(8 / 3, rel=1e-14)
        assert zonal_poly(Partition((1, 1)), [1.0, 1.0]) == pytest.approx(4 / 3, rel=1e-14)

    def test_weight_one(self):
        assert zonal_poly(Partition((1,)), [2.0, 3.0]) == pytest.approx(5.0)

    def test_sum_identity(self):
        rng = np.random.default_rng(0)
        for d in (2, 3):
            eigs = rng.uniform(0.2, 2.0, size=d)
            for f in range(1, 9):
                assert sum_identity_error(tuple(eigs), f) < 1e-9

    def test_homogeneity(self):
        kappa = Partition((2, 1))
        eigs = (0.7, 1.3, 2.1)
        c = 2.5
        assert zonal_poly(kappa, [c * e for e in eigs]) == pytest.approx(
            c ** 3 * zonal_poly(kappa, eigs), rel=1e-12)

    def test_permutation_invariance(self):
        kappa = Partition((3, 1))
        a = zonal_poly(kappa, (0.3, 1.1, 2.2))
        b = zonal_poly(kappa, (2.2, 0.3, 1.1))
        assert a == pytest.approx(b, rel=1e-12)

    def test_structural_zero(self):
        # more parts than nonzero eigenvalues
        assert zonal_poly(Partition((1, 1, 1)), (1.0, 2.0)) == 0.0
        assert zonal_poly(Partition((2, 1)), (3.0, 0.0)) == 0.0

    def test_empty_eigs_raises(self):
        with pytest.raises(DomainError):
            zonal_poly(Partition((1,)), ())


class TestHypergeom0F1:
    def test_cosh_identity(self):
        # 0F1(1/2; x^2/4) = cosh(x) for a scalar argument
        for x in (0.3, 1.7, 4.0):
            assert hypergeom_0F1(0.5, [x * x / 4.0]) == pytest.approx(
                math.cosh(x), rel=1e-12)

    def test_orthogonal_group_quadrature_oracle(self):
        # int over O(2) of etr(X H) dH = 0F1(1; X X'/4); the left side is a
        # plain 1-D integral over rotations plus reflections
        rng = np.random.default_rng(1)
        for _ in range(5):
            X = rng.normal(size=(2, 2))
            def rot(th):
                return np.array([[math.cos(th), -math.sin(th)],
                                 [math.sin(th), math.cos(th)]])
            refl = np.array([[1.0, 0.0], [0.0, -1.0]])
            f_rot = integrate.quad(
                lambda th: math.exp(np.trace(X @ rot(th))), 0, 2 * math.pi,
                limit=200)[0]
            f_ref = integrate.quad(
                lambda th: math.exp(np.trace(X @ (rot(th) @ refl))), 0,
                2 * math.pi, limit=200)[0]
            oracle = (f_rot + f_ref) / (4 * math.pi)
            eigs = np.linalg.eigvalsh(X @ X.T / 4.0)
            assert hypergeom_0F1(1.0, eigs) == pytest.approx(oracle, rel=1e-9)


class TestZonalSeries:
    def test_truncation_error_carries_partial(self):
        ctrl = SeriesControl(max_degree=3)
        with pytest.raises(SeriesTruncationError) as err:
            zonal_series(lambda t, k: LogSign.one(), [50.0, 80.0], 1.0, ctrl)
        assert err.value.partial_log is not None
        assert err.value.tail_estimate is not None

    def test_tail_diagnostic_shrinks_with_degree(self):
        # with an unreachable rel_tol the truncation report exposes the tail,
        # which must shrink as the degree budget grows
        eigs = [2.0, 3.5]
        tails = []
        for deg in (20, 30, 40):
            with pytest.raises(SeriesTruncationError) as err:
                zonal_series(lambda t, k: LogSign.one(), eigs, 1.0,
                             SeriesControl(max_degree=deg, rel_tol=1e-300,
                                           tail_window=deg))
            tails.append(err.value.tail_estimate)
        assert tails[0] > tails[1] > tails[2]

    def test_tail_bound_reported_on_convergent_instance(self):
        res = zonal_series(lambda t, k: LogSign.one(), [2.0, 3.5], 1.0,
                           SeriesControl(max_degree=60))
        assert 0 <= res.tail_bound < 1e-11
        assert res.degrees_used < 60

    def test_vanishing_denominator_raises(self):
        with pytest.raises(DomainError):
            zonal_series(lambda t, k: LogSign.one(), [1.0, 1.0], 0.5,
                         SeriesControl(max_degree=10))


class TestZonalSumTable:
    def test_matches_direct_sums(self):
        rng = np.random.default_rng(3)
        for K in (2, 3):
            tab = ZonalSumTable(K, 6)
            spectra = np.abs(rng.normal(size=(4, K))) * 2
            spectra[1, -1] = 0.0
            ls = tab.logsums(spectra)
            for i, s in enumerate(spectra):
                for t in range(7):
                    direct = sum(
                        zonal_poly(k, s) / gen_pochhammer(K / 2.0, k)
                        for k in enumerate_partitions(t, K))
                    assert math.exp(ls[i, t]) == pytest.approx(direct, rel=1e-10)

    def test_input_validation(self):
        tab = ZonalSumTable(2, 3)
        with pytest.raises(DomainError):
            tab.logsums(np.array([[1.0, -0.5]]))
        with pytest.raises(DomainError):
            tab.logsums(np.ones((3, 3)))


class TestSignedLogsumexp:
    def test_values_and_zero(self):
        logs = np.array([[1.0, 2.0, 0.5], [3.0, 3.0, -np.inf]])
        signs = np.array([[1.0, -1.0, 1.0], [1.0, -1.0, 0.0]])
        log, sign = signed_logsumexp(logs, signs)
        expect = (signs * np.exp(logs)).sum(axis=1)
        assert sign[0] * math.exp(log[0]) == pytest.approx(expect[0], rel=1e-12)
        assert sign[1] == 0.0 and log[1] == -np.inf


class TestFrameIntegrals:
    def test_power_trace_vs_mc(self):
        rng = np.random.default_rng(7)
        Y = rng.normal(size=(2, 2))
        X = rng.normal(size=(2, 2))
        x_eigs = np.linalg.eigvalsh(X @ X.T)
        for p in (1, 2, 3):
            series = power_trace_integral_series(p, float(np.trace(Y)), x_eigs, 2, 2)
            mc, se = stiefel_mc_integral(
                lambda H: np.trace(Y[None] + np.einsum("ij,sjk->sik", X, H),
                                   axis1=1, axis2=2) ** p,
                2, 2, samples=200000, seed=p)
            assert abs(series - mc) < 4 * se

    def test_exp_trace_vs_mc(self):
        rng = np.random.default_rng(8)
        Y = rng.normal(size=(2, 2))
        X = rng.normal(size=(2, 2)) * 0.7
        r = 0.6
        series = exp_trace_integral_series(
            float(np.trace(Y)), np.linalg.eigvalsh(X @ X.T), 2, 2, r)

        def integrand(H):
            tr = np.trace(Y[None] + np.einsum("ij,sjk->sik", X, H),
                          axis1=1, axis2=2)
            return tr * np.exp(r * tr)
        mc, se = stiefel_mc_integral(integrand, 2, 2, samples=200000, seed=17)
        assert abs(series - mc) < 4 * se

    def test_stiefel_volume_known(self):
        # n=1: surface of the (K-1)-sphere
        for K in (2, 3, 4):
            surf = 2 * math.pi ** (K / 2.0) / math.gamma(K / 2.0)
            assert math.exp(log_stiefel_volume(1, K)) == pytest.approx(surf, rel=1e-12)

    def test_mc_determinism(self):
        f = lambda H: np.trace(H, axis1=1, axis2=2) ** 2
        a = stiefel_mc_integral(f, 2, 2, samples=5000, seed=5)
        b = stiefel_mc_integral(f, 2, 2, samples=5000, seed=5)
        assert a == b
