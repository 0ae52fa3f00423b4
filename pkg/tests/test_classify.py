import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from continuum_centroid import classify, continuum
from continuum_centroid.classify import FittedClassifier, GroupStats, Kind
from continuum_centroid.errors import DegenerateVarianceError, InsufficientGroupError
from continuum_centroid.splines import SmoothedSample, TimeGrid, build_basis


@pytest.fixture(scope="module")
def basis():
    return build_basis(TimeGrid(0.0, 1.0, 6))


def sample_from(basis, coef, labels):
    return SmoothedSample(basis, np.asarray(coef, dtype=float), 1e-4, np.asarray(labels))


def toy_classifier(basis, kind, m0, m1, v0, v1, vp, n0, n1):
    return FittedClassifier(Kind(kind), np.eye(basis.L)[0],
                            GroupStats(n0, n1, m0, m1, v0, v1, vp), basis, 1)


def coef_with_score(basis, direction, s):
    """Coefficient row whose projected score on ``direction`` is ``s``."""
    v = basis.W @ direction
    return s * v / (v @ v)


def random_sample(rng, basis, N=20, shift=1.0):
    y = np.r_[0, 0, 1, 1, rng.integers(0, 2, N - 4)]
    C = rng.normal(size=(N, basis.L)) + shift * np.outer(y, np.linspace(-1, 1, basis.L))
    return sample_from(basis, C, y)


class TestGroupStats:
    def test_formula_oracle(self, basis):
        rng = np.random.default_rng(1)
        C = rng.normal(size=(6, basis.L))
        y = np.array([0, 1, 0, 1, 1, 0])
        w = rng.normal(size=basis.L)
        st_ = classify.group_stats(sample_from(basis, C, y), w)
        s = [sum(w[a] * basis.W[a, b] * C[i, b] for a in range(basis.L) for b in range(basis.L))
             for i in range(6)]
        g0 = [s[i] for i in range(6) if y[i] == 0]
        g1 = [s[i] for i in range(6) if y[i] == 1]
        m0, m1 = sum(g0) / 3, sum(g1) / 3
        v0 = sum((x - m0) ** 2 for x in g0) / 2
        v1 = sum((x - m1) ** 2 for x in g1) / 2
        assert st_.n0 == 3 and st_.n1 == 3
        for got, want in [(st_.proj_mean0, m0), (st_.proj_mean1, m1), (st_.var0, v0),
                          (st_.var1, v1), (st_.var_pooled, (2 * v0 + 2 * v1) / 4)]:
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_identical_curves(self, basis):
        C = np.tile(np.arange(basis.L, dtype=float), (5, 1))
        st_ = classify.group_stats(sample_from(basis, C, [0, 1, 0, 1, 0]), np.ones(basis.L))
        assert st_.var0 == st_.var1 == st_.var_pooled == 0.0
        assert st_.proj_mean0 == pytest.approx(st_.proj_mean1, rel=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2 ** 20), n=st.integers(4, 30))
    def test_pooled_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        basis = build_basis(TimeGrid(0.0, 1.0, 5))
        y = np.r_[0, 0, 1, 1, rng.integers(0, 2, n - 4)]
        st_ = classify.group_stats(sample_from(basis, rng.normal(size=(n, basis.L)) * 10, y),
                                   rng.normal(size=basis.L))
        lhs = (st_.n0 - 1) * st_.var0 + (st_.n1 - 1) * st_.var1
        rhs = (st_.n0 + st_.n1 - 2) * st_.var_pooled
        assert abs(lhs - rhs) <= 1e-10 * abs(rhs)

    def test_small_group(self, basis):
        C = np.ones((4, basis.L))
        with pytest.raises(InsufficientGroupError):
            classify.group_stats(sample_from(basis, C, [0, 0, 0, 1]), np.ones(basis.L))


class TestDiscriminants:
    def test_linear_midpoint_zero(self, basis):
        clf = toy_classifier(basis, "ccc-l", 0.0, 2.0, 1.0, 1.0, 1.0, 10, 10)
        c = coef_with_score(basis, clf.direction, 1.0)
        assert classify.discriminant_L(clf, c) == pytest.approx(0.0, abs=1e-12)

    def test_linear_at_mean0(self, basis):
        clf = toy_classifier(basis, "ccc-l", 0.5, 2.0, 1.0, 1.0, 0.5, 10, 10)
        c = coef_with_score(basis, clf.direction, 0.5)
        assert classify.discriminant_L(clf, c) == pytest.approx(1.5 ** 2 / 0.5, rel=1e-12)
        assert classify.predict(clf, c) == 0

    def test_linear_toy_numbers(self, basis):
        clf = toy_classifier(basis, "ccc-l", 0.0, 2.0, 1.0, 1.0, 1.0, 80, 20)
        c = coef_with_score(basis, clf.direction, 1.8)
        d = classify.discriminant_L(clf, c)
        assert d == pytest.approx(-3.2 + 2 * math.log(4), abs=1e-12)
        assert d == pytest.approx(-0.4274, abs=5e-5)
        assert classify.predict(clf, c) == 1

    def test_quadratic_toy_numbers(self, basis):
        clf = toy_classifier(basis, "ccc-q", 0.0, 2.0, 1.0, 4.0, 2.5, 10, 10)
        c = coef_with_score(basis, clf.direction, 3.0)
        assert classify.discriminant_Q(clf, c) == pytest.approx(-7.3637, abs=5e-5)
        assert classify.discriminant_Q(clf, c) == pytest.approx(0.25 - 9 + 2 * math.log(2),
                                                                rel=1e-12)

    def test_quadratic_at_mean1(self, basis):
        clf = toy_classifier(basis, "ccc-q", 0.0, 2.0, 1.5, 1.5, 1.5, 10, 10)
        c = coef_with_score(basis, clf.direction, 2.0)
        assert classify.discriminant_Q(clf, c) == pytest.approx(-4 / 1.5, rel=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(m0=st.floats(-10, 10), m1=st.floats(-10, 10), v=st.floats(0.01, 100),
           n0=st.integers(2, 100), n1=st.integers(2, 100), s=st.floats(-20, 20))
    def test_quadratic_collapses_to_linear(self, basis, m0, m1, v, n0, n1, s):
        lin = toy_classifier(basis, "ccc-l", m0, m1, v, v, v, n0, n1)
        quad = replace(lin, kind=Kind.CCC_Q)
        c = coef_with_score(basis, lin.direction, s)
        dl, dq = classify.discriminant_L(lin, c), classify.discriminant_Q(quad, c)
        assert dq == pytest.approx(dl, rel=1e-12, abs=1e-9)

    @pytest.mark.parametrize("d,label", [(1.0, 0), (-1.0, 1), (0.0, 0), (-0.0, 0)])
    def test_label_rule(self, d, label):
        assert classify.label_from_discriminant(d) == label

    def test_degenerate_variances(self, basis):
        c = np.zeros(basis.L)
        with pytest.raises(DegenerateVarianceError):
            classify.discriminant_Q(toy_classifier(basis, "ccc-q", 0, 1, 0.0, 1.0, 0.5, 5, 5), c)
        with pytest.raises(DegenerateVarianceError):
            classify.discriminant_L(toy_classifier(basis, "ccc-l", 0, 1, 0, 0, 0.0, 5, 5), c)


class TestScaleInvariance:
    @pytest.mark.parametrize("kind", ["ccc-l", "ccc-q"])
    @pytest.mark.parametrize("c", [2.0, -0.5, 8.0, -0.125])
    def test_exact_for_binary_scalings(self, basis, kind, c):
        rng = np.random.default_rng(7)
        s = random_sample(rng, basis)
        w = rng.normal(size=basis.L)
        a = classify.classifier_from_direction(s, w, kind, 1)
        b = classify.classifier_from_direction(s, c * w, kind, 1)
        np.testing.assert_array_equal(a.discriminant(s.coef), b.discriminant(s.coef))

    @pytest.mark.parametrize("kind", ["ccc-l", "ccc-q"])
    @pytest.mark.parametrize("c", [3.7, -0.013])
    def test_general_scalings(self, basis, kind, c):
        rng = np.random.default_rng(8)
        s = random_sample(rng, basis)
        w = rng.normal(size=basis.L)
        a = classify.classifier_from_direction(s, w, kind, 1)
        b = classify.classifier_from_direction(s, c * w, kind, 1)
        np.testing.assert_allclose(a.discriminant(s.coef), b.discriminant(s.coef), rtol=1e-10)
        np.testing.assert_array_equal(a.predict(s.coef), b.predict(s.coef))


class TestFits:
    @pytest.mark.parametrize("kind", ["ccc-l", "ccc-q"])
    def test_relabel_symmetry(self, basis, kind):
        rng = np.random.default_rng(3)
        s = random_sample(rng, basis, N=30)
        flipped = s.with_labels(1 - s.labels)
        a = classify.fit_ccc(s, 2, 0.3, kind)
        b = classify.fit_ccc(flipped, 2, 0.3, kind)
        da, db = a.discriminant(s.coef), b.discriminant(s.coef)
        # equal up to the tolerance of the 1-D weight search
        np.testing.assert_allclose(da, -db, rtol=1e-6, atol=1e-6)
        keep = np.abs(da) > 1e-6
        np.testing.assert_array_equal(a.predict(s.coef)[keep], 1 - b.predict(s.coef)[keep])

    def test_pls_lda_dense_oracle(self):
        basis = build_basis(TimeGrid(0.0, 1.0, 8))
        rng = np.random.default_rng(4)
        s = random_sample(rng, basis, N=20)
        clf = classify.fit_ccc(s, 1, 0.5, "ccc-l")
        # dense oracle: PLS1 weight in the L2 metric, OLS slope, LDA on scores
        W = basis.W
        C = s.coef - s.coef.mean(axis=0)
        y = s.labels - s.labels.mean()
        w = C.T @ y                       # coefficient gradient of cov(<X, w>, Y) in W-metric
        t = C @ W @ w
        beta = w * (t @ y) / (t @ t)
        sc = s.coef @ W @ beta
        y0, y1 = sc[s.labels == 0], sc[s.labels == 1]
        vp = (np.sum((y0 - y0.mean()) ** 2) + np.sum((y1 - y1.mean()) ** 2)) / (s.N - 2)
        d = ((sc - y1.mean()) ** 2 - (sc - y0.mean()) ** 2) / vp + 2 * np.log(y0.size / y1.size)
        np.testing.assert_allclose(clf.direction, beta, rtol=1e-8, atol=1e-12)
        np.testing.assert_array_equal(clf.predict(s.coef), (d < 0).astype(int))

    def test_pcc_full_rank_is_least_squares(self, basis):
        rng = np.random.default_rng(5)
        s = random_sample(rng, basis, N=40)
        lam, _ = classify.within_spectrum(s)
        full = classify.pcc_directions(s, basis.L)[-1]
        C = s.coef - s.coef.mean(axis=0)
        Z = C @ basis.W
        y = s.labels - s.labels.mean()
        ls = np.linalg.lstsq(Z, y, rcond=None)[0]
        assert len(classify.pcc_directions(s, basis.L)) == int(np.sum(lam > 1e-10 * lam[0]))
        np.testing.assert_allclose(Z @ full, Z @ ls, atol=1e-8)

    def test_pcc_warns_and_reduces(self, basis):
        rng = np.random.default_rng(6)
        y = np.array([0, 0, 0, 1, 1, 1])
        C = rng.normal(size=(6, 2)) @ rng.normal(size=(2, basis.L))
        with pytest.warns(RuntimeWarning):
            clf = classify.fit_pcc(sample_from(basis, C, y), 5)
        assert clf.p <= 4

    def test_plcc_collinear_with_half(self, basis):
        rng = np.random.default_rng(9)
        s = random_sample(rng, basis, N=25)
        a = classify.fit_plcc(s, 2)
        b = classify.fit_ccc(s, 2, 0.5, "ccc-l")
        cos = (a.direction @ basis.W @ b.direction) / (
            classify.l2_norm(basis, a.direction) * classify.l2_norm(basis, b.direction))
        assert abs(cos) == pytest.approx(1.0, abs=1e-12)
        assert classify.l2_norm(basis, a.direction) == pytest.approx(1.0, rel=1e-12)

    def test_within_covariance_weights(self, basis):
        rng = np.random.default_rng(10)
        s = random_sample(rng, basis, N=16)
        S = classify.within_covariance(s)
        parts = []
        for k in (0, 1):
            Ck = s.coef[s.labels == k]
            parts.append(np.cov(Ck.T, ddof=0) * Ck.shape[0] / s.N)
        np.testing.assert_allclose(S, parts[0] + parts[1], atol=1e-12)

    def test_json_roundtrip(self, basis):
        rng = np.random.default_rng(11)
        s = random_sample(rng, basis, N=30)
        for kind in Kind:
            clf = classify.fit(s, kind, 2, 0.3 if kind.is_ccc else None)
            back = FittedClassifier.from_dict(json.loads(json.dumps(clf.to_dict())))
            np.testing.assert_array_equal(back.discriminant(s.coef), clf.discriminant(s.coef))
            assert back.kind is kind and back.p == clf.p

    def test_single_group(self, basis):
        C = np.ones((5, basis.L))
        with pytest.raises(InsufficientGroupError):
            classify.fit_ccc(sample_from(basis, C, [0] * 5), 1, 0.5)
