import itertools

import mpmath
import numpy as np
import pytest
from scipy import integrate

from hdqkd import metrics
from hdqkd.errors import ContractError, UndefinedMetricError
from hdqkd.eve import AttackProfile, attack_profile


def _pe_oracle(t, a):
    mpmath.mp.dps = 40
    t, a = mpmath.mpf(t), mpmath.mpf(a)
    s = mpmath.sqrt(2)
    return 0.5 * (mpmath.erfc(s * (t - a)) + mpmath.erfc(s * (t + a)))


def _iqber_oracle(ts, amps):
    mpmath.mp.dps = 40
    s = mpmath.sqrt(2)
    pe = mpmath.mpf(1)
    good = mpmath.mpf(1)
    for t, a in zip(ts, amps):
        pe *= _pe_oracle(t, a)
        good *= mpmath.erfc(s * (mpmath.mpf(t) - mpmath.mpf(a))) / 2
    return 1 - good / pe


@pytest.mark.parametrize("t,a", [(0.0, 0.0), (0.3, 1.0), (0.75, 0.2), (2.0, 3.0), (1.5, 0.05)])
def test_single_mode_pe_matches_high_precision(t, a):
    assert metrics.pe_single_mode(t, a) == pytest.approx(float(_pe_oracle(t, a)), rel=1e-13)


@pytest.mark.parametrize("ts,amps", [((0.3,), (1.0,)), ((0.75, 0.3), (0.5, 1.2)),
                                     ((0.5, 0.5, 0.5), (1.0, 0.8, 0.6))])
def test_iqber_matches_high_precision(ts, amps):
    assert metrics.iqber(ts, amps) == pytest.approx(float(_iqber_oracle(ts, amps)), rel=1e-12)


def test_pe_by_direct_integration_of_two_mode_density():
    t, a = 0.4, 0.9
    g = lambda x, m: np.sqrt(2 / np.pi) * np.exp(-2 * (x - m) ** 2)
    # sign-averaged single-mode density, integrated outside the band, squared
    outside = 2 * integrate.quad(lambda x: 0.5 * (g(x, a) + g(x, -a)), t, np.inf)[0]
    assert metrics.postselection_efficiency([t, t], [a, a]) == pytest.approx(outside ** 2, rel=1e-12)


def test_two_mode_iqber_from_region_integrals():
    # error rate = 1 - P(both modes on the right side and kept) / P(kept)
    t, a = (0.3, 0.6), (1.1, 0.7)
    g = lambda x, m: np.sqrt(2 / np.pi) * np.exp(-2 * (x - m) ** 2)
    f = lambda y, x: g(x, a[0]) * g(y, a[1])
    right = integrate.dblquad(f, t[0], 10, t[1], 10, epsabs=1e-13)[0]
    kept = sum(integrate.dblquad(f, *(sorted((s0 * t[0], s0 * 10))), *(sorted((s1 * t[1], s1 * 10))),
                                 epsabs=1e-13)[0]
               for s0, s1 in itertools.product((1, -1), repeat=2))
    assert metrics.iqber(t, a) == pytest.approx(1 - right / kept, rel=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_zero_threshold_keeps_everything(n):
    for a in (0.0, 0.5, 2.0):
        assert metrics.postselection_efficiency([0.0] * n, [a] * n) == 1.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_iqber_bounded_on_grid(n):
    cap = (2 ** n - 1) / 2 ** n
    for t in np.linspace(0, 2.5, 11):
        for a in np.linspace(0, 3, 13):
            q = metrics.iqber([t] * n, [a] * n)
            assert 0.0 <= q <= cap + 1e-12


def test_iqber_undefined_when_nothing_kept():
    with pytest.raises(UndefinedMetricError):
        metrics.iqber([40.0], [0.1])


def test_length_mismatch_rejected():
    with pytest.raises(ContractError):
        metrics.postselection_efficiency([0.3, 0.3], [1.0])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trivial_profile_leaves_metrics_unchanged(n):
    prof = AttackProfile.trivial(n)
    for t, a in [(0.3, 1.0), (0.75, 0.4), (1.2, 2.0)]:
        ts, amps = [t] * n, [a] * n
        assert metrics.pe_under_attack(ts, amps, prof) == pytest.approx(
            metrics.postselection_efficiency(ts, amps), abs=1e-15)
        assert metrics.qber_under_attack(ts, amps, prof) == pytest.approx(
            metrics.iqber(ts, amps), abs=1e-12)


def test_wrong_basis_resend_gives_random_symbols():
    # every resend in the wrong basis: Bob's symbol is uniform over 2^N
    n = 2
    probs = {s: 0.0 for s in itertools.product((1, -1), repeat=n)}
    prof = AttackProfile(n, probs, 1 / 2 ** n)
    q = metrics.qber_under_attack([0.5] * n, [1.0] * n, prof)
    assert q == pytest.approx(1 - 1 / 2 ** n, abs=1e-12)


def test_unnormalised_profile_rejected():
    prof = AttackProfile(1, {(1,): 0.5, (-1,): 0.1}, 0.1)
    with pytest.raises(ContractError):
        metrics.pe_under_attack([0.3], [1.0], prof)


def test_evaluate_report():
    prof = attack_profile([1.0, 1.0])
    rep = metrics.evaluate([0.3, 0.3], [0.8, 0.8], prof)
    assert rep.qber_attacked > rep.iqber
    assert metrics.evaluate([0.3], [1.0]).pe_attacked is None


@pytest.mark.parametrize("n", [1, 2, 3])
def test_small_amplitude_limit_is_approached_linearly(n):
    # both the error rate and Eve's table reach their a -> 0 limits at rate O(a)
    cap = (2 ** n - 1) / 2 ** n
    slopes = [(cap - metrics.iqber([0.5] * n, [a] * n)) / a for a in (1e-3, 1e-4, 1e-5)]
    assert slopes[1] == pytest.approx(slopes[2], rel=1e-3)
    assert slopes[0] == pytest.approx(slopes[2], rel=1e-2)
    dev = [attack_profile([a] * n).correct_basis[(1,) * n] - 1 / 2 ** (n + 1) for a in (1e-2, 1e-3)]
    assert dev[0] / dev[1] == pytest.approx(10.0, rel=0.02)
