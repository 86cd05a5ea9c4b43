import itertools
import math

import numpy as np
import pytest

from hdqkd.errors import AccuracyError, ContractError
from hdqkd.eve import (MONTE_CARLO, REDUCED_QUADRATURE, JointOutcome, SphericalPoint,
                       attack_profile, eve_decision, from_spherical, joint_outcome_density,
                       orthant_from_angles, resend_mixture, sign_patterns, to_spherical)
from hdqkd.states import Basis, PreparedState

# Independent oracle values at a = 1: Cartesian integrals over each orthant
# (1-D quad with erf inner probability for N=1, dblquad per quadrant for N=2).
ORACLE_N1 = {(1,): 0.7078609817371411, (-1,): 0.025171489600055125, "wrong": 0.1334837643314019}
ORACLE_N2 = {(1, 1): 0.718682801890113, (1, -1): 0.047910877076632136,
             (-1, 1): 0.04791087707663214, (-1, -1): 0.0015557233709015943,
             "wrong": 0.04598493014643029}


@pytest.mark.parametrize("n,oracle", [(1, ORACLE_N1), (2, ORACLE_N2)])
def test_quadrature_matches_cartesian_oracle(n, oracle):
    prof = attack_profile([1.0] * n)
    for s, p in prof.correct_basis.items():
        assert p == pytest.approx(oracle[s], abs=1e-9)
    assert prof.wrong_basis == pytest.approx(oracle["wrong"], abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_normalisation(n):
    for a in (0.0, 0.3, 1.0, 2.5):
        assert abs(attack_profile([a] * n).normalization_residual()) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_zero_amplitude_is_uniform(n):
    prof = attack_profile([0.0] * n)
    for p in list(prof.correct_basis.values()) + [prof.wrong_basis]:
        assert p == pytest.approx(1 / 2 ** (n + 1), abs=1e-10)


def test_pattern_probability_depends_only_on_flip_count():
    prof = attack_profile([0.9] * 3)
    by_flips = {}
    for s, p in prof.correct_basis.items():
        by_flips.setdefault(s.count(-1), []).append(p)
    for ps in by_flips.values():
        assert max(ps) - min(ps) < 1e-10
    # more flips, less likely
    means = [np.mean(by_flips[k]) for k in range(4)]
    assert all(x > y for x, y in zip(means, means[1:]))


def test_correct_guess_grows_with_amplitude():
    vals = [attack_profile([a, a]).correct_basis[(1, 1)] for a in np.linspace(0, 3, 13)]
    assert all(y > x for x, y in zip(vals, vals[1:]))


def test_unequal_amplitudes_break_mode_symmetry():
    prof = attack_profile([0.4, 1.6])
    assert prof.correct_basis[(-1, 1)] > prof.correct_basis[(1, -1)]
    assert abs(prof.normalization_residual()) < 1e-9


@pytest.mark.parametrize("n", [1, 2])
def test_monte_carlo_agrees_with_quadrature(n):
    q = attack_profile([1.0] * n)
    mc = attack_profile([1.0] * n, method="mc", samples=2_000_000, seed=11)
    assert mc.method == MONTE_CARLO and q.method == REDUCED_QUADRATURE
    for s in sign_patterns(n):
        assert abs(mc.correct_basis[s] - q.correct_basis[s]) < 4 * mc.stderr[s] + 1e-12
    assert abs(mc.wrong_basis - q.wrong_basis) < 4 * mc.stderr["wrong"]
    assert abs(mc.normalization_residual()) < 1e-12


def test_monte_carlo_reproducible_across_workers():
    a = attack_profile([0.8, 0.8], method="mc", samples=600_000, seed=5, workers=1)
    b = attack_profile([0.8, 0.8], method="mc", samples=600_000, seed=5, workers=3)
    assert a.details["counts"] == b.details["counts"]


def test_quadrature_refuses_large_n():
    with pytest.raises(ContractError):
        attack_profile([1.0] * 4)
    assert attack_profile([1.0] * 4, method="mc", samples=100_000).n_modes == 4


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_unreachable_accuracy_reports_partial_estimate():
    with pytest.raises(AccuracyError) as info:
        attack_profile([1.0, 1.0, 1.0], accuracy=1e-30)
    assert info.value.estimate is not None


def test_density_normalised_n1():
    from scipy import integrate
    total = integrate.dblquad(lambda p, e: joint_outcome_density([1.0], [e], [p]), -6, 6, -6, 6)[0]
    assert total == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_spherical_round_trip(n):
    rng = np.random.default_rng(n)
    for _ in range(50):
        v = rng.normal(size=n)
        pt = to_spherical(v)
        assert pt.radius >= 0
        assert all(0 <= t <= math.pi for t in pt.angles[:-1])
        assert 0 <= pt.angles[-1] < 2 * math.pi
        assert from_spherical(pt) == pytest.approx(v, abs=1e-12)
        assert orthant_from_angles(pt) == tuple(int(x < 0) for x in v)


def test_spherical_zero_vector():
    pt = to_spherical([0.0, 0.0, 0.0])
    assert pt.radius == 0.0 and pt.angles == (0.0, 0.0)
    assert from_spherical(SphericalPoint(2.0, (math.pi / 2,))) == pytest.approx([0.0, 2.0], abs=1e-15)


def test_decision_examples():
    amps = (1.0, 1.0)
    s = eve_decision(JointOutcome((0.9, -0.2), (0.1, 0.3)), amps)
    assert s.basis is Basis.E and s.signs == (0, 1)
    s = eve_decision(JointOutcome((0.1, 0.1), (-0.5, 0.4)), amps)
    assert s.basis is Basis.P and s.signs == (1, 0)
    # equal norms: E basis wins
    s = eve_decision(JointOutcome((0.3, 0.4), (0.5, 0.0)), amps)
    assert s.basis is Basis.E


def test_resend_mixture():
    prof = attack_profile([1.0, 1.0])
    state = PreparedState(Basis.P, (1, 0), (1.0, 1.0))
    mix = resend_mixture(state, prof)
    assert len(mix) == 8
    assert sum(mix.values()) == pytest.approx(1.0, abs=1e-9)
    assert mix[state] == pytest.approx(prof.correct_basis[(1, 1)])
    assert mix[state.flipped()] == pytest.approx(prof.correct_basis[(-1, -1)])
    for signs in itertools.product((0, 1), repeat=2):
        assert mix[PreparedState(Basis.E, signs, (1.0, 1.0))] == pytest.approx(prof.wrong_basis)
