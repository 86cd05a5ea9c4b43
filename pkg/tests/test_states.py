import numpy as np
import pytest
from scipy import integrate

from hdqkd.errors import ContractError
from hdqkd.states import (Basis, PreparedState, alphabet, ensemble_density, measured_means,
                          quadrature_density, sample_quadrature)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_alphabet_has_two_to_the_n_members(n):
    states = alphabet(Basis.E, [0.7] * n)
    assert len(states) == 2 ** n
    assert len(set(states)) == 2 ** n


def test_state_validation():
    with pytest.raises(ContractError):
        PreparedState(Basis.E, (0, 1), (1.0,))
    with pytest.raises(ContractError):
        PreparedState(Basis.E, (2,), (1.0,))
    with pytest.raises(ContractError):
        PreparedState(Basis.P, (0,), (-0.1,))
    with pytest.raises(ContractError):
        Basis.parse("Q")


def test_phases_and_labels():
    s = PreparedState("P", (0, 1), (1.0, 1.0))
    assert s.phases() == pytest.approx((np.pi / 2, 3 * np.pi / 2))
    assert s.label() == "P+-"
    assert s.flipped().signs == (1, 0)
    assert Basis.E.other() is Basis.P


def test_means_in_matching_and_conjugate_basis():
    s = PreparedState(Basis.E, (1, 0), (0.4, 0.9))
    assert measured_means(s, Basis.E) == pytest.approx([-0.4, 0.9])
    assert measured_means(s, Basis.P) == pytest.approx([0.0, 0.0])


def test_single_mode_density_normalised_with_variance_quarter():
    s = PreparedState(Basis.E, (0,), (1.3,))
    f = lambda x: quadrature_density(s, Basis.E, [x])
    assert integrate.quad(f, -10, 10)[0] == pytest.approx(1.0, abs=1e-12)
    var = integrate.quad(lambda x: (x - 1.3) ** 2 * f(x), -10, 10)[0]
    assert var == pytest.approx(0.25, abs=1e-12)


def test_two_mode_density_normalised():
    s = PreparedState(Basis.P, (1, 0), (0.5, 1.0))
    total = integrate.dblquad(lambda y, x: quadrature_density(s, Basis.P, [x, y]), -8, 8, -8, 8)[0]
    assert total == pytest.approx(1.0, abs=1e-9)


def test_ensemble_density_is_average_over_signs():
    amps = [0.6, 1.1]
    x = np.array([[0.3, -0.2], [1.0, 1.4], [-0.9, 0.1]])
    direct = np.mean([quadrature_density(s, Basis.E, x) for s in alphabet(Basis.E, amps)], axis=0)
    assert ensemble_density(Basis.E, amps, Basis.E, x) == pytest.approx(direct, rel=1e-14)
    vac = quadrature_density(PreparedState(Basis.E, (0, 0), (0.0, 0.0)), Basis.E, x)
    assert ensemble_density(Basis.E, amps, Basis.P, x) == pytest.approx(vac, rel=1e-14)


def test_sampling_moments():
    rng = np.random.default_rng(3)
    s = PreparedState(Basis.E, (1, 0), (0.8, 0.2))
    x = sample_quadrature(s, Basis.E, rng, size=200_000)
    assert x.shape == (200_000, 2)
    assert x.mean(axis=0) == pytest.approx([-0.8, 0.2], abs=0.005)
    assert x.std(axis=0) == pytest.approx([0.5, 0.5], abs=0.005)
    with pytest.raises(ContractError):
        sample_quadrature(s, Basis.E, np.random.RandomState(0))
