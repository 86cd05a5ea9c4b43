"""Multimode weak coherent signal states and their homodyne statistics.

Quadratures follow the convention [E, P] = i/2, so a coherent state measured
in its own quadrature gives a Gaussian of variance 1/4 centred on the signed
amplitude, and a zero-mean Gaussian of the same width in the conjugate one.
"""

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

#: Standard deviation of a single homodyne outcome on a coherent state.
QUADRATURE_STD = 0.5

_PEAK = np.sqrt(2.0 / np.pi)


class Basis(enum.IntEnum):
    """Quadrature used for every mode of a pulse."""

    E = 0
    P = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ContractError(f"unknown basis {value!r}") from None
        return cls(int(value))

    def other(self):
        return Basis(1 - self)


@dataclass(frozen=True)
class PreparedState:
    """One of Alice's 2^(N+1) product states.

    ``signs`` holds the bits nu_k: mode k carries amplitude (-1)**nu_k * a_k in
    the chosen quadrature (phase 0/pi for E, pi/2 / 3pi/2 for P).
    """

    basis: Basis
    signs: tuple
    amplitudes: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis.parse(self.basis))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if len(self.signs) != len(self.amplitudes):
            raise ContractError("signs and amplitudes must have equal length")
        if not self.signs:
            raise ContractError("a state needs at least one mode")
        if any(s not in (0, 1) for s in self.signs):
            raise ContractError("sign bits must be 0 or 1")
        if any(not np.isfinite(a) or a < 0 for a in self.amplitudes):
            raise ContractError("amplitudes must be finite and non-negative")

    @property
    def n_modes(self):
        return len(self.signs)

    def signed_amplitudes(self):
        return np.where(np.array(self.signs) == 1, -1.0, 1.0) * np.array(self.amplitudes)

    def flipped(self):
        """Same basis, every sign bit complemented."""
        return PreparedState(self.basis, tuple(1 - s for s in self.signs), self.amplitudes)

    def phases(self):
        """Optical phase phi_k of each mode, in radians."""
        base = 0.0 if self.basis is Basis.E else np.pi / 2
        return tuple(base + np.pi * s for s in self.signs)

    def label(self):
        signs = "".join("-" if s else "+" for s in self.signs)
        return f"{self.basis.name}{signs}"


def alphabet(basis, amplitudes):
    """All 2^N states of one basis, sign patterns in lexicographic order."""
    amplitudes = tuple(amplitudes)
    return [PreparedState(basis, signs, amplitudes)
            for signs in itertools.product((0, 1), repeat=len(amplitudes))]


def _as_outcomes(x, n_modes):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != n_modes:
        raise ContractError(f"outcome vector must have trailing length {n_modes}, got shape {x.shape}")
    return x


def measured_means(state, basis_measured):
    """Per-mode mean of Bob's outcome for ``state`` measured in ``basis_measured``."""
    if Basis.parse(basis_measured) is state.basis:
        return state.signed_amplitudes()
    return np.zeros(state.n_modes)


def quadrature_density(state, basis_measured, x):
    """Probability density of the quadrature vector ``x``.

    ``x`` may carry leading batch axes; the last axis runs over modes.
    """
    x = _as_outcomes(x, state.n_modes)
    m = measured_means(state, basis_measured)
    return np.prod(_PEAK * np.exp(-2.0 * (x - m) ** 2), axis=-1)


def ensemble_density(basis_prepared, amplitudes, basis_measured, x):
    """Density of the sign-averaged state of one basis (what Bob sees after sifting).

    In the conjugate basis every sign pattern gives the same vacuum-like
    Gaussian, so the average collapses to a single term.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    x = _as_outcomes(x, amplitudes.size)
    if Basis.parse(basis_prepared) is not Basis.parse(basis_measured):
        return np.prod(_PEAK * np.exp(-2.0 * x ** 2), axis=-1)
    # the average of products factorises into a product of per-mode averages
    per_mode = 0.5 * _PEAK * (np.exp(-2.0 * (x - amplitudes) ** 2)
                              + np.exp(-2.0 * (x + amplitudes) ** 2))
    return np.prod(per_mode, axis=-1)


def sample_quadrature(state, basis_measured, rng, size=None):
    """Draw homodyne outcomes for ``state``.

    Returns shape ``(N,)`` when ``size`` is None, otherwise ``(size, N)``.
    """
    if not isinstance(rng, np.random.Generator):
        raise ContractError("a numpy Generator is required")
    m = measured_means(state, basis_measured)
    shape = m.shape if size is None else (size,) + m.shape
    return rng.normal(m, QUADRATURE_STD, size=shape)
