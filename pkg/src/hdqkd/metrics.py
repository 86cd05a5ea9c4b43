"""Closed-form postselection efficiency and error rates, with and without Eve.

All formulas assume square threshold frontiers: a pulse is kept only when
every mode satisfies |x_k| >= threshold_k.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .errors import ContractError, UndefinedMetricError

SQRT2 = np.sqrt(2.0)

# scipy's erfc is accurate to ~1e-15 relative inside this range
ERFC_CLAMP = 8.0


def erfc(x):
    """Complementary error function, clamped to {0, 2} outside |x| <= 8."""
    x = np.asarray(x, dtype=float)
    out = special.erfc(x)
    out = np.where(x > ERFC_CLAMP, 0.0, out)
    out = np.where(x < -ERFC_CLAMP, 2.0, out)
    return out if out.ndim else float(out)


def _vectors(thresholds, amplitudes):
    e0 = np.atleast_1d(np.asarray(thresholds, dtype=float))
    a = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    if e0.shape != a.shape or e0.ndim != 1:
        raise ContractError(f"thresholds {e0.shape} and amplitudes {a.shape} must be equal-length vectors")
    if np.any(e0 < 0) or np.any(a < 0):
        raise ContractError("thresholds and amplitudes must be non-negative")
    if not (np.all(np.isfinite(e0)) and np.all(np.isfinite(a))):
        raise ContractError("thresholds and amplitudes must be finite")
    return e0, a


def pe_single_mode(threshold, amplitude):
    """Probability that one correct-basis mode lands outside (-t, t)."""
    if threshold < 0 or amplitude < 0:
        raise ContractError("threshold and amplitude must be non-negative")
    return 0.5 * (erfc(SQRT2 * (threshold - amplitude)) + erfc(SQRT2 * (threshold + amplitude)))


def postselection_efficiency(thresholds, amplitudes):
    """2^N postselection efficiency: product of the single-mode efficiencies."""
    e0, a = _vectors(thresholds, amplitudes)
    return float(np.prod([pe_single_mode(t, x) for t, x in zip(e0, a)]))


def _correct_and_kept(e0, a, signs=None):
    # P(kept and every bit decoded as sent) for a correct-basis state whose
    # k-th amplitude is signs[k]*a[k] relative to Alice's
    s = np.ones_like(a) if signs is None else np.asarray(signs, dtype=float)
    return float(np.prod(0.5 * erfc(SQRT2 * (e0 - s * a))))


def _wrong_basis_kept(e0):
    return float(np.prod(erfc(SQRT2 * e0)))


def iqber(thresholds, amplitudes):
    """Intrinsic symbol error rate among postselected correct-basis pulses."""
    e0, a = _vectors(thresholds, amplitudes)
    pe = postselection_efficiency(e0, a)
    if pe <= 0.0:
        raise UndefinedMetricError("postselection efficiency is zero; IQBER undefined")
    return 1.0 - _correct_and_kept(e0, a) / pe


def _check_profile(profile, n_modes, tol=1e-6):
    if profile.n_modes != n_modes:
        raise ContractError(f"profile is for {profile.n_modes} modes, parameters for {n_modes}")
    if abs(profile.normalization_residual()) > tol:
        raise ContractError(f"attack profile is not normalized (residual {profile.normalization_residual():.3g})")


def pe_under_attack(thresholds, amplitudes, profile):
    """Postselection efficiency when every pulse is replaced by Eve's resend."""
    e0, a = _vectors(thresholds, amplitudes)
    _check_profile(profile, e0.size)
    n_states = 2 ** e0.size
    return (profile.sigma * postselection_efficiency(e0, a)
            + n_states * profile.wrong_basis * _wrong_basis_kept(e0))


def qber_under_attack(thresholds, amplitudes, profile):
    """Symbol error rate among postselected pulses that Eve intercepted.

    One minus (probability kept and fully correct) / P'. Wrong-basis resends
    are decoded correctly with probability prod_k erfc(sqrt2 t_k)/2.
    """
    e0, a = _vectors(thresholds, amplitudes)
    pe_att = pe_under_attack(e0, a, profile)
    if pe_att <= 0.0:
        raise UndefinedMetricError("attacked postselection efficiency is zero; QBER undefined")
    n_states = 2 ** e0.size
    good = n_states * profile.wrong_basis * float(np.prod(0.5 * erfc(SQRT2 * e0)))
    for pattern, p in profile.correct_basis.items():
        good += p * _correct_and_kept(e0, a, pattern)
    return 1.0 - good / pe_att


@dataclass
class MetricsReport:
    pe: float
    iqber: float
    pe_attacked: float = None
    qber_attacked: float = None

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value is not None and not (-1e-15 <= value <= 1.0 + 1e-15):
                raise ContractError(f"{name}={value} outside [0, 1]")


def evaluate(thresholds, amplitudes, profile=None):
    """P and q, plus P' and q' when an attack profile is given."""
    report = MetricsReport(postselection_efficiency(thresholds, amplitudes),
                           iqber(thresholds, amplitudes))
    if profile is not None:
        report.pe_attacked = pe_under_attack(thresholds, amplitudes, profile)
        report.qber_attacked = qber_under_attack(thresholds, amplitudes, profile)
    return report
