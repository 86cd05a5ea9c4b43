"""Mutual informations, secure key gain, loss accounting and gain optimisation."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import metrics
from .errors import ContractError, UndefinedMetricError
from .eve import REDUCED_QUADRATURE, AttackProfile, attack_profile

FIBER_ATTENUATION_DB_PER_KM = 0.2

#: Where Eve taps the line. "source": she measures Alice's full amplitude and
#: her resend then crosses the lossy channel. "receiver": she measures the
#: already attenuated pulse.
EVE_TAPS = ("source", "receiver")

#: Operating point used for loss sweeps when no search is requested.
REFERENCE_THRESHOLD = 0.30
REFERENCE_AMPLITUDE = 1.20

TABLE_LOSSES = (0.00, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.65, 0.70, 0.75, 0.80, 0.81)


def _xlog2x(x):
    return 0.0 if x <= 0.0 else x * math.log2(x)


def alphabet_entropy(p, n_symbols):
    """Information per symbol of an N-ary symmetric channel with error rate ``p``.

    log2(N) + (1-p) log2(1-p) + p log2(p/(N-1)), with 0 log 0 = 0.
    """
    if n_symbols < 2:
        raise ContractError("alphabet needs at least two symbols")
    p_max = (n_symbols - 1) / n_symbols
    # tolerate rounding just outside the admissible range
    if not (-1e-12 <= p <= p_max + 1e-12):
        raise ContractError(f"error rate {p} outside [0, {p_max}]")
    p = min(max(p, 0.0), p_max)
    # p log2(p/(N-1)) split so a subnormal p cannot underflow inside the log
    value = math.log2(n_symbols) + _xlog2x(1.0 - p) + _xlog2x(p) - p * math.log2(n_symbols - 1)
    return max(value, 0.0)


def mutual_info_ab(q, q_attacked, eta, n_symbols):
    """Alice-Bob information at the interception-weighted error rate."""
    if not 0.0 <= eta <= 1.0:
        raise ContractError("eta must lie in [0, 1]")
    return alphabet_entropy(eta * q_attacked + (1.0 - eta) * q, n_symbols)


def mutual_info_ae_bound(profile):
    """Upper bound on Alice-Eve information assuming Eve always knows the basis."""
    sigma = profile.sigma
    if sigma <= 0.0:
        raise UndefinedMetricError("Eve never picks the right basis; bound undefined")
    n_symbols = 2 ** profile.n_modes
    value = math.log2(n_symbols) + sum(_xlog2x(p / sigma) for p in profile.correct_basis.values())
    return min(max(value, 0.0), math.log2(n_symbols))


def apply_loss(amplitudes, transmittance):
    """Amplitudes after a channel of power transmittance T (a' = sqrt(T) a)."""
    if not 0.0 < transmittance <= 1.0:
        raise ContractError("transmittance must lie in (0, 1]")
    return np.sqrt(transmittance) * np.asarray(amplitudes, dtype=float)


def loss_to_distance(loss):
    """Fibre length in km for a power loss 1 - T at 0.2 dB/km."""
    if not 0.0 <= loss < 1.0:
        raise ContractError("loss must lie in [0, 1)")
    if loss == 0.0:
        return 0.0
    return -10.0 * math.log10(1.0 - loss) / FIBER_ATTENUATION_DB_PER_KM


@dataclass
class GainPoint:
    thresholds: tuple
    amplitudes: tuple
    eta: float
    transmittance: float
    gain: float
    raw_gain: float
    i_ab: float
    i_ae_bound: float
    pe: float
    iqber: float
    pe_attacked: float = None
    qber_attacked: float = None

    @property
    def n_modes(self):
        return len(self.thresholds)

    @property
    def threshold(self):
        return self.thresholds[0]

    @property
    def amplitude(self):
        return self.amplitudes[0]

    def as_dict(self):
        return asdict(self)


def secure_key_gain(thresholds, amplitudes_effective, eta, profile, *,
                    amplitudes=None, transmittance=1.0):
    """Secure key gain per pulse, clipped at zero (``raw_gain`` keeps the sign).

    ``amplitudes_effective`` are the amplitudes reaching Bob; ``amplitudes``
    (Alice's, before loss) is only recorded in the result.
    """
    if not 0.0 <= eta <= 1.0:
        raise ContractError("eta must lie in [0, 1]")
    e0 = np.atleast_1d(np.asarray(thresholds, dtype=float))
    a_eff = np.atleast_1d(np.asarray(amplitudes_effective, dtype=float))
    n_symbols = 2 ** e0.size
    pe = metrics.postselection_efficiency(e0, a_eff)
    q = metrics.iqber(e0, a_eff)
    if eta == 0.0:
        i_ab = alphabet_entropy(q, n_symbols)
        raw = 0.5 * pe * i_ab
        pe_att = q_att = None
        i_ae = mutual_info_ae_bound(profile) if profile is not None else 0.0
    else:
        pe_att = metrics.pe_under_attack(e0, a_eff, profile)
        q_att = metrics.qber_under_attack(e0, a_eff, profile)
        i_ab = mutual_info_ab(q, q_att, eta, n_symbols)
        i_ae = mutual_info_ae_bound(profile)
        raw = 0.5 * ((eta * pe_att + (1.0 - eta) * pe) * i_ab - eta * pe_att * i_ae)
    if amplitudes is None:
        amplitudes = a_eff / math.sqrt(transmittance)
    return GainPoint(tuple(e0.tolist()), tuple(np.atleast_1d(amplitudes).astype(float).tolist()),
                     float(eta), float(transmittance), max(raw, 0.0), raw, i_ab, i_ae,
                     pe, q, pe_att, q_att)


@lru_cache(maxsize=4096)
def _profile_cached(n_modes, amplitude, method):
    return attack_profile([amplitude] * n_modes, method=method)


def eve_amplitude(amplitude, transmittance, eve_tap="source"):
    if eve_tap not in EVE_TAPS:
        raise ContractError(f"eve_tap must be one of {EVE_TAPS}")
    return amplitude if eve_tap == "source" else math.sqrt(transmittance) * amplitude


def gain_at(n_modes, threshold, amplitude, transmittance, eta, eve_tap="source",
            method=REDUCED_QUADRATURE):
    """Gain for equal per-mode threshold and amplitude (Alice's, before loss)."""
    if n_modes < 1:
        raise ContractError("n_modes must be positive")
    a_eff = float(apply_loss(amplitude, transmittance))
    a_eve = round(eve_amplitude(amplitude, transmittance, eve_tap), 12)
    profile = _profile_cached(n_modes, a_eve, method)
    return secure_key_gain([threshold] * n_modes, [a_eff] * n_modes, eta, profile,
                           amplitudes=[amplitude] * n_modes, transmittance=transmittance)


@dataclass(frozen=True)
class SearchSpec:
    """Box and resolution for the (threshold, amplitude) search.

    A degenerate range (lo == hi) pins that coordinate.
    """

    threshold: tuple = (0.0, 2.5)
    amplitude: tuple = (0.05, 3.0)
    step: float = 0.05
    tol: float = 1e-3

    @classmethod
    def fixed(cls, threshold, amplitude):
        return cls((threshold, threshold), (amplitude, amplitude))

    def axes(self):
        if self.step <= 0 or self.tol <= 0:
            raise ContractError("step and tol must be positive")
        out = []
        for lo, hi in (self.threshold, self.amplitude):
            if hi < lo:
                raise ContractError(f"empty search range ({lo}, {hi})")
            n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
            out.append(np.round(lo + self.step * np.arange(n), 12))
        return out


def _grid_column(args):
    n_modes, amplitude, thresholds, transmittance, eta, eve_tap = args
    return [gain_at(n_modes, t, amplitude, transmittance, eta, eve_tap).raw_gain for t in thresholds]


def optimize_gain(n_modes, transmittance, eta, search=None, eve_tap="source", workers=1):
    """Maximise the raw gain over (threshold, amplitude): grid, then compass search.

    Deterministic for a given ``search``. The returned point is clipped like
    any :class:`GainPoint`; inspect ``raw_gain`` to see how negative it is.
    """
    search = search or SearchSpec()
    e0_axis, a_axis = search.axes()
    jobs = [(n_modes, float(a), e0_axis.tolist(), transmittance, eta, eve_tap) for a in a_axis]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            columns = list(pool.map(_grid_column, jobs))
    else:
        columns = [_grid_column(j) for j in jobs]
    table = np.array(columns)  # (amplitude, threshold)
    ia, it = np.unravel_index(int(np.argmax(table)), table.shape)
    x = np.array([e0_axis[it], a_axis[ia]])
    best = table[ia, it]
    lo = np.array([search.threshold[0], search.amplitude[0]])
    hi = np.array([search.threshold[1], search.amplitude[1]])
    free = hi > lo

    def value(point):
        return gain_at(n_modes, point[0], point[1], transmittance, eta, eve_tap).raw_gain

    step = search.step / 2
    while step >= search.tol and free.any():
        moved = False
        for k in np.flatnonzero(free):
            for direction in (1.0, -1.0):
                trial = x.copy()
                trial[k] = min(max(trial[k] + direction * step, lo[k]), hi[k])
                if np.allclose(trial, x):
                    continue
                g = value(trial)
                if g > best + 1e-15:
                    x, best, moved = trial, g, True
                    break
        if not moved:
            step /= 2
    return gain_at(n_modes, float(x[0]), float(x[1]), transmittance, eta, eve_tap)


def loss_table(eta, losses=TABLE_LOSSES, modes=(1, 2, 3), search=None, eve_tap="source", workers=1):
    """Optimised gains per (loss, N). Returns rows of (loss, distance, {N: GainPoint})."""
    if search is None:
        search = SearchSpec.fixed(REFERENCE_THRESHOLD, REFERENCE_AMPLITUDE)
    rows = []
    for loss in losses:
        t = 1.0 - loss
        cells = {n: optimize_gain(n, t, eta, search, eve_tap, workers) for n in modes}
        rows.append((loss, loss_to_distance(loss), cells))
    return rows
