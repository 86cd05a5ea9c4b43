"""Intercept-resend attack with simultaneous double homodyne detection.

Eve splits each mode on a 50/50 beamsplitter, measures E on one arm and P on
the other, compares the norms X = |E| and Y = |P|, and resends the state of
the winning basis whose signs match the orthant of the winning arm.

Attack statistics are computed for the canonical all-positive E-basis input;
any other input follows by reflecting signs. Sign patterns in an
:class:`AttackProfile` are *relative*: +1 means Eve's resend has the same sign
as Alice's state in that mode.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import kernels
from .errors import AccuracyError, ContractError
from .states import Basis, PreparedState, QUADRATURE_STD

SQRT2 = math.sqrt(2.0)

REDUCED_QUADRATURE = "reduced_quadrature"
MONTE_CARLO = "monte_carlo"
_METHOD_ALIASES = {"quadrature": REDUCED_QUADRATURE, "mc": MONTE_CARLO}

DEFAULT_MC_SAMPLES = 10_000_000
MC_CHUNK = 1 << 18
MAX_QUADRATURE_MODES = 3


def sign_patterns(n_modes):
    """Relative sign patterns in lexicographic order, all-plus first."""
    return list(itertools.product((1, -1), repeat=n_modes))


def pattern_label(pattern):
    return "".join("+" if s > 0 else "-" for s in pattern)


@dataclass
class AttackProfile:
    """Probabilities of Eve's resend relative to Alice's state.

    ``correct_basis`` maps each relative sign pattern to p_s; ``wrong_basis``
    is the probability of each single wrong-basis state (there are 2^N).
    """

    n_modes: int
    correct_basis: dict
    wrong_basis: float
    method: str = "exact"
    stderr: dict = None
    samples: int = None
    amplitudes: tuple = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = set(sign_patterns(self.n_modes))
        if set(self.correct_basis) != expected:
            raise ContractError("correct_basis must cover every sign pattern exactly once")
        for p in list(self.correct_basis.values()) + [self.wrong_basis]:
            if not (-1e-12 <= p <= 1 + 1e-12):
                raise ContractError(f"probability {p} outside [0, 1]")

    @classmethod
    def trivial(cls, n_modes):
        """No attack: the resend is always Alice's own state."""
        probs = {s: 0.0 for s in sign_patterns(n_modes)}
        probs[(1,) * n_modes] = 1.0
        return cls(n_modes, probs, 0.0, method="trivial")

    @property
    def sigma(self):
        """Probability that Eve picks the right basis."""
        return float(sum(self.correct_basis.values()))

    def normalization_residual(self):
        return self.sigma + 2 ** self.n_modes * self.wrong_basis - 1.0

    def entries(self):
        """(label, probability, stderr) rows: 2^N correct-basis entries then the wrong-basis one."""
        err = self.stderr or {}
        rows = [(pattern_label(s), p, err.get(s)) for s, p in self.correct_basis.items()]
        rows.append(("wrong", self.wrong_basis, err.get("wrong")))
        return rows

    def check_normalized(self, tol=1e-6):
        if abs(self.normalization_residual()) > tol:
            raise ContractError(f"attack profile not normalized (residual {self.normalization_residual():.3g})")


@dataclass(frozen=True)
class JointOutcome:
    """Eve's paired results: E-arm and P-arm quadrature vectors."""

    e: tuple
    p: tuple

    def __post_init__(self):
        object.__setattr__(self, "e", tuple(float(v) for v in self.e))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if len(self.e) != len(self.p):
            raise ContractError("E and P arms must have the same number of modes")


@dataclass(frozen=True)
class SphericalPoint:
    """Radius and angles of a point in R^dim. A 1-D point keeps its sign in
    a single angle, 0 or pi."""

    radius: float
    angles: tuple
    dim: int = None

    def __post_init__(self):
        if self.dim is None:
            object.__setattr__(self, "dim", len(self.angles) + 1)


def joint_outcome_density(amplitudes, e, p):
    """Density of Eve's (E, P) outcome for the all-positive E-basis input.

    Each arm carries a/sqrt(2); the P arm is centred on zero. Leading batch
    axes are allowed on ``e`` and ``p``.
    """
    a = np.asarray(amplitudes, dtype=float)
    e = np.asarray(e, dtype=float)
    p = np.asarray(p, dtype=float)
    if e.shape != p.shape or e.shape[-1] != a.size:
        raise ContractError("outcome arms must both have trailing length N")
    expo = -2.0 * (e - a / SQRT2) ** 2 - 2.0 * p ** 2
    return (2.0 / np.pi) ** a.size * np.exp(np.sum(expo, axis=-1))


def to_spherical(v):
    """Hyperspherical coordinates of a quadrature vector.

    Angles 1..N-2 lie in [0, pi], the last in [0, 2pi). For N=1 the single
    angle is 0 or pi. The zero vector (or a vanishing tail) maps to angle 0.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ContractError("expected a non-empty 1-D vector")
    n = v.size
    radius = float(np.sqrt(np.sum(v ** 2)))
    if n == 1:
        return SphericalPoint(radius, (math.pi if v[0] < 0 else 0.0,), 1)
    angles = []
    for j in range(n - 2):
        tail = math.sqrt(float(np.sum(v[j + 1:] ** 2)))
        angles.append(math.atan2(tail, v[j]))
    if n >= 2:
        last = math.atan2(v[-1], v[-2])
        angles.append(last + 2 * math.pi if last < 0 else last)
    return SphericalPoint(radius, tuple(angles))


def from_spherical(point):
    """Inverse of :func:`to_spherical`."""
    angles = point.angles
    if point.dim == 1:
        return np.array([point.radius * math.cos(angles[0])])
    n = len(angles) + 1
    out = np.empty(n)
    carry = point.radius
    for j, theta in enumerate(angles):
        out[j] = carry * math.cos(theta)
        carry *= math.sin(theta)
    out[n - 1] = carry
    return out


def orthant_from_angles(point):
    """Sign bits (1 = negative) of the Cartesian components, read off the angles."""
    angles = point.angles
    if point.dim == 1:
        return (int(math.cos(angles[0]) < 0),)
    bits = [int(math.cos(t) < 0) for t in angles[:-1]]
    last = angles[-1]
    bits.append(int(math.cos(last) < 0))
    bits.append(int(math.sin(last) < 0))
    return tuple(bits)


def eve_decision(outcome, amplitudes):
    """State Eve resends for one double-homodyne outcome.

    Ties X == Y go to the E basis.
    """
    e = np.asarray(outcome.e)
    p = np.asarray(outcome.p)
    amplitudes = tuple(amplitudes)
    if len(amplitudes) != e.size:
        raise ContractError("amplitudes must match the outcome length")
    if np.dot(e, e) >= np.dot(p, p):
        return PreparedState(Basis.E, tuple(int(x < 0) for x in e), amplitudes)
    return PreparedState(Basis.P, tuple(int(x < 0) for x in p), amplitudes)


# --- reduced quadrature -----------------------------------------------------

def _angular_grid(n_modes, n_nodes):
    """Unit vectors and weights covering the positive orthant of S^(N-1)."""
    if n_modes == 1:
        return np.ones((1, 1)), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    theta = (x + 1) * np.pi / 4
    wt = w * np.pi / 4
    grids = np.meshgrid(*([theta] * (n_modes - 1)), indexing="ij")
    weights = np.ones_like(grids[0])
    for k in range(n_modes - 1):
        shape = [1] * (n_modes - 1)
        shape[k] = -1
        weights = weights * wt.reshape(shape)
    units = np.empty(grids[0].shape + (n_modes,))
    carry = np.ones_like(grids[0])
    for j, g in enumerate(grids):
        units[..., j] = carry * np.cos(g)
        # surface element: prod_j sin^(N-2-j) of the polar angles
        weights = weights * np.sin(g) ** (n_modes - 2 - j)
        carry = carry * np.sin(g)
    units[..., -1] = carry
    return units.reshape(-1, n_modes), weights.ravel()


def _positive_orthant_prob(means, n_nodes, epsabs):
    """P[E in the positive orthant and |P| <= |E|] for E-arm means ``means``."""
    n = means.size
    units, weights = _angular_grid(n, n_nodes)
    proj = units @ means
    m2 = float(means @ means)
    r_max = math.sqrt(m2) + 8.0
    norm = (2.0 / np.pi) ** (n / 2)

    def radial(r):
        # radial part of the E-arm Gaussian times P[|P| <= r]
        return (norm * r ** (n - 1) * np.exp(-2.0 * r * r + 4.0 * r * proj - 2.0 * m2)
                * special.gammainc(n / 2, 2.0 * r * r))

    vals, err = integrate.quad_vec(radial, 0.0, r_max, epsabs=epsabs, epsrel=0.0, limit=200)
    return float(weights @ vals), float(np.abs(weights) @ np.full_like(weights, err))


def _wrong_basis_prob(means, epsabs):
    """P[|P| > |E| and every P_k > 0], integrated over the P-arm radius.

    Independent of the orthant route: uses the noncentral chi-square law of |E|.
    """
    n = means.size
    nc = 4.0 * float(means @ means)

    def cdf_x(y):
        if nc == 0.0:
            return stats.chi2.cdf(4 * y * y, n)
        return stats.ncx2.cdf(4 * y * y, n, nc)

    def integrand(y):
        return 2.0 * stats.chi.pdf(2.0 * y, n) * cdf_x(y)

    val, err = integrate.quad(integrand, 0.0, 8.0, epsabs=epsabs, epsrel=0.0, limit=200)
    return val / 2 ** n, err / 2 ** n


def _quadrature_profile(amplitudes, tol, start_nodes=16, max_nodes=256):
    n = amplitudes.size
    if n > MAX_QUADRATURE_MODES:
        raise ContractError(f"reduced quadrature supports N <= {MAX_QUADRATURE_MODES}; use monte_carlo")
    base = amplitudes / SQRT2
    patterns = sign_patterns(n)
    radial_tol = tol * 1e-2

    def evaluate(nodes):
        return np.array([_positive_orthant_prob(np.asarray(s) * base, nodes, radial_tol)[0]
                         for s in patterns])

    nodes = start_nodes
    current = evaluate(nodes)
    while True:
        if n == 1:
            delta = 0.0
            break
        refined = evaluate(2 * nodes)
        delta = float(np.max(np.abs(refined - current)))
        current, nodes = refined, 2 * nodes
        if delta <= tol:
            break
        if nodes >= max_nodes:
            wrong, _ = _wrong_basis_prob(base, radial_tol)
            partial = AttackProfile(n, dict(zip(patterns, np.clip(current, 0, 1))),
                                    min(max(wrong, 0.0), 1.0), method=REDUCED_QUADRATURE,
                                    amplitudes=tuple(amplitudes))
            raise AccuracyError(f"angular quadrature did not reach {tol:g} (last change {delta:.3g})",
                                estimate=partial, error=delta)
    wrong, _ = _wrong_basis_prob(base, radial_tol)
    return AttackProfile(n, dict(zip(patterns, np.clip(current, 0.0, 1.0).tolist())),
                         min(max(wrong, 0.0), 1.0), method=REDUCED_QUADRATURE,
                         amplitudes=tuple(amplitudes.tolist()),
                         details={"angular_nodes": nodes, "angular_change": delta})


# --- Monte Carlo ------------------------------------------------------------

def _mc_chunk(args):
    seed_seq, size, means = args
    rng = np.random.default_rng(seed_seq)
    e = rng.normal(means, QUADRATURE_STD, size=(size, means.size))
    p = rng.normal(0.0, QUADRATURE_STD, size=(size, means.size))
    return kernels.orthant_tally(e, p)


def _mc_profile(amplitudes, samples, seed, workers):
    n = amplitudes.size
    means = amplitudes / SQRT2
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(s, size, means) for s, size in zip(seeds, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = sum(pool.map(_mc_chunk, jobs))
    else:
        counts = sum(map(_mc_chunk, jobs))
    patterns = sign_patterns(n)
    # kernel orders patterns by negative-sign bits, which matches (1, -1) products
    probs = counts[:-1] / samples
    wrong_all = counts[-1] / samples
    stderr = {s: math.sqrt(p * (1 - p) / samples) for s, p in zip(patterns, probs)}
    stderr["wrong"] = math.sqrt(wrong_all * (1 - wrong_all) / samples) / 2 ** n
    return AttackProfile(n, dict(zip(patterns, probs.tolist())), float(wrong_all / 2 ** n),
                         method=MONTE_CARLO, stderr=stderr, samples=samples,
                         amplitudes=tuple(amplitudes.tolist()),
                         details={"counts": counts.tolist(), "seed": seed})


def attack_profile(amplitudes, method=REDUCED_QUADRATURE, accuracy=None, *,
                   samples=None, seed=0, workers=1):
    """Eve's outcome-probability table for the amplitudes she measures.

    ``accuracy`` is the absolute tolerance per entry for the quadrature route
    (default 1e-8) and the target binomial standard error for Monte Carlo,
    which otherwise draws ``samples`` (default 10^7) outcomes.
    """
    a = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    if a.ndim != 1 or a.size == 0:
        raise ContractError("amplitudes must be a non-empty vector")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ContractError("amplitudes must be finite and non-negative")
    method = _METHOD_ALIASES.get(method, method)
    if method == REDUCED_QUADRATURE:
        return _quadrature_profile(a, 1e-8 if accuracy is None else accuracy)
    if method == MONTE_CARLO:
        if samples is None:
            samples = DEFAULT_MC_SAMPLES if accuracy is None else math.ceil(0.25 / accuracy ** 2)
        if samples < 1:
            raise ContractError("samples must be positive")
        return _mc_profile(a, int(samples), seed, max(1, int(workers)))
    raise ContractError(f"unknown method {method!r}")


def resend_mixture(state, profile):
    """Distribution over the states Eve forwards when Alice sends ``state``."""
    profile.check_normalized()
    if profile.n_modes != state.n_modes:
        raise ContractError("profile and state disagree on N")
    mixture = {}
    for pattern, p in profile.correct_basis.items():
        signs = tuple(nu if s > 0 else 1 - nu for nu, s in zip(state.signs, pattern))
        resent = PreparedState(state.basis, signs, state.amplitudes)
        mixture[resent] = mixture.get(resent, 0.0) + p
    for signs in itertools.product((0, 1), repeat=state.n_modes):
        resent = PreparedState(state.basis.other(), signs, state.amplitudes)
        mixture[resent] = mixture.get(resent, 0.0) + profile.wrong_basis
    return mixture
