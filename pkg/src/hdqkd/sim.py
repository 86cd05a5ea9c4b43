"""Monte Carlo simulation of the protocol, pulse by pulse.

Alice prepares a random state, Eve intercepts with probability eta, the
channel attenuates amplitudes by sqrt(T), Bob measures a random basis, and the
pair sifts and postselects. Pulses are processed in fixed-size shards with
seeds spawned from one root seed, so a report depends only on the config,
never on the number of workers.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels, metrics
from .errors import ContractError
from .eve import attack_profile, pattern_label, sign_patterns
from .keyrate import EVE_TAPS, eve_amplitude
from .states import Basis, QUADRATURE_STD

SHARD_SIZE = 1 << 17
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SessionConfig:
    amplitudes: tuple
    thresholds: tuple
    eta: float = 0.0
    transmittance: float = 1.0
    n_pulses: int = 1_000_000
    seed: int = 42
    eve_tap: str = "source"
    trace_length: int = 0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if len(self.amplitudes) != len(self.thresholds) or not self.amplitudes:
            raise ContractError("amplitudes and thresholds must be non-empty and equal length")
        if any(a < 0 for a in self.amplitudes) or any(t < 0 for t in self.thresholds):
            raise ContractError("amplitudes and thresholds must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise ContractError("eta must lie in [0, 1]")
        if not 0.0 < self.transmittance <= 1.0:
            raise ContractError("transmittance must lie in (0, 1]")
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ContractError("n_pulses must be a positive integer")
        if self.eve_tap not in EVE_TAPS:
            raise ContractError(f"eve_tap must be one of {EVE_TAPS}")
        if self.trace_length < 0:
            raise ContractError("trace_length must be non-negative")

    @classmethod
    def uniform(cls, n_modes, amplitude, threshold, **kwargs):
        return cls((amplitude,) * n_modes, (threshold,) * n_modes, **kwargs)

    @property
    def n_modes(self):
        return len(self.amplitudes)


@dataclass
class PulseRecord:
    index: int
    alice_basis: Basis
    alice_signs: tuple
    eve_intercepted: bool
    eve_resend: tuple  # (Basis, signs) or None
    bob_basis: Basis
    bob_outcome: tuple
    sifted: bool
    postselected: bool
    bob_bits: tuple  # None when Bob discards the pulse


def bob_assign(outcome, thresholds):
    """Bob's bit pattern: 1 for x_k >= t_k, 0 for x_k <= -t_k, None inside any band."""
    x = np.asarray(outcome, dtype=float)
    t = np.asarray(thresholds, dtype=float)
    if x.shape != t.shape:
        raise ContractError("outcome and thresholds must have equal length")
    bits = []
    for xk, tk in zip(x, t):
        if xk >= tk:
            bits.append(1)
        elif xk <= -tk:
            bits.append(0)
        else:
            return None
    return tuple(bits)


def _binomial(k, n):
    if n == 0:
        return None, None
    p = k / n
    return p, math.sqrt(p * (1.0 - p) / n)


@dataclass
class GroupCounts:
    total: int = 0
    sifted: int = 0
    postselected: int = 0
    symbol_errors: int = 0
    bit_errors: list = field(default_factory=list)

    @property
    def pe(self):
        return _binomial(self.postselected, self.sifted)

    @property
    def qber(self):
        return _binomial(self.symbol_errors, self.postselected)


@dataclass
class SessionReport:
    config: SessionConfig
    clean: GroupCounts
    intercepted: GroupCounts
    eve_counts: list  # relative patterns then wrong basis, over intercepted pulses
    backend: str = kernels.BACKEND
    trace: list = None

    @property
    def overall(self):
        n = self.config.n_modes
        out = GroupCounts(bit_errors=[0] * n)
        for g in (self.clean, self.intercepted):
            out.total += g.total
            out.sifted += g.sifted
            out.postselected += g.postselected
            out.symbol_errors += g.symbol_errors
            out.bit_errors = [a + b for a, b in zip(out.bit_errors, g.bit_errors)]
        return out

    @property
    def sift_ratio(self):
        o = self.overall
        return _binomial(o.sifted, o.total)

    def qber_blend(self):
        """eta * q' + (1 - eta) * q from the two groups, with propagated error."""
        eta = self.config.eta
        terms = []
        for weight, group in ((eta, self.intercepted), (1.0 - eta, self.clean)):
            if weight == 0.0:
                continue
            q, se = group.qber
            if q is None:
                return None, None
            terms.append((weight * q, weight * se))
        return sum(t[0] for t in terms), math.sqrt(sum(t[1] ** 2 for t in terms))

    def empirical_profile(self):
        """Eve's decision frequencies over intercepted pulses, keyed like AttackProfile."""
        n = self.config.n_modes
        total = sum(self.eve_counts)
        if total == 0:
            return None
        out = {}
        for pattern, k in zip(sign_patterns(n), self.eve_counts[:-1]):
            out[pattern_label(pattern)] = _binomial(k, total)
        w, se = _binomial(self.eve_counts[-1], total)
        out["wrong"] = (w / 2 ** n, se / 2 ** n)
        return out

    def to_dict(self):
        def group(g):
            pe, pe_se = g.pe
            q, q_se = g.qber
            return {"total": g.total, "sifted": g.sifted, "postselected": g.postselected,
                    "symbol_errors": g.symbol_errors, "bit_errors": list(g.bit_errors),
                    "pe": pe, "pe_stderr": pe_se, "qber": q, "qber_stderr": q_se}

        blend, blend_se = self.qber_blend()
        sift, sift_se = self.sift_ratio
        profile = self.empirical_profile()
        return {
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in asdict(self.config).items()},
            "counts": group(self.overall),
            "clean": group(self.clean),
            "intercepted": group(self.intercepted),
            "sift_ratio": sift, "sift_ratio_stderr": sift_se,
            "qber_blend": blend, "qber_blend_stderr": blend_se,
            "eve": {"counts": list(self.eve_counts),
                    "labels": [pattern_label(s) for s in sign_patterns(self.config.n_modes)] + ["wrong"],
                    "profile": None if profile is None else
                    {k: {"p": v[0], "stderr": v[1]} for k, v in profile.items()}},
        }


def _run_shard(args):
    config, seed_seq, size, start = args
    n = config.n_modes
    rng = np.random.default_rng(seed_seq)
    a = np.asarray(config.amplitudes)
    a_bob = np.sqrt(config.transmittance) * a
    a_eve = np.array([eve_amplitude(x, config.transmittance, config.eve_tap) for x in a])

    alice_basis = rng.integers(0, 2, size, dtype=np.uint8)
    alice_signs = rng.integers(0, 2, (size, n), dtype=np.uint8)
    state_basis = alice_basis.copy()
    state_signs = alice_signs.copy()
    intercept = np.zeros(size, dtype=bool)
    eve_counts = np.zeros(2 ** n + 1, dtype=np.int64)
    if config.eta > 0.0:
        intercept = rng.random(size) < config.eta
        idx = np.flatnonzero(intercept)
        sent = (1.0 - 2.0 * alice_signs[idx]) * (a_eve / SQRT2)
        on_e = (alice_basis[idx] == Basis.E)[:, None]
        e = np.where(on_e, sent, 0.0) + rng.normal(0.0, QUADRATURE_STD, (idx.size, n))
        p = np.where(on_e, 0.0, sent) + rng.normal(0.0, QUADRATURE_STD, (idx.size, n))
        r_basis, r_signs = kernels.classify_eve(e, p)
        state_basis[idx] = r_basis
        state_signs[idx] = r_signs
        same = r_basis == alice_basis[idx]
        rel = (r_signs[same] ^ alice_signs[idx][same]).astype(np.int64)
        weights = 1 << np.arange(n - 1, -1, -1)
        eve_counts[: 2 ** n] = np.bincount(rel @ weights, minlength=2 ** n)
        eve_counts[-1] = np.count_nonzero(~same)

    bob_basis = rng.integers(0, 2, size, dtype=np.uint8)
    match = (bob_basis == state_basis)[:, None]
    mean = np.where(match, (1.0 - 2.0 * state_signs) * a_bob, 0.0)
    x = mean + rng.normal(0.0, QUADRATURE_STD, (size, n))
    sifted = bob_basis == alice_basis
    group = intercept.astype(np.uint8)
    counts = kernels.score_bob(x, config.thresholds, alice_signs, sifted, group)
    totals = np.array([size - np.count_nonzero(intercept), np.count_nonzero(intercept)])

    trace = None
    if config.trace_length:
        k = min(config.trace_length, size)
        s = slice(size - k, size)
        trace = (np.arange(start + size - k, start + size), alice_basis[s], alice_signs[s],
                 intercept[s], state_basis[s], state_signs[s], bob_basis[s], x[s], sifted[s])
    return counts, totals, eve_counts, trace


def _build_trace(parts, config):
    keep = config.trace_length
    cols = [np.concatenate([p[i] for p in parts]) for i in range(9)]
    cols = [c[-keep:] for c in cols]
    records = []
    for i in range(cols[0].size):
        outcome = tuple(float(v) for v in cols[7][i])
        sifted = bool(cols[8][i])
        bits = bob_assign(outcome, config.thresholds) if sifted else None
        eve = (Basis(int(cols[4][i])), tuple(int(b) for b in cols[5][i])) if cols[3][i] else None
        records.append(PulseRecord(int(cols[0][i]), Basis(int(cols[1][i])),
                                   tuple(int(b) for b in cols[2][i]), bool(cols[3][i]), eve,
                                   Basis(int(cols[6][i])), outcome, sifted,
                                   bits is not None, bits))
    return records


def run_session(config, workers=1):
    """Simulate ``config.n_pulses`` pulses and tally the outcome."""
    n = config.n_modes
    sizes = [SHARD_SIZE] * (config.n_pulses // SHARD_SIZE)
    if config.n_pulses % SHARD_SIZE:
        sizes.append(config.n_pulses % SHARD_SIZE)
    seeds = np.random.SeedSequence(config.seed).spawn(len(sizes))
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    jobs = [(config, s, size, int(st)) for s, size, st in zip(seeds, sizes, starts)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_run_shard, jobs))
    else:
        results = [_run_shard(j) for j in jobs]

    counts = sum(r[0] for r in results)
    totals = sum(r[1] for r in results)
    eve_counts = sum(r[2] for r in results)
    groups = [GroupCounts(int(totals[g]), int(counts[g, 0]), int(counts[g, 1]), int(counts[g, 2]),
                          [int(v) for v in counts[g, 3:]]) for g in (0, 1)]
    trace = None
    if config.trace_length:
        # shards hold their own tails; the global tail may span several of them
        tail = [r[3] for r in results][-(config.trace_length // SHARD_SIZE + 2):]
        trace = _build_trace(tail, config)
    return SessionReport(config, groups[0], groups[1], [int(v) for v in eve_counts],
                         trace=trace)


def analytic_comparison(report, method="reduced_quadrature"):
    """Side-by-side analytic values and z-scores for the empirical rates.

    z uses the binomial standard error at the analytic probability.
    """
    cfg = report.config
    a_bob = np.sqrt(cfg.transmittance) * np.asarray(cfg.amplitudes)
    a_eve = [eve_amplitude(x, cfg.transmittance, cfg.eve_tap) for x in cfg.amplitudes]
    rows = {}

    def add(name, k, n, p):
        if n == 0:
            return
        emp = k / n
        se = math.sqrt(max(p * (1 - p), 0.0) / n)
        z = (emp - p) / se if se > 0 else (0.0 if emp == p else math.inf)
        rows[name] = {"empirical": emp, "analytic": p, "stderr": se, "z": z, "n": n}

    pe = metrics.postselection_efficiency(cfg.thresholds, a_bob)
    q = metrics.iqber(cfg.thresholds, a_bob)
    add("pe", report.clean.postselected, report.clean.sifted, pe)
    add("iqber", report.clean.symbol_errors, report.clean.postselected, q)
    if cfg.eta > 0.0:
        profile = attack_profile(a_eve, method=method)
        pe_att = metrics.pe_under_attack(cfg.thresholds, a_bob, profile)
        q_att = metrics.qber_under_attack(cfg.thresholds, a_bob, profile)
        add("pe_attacked", report.intercepted.postselected, report.intercepted.sifted, pe_att)
        add("qber_attacked", report.intercepted.symbol_errors, report.intercepted.postselected, q_att)
        n_int = sum(report.eve_counts)
        for (label, p, _), k in zip(profile.entries()[:-1], report.eve_counts[:-1]):
            add(f"p[{label}]", k, n_int, p)
        add("p[wrong-basis total]", report.eve_counts[-1], n_int, 2 ** cfg.n_modes * profile.wrong_basis)
    return rows


def write_trace(records, path):
    """One pulse per line: index, bases, sign bits, Eve flag, outcomes, flags, Bob's bits."""
    if not records:
        n = 0
    else:
        n = len(records[0].alice_signs)
    header = (["index", "alice_basis", "alice_signs", "eve_flag", "bob_basis"]
              + [f"x{k + 1}" for k in range(n)] + ["sifted", "postselected", "bob_signs"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            writer.writerow([r.index, r.alice_basis.name, "".join(map(str, r.alice_signs)),
                             int(r.eve_intercepted), r.bob_basis.name]
                            + [repr(v) for v in r.bob_outcome]
                            + [int(r.sifted), int(r.postselected),
                               "" if r.bob_bits is None else "".join(map(str, r.bob_bits))])
