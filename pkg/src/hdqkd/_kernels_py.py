"""NumPy implementations of the per-pulse kernels.

Used when the compiled extension is unavailable, and as its reference.
Sign bits follow the state convention: bit 1 means a negative component.
"""

import numpy as np

BACKEND = "python"


def _pattern_index(bits):
    n_modes = bits.shape[1]
    weights = 1 << np.arange(n_modes - 1, -1, -1)
    return bits.astype(np.int64) @ weights


def classify_eve(e, p):
    """Basis and sign bits of Eve's resend for each double-homodyne outcome."""
    e = np.ascontiguousarray(e, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    x2 = np.einsum("ij,ij->i", e, e)
    y2 = np.einsum("ij,ij->i", p, p)
    use_e = x2 >= y2
    basis = np.where(use_e, 0, 1).astype(np.uint8)
    signs = np.where(use_e[:, None], e < 0, p < 0).astype(np.uint8)
    return basis, signs


def orthant_tally(e, p):
    """Counts of Eve's decisions for outcomes of the all-positive E input.

    Entries 0..2^N-1 count correct-basis decisions by sign pattern
    (lexicographic, bit 1 = negative); the last entry counts wrong-basis ones.
    """
    basis, signs = classify_eve(e, p)
    n_modes = signs.shape[1]
    counts = np.zeros(2 ** n_modes + 1, dtype=np.int64)
    correct = basis == 0
    counts[: 2 ** n_modes] = np.bincount(_pattern_index(signs[correct]), minlength=2 ** n_modes)
    counts[-1] = np.count_nonzero(~correct)
    return counts


def score_bob(x, thresholds, ref_signs, keep, group):
    """Tally postselection and decoding errors over kept (sifted) pulses.

    Returns an int64 array of shape (2, 3 + N) indexed by ``group`` (0 or 1)
    with columns: kept, postselected, symbol errors, then per-mode bit errors.
    """
    x = np.asarray(x, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    keep = np.asarray(keep, dtype=bool)
    group = np.asarray(group, dtype=np.uint8)
    n_modes = x.shape[1]
    out = np.zeros((2, 3 + n_modes), dtype=np.int64)
    passed = keep & np.all(np.abs(x) >= thresholds, axis=1)
    wrong = (x < 0) != np.asarray(ref_signs, dtype=bool)
    for g in (0, 1):
        in_g = group == g
        sel = passed & in_g
        out[g, 0] = np.count_nonzero(keep & in_g)
        out[g, 1] = np.count_nonzero(sel)
        out[g, 2] = np.count_nonzero(np.any(wrong[sel], axis=1))
        out[g, 3:] = np.count_nonzero(wrong[sel], axis=0)
    return out
