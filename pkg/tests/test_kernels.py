import numpy as np
import pytest

from hdqkd import _kernels_py, kernels

cython_kernels = pytest.importorskip("hdqkd._kernels")


@pytest.fixture(params=[1, 2, 3])
def data(request):
    n = request.param
    rng = np.random.default_rng(n)
    e, p, x = (rng.normal(0.3, 0.5, size=(5000, n)) for _ in range(3))
    e[:10] = p[:10]  # exact ties
    return dict(e=e, p=p, x=x, t=np.full(n, 0.3), ref=rng.integers(0, 2, (5000, n), dtype=np.uint8),
                keep=rng.integers(0, 2, 5000, dtype=np.uint8),
                group=rng.integers(0, 2, 5000, dtype=np.uint8))


def test_backends_agree(data):
    for mod in (_kernels_py,):
        b1, s1 = mod.classify_eve(data["e"], data["p"])
        b2, s2 = cython_kernels.classify_eve(data["e"], data["p"])
        np.testing.assert_array_equal(b1, b2)
        np.testing.assert_array_equal(s1, s2)
        np.testing.assert_array_equal(mod.orthant_tally(data["e"], data["p"]),
                                      cython_kernels.orthant_tally(data["e"], data["p"]))
        args = (data["x"], data["t"], data["ref"], data["keep"], data["group"])
        np.testing.assert_array_equal(mod.score_bob(*args), cython_kernels.score_bob(*args))


def test_tally_consistent_with_classification(data):
    basis, signs = _kernels_py.classify_eve(data["e"], data["p"])
    n = signs.shape[1]
    counts = _kernels_py.orthant_tally(data["e"], data["p"])
    assert counts.sum() == len(basis)
    assert counts[-1] == np.sum(basis == 1)
    idx = signs[basis == 0] @ (1 << np.arange(n)[::-1])
    np.testing.assert_array_equal(np.bincount(idx, minlength=2 ** n), counts[:-1])


def test_ties_go_to_e_basis(data):
    basis, _ = kernels.classify_eve(data["e"][:10], data["p"][:10])
    assert np.all(basis == 0)


def test_score_bob_small_example():
    x = np.array([[0.5, -0.4], [0.1, 0.9], [-0.6, -0.6], [0.7, 0.7]])
    ref = np.array([[0, 0], [0, 0], [1, 0], [0, 0]], dtype=np.uint8)
    keep = np.array([1, 1, 1, 0], dtype=np.uint8)
    group = np.zeros(4, dtype=np.uint8)
    out = kernels.score_bob(x, [0.3, 0.3], ref, keep, group)
    # kept 3, postselected rows 0 and 2; row 0 errs in mode 2, row 2 in mode 2
    assert out[0].tolist() == [3, 2, 2, 0, 2]
    assert out[1].tolist() == [0, 0, 0, 0, 0]


def test_environment_forces_pure_python_backend():
    import os
    import subprocess
    import sys

    env = dict(os.environ, HDQKD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from hdqkd import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND == "cython"
