import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from aadmc import _kernels as K

BACKENDS = K.available_backends()
U64 = st.integers(0, 2 ** 64 - 1)


@settings(max_examples=30)
@given(U64, U64, st.integers(0, 2 ** 64 - 2), U64, U64, U64)
def test_philox_matches_numpy_bit_generator(k0, k1, c0, c1, c2, c3):
    # numpy increments its counter before the first block
    ref = np.random.Philox(key=np.array([k0, k1], dtype=np.uint64),
                           counter=np.array([c0, c1, c2, c3], dtype=np.uint64)).random_raw(4)
    for mod in BACKENDS.values():
        got = [int(np.asarray(w).item()) for w in mod.philox4x64(c0 + 1, c1, c2, c3, k0, k1)]
        assert got == [int(v) for v in ref]


def test_philox_known_block():
    words = K.philox4x64(6, 7, 9, 11, 123, 456)
    assert [int(np.asarray(w).item()) for w in words] == [
        12072919890263103468, 14101492705934546857, 21877371380590591, 3258054473053230681]


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
def test_backends_agree_bit_for_bit():
    py, cy = BACKENDS["numpy"], BACKENDS["cython"]
    for args in ((7, 0, 0, 33, 13), (7, 1, 1000, 5, 9, 3), (2 ** 63 + 5, 2, 17, 64, 1)):
        assert py.uniforms(*args).tobytes() == cy.uniforms(*args).tobytes()
        assert py.normals(*args).tobytes() == cy.normals(*args).tobytes()
    z = py.normals(3, 0, 0, 257, 40)
    for coeffs in ((1.0, 0.0012, 0.2, 0.1414, 0.0, 0.0), (0.0, 0.0012, 0.2, 0.1414, 0.02, 1.0)):
        a = py.euler_gbm(40.0, coeffs[0], *coeffs[1:], z)
        b = cy.euler_gbm(40.0, coeffs[0], *coeffs[1:], z)
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))
    args = (5, 2, 100, np.array([38.0, 41.0, 44.0]), np.array([0, 3, 12]), 64, 0.0012, 0.2, 0.1414, 30.0, 55.0)
    a, b = py.inner_terminal(*args), cy.inner_terminal(*args)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))


def test_selected_backend_is_named():
    assert K.BACKEND in ("numpy", "cython")


def test_uniforms_are_indexed_by_path_and_step():
    full = K.uniforms(9, 0, 0, 20, 30)
    np.testing.assert_array_equal(K.uniforms(9, 0, 5, 3, 30), full[5:8])
    np.testing.assert_array_equal(K.uniforms(9, 0, 0, 20, 10, step0=13), full[:, 13:23])
    assert not np.array_equal(K.uniforms(9, 1, 0, 20, 30), full)
    assert not np.array_equal(K.uniforms(10, 0, 0, 20, 30), full)
    assert full.min() > 0 and full.max() < 1


def test_normals_pass_ks():
    z = K.normals(1, 0, 0, 20_000, 5).ravel()
    assert kstest(z, "norm").pvalue > 1e-3


def test_inner_paths_use_contiguous_path_indices():
    term, alive = K.inner_terminal(4, 2, 10, np.array([40.0, 40.0]), np.array([2, 2]), 3, 0.001, 0.2, 0.1, 0.0, 1e9)
    z = K.normals(4, 2, 10, 6, 2)
    x = np.full(6, 40.0)
    for k in range(2):
        x = x + 0.001 * x + (x * 0.2) * (0.1 * z[:, k])
    np.testing.assert_array_equal(term.ravel(), x)
    assert alive.all()


def test_zero_step_inner_paths_stay_put():
    term, alive = K.inner_terminal(1, 2, 0, np.array([42.0]), np.array([0]), 4, 0.0, 0.2, 0.1, 30.0, 55.0)
    assert (term == 42.0).all() and alive.all()


def test_backend_benchmark_runs(capsys):
    import importlib.util
    import pathlib
    path = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--paths", "2000", "--steps", "4", "--repeats", "1"])
    out = capsys.readouterr().out
    assert "normals" in out and "inner_terminal" in out
    assert "False" not in out
