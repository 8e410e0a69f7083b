"""Cross-backend agreement between the compiled and numpy kernels."""

import numpy as np
import pytest

from syngen import _kernels_py

ckernels = pytest.importorskip(
    "syngen._ckernels", reason="compiled kernel extension not built"
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_matmul_agrees(rng):
    for m, k, n in ((1, 1, 1), (3, 4, 2), (8, 8, 8), (13, 64, 31)):
        a = rng.standard_normal((m, k))
        b = rng.standard_normal((k, n))
        assert np.allclose(ckernels.matmul(a, b), _kernels_py.matmul(a, b),
                           rtol=1e-13, atol=1e-13)


def test_transposed_matmuls_agree(rng):
    a = rng.standard_normal((5, 7))
    b = rng.standard_normal((9, 7))
    assert np.allclose(ckernels.matmul_nt(a, b), _kernels_py.matmul_nt(a, b), rtol=1e-13)
    c = rng.standard_normal((7, 5))
    d = rng.standard_normal((7, 9))
    assert np.allclose(ckernels.matmul_tn(c, d), _kernels_py.matmul_tn(c, d), rtol=1e-13)


def test_softmax_and_backward_agree(rng):
    x = rng.standard_normal((6, 11)) * 3
    x[0, 3] = -np.inf  # masked entry
    y_c = ckernels.softmax_rows(x)
    y_p = _kernels_py.softmax_rows(x)
    assert np.allclose(y_c, y_p, atol=1e-14)
    assert y_c[0, 3] == 0.0 and y_p[0, 3] == 0.0
    gy = rng.standard_normal((6, 11))
    assert np.allclose(
        ckernels.softmax_rows_backward(y_c, gy),
        _kernels_py.softmax_rows_backward(y_p, gy),
        atol=1e-14,
    )


def test_log_softmax_and_backward_agree(rng):
    x = rng.standard_normal((4, 9)) * 5
    l_c = ckernels.log_softmax_rows(x)
    l_p = _kernels_py.log_softmax_rows(x)
    assert np.allclose(l_c, l_p, atol=1e-13)
    gy = rng.standard_normal((4, 9))
    assert np.allclose(
        ckernels.log_softmax_rows_backward(l_c, gy),
        _kernels_py.log_softmax_rows_backward(l_p, gy),
        atol=1e-13,
    )


def test_elementwise_agree(rng):
    x = rng.standard_normal((5, 6)) * 10
    gy = rng.standard_normal((5, 6))
    assert np.array_equal(ckernels.relu(x), _kernels_py.relu(x))
    assert np.array_equal(ckernels.relu_backward(x, gy), _kernels_py.relu_backward(x, gy))
    assert np.allclose(ckernels.leaky_relu(x, 0.2), _kernels_py.leaky_relu(x, 0.2), atol=1e-16)
    assert np.allclose(
        ckernels.leaky_relu_backward(x, gy, 0.2),
        _kernels_py.leaky_relu_backward(x, gy, 0.2), atol=1e-16,
    )
    s_c = ckernels.sigmoid(x)
    s_p = _kernels_py.sigmoid(x)
    assert np.allclose(s_c, s_p, atol=1e-15)
    assert np.allclose(
        ckernels.sigmoid_backward(s_c, gy), _kernels_py.sigmoid_backward(s_p, gy),
        atol=1e-15,
    )


def test_adam_agrees(rng):
    p_c = rng.standard_normal(64)
    p_p = p_c.copy()
    g = rng.standard_normal(64)
    m_c, v_c = np.zeros(64), np.zeros(64)
    m_p, v_p = np.zeros(64), np.zeros(64)
    for step in range(1, 6):
        ckernels.adam_update(p_c, g, m_c, v_c, 1e-3, 0.9, 0.999, 1e-8, step)
        _kernels_py.adam_update(p_p, g, m_p, v_p, 1e-3, 0.9, 0.999, 1e-8, step)
    assert np.allclose(p_c, p_p, atol=1e-15)
    assert np.allclose(m_c, m_p, atol=1e-15)
    assert np.allclose(v_c, v_p, atol=1e-15)


def test_compiled_softmax_sequential_tail_extension(rng):
    # The compiled row sums accumulate sequentially, so appending masked
    # columns must leave the prefix bit-identical.
    x = rng.standard_normal((3, 9))
    x2 = np.concatenate([x, np.full((3, 3), -np.inf)], axis=1)
    base = ckernels.softmax_rows(x)
    ext = ckernels.softmax_rows(x2)
    assert np.array_equal(base, ext[:, :9])


def test_backend_selection_env(tmp_path):
    import subprocess
    import sys

    code = "import syngen.backend as b; print(b.BACKEND_NAME)"
    for want in ("python", "compiled"):
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"PATH": "/usr/bin:/bin", "SYNGEN_BACKEND": want},
            capture_output=True, text=True,
        )
        assert out.stdout.strip() == want, out.stderr
