import numpy as np
import pytest

from snfprune import _kernels
from snfprune._kernels import _fallback

BACKENDS = [("python", _fallback)]
if _kernels.BACKEND == "compiled":
    from snfprune._kernels import _impl
    BACKENDS.append(("compiled", _impl))


def _jacobi(mod, g, tol_scale=1e-12, max_sweeps=30):
    a = np.ascontiguousarray(g, dtype=np.float64).copy()
    v = np.eye(a.shape[0], dtype=np.float64)
    sweeps = mod.jacobi_sweeps(a, v, tol_scale * np.linalg.norm(g), max_sweeps)
    return a, v, sweeps


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_jacobi_diagonal_converges_immediately(name, mod):
    g = np.diag([3.0, 1.0, -2.0])
    a, v, sweeps = _jacobi(mod, g)
    assert sweeps == 0
    assert np.array_equal(np.diag(a), [3.0, 1.0, -2.0])
    assert np.array_equal(v, np.eye(3))


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_jacobi_two_by_two_analytic(name, mod):
    # [[2,-2],[-2,2]] has eigenvalues 4 and 0 (trace 4, determinant 0).
    a, v, sweeps = _jacobi(mod, np.array([[2.0, -2.0], [-2.0, 2.0]]))
    assert sweeps >= 1
    assert sorted(np.diag(a)) == pytest.approx([0.0, 4.0], abs=1e-12)
    assert np.abs(v.T @ v - np.eye(2)).max() < 1e-12


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_jacobi_random_matches_numpy(name, mod):
    rng = np.random.default_rng(1)
    for n in (1, 2, 3, 5, 8, 13, 16):
        m = rng.normal(size=(n, n))
        g = m @ m.T
        a, v, sweeps = _jacobi(mod, g)
        assert sweeps >= 0
        got = np.sort(np.diag(a))
        want = np.sort(np.linalg.eigvalsh(g))
        assert np.abs(got - want).max() <= 1e-8 * np.linalg.norm(g) + 1e-12
        # Decomposition must reconstruct the input.
        assert np.abs(v @ np.diag(np.diag(a)) @ v.T - g).max() <= 1e-8 * np.linalg.norm(g)
        assert np.abs(v.T @ v - np.eye(n)).max() < 1e-8


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_jacobi_zero_budget_reports_nonconvergence(name, mod):
    g = np.array([[2.0, -2.0], [-2.0, 2.0]])
    a = g.copy()
    v = np.eye(2)
    assert mod.jacobi_sweeps(a, v, 1e-12 * np.linalg.norm(g), 0) == -1


@pytest.mark.skipif(_kernels.BACKEND != "compiled", reason="extension not built")
def test_backends_agree_exactly_on_diagonal():
    from snfprune._kernels import _impl
    rng = np.random.default_rng(5)
    for n in (2, 4, 9):
        m = rng.normal(size=(n, n))
        g = m @ m.T
        a1, v1, s1 = _jacobi(_impl, g)
        a2, v2, s2 = _jacobi(_fallback, g)
        assert s1 == s2
        assert np.abs(np.diag(a1) - np.diag(a2)).max() < 1e-12 * np.linalg.norm(g) + 1e-15
        assert np.abs(v1 - v2).max() < 1e-9


def _conv_ref(x, w, sy, sx, py, px):
    # Independent reference: explicit padded loops in python.
    cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * py - kh) // sy + 1
    ow = (wd + 2 * px - kw) // sx + 1
    xp = np.zeros((cin, h + 2 * py, wd + 2 * px))
    xp[:, py:py + h, px:px + wd] = x
    out = np.zeros((cout, oh, ow))
    for co in range(cout):
        for oy in range(oh):
            for ox in range(ow):
                out[co, oy, ox] = np.sum(
                    w[co] * xp[:, oy * sy:oy * sy + kh, ox * sx:ox * sx + kw])
    return out


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_conv_identity_kernel(name, mod):
    x = np.random.default_rng(2).normal(size=(1, 5, 5))
    w = np.ones((1, 1, 1, 1))
    out = np.empty((1, 5, 5))
    mod.conv2d_fill(np.ascontiguousarray(x), np.ascontiguousarray(w), out, 1, 1, 0, 0)
    assert np.array_equal(out, x)


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_conv_zero_weights(name, mod):
    x = np.random.default_rng(3).normal(size=(2, 4, 4))
    w = np.zeros((3, 2, 3, 3))
    out = np.empty((3, 4, 4))
    mod.conv2d_fill(np.ascontiguousarray(x), w, out, 1, 1, 1, 1)
    assert np.array_equal(out, np.zeros((3, 4, 4)))


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_conv_averaging_kernel_interior(name, mod):
    # 3x3 all-1/9 kernel over a constant image: interior outputs equal the
    # constant, border outputs shrink by the zero padding.
    x = np.full((1, 6, 6), 2.5)
    w = np.full((1, 1, 3, 3), 1.0 / 9.0)
    out = np.empty((1, 6, 6))
    mod.conv2d_fill(np.ascontiguousarray(x), np.ascontiguousarray(w), out, 1, 1, 1, 1)
    assert np.allclose(out[0, 1:-1, 1:-1], 2.5)
    assert np.allclose(out[0, 0, 0], 2.5 * 4 / 9)


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_conv_matches_reference_with_strides(name, mod):
    rng = np.random.default_rng(4)
    for sy, sx, py, px, kh, kw in ((1, 1, 0, 0, 1, 1), (1, 1, 1, 1, 3, 3),
                                   (2, 2, 1, 1, 3, 3), (2, 1, 0, 2, 2, 5)):
        x = rng.normal(size=(3, 9, 11))
        w = rng.normal(size=(4, 3, kh, kw))
        want = _conv_ref(x, w, sy, sx, py, px)
        out = np.empty_like(want)
        mod.conv2d_fill(np.ascontiguousarray(x), np.ascontiguousarray(w), out,
                        sy, sx, py, px)
        assert np.abs(out - want).max() < 1e-12
