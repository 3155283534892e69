import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def central_gradient(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        g[a] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    """Norm-wise relative error of ``a`` against the oracle ``b``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def simplex3_grid(step=1e-3):
    """Every point of the 3-simplex on a grid of the given step, as an (m, 3) array."""
    k = int(round(1 / step))
    i, j = np.triu_indices(k + 1)
    a = i * step
    b = (j - i) * step
    return np.column_stack([a, b, np.clip(1.0 - a - b, 0.0, None)])


def grid_minimizer(Q, step=1e-3):
    """Brute-force minimizer of w^T Q w over the 3-simplex grid."""
    w = simplex3_grid(step)
    obj = np.einsum("ij,jk,ik->i", w, Q, w)
    i = int(np.argmin(obj))
    return w[i], float(obj[i])


def random_psd(rng, n, cond=20.0):
    """Random symmetric positive definite matrix with condition number ``cond``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.geomspace(1.0, cond, n)
    return (q * ev) @ q.T


ACCEPTANCE = []


def record_criterion(label, passed, detail):
    """Log one acceptance line; printed again in the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'}  criterion {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
