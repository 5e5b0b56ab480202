import itertools

import numpy as np
import pytest

from idealcp.tensor import SymmetricTensor


def example_tensor():
    """The 3x3x3 worked example with cliques {1,2} and {1,3}."""
    return SymmetricTensor(3, 3, {
        (1, 1, 1): 2, (1, 1, 2): 1, (1, 1, 3): 1, (1, 2, 2): 1,
        (1, 3, 3): 1, (2, 2, 2): 2, (3, 3, 3): 1,
    })


def screen_failing_tensor():
    # A_123 > 0 while A_112 = 0
    return SymmetricTensor(3, 3, {(1, 2, 3): 1, (1, 1, 1): 1, (2, 2, 2): 1, (3, 3, 3): 1})


def cauchy_schwarz_tensor():
    # z_22 <= sqrt(z_40 z_04) = 1 < 5 for any moment sequence
    return SymmetricTensor(4, 2, {(1, 1, 1, 1): 1, (2, 2, 2, 2): 1, (1, 1, 2, 2): 5,
                                  (1, 1, 1, 2): 0.01, (1, 2, 2, 2): 0.01})


def naive_outer_sum(weights, vectors, m):
    """Dense sum of w v^(x)m over the full m-way array."""
    n = len(vectors[0])
    out = np.zeros((n,) * m)
    for w, v in zip(weights, vectors):
        t = np.asarray(w, dtype=float)
        for _ in range(m):
            t = np.multiply.outer(t, np.asarray(v, dtype=float))
        out += t
    return out


def dense_array(a: SymmetricTensor):
    out = np.zeros((a.dim,) * a.order)
    for idx in itertools.product(range(1, a.dim + 1), repeat=a.order):
        out[tuple(i - 1 for i in idx)] = a[idx]
    return out


@pytest.fixture
def ex1():
    return example_tensor()


@pytest.fixture
def screen_fail():
    return screen_failing_tensor()


@pytest.fixture
def cs4():
    return cauchy_schwarz_tensor()


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, title, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
