import numpy as np
import pytest

from vner import numerics as nx


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def grad_of(loss_fn, params):
    """Analytic gradients of ``loss_fn()`` for each tensor in ``params``."""
    for p in params:
        p.zero_grad()
    with nx.Graph() as g:
        loss = loss_fn()
    g.backward(loss)
    return [p.grad.copy() for p in params]


def max_fd_error(loss_fn, params, eps=1e-5, floor=1e-7):
    """Worst elementwise relative error of backprop against central differences."""
    analytic = grad_of(loss_fn, params)
    worst = 0.0
    for p, a in zip(params, analytic):
        num = nx.numeric_gradient(lambda: loss_fn().item(), p, eps)
        worst = max(worst, float(nx.relative_error(a, num, floor).max()))
    return worst


def leaf(rng, *shape, scale=1.0):
    return nx.Tensor(rng.normal(scale=scale, size=shape), requires_grad=True)


# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
