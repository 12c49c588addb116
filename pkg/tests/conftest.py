import numpy as np
import pytest

from splinegan.numerics import Tape, Tensor, backprop, finite_diff_gradient, relative_error


def grad_check(fn, *arrays, eps=1e-3):
    """Max relative error between backprop and central differences of ``fn``.

    ``fn`` takes tensors and returns a scalar tensor.
    """
    worst = 0.0
    for k in range(len(arrays)):
        def f(x, k=k):
            args = [Tensor(a) for a in arrays]
            args[k] = Tensor(x)
            return fn(*args).item()

        xs = [Tensor(a, requires_grad=True) for a in arrays]
        with Tape() as tape:
            loss = fn(*xs)
            g = backprop(tape, loss, wrt=xs)[xs[k]].data
        fd = finite_diff_gradient(f, arrays[k], eps)
        worst = max(worst, relative_error(g, fd))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report
_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    n = getattr(item.function, "criterion", None)
    if n is None or rep.when != "call":
        return
    entry = _criteria.setdefault(n, {"ok": True, "detail": []})
    entry["ok"] = entry["ok"] and rep.passed
    entry["detail"].extend(getattr(item, "_criterion_detail", []))
    if rep.failed and not getattr(item, "_criterion_detail", None):
        entry["detail"].append(str(rep.longrepr.reprcrash.message).splitlines()[0]
                               if hasattr(rep.longrepr, "reprcrash") else "error")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        detail = "; ".join(e["detail"])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}"
                                    + (f" ({detail})" if detail else ""))


def criterion(n):
    """Mark a test as (part of) acceptance criterion ``n``."""
    def wrap(fn):
        fn.criterion = n
        return fn
    return wrap


@pytest.fixture
def note(request):
    """Attach a short measurement to the criterion line printed at the end of the run."""
    request.node._criterion_detail = []
    return request.node._criterion_detail.append
