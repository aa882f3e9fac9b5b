import random
import sys

import numpy as np
import pytest

from vfefl import dvfe
from vfefl.algebra import P
from vfefl.classgroup import cl_gen


def pytest_addoption(parser):
    parser.addoption(
        "--interactive",
        action="store_true",
        default=False,
        help="run the sigma protocols without Fiat-Shamir and widen the rewinding-extractor sweep",
    )


@pytest.fixture(scope="session")
def interactive(request):
    return request.config.getoption("--interactive")


@pytest.fixture(scope="session")
def cg():
    return cl_gen(P, rng=random.Random(2024))


@pytest.fixture(scope="session")
def make_pp(cg):
    """Public parameters sharing one class group, so setup cost is paid once."""

    def make(n, m, session="tests", **kw):
        return dvfe.setup(n, m, cg=cg, session=session, seed=0, **kw)

    return make


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    """Real MNIST digits (5000 bundled with mlxtend) written as IDX files."""
    mlx = pytest.importorskip("mlxtend.data")
    from vfefl.flsim import write_idx

    X, y = mlx.mnist_data()
    d = tmp_path_factory.mktemp("mnist")
    write_idx(d / "train-images-idx3-ubyte", X.reshape(-1, 28, 28).astype(np.uint8))
    write_idx(d / "train-labels-idx1-ubyte", y.astype(np.uint8))
    return d


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
