"""Smoke test for the tubal_fgd_py extension.

Uses an installed module if there is one, otherwise loads the shared library
from target/release (build it with `cargo build --release -p tubal-fgd-py`).
"""

import importlib.util
import math
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    try:
        import tubal_fgd_py

        return tubal_fgd_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libtubal_fgd_py.so"
        if lib.exists():
            spec = importlib.util.spec_from_file_location("tubal_fgd_py", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("tubal_fgd_py not found; run `cargo build --release -p tubal-fgd-py` first")


def main():
    t = load()

    # 1x1 slices reduce to circular convolution of tubes.
    a = ((1, 1, 3), [1.0, 2.0, 3.0])
    b = ((1, 1, 3), [1.0, 0.0, 0.0])
    shape, data = t.t_product(a, b)
    assert shape == (1, 1, 3), shape
    assert all(abs(x - w) < 1e-12 for x, w in zip(data, [1.0, 2.0, 3.0])), data
    assert t.conj_transpose(a)[1] == [1.0, 3.0, 2.0]

    p = t.gen_problem(6, 3, 2, 400, seed=2)
    assert t.tubal_rank(p["x_star"]) == 2
    assert len(p["y"]) == 400 and p["kappa"] >= 1.0

    res = t.solve(6, 3, 2, 400, 2, seed=2, rho=10.0, max_iters=3000, tol=1e-6)
    assert res["stop_reason"] == "rel_error", res["stop_reason"]
    assert res["rel_errors"][-1] <= 1e-6

    delta, ratios = t.empirical_rip(6, 3, 1, 1000, trials=10)
    assert len(ratios) == 10 and 0.0 <= delta < 1.0

    with tempfile.TemporaryDirectory() as d:
        path = str(Path(d) / "x.t3r")
        t.write_tensor(path, p["x_star"])
        assert t.read_tensor(path) == p["x_star"]
        files = t.run_experiment(
            "rip", [("n", "4"), ("n3", "2"), ("trials", "3"), ("seeds", "1"), ("out", d)]
        )
        assert any(f.endswith("rip.csv") for f in files), files

    try:
        t.gen_problem(0, 3, 2, 10)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
    try:
        t.solve(5, 2, 1, 100, 1, eta=50.0, max_iters=50)
    except ArithmeticError:
        pass
    else:
        raise AssertionError("expected ArithmeticError")

    assert math.isfinite(res["objectives"][-1])
    print("python smoke test ok")


if __name__ == "__main__":
    main()
