"""Smoke test for the levydens_py extension.

Build the module with `cargo build --release -p levydens-py` and put a copy of
target/release/liblevydens_py.so named levydens_py.so on PYTHONPATH (the
script does this itself when run from the repository root).
"""

import json
import math
import os
import shutil
import sys
import tempfile


def load():
    try:
        import levydens_py

        return levydens_py
    except ImportError:
        pass
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    for name in ("liblevydens_py.so", "liblevydens_py.dylib"):
        built = os.path.join(root, "target", "release", name)
        if os.path.exists(built):
            tmp = tempfile.mkdtemp()
            shutil.copy(built, os.path.join(tmp, "levydens_py.so"))
            sys.path.insert(0, tmp)
            import levydens_py

            return levydens_py
    sys.exit("levydens_py not found; run `cargo build --release -p levydens-py` first")


def main():
    ld = load()

    gamma = ld.Symbol("chain", 1, 1.0)
    assert str(gamma) == "chain:n=1,eps=1.0"
    # Gamma subordinator: E exp(i xi S_1) = 1 / (1 - i xi)
    assert abs(gamma.eta(2.0) - complex(math.log(math.sqrt(5.0)), -math.atan(2.0))) < 1e-14
    assert abs(gamma.char_fn(1.0, 2.0) - 1.0 / complex(1.0, -2.0)) < 1e-14

    d = ld.density(gamma, 2.0, 1.0)
    assert abs(d["p"] - math.exp(-1.0)) < 1e-8, d
    rows = ld.density_grid(gamma, 0.5, [0.5, 1.0, 2.0], method="pairing")
    for r in rows:
        exact = math.exp(-r["x"]) / math.sqrt(math.pi * r["x"])
        assert abs(r["p"] - exact) < 1e-6 * exact, r

    laplace = ld.Symbol.parse("sq:n=1,eps=1.0")
    assert abs(ld.density(laplace, 1.0, 1.5)["p"] - 0.5 * math.exp(-1.5)) < 1e-9

    mass = json.loads(ld.normalization(laplace, 1.0))
    assert abs(mass["mass"] - 1.0) < 1e-6, mass

    up = json.loads(ld.check_upper_assumptions(ld.Symbol("chain", 2, 1.0), xi_min=1.0))
    assert up["pass"] and up["schema_version"] == 1
    low = json.loads(ld.check_lower_assumptions(ld.Symbol("sym", 2, 1.0)))
    assert low["pass"]
    try:
        ld.check_lower_assumptions(gamma)
        raise AssertionError("chain symbols are not symmetric")
    except ValueError:
        pass

    assert ld.derivative_selftest(ld.Symbol("sym", 3, 0.5)) < 1e-6
    assert abs(ld.a0(0.0, 1.0, 1, 1.0) - (math.e ** 2 - 1.0)) < 1e-12
    tail = json.loads(ld.weighted_integral(3, -2.0, 1.0, 2, 1.0, [1.0, 10.0, 100.0]))
    assert tail["pass"]
    s, r = ld.tower(2, math.e - 1.0)
    assert abs(s - math.log(2.0)) < 1e-15 and abs(r - math.log(2.0)) < 1e-15

    try:
        ld.density(gamma, 1.0, 0.0)
        raise AssertionError("x = 0 must be rejected")
    except ValueError:
        pass

    print("levydens_py smoke test: ok")


if __name__ == "__main__":
    main()
