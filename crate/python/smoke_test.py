"""Smoke test for the slowfast_py extension.

Build and copy the module next to this file first:

    cargo build -p slowfast-py --release
    cp target/release/libslowfast_py.so python/slowfast_py.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import slowfast_py as sf


def main():
    decay, std = sf.increment_law(2, 0.1, r=0.1)
    q = 4.0 ** -0.1
    assert abs(decay - math.exp(-0.4)) < 1e-15
    assert abs(std - math.sqrt(q * (1 - math.exp(-0.8)) / 8.0)) < 1e-12

    t, xn, yn = sf.simulate(0.1, 0.01, 0.001, 7, n_modes=8)
    assert len(t) == len(xn) == len(yn) == 11
    assert xn[0] == 1.0 and yn[0] == 0.0
    assert sf.simulate(0.1, 0.01, 0.001, 7, n_modes=8) == (t, xn, yn)

    coeffs, se = sf.averaged_drift([0.0], 3, replicas=2, avg_time=5.0, n_modes=8)
    assert len(coeffs) == 8 and se > 0.0

    report = json.loads(sf.check_assumptions(0.55))
    assert report["kappa1"] == 0.75
    assert all(e["status"] == "holds" for e in report["entries"])

    slope, _, ci = sf.rate_fit([(x, x * x, 0.0) for x in (1.0, 2.0, 4.0, 8.0)])
    assert abs(slope - 2.0) < 1e-12 and ci < 1e-10

    rep = json.loads(sf.run_experiment("contraction", 11, n_mc=8))
    assert rep["verdict"] == "pass"

    try:
        sf.check_assumptions(0.55, r1=0.2)
    except ValueError as e:
        assert "1/7" in str(e)
    else:
        raise AssertionError("r1 = 0.2 accepted")

    assert sf.cli([]) == 2
    print("slowfast_py", sf.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
