"""Smoke test for the compiled `weakdelay` extension.

Build and run from the repository root:

    cargo build --release -p weakdelay-py --features extension-module
    cp target/release/libweakdelay.so crates/py/python/weakdelay.so
    python3 crates/py/python/smoke_test.py

(`maturin develop -m crates/py/pyproject.toml` also works.)
"""

import math
import os
import tempfile

import weakdelay as wd


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    tau = 1e-17
    rec = wd.simulate(tau, wd.PHI_JWM)
    assert len(rec) == 2101
    assert abs(rec.total - 1.0) < 1e-9

    exact = wd.estimate(rec, "exact", wd.PHI_JWM)
    assert close(exact["tau_s"], tau, 1e-3), exact
    assert close(wd.solve_exact(rec, wd.PHI_JWM), tau, 1e-3)

    results = wd.estimate_all(rec, wd.PHI_JWM)
    assert [r["method"] for r in results][:3] == ["exact", "quartic", "first_order"]

    # Likelihood peaks at the estimate.
    g = exact["tau_s"]
    assert wd.log_likelihood(rec, g, wd.PHI_JWM) >= wd.log_likelihood(rec, 1.1 * g, wd.PHI_JWM)

    a1, a2 = wd.ideal_weak_values(math.pi / 2)
    assert isinstance(a1, complex) and abs(a1 - 1j) < 1e-15 and abs(a2 + 1j) < 1e-15
    assert wd.zeta(2.4e15, 0.0, a1) == 1.0

    noisy = wd.simulate(tau, wd.PHI_JWM, photons=100_000, seed=5)
    assert noisy.total == 100_000
    assert noisy.port1 == wd.simulate(tau, wd.PHI_JWM, photons=100_000, seed=5).port1

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "rec.csv")
        noisy.write_csv(path)
        back = wd.Record.read_csv(path)
        assert back.port2 == noisy.port2 and back.wavelength_nm == noisy.wavelength_nm

    assert abs(wd.alpha_min(1.0) - 3.7) < 0.05
    assert wd.pivot_delay(0.02) == -wd.pivot_delay(0.02, pivot="elevation") > 0
    assert abs(wd.compound_retardance(780.0, 0.0, 0.0) - math.pi) < 1e-12

    try:
        wd.estimate(rec, "no_such_method", 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")

    points = wd.snr_sweep([0.01], wd.PHI_WVA, [0.03, 0.05], trials=30, photons=100_000)
    assert len(points) == 2 and all(p["trials"] == 30 for p in points)

    print("weakdelay smoke test: OK")


if __name__ == "__main__":
    main()
