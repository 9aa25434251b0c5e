"""Smoke test for the mfrom_py extension."""

import json

import numpy as np

import mfrom_py

CONFIG = """
problem = "heat2d"
method = "mf"

[mesh]
fine = 16
coarse = 8

[train]
kind = "tensor"
axes = [
  { spacing = "log", lo = 0.1, hi = 10.0, n = 20 },
  { spacing = "uniform", lo = -1.0, hi = 1.0, n = 10 },
]

[diagnostics]
validation = false
timings = false

[mf]
tol = 1e-6
sketch = { kind = "random", size = 2 }
"""


def test_heat_solve_reference():
    u = np.array(mfrom_py.heat_solve([1.0, 1.0], 16))
    assert u.shape == (17 * 17,)
    y = np.repeat(np.linspace(0.0, 1.0, 17), 17)
    assert np.max(np.abs(u - (1.0 - y))) < 1e-12


def test_deim_picks_distinct_rows():
    rng = np.random.default_rng(0)
    psi = rng.standard_normal((30, 4))
    rows = mfrom_py.deim([list(c) for c in psi.T])
    assert len(set(rows)) == 4
    assert rows[0] == int(np.argmax(np.abs(psi[:, 0])))


def test_run_toml_converges():
    report = json.loads(mfrom_py.run_toml(CONFIG))
    assert report["status"] == "converged"
    assert report["n_train"] == 200


def test_bad_config_raises_value_error():
    try:
        mfrom_py.run_toml(CONFIG.replace("fine = 16", "fine = 15"))
    except ValueError as e:
        assert "mesh.fine" in str(e)
    else:
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name} ok")
