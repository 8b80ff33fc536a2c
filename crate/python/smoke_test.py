"""Smoke test for the specrule_py extension. Run after `pip install ./crates/specrule-py`."""

import json
import math

import specrule_py as sr


def test_run_suite():
    report = json.loads(sr.run_suite("trk", seed=7))
    assert report["suite"] == "trk"
    assert report["summary"]["fail"] == 0
    assert report["summary"]["total"] == len(report["checks"])
    again = json.loads(sr.run_suite("trk", seed=7))
    assert again == report


def test_config_errors_raise():
    try:
        sr.run_suite("trk", config="bogus_key = 1\n")
    except ValueError as e:
        assert "bogus_key" in str(e)
    else:
        raise AssertionError("unknown key accepted")


def test_bessel_levels():
    spec = json.loads(sr.bessel_levels(0.5, 3))
    for lvl in spec["levels"]:
        exact = (lvl["k"] * math.pi) ** 2
        assert abs(lvl["energy"] - exact) < 1e-6 * exact


def test_trk_and_hs():
    h = [[(1.0, 0.0), (0.5, 0.2)], [(0.5, -0.2), (3.0, 0.0)]]
    g = [[(0.0, 0.0), (1.0, 0.0)], [(0.3, 0.1), (0.0, 0.0)]]
    for j in range(2):
        assert json.loads(sr.trk(h, g, j))["pass"]
    assert json.loads(sr.hs_quadratic(h, g, [0], 5.0))["pass"]


def test_lieb_thirring():
    rows = json.loads(sr.lieb_thirring_square_well(50.0, 1.0, [0.1, 0.5, 1.0], n=1001))
    assert len(rows) == 3
    assert all(r["margin"] >= 0.0 for r in rows)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
