"""Smoke test for the Python bindings.

    pip install -e crates/py --no-build-isolation
    python python/smoke_test.py
"""

import math

import boseloc


def close(a, b, tol):
    return abs(a - b) < tol


def main():
    two = boseloc.spectrum(boseloc.ModelParams(2, 1, 0.0, 0.0))
    assert two == [-1.0, 1.0], two

    try:
        boseloc.ModelParams(8, 2, 1.0, 1.0, p=2, q=4)
    except ValueError as e:
        assert "coprime" in str(e)
    else:
        raise AssertionError("non-coprime p, q accepted")

    p = boseloc.ModelParams(16, 3, 20.0, 10.0)
    assert len(p.potentials()) == 16
    levels = boseloc.spectrum(p)
    assert len(levels) == 816 and levels == sorted(levels)

    reports = boseloc.classify_spectrum(p)
    assert len(reports) == 816
    accepted = [r for r in reports if r["class"] != "NotSelfLocalized"]
    assert accepted, "no self-localized states at U=20, V=10"
    free = boseloc.classify_spectrum(boseloc.ModelParams(16, 3, 0.0, 10.0))
    assert all(r["class"] == "NotSelfLocalized" for r in free)

    rows = boseloc.fraction_scan(boseloc.ModelParams(12, 3, 0.0, 0.0), [0.0], [0.0, 10.0])
    assert [r["independent"] + r["correlated"] for r in rows] == [0, 0]

    r = boseloc.r_ratios([0.0, 1.0, 3.0, 3.5])
    assert all(close(x, y, 1e-12) for x, y in zip(r, [0.5, 0.25]))
    assert close(boseloc.poisson_mean(), 2 * math.log(2) - 1, 1e-12)

    bands = boseloc.band_structure(boseloc.ModelParams(44, 2, 20.0, 10.0))
    assert len(bands["bands"]) == 4 and bands["middle_pair"] == (1, 2)

    out = boseloc.run_protocol(boseloc.ModelParams(12, 3, 20.0, 10.0), schedule={"t3": 120.0, "sample_every": 4.0})
    assert out["transfer_efficiency"] >= 0.99, out["transfer_efficiency"]
    assert out["norm_drift"] < 1e-8
    print(
        "ok: %d accepted of %d, transfer %.4f, self-localized projection %.4f"
        % (len(accepted), len(reports), out["transfer_efficiency"], out["self_localized_projection"])
    )


if __name__ == "__main__":
    main()
