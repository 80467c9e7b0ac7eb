import json

from yukawa1d.verification import (
    CheckRow,
    VerifyOptions,
    check_pole_decomposition,
    check_tadpole_zero_T,
    run_all,
)


def test_check_row_serialization():
    row = CheckRow(
        name="x", route_a="a", route_b="b", expected=1.0, actual=1.0,
        abs_err=0.0, tolerance=1e-10, passed=True,
    )
    d = row.as_dict()
    assert d["pass"] is True and "passed" not in d
    assert d["name"] == "x"


def test_exact_checks_have_zero_tolerance():
    rows = check_tadpole_zero_T(VerifyOptions())
    assert all(r.passed for r in rows)
    assert all(r.tolerance == 0.0 for r in rows)
    assert all(r.abs_err == 0.0 for r in rows)


def test_pole_rows_pass():
    rows = {r.name: r for r in check_pole_decomposition(VerifyOptions())}
    assert rows["pole-decomposition-delta-mu"].passed
    assert rows["pole-decomposition-z1f"].passed
    ratio = rows["pole-overlap-ratio"]
    assert abs(ratio.actual - 16.0) <= 3.2


def test_report_without_mc_is_green_and_stable():
    opts = VerifyOptions(n_max=40, n_max_fine=60)
    rep1 = run_all(opts, skip_mc=True)
    assert rep1.overall_pass
    doc = json.loads(rep1.to_json())
    assert doc["overall_pass"] is True
    names = [c["name"] for c in doc["checks"]]
    assert len(names) == len(set(names)) or names.count("spectrum-match") >= 1
    assert doc["provenance"]["rng"] == "numpy PCG64"
    assert "timestamp" not in doc["provenance"]
    # same options, same bytes
    rep2 = run_all(opts, skip_mc=True)
    assert rep1.to_json() == rep2.to_json()
    assert not any("monte-carlo" in n for n in names)
