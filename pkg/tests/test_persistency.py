import csv
import io
import json

import mpmath as mp
import numpy as np
import pytest

from starnoise.criteria import s_star
from starnoise.persistency import (
    INFINITE,
    REGION_CASES,
    Axis,
    CaseId,
    NumericalResolutionError,
    PartialNoiseCase,
    grid_to_csv,
    grid_to_json,
    limit_value,
    n_max,
    nmax_map,
    region_scan,
    s_of_n,
    table1,
)

mp.mp.dps = 40


def _mp_state_only(a2, d2, n):
    # k = 1 preset: one source at sqrt(primed), n - 1 at primed
    a2, d2 = mp.mpf(str(a2)), mp.mpf(str(d2))
    return d2 ** (1 - mp.mpf(1) / (2 * n)) * mp.sqrt(a2 ** (2 - mp.mpf(1) / n) + 1)


def _mp_measure_only(b2, m2, n):
    b2, m2 = mp.mpf(str(b2)), mp.mpf(str(m2))
    e = 1 - mp.mpf(1) / (2 * n)
    return mp.sqrt(2) * b2**e * m2**e


def test_state_only_values():
    case = PartialNoiseCase.preset("state", 0.95, 0.7)
    assert s_of_n(case, 5) == pytest.approx(1.0030213020088778, abs=1e-12)
    assert s_of_n(case, 6) == pytest.approx(0.9966701775504392, abs=1e-12)
    for n in (1, 5, 6, 40):
        assert s_of_n(case, n) == pytest.approx(float(_mp_state_only(0.95, 0.7, n)), abs=1e-12)


def test_measurement_only_values():
    case = PartialNoiseCase.preset("measure", 0.7, 0.95)
    assert s_of_n(case, 3) == pytest.approx(1.006621886722898, abs=1e-12)
    assert s_of_n(case, 4) == pytest.approx(float(_mp_measure_only(0.7, 0.95, 4)), abs=1e-12)
    assert s_of_n(case, 4) < 1


def test_pd_only_persists(rng):
    for _ in range(100):
        g, x = rng.uniform(0, 0.999, size=2)
        case = PartialNoiseCase.preset("pd", g, x)
        assert all(s_of_n(case, n) > 1 for n in (1, 2, 10, 1000))
        assert n_max(case).infinite


def test_pd_only_boundary():
    case = PartialNoiseCase.preset("pd", 1.0, 1.0)
    assert s_of_n(case, 3) == 1.0
    assert limit_value(case) == 1.0
    assert n_max(case).n_max is None


def test_limits():
    assert limit_value(PartialNoiseCase.preset("state", 0.9, 0.8)) == pytest.approx(0.8 * np.sqrt(1.81), abs=1e-15)
    assert limit_value(PartialNoiseCase.preset("measure", 0.95, 0.95)) == pytest.approx(1.2763277400417183, abs=1e-12)
    pdm = PartialNoiseCase.preset("pd-measure", 0.9, 0.35)
    assert limit_value(pdm) == pytest.approx(0.81 * np.sqrt(0.65**2 + 1), abs=1e-12)
    assert limit_value(pdm) < 1


def test_n_below_k_rejected():
    case = PartialNoiseCase(CaseId.STATE_ONLY, (0.9, 0.9), (0.95, 0.95), k=3)
    with pytest.raises(ValueError):
        s_of_n(case, 2)


def test_case_validation():
    with pytest.raises(ValueError):
        PartialNoiseCase(CaseId.STATE_ONLY, (0.9,), (0.9, 0.9))
    with pytest.raises(ValueError):
        PartialNoiseCase(CaseId.STATE_ONLY, (0.9, 1.2), (0.9, 0.9))
    with pytest.raises(ValueError):
        PartialNoiseCase(CaseId.STATE_ONLY, (0.9, 0.9), (0.9, 0.9), k=0)


@pytest.mark.parametrize("case_id,primed,expected", [
    ("state", (0.95, 0.7), 5),
    ("measure", (0.83, 0.83), 7),
    ("pd-state", (0.83, 0.3), 4),
    ("pd-measure", (0.9, 0.35), 4),
    ("measure", (0.7, 0.95), 3),
])
def test_n_max_examples(case_id, primed, expected):
    res = n_max(PartialNoiseCase.preset(case_id, *primed))
    assert res.n_max == expected
    case = PartialNoiseCase.preset(case_id, *primed)
    assert s_of_n(case, expected) > 1 >= s_of_n(case, expected + 1)
    assert res.s_values[-1] <= 1


def test_n_max_infinite():
    res = n_max(PartialNoiseCase.preset("state", 0.95, 0.95))
    assert res.infinite and res.s_limit > 1
    assert res.to_dict()["n_max"] == INFINITE


def test_n_max_no_violation():
    res = n_max(PartialNoiseCase.preset("measure", 0.3, 0.3))
    assert res.n_max is None


def test_n_max_cap_exhaustion():
    # limit just below 1 means a very slow crossing
    case = PartialNoiseCase.preset("measure", 0.8408, 0.8408)
    with pytest.raises(NumericalResolutionError):
        n_max(case, cap=5)


def test_table1():
    rows = table1()
    assert [r["star_psn"] for r in rows] == [5, 7, 4, 4]
    assert [r["linear_psn_reference"] for r in rows] == [2, 3, 2, 2]
    assert all(r["linear_reference_only"] for r in rows)


@pytest.mark.parametrize("case_id", [c.value for c in CaseId])
def test_monotone_decay(rng, case_id):
    for _ in range(100):
        primed = rng.uniform(0.001, 0.999, size=2)
        case = PartialNoiseCase.preset(case_id, *primed)
        values = np.array([s_of_n(case, n) for n in range(1, 201)])
        assert np.all(np.diff(values) <= 1e-14)


@pytest.mark.parametrize("case_id", [c.value for c in CaseId])
def test_formula_matches_pipeline(rng, case_id):
    for _ in range(30):
        k = int(rng.integers(1, 4))
        case = PartialNoiseCase(case_id, tuple(rng.uniform(size=2)), tuple(rng.uniform(size=2)), k)
        for n in range(k, k + 6):
            assert s_of_n(case, n) == pytest.approx(s_star(case.to_star_config(n)).s, abs=1e-12)


@pytest.mark.parametrize("case_id", [c.value for c in CaseId])
def test_finite_iff_limit_not_above_one(case_id):
    grid = nmax_map(case_id, resolution=25)
    for coords, value in grid.rows():
        case = PartialNoiseCase.preset(case_id, *coords)
        if abs(limit_value(case) - 1) > 1e-15:
            assert (value == INFINITE) == (limit_value(case) > 1)


def test_limit_exactly_one_from_above():
    # 0.8 * sqrt(0.75**2 + 1) = 1 while every finite n stays above 1
    case = PartialNoiseCase.preset("state", 0.75, 0.8)
    assert limit_value(case) == 1.0
    assert s_of_n(case, 10**9) > 1
    assert n_max(case).infinite
    assert nmax_map("state", resolution=101).cell(0.75, 0.8) == INFINITE


@pytest.mark.parametrize("case_id", [c.value for c in CaseId])
def test_map_cells_match_scan(case_id):
    axes = (Axis(CaseId(case_id) and "a", 0.3, 0.99, 12), Axis("b", 0.01, 0.99, 12))
    names = PartialNoiseCase.preset(case_id, 0.5, 0.5).param_names
    axes = tuple(Axis(nm, ax.lo, ax.hi, ax.resolution) for nm, ax in zip(names, axes))
    grid = nmax_map(case_id, axes=axes)
    for coords, value in grid.rows():
        res = n_max(PartialNoiseCase.preset(case_id, *coords), cap=10**6)
        expected = 0 if res.n_max is None else res.n_max
        assert value == expected


def _rank(v):
    return 2**62 if v == INFINITE else v


@pytest.mark.parametrize("case_id", ["state", "measure", "pd-state", "pd-measure"])
def test_staircase(case_id):
    grid = nmax_map(case_id, resolution=40)
    ranks = np.vectorize(lambda raw: _rank(grid.decode(raw)), otypes=[float])(grid.values)
    kinds = {"state": ("vis", "vis"), "measure": ("vis", "vis"),
             "pd-state": ("vis", "damp"), "pd-measure": ("vis", "damp")}[case_id]
    for axis, kind in enumerate(kinds):
        steps = np.diff(ranks, axis=axis)
        if kind == "vis":
            assert np.all(steps >= 0)
        else:
            assert np.all(steps <= 0)


def test_state_map_examples():
    grid = nmax_map("state", resolution=101)
    assert grid.cell(0.95, 0.7) == 5
    assert nmax_map("measure", resolution=101).cell(0.7, 0.95) == 3
    assert grid.cell(1.0, 1.0) == INFINITE


def test_map_rejects_general_k():
    with pytest.raises(ValueError):
        nmax_map("state", resolution=5, k=2)


def test_region_mu_beta_boundary():
    grid = region_scan("mu-beta", axes=(Axis("mu", 0.8, 0.9, 101), Axis("beta", 0.8, 0.9, 101)))
    diag = [v for (mu, beta), v in grid.rows() if mu == beta]
    mus = np.linspace(0.8, 0.9, 101)
    first_inside = mus[np.argmax(diag)]
    assert not diag[0] and diag[-1]
    assert abs(first_inside - 2**-0.25) <= 0.001 + 1e-12


def test_region_examples():
    assert region_scan("alpha-delta", resolution=101).cell(0.91, 0.85)
    ph = region_scan("gamma-xi-ph", axes=(Axis("gamma_ph", 0, 0.99, 50), Axis("xi_ph", 0, 0.99, 50)))
    assert ph.values.all()
    assert not region_scan("gamma-xi-ph", resolution=3).cell(1.0, 1.0)


@pytest.mark.parametrize("case", sorted(REGION_CASES))
def test_region_shapes(case):
    grid = region_scan(case, resolution=7)
    assert grid.values.shape == grid.shape == (7,) * len(grid.axes)
    assert grid.values.dtype == bool


def test_region_errors():
    with pytest.raises(ValueError):
        region_scan("nope")
    with pytest.raises(ValueError):
        Axis("mu", 0.5, 1.5)
    with pytest.raises(ValueError):
        Axis("mu", resolution=1)
    with pytest.raises(ValueError):
        region_scan("mu-beta", axes=(Axis("beta"), Axis("mu")))


def test_workers_do_not_change_output():
    a = region_scan("state-amp-measure", resolution=9, workers=1)
    b = region_scan("state-amp-measure", resolution=9, workers=4)
    assert grid_to_csv(a) == grid_to_csv(b)
    m1 = nmax_map("pd-state", resolution=30, workers=1)
    m3 = nmax_map("pd-state", resolution=30, workers=3)
    assert np.array_equal(m1.values, m3.values)


def test_csv_format():
    grid = nmax_map("state", axes=(Axis("alpha", 0.9, 1.0, 3), Axis("delta", 0.6, 0.7, 2)))
    rows = list(csv.reader(io.StringIO(grid_to_csv(grid))))
    assert rows[0] == ["alpha", "delta", "value"]
    assert len(rows) == 7
    assert [float(r[0]) for r in rows[1:]] == [0.9, 0.9, 0.95, 0.95, 1.0, 1.0]
    for r in rows[1:]:
        assert float(r[0]) == float(repr(float(r[0])))
    assert rows[-1][2] in {INFINITE} | {str(i) for i in range(100)}


def test_csv_membership_literals():
    text = grid_to_csv(region_scan("mu-beta", resolution=2))
    assert text.splitlines()[1:] == ["0.0,0.0,false", "0.0,1.0,false", "1.0,0.0,false", "1.0,1.0,true"]


def test_json_format():
    grid = nmax_map("state", axes=(Axis("alpha", 0.9, 1.0, 2), Axis("delta", 0.95, 1.0, 2)))
    payload = json.loads(grid_to_json(grid))
    assert payload["kind"] == "nmax"
    assert [a["name"] for a in payload["axes"]] == ["alpha", "delta"]
    assert payload["values"][-1] == INFINITE
    assert len(payload["values"]) == 4
