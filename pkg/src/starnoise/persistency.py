"""Persistency of star-network violations under (partially) consistent noise.

A partially consistent noise family uses one parameter set on the first
``k`` sources and another ("primed") set on the remaining ``n - k``. The
largest ``n`` that still violates the criterion is ``n_max``; when the
n -> infinity limit itself violates, persistency is infinite.
"""
from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import criteria
from .criteria import StarConfig
from .noise import SourceNoise

INFINITE = "infinite"
DEFAULT_CAP = 10_000
MAP_CAP = 10**9
DEFAULT_RES_2D = 200
DEFAULT_RES_3D = 60
# largest S(n+1) - S(n) tolerated as rounding before the scan calls it non-monotone
MONOTONE_SLACK = 1e-14
# limits this close to 1 are treated as exactly 1; if S(n) still exceeds 1 at the
# cap it approaches 1 from above and the violation persists for every n
LIMIT_BOUNDARY_TOL = 1e-15


class NumericalResolutionError(RuntimeError):
    pass


class CaseId(enum.Enum):
    STATE_ONLY = "state"
    MEASUREMENT_ONLY = "measure"
    PD_ONLY = "pd"
    PD_STATE = "pd-state"
    PD_MEASURE = "pd-measure"


# parameter names in the order they are passed around, and whether each is a
# visibility (preset: v = sqrt(v')) or a damping strength (preset: 1-g = sqrt(1-g'))
CASE_PARAMS = {
    CaseId.STATE_ONLY: (("alpha", "vis"), ("delta", "vis")),
    CaseId.MEASUREMENT_ONLY: (("beta", "vis"), ("mu", "vis")),
    CaseId.PD_ONLY: (("gamma", "damp"), ("xi", "damp")),
    CaseId.PD_STATE: (("alpha", "vis"), ("gamma", "damp")),
    CaseId.PD_MEASURE: (("mu", "vis"), ("xi", "damp")),
}

CASE_LABELS = {
    CaseId.STATE_ONLY: "state noises only",
    CaseId.MEASUREMENT_ONLY: "measurement noises only",
    CaseId.PD_ONLY: "PD channel noises only",
    CaseId.PD_STATE: "PD channel and state noises",
    CaseId.PD_MEASURE: "PD channel and measure noises",
}


def _preset_unprimed(kind, value):
    if kind == "vis":
        return np.sqrt(value)
    return 1 - np.sqrt(1 - value)


@dataclass(frozen=True)
class PartialNoiseCase:
    case_id: CaseId
    primed: tuple
    unprimed: tuple
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "case_id", CaseId(self.case_id))
        names = self.param_names
        for label, values in (("primed", self.primed), ("unprimed", self.unprimed)):
            if len(values) != len(names):
                raise ValueError(f"{label} parameters must be {names}")
            for name, v in zip(names, values):
                if not 0.0 <= float(v) <= 1.0:
                    raise ValueError(f"{label} {name} must lie in [0, 1], got {v}")
        object.__setattr__(self, "primed", tuple(float(v) for v in self.primed))
        object.__setattr__(self, "unprimed", tuple(float(v) for v in self.unprimed))
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def param_names(self) -> tuple:
        return tuple(name for name, _ in CASE_PARAMS[CaseId(self.case_id)])

    @classmethod
    def preset(cls, case_id, *primed):
        """k = 1 with the first source's parameters tied to the primed ones."""
        case_id = CaseId(case_id)
        kinds = [kind for _, kind in CASE_PARAMS[case_id]]
        unprimed = tuple(float(_preset_unprimed(kind, v)) for kind, v in zip(kinds, primed))
        return cls(case_id, tuple(primed), unprimed, 1)

    def to_star_config(self, n: int) -> StarConfig:
        """Explicit n-source configuration with the first k sources unprimed."""
        if n < self.k:
            raise ValueError(f"n = {n} is smaller than k = {self.k}")
        first = _source_for(self.case_id, self.unprimed)
        rest = _source_for(self.case_id, self.primed)
        kind = "none" if self.case_id in (CaseId.STATE_ONLY, CaseId.MEASUREMENT_ONLY) else "ph"
        return StarConfig((first,) * self.k + (rest,) * (n - self.k), kind)


def _source_for(case_id, values) -> SourceNoise:
    a, b = values
    if case_id is CaseId.STATE_ONLY:
        return SourceNoise(alpha=a, delta=b)
    if case_id is CaseId.MEASUREMENT_ONLY:
        return SourceNoise(beta=a, mu=b)
    if case_id is CaseId.PD_ONLY:
        return SourceNoise(gamma_ph=a, xi_ph=b)
    if case_id is CaseId.PD_STATE:
        return SourceNoise(alpha=a, delta=a, gamma_ph=b, xi_ph=b)
    return SourceNoise(mu=a, beta=a, gamma_ph=b, xi_ph=b)


def _split(first, rest, f, g):
    return np.power(first, f) * np.power(rest, g)


def _case_value(case_id, unprimed, primed, f, g):
    """Criterion value with weights f = k/n on the first sources and g = (n-k)/n
    on the rest. Broadcasts over array-valued parameters."""
    (a, b), (a2, b2) = unprimed, primed
    if case_id is CaseId.STATE_ONLY:
        return _split(b, b2, f, g) * np.sqrt(_split(a, a2, 2 * f, 2 * g) + 1)
    if case_id is CaseId.MEASUREMENT_ONLY:
        return np.sqrt(2) * _split(a, a2, f, g) * _split(b, b2, f, g)
    if case_id is CaseId.PD_ONLY:
        return np.sqrt(_split((1 - a) * (1 - b), (1 - a2) * (1 - b2), f, g) + 1)
    if case_id is CaseId.PD_STATE:
        return np.sqrt(
            _split(a, a2, 4 * f, 4 * g) * _split(1 - b, 1 - b2, 2 * f, 2 * g) + _split(a, a2, 2 * f, 2 * g)
        )
    return _split(a, a2, 2 * f, 2 * g) * np.sqrt(_split(1 - b, 1 - b2, 2 * f, 2 * g) + 1)


def s_of_n(case: PartialNoiseCase, n: int) -> float:
    if n < case.k:
        raise ValueError(f"n = {n} is smaller than k = {case.k}")
    return float(_case_value(case.case_id, case.unprimed, case.primed, case.k / n, (n - case.k) / n))


def limit_value(case: PartialNoiseCase) -> float:
    return float(_case_value(case.case_id, case.unprimed, case.primed, 0.0, 1.0))


@dataclass(frozen=True)
class PersistencyResult:
    n_max: int | str | None
    s_limit: float
    s_values: tuple | None = None

    @property
    def infinite(self) -> bool:
        return self.n_max == INFINITE

    def to_dict(self) -> dict:
        return {"n_max": self.n_max, "s_limit": self.s_limit,
                "s_values": list(self.s_values) if self.s_values is not None else None}


def n_max(case: PartialNoiseCase, cap: int = DEFAULT_CAP) -> PersistencyResult:
    """Largest n with a violation, scanning upwards from n = k."""
    if cap < 1:
        raise ValueError("cap must be positive")
    limit = limit_value(case)
    if limit > 1:
        return PersistencyResult(INFINITE, limit)
    values = []
    prev = math.inf
    for n in range(case.k, max(cap, case.k) + 1):
        s = s_of_n(case, n)
        if s > prev + MONOTONE_SLACK:
            raise NumericalResolutionError(
                f"S(n) increased from {prev!r} to {s!r} at n = {n}; scan assumes monotone decay"
            )
        values.append(s)
        if s <= 1:
            last = n - 1 if n > case.k else None
            return PersistencyResult(last, limit, tuple(values))
        prev = s
    if abs(limit - 1) <= LIMIT_BOUNDARY_TOL:
        return PersistencyResult(INFINITE, limit, tuple(values))
    raise NumericalResolutionError(
        f"S(n) still exceeds 1 at cap n = {cap} although its limit {limit!r} does not"
    )


# Consistent-noise regions. Each entry names the axes and maps them onto the
# consistent closed form; tied parameters (alpha = delta, ...) share an axis.
REGION_CASES = {
    "mu-beta": (("mu", "beta"), lambda mu, beta: criteria.consistent_gate(1.0, 1.0, mu, beta)),
    "alpha-delta": (("alpha", "delta"), lambda alpha, delta: criteria.consistent_gate(alpha, delta)),
    "gamma-xi-amp": (("gamma_amp", "xi_amp"), lambda gamma_amp, xi_amp: criteria.consistent_ad(1.0, 1.0, gamma_amp, xi_amp)),
    "gamma-xi-ph": (("gamma_ph", "xi_ph"), lambda gamma_ph, xi_ph: criteria.consistent_pd(1.0, 1.0, gamma_ph, xi_ph)),
    "state-measure": (("alpha", "mu"), lambda alpha, mu: criteria.consistent_gate(alpha, alpha, mu, mu)),
    "state-amp": (("alpha", "gamma_amp"), lambda alpha, gamma_amp: criteria.consistent_ad(alpha, alpha, gamma_amp, gamma_amp)),
    "state-ph": (("alpha", "gamma_ph"), lambda alpha, gamma_ph: criteria.consistent_pd(alpha, alpha, gamma_ph, gamma_ph)),
    "amp-measure": (("gamma_amp", "mu"), lambda gamma_amp, mu: criteria.consistent_ad(1.0, 1.0, gamma_amp, gamma_amp, mu, mu)),
    "ph-measure": (("gamma_ph", "mu"), lambda gamma_ph, mu: criteria.consistent_pd(1.0, 1.0, gamma_ph, gamma_ph, mu, mu)),
    "state-amp-measure": (
        ("alpha", "gamma_amp", "mu"),
        lambda alpha, gamma_amp, mu: criteria.consistent_ad(alpha, alpha, gamma_amp, gamma_amp, mu, mu),
    ),
    "state-ph-measure": (
        ("alpha", "gamma_ph", "mu"),
        lambda alpha, gamma_ph, mu: criteria.consistent_pd(alpha, alpha, gamma_ph, gamma_ph, mu, mu),
    ),
}


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float = 0.0
    hi: float = 1.0
    resolution: int = DEFAULT_RES_2D

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError(f"axis {self.name}: range [{self.lo}, {self.hi}] must lie within [0, 1]")
        if self.resolution < 2:
            raise ValueError(f"axis {self.name}: resolution must be at least 2")
        if self.lo == self.hi:
            raise ValueError(f"axis {self.name}: empty range")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.resolution)

    def to_dict(self) -> dict:
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "resolution": self.resolution}


@dataclass(frozen=True)
class RegionGrid:
    """Row-major grid of cell values; the first axis varies slowest.

    ``kind`` is ``"membership"`` (boolean cells) or ``"nmax"`` (integer
    cells, -1 for infinite persistency and 0 where even n = k fails).
    """

    case: str
    kind: str
    axes: tuple
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return tuple(ax.resolution for ax in self.axes)

    def cell(self, *coords) -> object:
        idx = tuple(int(np.argmin(np.abs(ax.points - c))) for ax, c in zip(self.axes, coords))
        return self.decode(self.values[idx])

    def decode(self, raw):
        if self.kind == "membership":
            return bool(raw)
        return INFINITE if raw < 0 else int(raw)

    def rows(self):
        grids = np.meshgrid(*[ax.points for ax in self.axes], indexing="ij")
        for idx in np.ndindex(*self.shape):
            yield tuple(float(g[idx]) for g in grids), self.decode(self.values[idx])


def _workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("STARNOISE_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _chunked(fn, first_axis_points, workers):
    """Evaluate ``fn`` on slices of the first axis, possibly concurrently,
    and reassemble in order."""
    chunks = np.array_split(np.arange(len(first_axis_points)), min(workers, len(first_axis_points)))
    if workers == 1 or len(chunks) == 1:
        parts = [fn(first_axis_points[c]) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: fn(first_axis_points[c]), chunks))
    return np.concatenate(parts, axis=0)


def _make_axes(names, axes, default_res):
    if axes is None:
        return tuple(Axis(name, resolution=default_res) for name in names)
    axes = tuple(ax if isinstance(ax, Axis) else Axis(*ax) for ax in axes)
    if tuple(ax.name for ax in axes) != tuple(names):
        raise ValueError(f"axes must be {names}, got {tuple(ax.name for ax in axes)}")
    return axes


def region_scan(case: str, axes=None, resolution: int | None = None, workers: int | None = None) -> RegionGrid:
    """Membership grid of the infinite-persistency region for a consistent-noise case."""
    if case not in REGION_CASES:
        raise ValueError(f"unknown region case {case!r}; choose from {sorted(REGION_CASES)}")
    names, fn = REGION_CASES[case]
    default_res = DEFAULT_RES_2D if len(names) == 2 else DEFAULT_RES_3D
    if resolution is not None and axes is None:
        axes = tuple(Axis(name, resolution=resolution) for name in names)
    axes = _make_axes(names, axes, default_res)
    rest = [ax.points for ax in axes[1:]]

    def evaluate(first):
        grids = np.meshgrid(first, *rest, indexing="ij")
        return fn(**dict(zip(names, grids))) > 1.0

    values = _chunked(evaluate, axes[0].points, _workers(workers))
    return RegionGrid(case, "membership", axes, values, {"criterion": "consistent closed form", "strict": True})


def _nmax_cells(case_id, primed_a, primed_b, k, cap):
    kinds = [kind for _, kind in CASE_PARAMS[case_id]]
    primed = (primed_a, primed_b)
    unprimed = tuple(_preset_unprimed(kind, v) for kind, v in zip(kinds, primed))

    def s(n):
        n = np.asarray(n, dtype=float)
        return _case_value(case_id, unprimed, primed, k / n, (n - k) / n)

    limit = _case_value(case_id, unprimed, primed, 0.0, 1.0)
    out = np.zeros(primed_a.shape, dtype=np.int64)
    infinite = limit > 1
    out[infinite] = -1
    live = ~infinite & (s(np.full(primed_a.shape, k)) > 1)
    unresolved = live & (s(np.full(primed_a.shape, cap)) > 1)
    boundary = unresolved & (np.abs(limit - 1) <= LIMIT_BOUNDARY_TOL)
    out[boundary] = -1
    live &= ~boundary
    if np.any(unresolved & ~boundary):
        raise NumericalResolutionError(f"some cells still violate at cap n = {cap}")
    # S(n) decays monotonically, so bisect for the last n with S(n) > 1
    lo = np.full(primed_a.shape, k, dtype=np.int64)
    hi = np.full(primed_a.shape, cap, dtype=np.int64)
    while np.any(live & (hi - lo > 1)):
        mid = (lo + hi) // 2
        above = s(mid) > 1
        lo = np.where(live & above, mid, lo)
        hi = np.where(live & ~above, mid, hi)
    out[live] = lo[live]
    return out


def nmax_map(case_id, axes=None, resolution: int | None = None, k: int = 1,
             cap: int = MAP_CAP, workers: int | None = None) -> RegionGrid:
    """Grid of n_max over the primed parameters, using the k = 1 preset."""
    case_id = CaseId(case_id)
    if k != 1:
        raise ValueError("maps use the k = 1 preset")
    names = tuple(name for name, _ in CASE_PARAMS[case_id])
    if resolution is not None and axes is None:
        axes = tuple(Axis(name, resolution=resolution) for name in names)
    axes = _make_axes(names, axes, DEFAULT_RES_2D)
    second = axes[1].points

    def evaluate(first):
        a, b = np.meshgrid(first, second, indexing="ij")
        return _nmax_cells(case_id, a, b, k, cap)

    values = _chunked(evaluate, axes[0].points, _workers(workers))
    return RegionGrid(case_id.value, "nmax", axes, values, {"k": k, "cap": cap})


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def grid_to_csv(grid: RegionGrid) -> str:
    lines = [",".join([ax.name for ax in grid.axes] + ["value"])]
    for coords, value in grid.rows():
        lines.append(",".join([repr(c) for c in coords] + [_format_value(value)]))
    return "\n".join(lines) + "\n"


def grid_to_json(grid: RegionGrid) -> str:
    payload = {
        "case": grid.case,
        "kind": grid.kind,
        "axes": [ax.to_dict() for ax in grid.axes],
        "order": "row-major, first axis slowest",
        "metadata": grid.metadata,
        "values": [value for _, value in grid.rows()],
    }
    return json.dumps(payload, indent=1) + "\n"


# Preset rows and the linear-network column, which is quoted, not computed.
TABLE1_ROWS = (
    (CaseId.STATE_ONLY, (0.95, 0.7), 2),
    (CaseId.MEASUREMENT_ONLY, (0.83, 0.83), 3),
    (CaseId.PD_STATE, (0.83, 0.3), 2),
    (CaseId.PD_MEASURE, (0.9, 0.35), 2),
)


def table1(cap: int = DEFAULT_CAP) -> list[dict]:
    rows = []
    for case_id, primed, linear in TABLE1_ROWS:
        case = PartialNoiseCase.preset(case_id, *primed)
        result = n_max(case, cap)
        rows.append({
            "noise_type": CASE_LABELS[case_id],
            "case": case_id.value,
            "params": dict(zip(case.param_names, primed)),
            "star_psn": result.n_max,
            "linear_psn_reference": linear,
            "linear_reference_only": True,
        })
    return rows
