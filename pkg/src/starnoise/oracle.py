"""Exact density-matrix simulation of a small star network.

Qubits of the joint state are ordered (A_1, B_1, A_2, B_2, ...), i.e. the
plain tensor product of the source states. Bob measures each of his n
qubits with the branch detector for his input ``y`` and announces the
parity of the n branch outcomes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .criteria import CriterionResult, geometric_mean
from .noise import SourceNoise, noisy_projector_pair
from .qstate import validate_state

MAX_SOURCES = 6
NEGATIVE_PROB_TOL = 1e-12
CONVERGENCE_TOL = 1e-10
DEFAULT_RESTARTS = 20


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeasurementSettings:
    """Unit measurement directions, indexed ``[source, input, xyz]``."""

    alice_dirs: np.ndarray
    bob_dirs: np.ndarray

    def __post_init__(self):
        a = np.array(self.alice_dirs, dtype=float)
        b = np.array(self.bob_dirs, dtype=float)
        if a.ndim != 3 or a.shape[1:] != (2, 3) or b.shape != a.shape:
            raise ValueError(f"settings must have shape (n, 2, 3), got {a.shape} and {b.shape}")
        for name, arr in (("alice", a), ("bob", b)):
            norms = np.linalg.norm(arr, axis=-1)
            if np.max(np.abs(norms - 1.0)) > 1e-10:
                raise ValueError(f"{name} directions must be unit vectors")
        object.__setattr__(self, "alice_dirs", a)
        object.__setattr__(self, "bob_dirs", b)

    @property
    def n(self) -> int:
        return self.alice_dirs.shape[0]

    @classmethod
    def random(cls, n: int, rng: np.random.Generator):
        v = rng.normal(size=(2, n, 2, 3))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return cls(v[0], v[1])

    @classmethod
    def uniform(cls, n: int, alice, bob):
        """Same pair of Alice directions and Bob directions on every branch."""
        a = np.broadcast_to(np.asarray(alice, dtype=float), (n, 2, 3))
        b = np.broadcast_to(np.asarray(bob, dtype=float), (n, 2, 3))
        return cls(a, b)


@dataclass(frozen=True)
class OutcomeDistribution:
    """p(a_1..a_n, b | x, y), axes ordered (a_1, ..., a_n, b)."""

    probabilities: np.ndarray
    inputs: tuple

    @property
    def n(self) -> int:
        return self.probabilities.ndim - 1

    def __getitem__(self, outcome):
        return self.probabilities[outcome]

    def alice_marginal(self, i: int) -> np.ndarray:
        axes = tuple(ax for ax in range(self.probabilities.ndim) if ax != i)
        return self.probabilities.sum(axis=axes)


def build_star_state(sources: Sequence[np.ndarray]) -> np.ndarray:
    n = len(sources)
    if n < 1:
        raise ValueError("need at least one source")
    if n > MAX_SOURCES:
        raise ResourceError(f"exact simulation is limited to {MAX_SOURCES} sources, got {n}")
    for rho in sources:
        if np.shape(rho) != (4, 4):
            raise ValueError("every source must be a 4x4 two-qubit state")
    return reduce(np.kron, [np.asarray(s, dtype=complex) for s in sources])


def _visibilities(noise: Sequence[SourceNoise] | None, n: int):
    if noise is None:
        return np.ones(n), np.ones(n)
    if len(noise) != n:
        raise ValueError(f"{n} sources but {len(noise)} noise records")
    return np.array([s.mu for s in noise]), np.array([s.beta for s in noise])


def _branch_probabilities(state: np.ndarray, povms: Sequence[np.ndarray]) -> np.ndarray:
    """Outcome probabilities of independent two-outcome POVMs on every qubit.

    ``povms[q]`` has shape (2, 2, 2) = (outcome, row, col). Qubits are
    contracted one at a time to keep memory linear in the state size.
    """
    m = len(povms)
    dim = state.shape[0]
    if dim != 2**m:
        raise ValueError(f"state of dimension {dim} does not hold {m} qubits")
    r = state.reshape(1, dim, dim)
    rest = dim
    for e in povms:
        rest //= 2
        p = r.shape[0]
        r = r.reshape(p, 2, rest, 2, rest)
        # Tr[E rho] = sum_ij E_ji rho_ij
        r = np.einsum("oji,pirjs->pors", e, r).reshape(2 * p, rest, rest)
    return r.reshape((2,) * m).real


def joint_probability(state, settings: MeasurementSettings, noise, inputs) -> OutcomeDistribution:
    n = settings.n
    x = tuple(int(v) for v in inputs[0])
    y = int(inputs[1])
    if len(x) != n:
        raise ValueError(f"need {n} Alice inputs, got {len(x)}")
    mu, beta = _visibilities(noise, n)
    povms = []
    for i in range(n):
        povms.append(noisy_projector_pair(settings.alice_dirs[i, x[i]], mu[i]).stacked())
        povms.append(noisy_projector_pair(settings.bob_dirs[i, y], beta[i]).stacked())
    branch = _branch_probabilities(np.asarray(state, dtype=complex), povms)
    if branch.min() < -NEGATIVE_PROB_TOL:
        raise ValueError(f"negative outcome probability {branch.min():.3g}")
    branch = np.clip(branch, 0.0, None)
    branch /= branch.sum()

    probs = np.zeros((2,) * (n + 1))
    for outcome in itertools.product((0, 1), repeat=2 * n):
        alice = outcome[0::2]
        bob_bit = sum(outcome[1::2]) % 2
        probs[alice + (bob_bit,)] += branch[outcome]
    return OutcomeDistribution(probs, (x, y))


def correlator(state, settings: MeasurementSettings, noise, inputs) -> float:
    dist = joint_probability(state, settings, noise, inputs)
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=dist.n + 1):
        total += (-1) ** sum(outcome) * dist[outcome]
    return float(total)


def compute_I_J(state, settings: MeasurementSettings, noise=None) -> CriterionResult:
    n = settings.n
    i_term = j_term = 0.0
    for x in itertools.product((0, 1), repeat=n):
        i_term += correlator(state, settings, noise, (x, 0))
        j_term += (-1) ** sum(x) * correlator(state, settings, noise, (x, 1))
    i_term /= 2**n
    j_term /= 2**n
    s = abs(i_term) ** (1 / n) + abs(j_term) ** (1 / n)
    return CriterionResult(s, i_term, j_term)


def pair_correlation_matrix(rho, mu: float = 1.0, beta: float = 1.0) -> np.ndarray:
    """Noisy correlators of a single pair along the coordinate axes.

    A noisy detector's observable E0 - E1 is linear in its direction, so
    <A_a B_b> = a^T C b for all unit a, b.
    """
    axes = np.eye(3)
    c = np.empty((3, 3))
    for j in range(3):
        oa = noisy_projector_pair(axes[j], mu).observable
        for k in range(3):
            ob = noisy_projector_pair(axes[k], beta).observable
            c[j, k] = np.trace(np.kron(oa, ob) @ rho).real
    return c


def _unit(v):
    norm = np.linalg.norm(v)
    return v / norm if norm > 1e-300 else None


def _plane_basis(c0, c1, fallback):
    e1 = _unit(c0)
    if e1 is None:
        e1 = _unit(c1)
    if e1 is None:
        return fallback, _unit(np.cross(fallback, [1.0, 0.3, 0.1]))
    e2 = _unit(c1 - np.dot(c1, e1) * e1)
    if e2 is None:
        e2 = _unit(np.cross(e1, [0.3, 1.0, 0.1]))
    if e2 is None:
        e2 = _unit(np.cross(e1, [1.0, 0.0, 0.0]))
    return e1, e2


class _StarObjective:
    """S = |prod u_i|^(1/n) + |prod v_i|^(1/n) with per-source factors
    u_i = (a0+a1)^T C_i b0 / 2 and v_i = (a0-a1)^T C_i b1 / 2."""

    def __init__(self, cmats, a, b):
        self.c = cmats
        self.n = len(cmats)
        self.a = a.copy()
        self.b = b.copy()

    def factors(self, i):
        a0, a1 = self.a[i]
        b0, b1 = self.b[i]
        u = 0.5 * (a0 + a1) @ self.c[i] @ b0
        v = 0.5 * (a0 - a1) @ self.c[i] @ b1
        return abs(u), abs(v)

    def value(self):
        u, v = zip(*(self.factors(i) for i in range(self.n)))
        return geometric_mean(u) + geometric_mean(v)

    def _others(self, i):
        u, v = [], []
        for j in range(self.n):
            if j != i:
                fu, fv = self.factors(j)
                u.append(fu)
                v.append(fv)
        if not u:
            return 1.0, 1.0
        return geometric_mean(u) ** ((self.n - 1) / self.n), geometric_mean(v) ** ((self.n - 1) / self.n)

    def update_bob(self, i):
        a0, a1 = self.a[i]
        for y, w in ((0, a0 + a1), (1, a0 - a1)):
            d = _unit(self.c[i].T @ w)
            if d is not None:
                self.b[i, y] = d

    def update_alice(self, i, x):
        ku, kv = self._others(i)
        c0 = self.c[i] @ self.b[i, 0]
        c1 = self.c[i] @ self.b[i, 1]
        other = self.a[i, 1 - x]
        sign = 1.0 if x == 0 else -1.0
        p = other @ c0
        q = other @ c1
        e1, e2 = _plane_basis(c0, c1, self.a[i, x])
        proj = (np.array([e1 @ c0, e2 @ c0]), np.array([e1 @ c1, e2 @ c1]))
        inv_n = 1.0 / self.n

        def g(t):
            ct, st = np.cos(t), np.sin(t)
            w0 = ct * proj[0][0] + st * proj[0][1]
            w1 = ct * proj[1][0] + st * proj[1][1]
            # a_x enters u with + and v with sign(x)
            return -(ku * np.abs(0.5 * (w0 + p)) ** inv_n + kv * np.abs(0.5 * (sign * w1 - sign * q)) ** inv_n)

        grid = np.linspace(0.0, 2 * np.pi, 73)[:-1]
        vals = g(grid)
        k = int(np.argmin(vals))
        step = grid[1] - grid[0]
        res = minimize_scalar(g, bounds=(grid[k] - step, grid[k] + step), method="bounded",
                              options={"xatol": 1e-12})
        t = res.x if res.fun <= vals[k] else grid[k]
        cand = np.cos(t) * e1 + np.sin(t) * e2
        current = self.a[i, x].copy()
        before = self.value()
        self.a[i, x] = cand / np.linalg.norm(cand)
        if self.value() < before:
            self.a[i, x] = current


@dataclass(frozen=True)
class SettingsOptimum:
    settings: MeasurementSettings
    result: CriterionResult
    sweeps: int
    converged: bool
    restart: int

    def __iter__(self):
        return iter((self.settings, self.result))


def _angles_to_dirs(angles):
    theta, phi = angles[..., 0], angles[..., 1]
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _dirs_to_angles(dirs):
    return np.stack([np.arccos(np.clip(dirs[..., 2], -1, 1)), np.arctan2(dirs[..., 1], dirs[..., 0])], axis=-1)


def _polish(cmats, a, b):
    """Joint quasi-Newton refinement over all spherical angles."""
    n = len(cmats)
    c = np.asarray(cmats)
    shape = (n, 4, 2)

    def neg_s_and_grad(flat):
        ang = flat.reshape(shape)
        d = _angles_to_dirs(ang)
        a0, a1, b0, b1 = d[:, 0], d[:, 1], d[:, 2], d[:, 3]
        cb0 = np.einsum("ijk,ik->ij", c, b0)
        cb1 = np.einsum("ijk,ik->ij", c, b1)
        u = 0.5 * np.einsum("ij,ij->i", a0 + a1, cb0)
        v = 0.5 * np.einsum("ij,ij->i", a0 - a1, cb1)
        with np.errstate(divide="ignore", invalid="ignore"):
            su = np.exp(np.log(np.abs(u)).mean())
            sv = np.exp(np.log(np.abs(v)).mean())
            # dS/du_i = S_u / (n u_i), zero when the product already vanishes
            wu = np.where(u != 0, su / (n * u), 0.0)
            wv = np.where(v != 0, sv / (n * v), 0.0)
        ga0 = 0.5 * (wu[:, None] * cb0 + wv[:, None] * cb1)
        ga1 = 0.5 * (wu[:, None] * cb0 - wv[:, None] * cb1)
        gb0 = 0.5 * wu[:, None] * np.einsum("ijk,ij->ik", c, a0 + a1)
        gb1 = 0.5 * wv[:, None] * np.einsum("ijk,ij->ik", c, a0 - a1)
        gdir = np.stack([ga0, ga1, gb0, gb1], axis=1)
        theta, phi = ang[..., 0], ang[..., 1]
        ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
        dtheta = np.stack([ct * cp, ct * sp, -st], axis=-1)
        dphi = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        grad = np.stack([(gdir * dtheta).sum(-1), (gdir * dphi).sum(-1)], axis=-1)
        return -(su + sv), -grad.ravel()

    x0 = _dirs_to_angles(np.concatenate([a, b], axis=1)).ravel()
    start = neg_s_and_grad(x0)[0]
    res = minimize(neg_s_and_grad, x0, jac=True, method="BFGS", options={"gtol": 1e-9})
    if not np.isfinite(res.fun) or res.fun >= start:
        return a, b
    d = _angles_to_dirs(res.x.reshape(shape))
    return d[:, :2], d[:, 2:]


def _sweep(obj):
    for i in range(obj.n):
        obj.update_alice(i, 0)
        obj.update_alice(i, 1)
        obj.update_bob(i)
    return obj.value()


def _ascend(cmats, settings, max_sweeps, polish_every=4):
    obj = _StarObjective(cmats, settings.alice_dirs, settings.bob_dirs)
    for i in range(obj.n):
        obj.update_bob(i)
    best = obj.value()
    for sweep in range(1, max_sweeps + 1):
        value = _sweep(obj)
        if value - best < CONVERGENCE_TOL:
            return obj, max(value, best), sweep, True
        best = value
        # plain coordinate ascent crawls along the ridge that trades off the
        # sources against each other; a periodic joint step removes that mode
        if sweep % polish_every == 2:
            obj.a, obj.b = _polish(cmats, obj.a, obj.b)
            best = max(best, obj.value())
    return obj, best, max_sweeps, False


def optimize_settings(
    state_list: Sequence[np.ndarray],
    noise: Sequence[SourceNoise] | None,
    n: int | None = None,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    max_sweeps: int = 500,
) -> SettingsOptimum:
    """Maximize S over all measurement directions by coordinate ascent.

    The ascent runs on per-pair correlation matrices measured with the noisy
    detectors; the winning settings are then re-evaluated on the full joint
    state, which is the value reported.
    """
    n = len(state_list) if n is None else n
    if len(state_list) != n:
        raise ValueError(f"expected {n} source states, got {len(state_list)}")
    if restarts < 1:
        raise ValueError("restarts must be positive")
    for rho in state_list:
        if not validate_state(rho):
            raise ValueError("source state failed validation")
    mu, beta = _visibilities(noise, n)
    cmats = [pair_correlation_matrix(rho, m, b) for rho, m, b in zip(state_list, mu, beta)]
    rng = np.random.default_rng(seed)
    starts = [MeasurementSettings.random(n, rng) for _ in range(restarts)]

    best = None
    for index, start in enumerate(starts):
        obj, value, sweeps, converged = _ascend(cmats, start, max_sweeps)
        # strict improvement keeps the lowest restart index on ties
        if best is None or value > best[1]:
            best = (obj, value, sweeps, converged, index)
    obj, _, sweeps, converged, index = best
    settings = MeasurementSettings(obj.a, obj.b)
    result = compute_I_J(build_star_state(state_list), settings, noise)
    return SettingsOptimum(settings, result, sweeps, converged, index)
