"""Closed-form star-network criteria under measurement, gate and channel noise.

All products over sources are taken as geometric means in log space, so
values stay finite for large ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .noise import CHANNEL_KINDS, SourceNoise
from .qstate import CorrelationSpectrum


@dataclass(frozen=True)
class StarConfig:
    sources: tuple[SourceNoise, ...]
    channel_kind: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ValueError("a star network needs at least one source")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        for src in self.sources:
            kind = src.channel_kind()
            if kind != "none" and kind != self.channel_kind:
                raise ValueError(f"source has {kind} damping under channel kind {self.channel_kind}")

    @property
    def n(self) -> int:
        return len(self.sources)

    @classmethod
    def consistent(cls, noise: SourceNoise, n: int, channel_kind: str | None = None):
        if n < 1:
            raise ValueError("n must be positive")
        kind = noise.channel_kind() if channel_kind is None else channel_kind
        return cls((noise,) * n, kind)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.sources], dtype=float)


@dataclass(frozen=True)
class CriterionResult:
    s: float
    i_term: float | None = None
    j_term: float | None = None
    violated: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "violated", bool(self.s > 1.0))

    def to_dict(self) -> dict:
        return {"s": self.s, "i_term": self.i_term, "j_term": self.j_term, "violated": self.violated}


def geometric_mean(values, power: float = 1.0) -> float:
    """(prod values)^(power/len), evaluated in log space."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("empty product")
    if np.any(x < 0):
        raise ValueError("geometric mean of negative factors")
    with np.errstate(divide="ignore"):
        logs = np.log(x)
    return float(np.exp(power * logs.mean()))


def _root_product(values, p: int, power: float = 1.0) -> float:
    # (prod values)^(power/p) for a root index p that may differ from len(values)
    x = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.exp(power * np.log(x).sum() / p))


def _spectra_columns(spectra: Sequence[CorrelationSpectrum]):
    if len(spectra) == 0:
        raise ValueError("need at least one spectrum")
    t1 = np.array([s.t1 for s in spectra], dtype=float)
    t2 = np.array([s.t2 for s in spectra], dtype=float)
    return np.clip(t1, 0, None), np.clip(t2, 0, None)


def s_star_noiseless(spectra: Sequence[CorrelationSpectrum], n: int | None = None) -> CriterionResult:
    t1, t2 = _spectra_columns(spectra)
    if n is not None and n != len(t1):
        raise ValueError(f"expected {n} spectra, got {len(t1)}")
    return CriterionResult(np.sqrt(geometric_mean(t1) + geometric_mean(t2)))


def s_star_noisy(config: StarConfig, spectra: Sequence[CorrelationSpectrum]) -> CriterionResult:
    """General criterion for arbitrary sources and faulty detectors."""
    if len(spectra) != config.n:
        raise ValueError(f"{config.n} sources but {len(spectra)} spectra")
    t1, t2 = _spectra_columns(spectra)
    vis = geometric_mean(config.column("mu") * config.column("beta"))
    return CriterionResult(vis * np.sqrt(geometric_mean(t1) + geometric_mean(t2)))


def s_noncyclic(config: StarConfig, spectra: Sequence[CorrelationSpectrum], p_n: int) -> CriterionResult:
    """Bound for a noncyclic network whose last layer holds ``p_n`` sources."""
    if len(spectra) != config.n:
        raise ValueError(f"{config.n} sources but {len(spectra)} spectra")
    if not 1 <= p_n <= config.n:
        raise ValueError(f"p_n must lie in [1, {config.n}], got {p_n}")
    t1, t2 = _spectra_columns(spectra)
    vis = _root_product(config.column("mu") * config.column("beta"), p_n)
    return CriterionResult(vis * np.sqrt(_root_product(t1, p_n) + _root_product(t2, p_n)))


def _require_kind(config: StarConfig, kind: str, what: str):
    if config.channel_kind != kind:
        raise ValueError(f"{what} needs channel kind {kind!r}, got {config.channel_kind!r}")
    fields_ = {"none": (), "amp": ("gamma_amp", "xi_amp"), "ph": ("gamma_ph", "xi_ph")}
    stray = [
        f for f in ("gamma_amp", "xi_amp", "gamma_ph", "xi_ph")
        if f not in fields_[kind] and np.any(config.column(f) != 0)
    ]
    if stray:
        raise ValueError(f"{what} does not model {', '.join(stray)}")


def s_star_gate_noise(config: StarConfig) -> CriterionResult:
    _require_kind(config, "none", "gate-noise criterion")
    alpha, delta = config.column("alpha"), config.column("delta")
    pre = geometric_mean(config.column("beta") * config.column("mu") * delta)
    return CriterionResult(pre * np.sqrt(geometric_mean(alpha, 2) + 1))


def ad_factors(config: StarConfig) -> tuple[float, float]:
    """The two global candidates F1, F2 of the amplitude-damping criterion."""
    alpha, delta = config.column("alpha"), config.column("delta")
    g, x = config.column("gamma_amp"), config.column("xi_amp")
    d = (1 - g) * (1 - x)
    transverse = geometric_mean(alpha**2 * delta**2 * d)
    longitudinal = geometric_mean(delta * d + g * x, 2)
    return 2 * transverse, transverse + longitudinal


def s_star_ad(config: StarConfig) -> CriterionResult:
    _require_kind(config, "amp", "amplitude-damping criterion")
    f1, f2 = ad_factors(config)
    pre = geometric_mean(config.column("beta") * config.column("mu"))
    return CriterionResult(pre * np.sqrt(max(f1, f2)))


def s_star_pd(config: StarConfig) -> CriterionResult:
    _require_kind(config, "ph", "phase-damping criterion")
    alpha, delta = config.column("alpha"), config.column("delta")
    d = (1 - config.column("gamma_ph")) * (1 - config.column("xi_ph"))
    pre = geometric_mean(config.column("beta") * config.column("mu"))
    return CriterionResult(pre * np.sqrt(geometric_mean(alpha**2 * delta**2 * d) + geometric_mean(delta, 2)))


def s_star(config: StarConfig) -> CriterionResult:
    """Dispatch to the closed form matching the configuration's channel kind."""
    return {"none": s_star_gate_noise, "amp": s_star_ad, "ph": s_star_pd}[config.channel_kind](config)


def analytic_spectrum(noise: SourceNoise, channel_kind: str = "none") -> CorrelationSpectrum:
    """Closed-form T^T T diagonal of the gate-noise state after the channels."""
    a2d2 = noise.alpha**2 * noise.delta**2
    if channel_kind == "amp":
        d = (1 - noise.gamma_amp) * (1 - noise.xi_amp)
        diag = [a2d2 * d, a2d2 * d, (noise.delta * d + noise.gamma_amp * noise.xi_amp) ** 2]
    elif channel_kind == "ph":
        d = (1 - noise.gamma_ph) * (1 - noise.xi_ph)
        diag = [a2d2 * d, a2d2 * d, noise.delta**2]
    elif channel_kind == "none":
        diag = [a2d2, a2d2, noise.delta**2]
    else:
        raise ValueError(f"unknown channel kind {channel_kind!r}")
    t = sorted(diag, reverse=True)
    return CorrelationSpectrum(*t)


# Consistent-noise forms. These take numpy arrays so region scans vectorize.

def consistent_gate(alpha, delta, mu=1.0, beta=1.0):
    return beta * mu * delta * np.sqrt(np.square(alpha) + 1)


def consistent_ad(alpha, delta, gamma, xi, mu=1.0, beta=1.0):
    d = (1 - gamma) * (1 - xi)
    transverse = np.square(alpha) * np.square(delta) * d
    longitudinal = np.square(delta * d + gamma * xi)
    return beta * mu * np.sqrt(np.maximum(2 * transverse, transverse + longitudinal))


def consistent_pd(alpha, delta, gamma, xi, mu=1.0, beta=1.0):
    return beta * mu * delta * np.sqrt(np.square(alpha) * (1 - gamma) * (1 - xi) + 1)


def s_star_max(config: StarConfig, spectra: Sequence[CorrelationSpectrum]) -> CriterionResult:
    """Maximum of S over all measurement directions when Bob reads out the
    parity of single-qubit branch measurements.

    Equals the geometric mean of the per-source values mu*beta*sqrt(t1+t2).
    It coincides with :func:`s_star_noisy` when every source has the same
    ratio t1 : t2 (in particular for identical sources) and exceeds it
    otherwise.
    """
    if len(spectra) != config.n:
        raise ValueError(f"{config.n} sources but {len(spectra)} spectra")
    t1, t2 = _spectra_columns(spectra)
    return CriterionResult(geometric_mean(config.column("mu") * config.column("beta") * np.sqrt(t1 + t2)))
