"""Noise models: faulty detectors, imperfect gates and damping channels.

The pipeline order is source gates, then the channels to Alice and Bob, then
the detectors at measurement time.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .qstate import I2, SX, SY, SZ, validate_state

UNIT_TOL = 1e-10
CHANNEL_KINDS = ("none", "amp", "ph")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def _check_unit_interval(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SourceNoise:
    """Noise parameters attached to one source of the star.

    ``alpha``/``delta`` are the Hadamard/CNOT fidelities, ``mu``/``beta`` the
    detector visibilities of Alice_i and of Bob's i-th branch, and the
    ``gamma_*``/``xi_*`` pairs are damping strengths on the links towards
    Alice_i and Bob.
    """

    alpha: float = 1.0
    delta: float = 1.0
    mu: float = 1.0
    beta: float = 1.0
    gamma_amp: float = 0.0
    xi_amp: float = 0.0
    gamma_ph: float = 0.0
    xi_ph: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            _check_unit_interval(f.name, value)
            object.__setattr__(self, f.name, value)

    def channel_kind(self) -> str:
        amp = self.gamma_amp > 0 or self.xi_amp > 0
        ph = self.gamma_ph > 0 or self.xi_ph > 0
        if amp and ph:
            raise ValueError("amplitude and phase damping cannot be combined on one source")
        return "amp" if amp else "ph" if ph else "none"


@dataclass(frozen=True)
class PovmPair:
    e0: np.ndarray
    e1: np.ndarray

    @property
    def observable(self) -> np.ndarray:
        return self.e0 - self.e1

    def stacked(self) -> np.ndarray:
        return np.stack([self.e0, self.e1])


@dataclass(frozen=True)
class KrausPair:
    k0: np.ndarray
    k1: np.ndarray

    def __iter__(self):
        return iter((self.k0, self.k1))

    def completeness_defect(self) -> float:
        s = self.k0.conj().T @ self.k0 + self.k1.conj().T @ self.k1
        return float(np.max(np.abs(s - I2)))

    def apply(self, rho):
        return sum(k @ rho @ k.conj().T for k in self)


IDENTITY_CHANNEL = KrausPair(I2.copy(), np.zeros((2, 2), dtype=complex))


def noisy_projector_pair(direction, visibility: float) -> PovmPair:
    """Two-outcome POVM for a detector along ``direction`` that fires with
    probability ``visibility`` and otherwise outputs a fair coin."""
    n = np.asarray(direction, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise ValueError(f"direction must be a unit vector, got norm {np.linalg.norm(n)}")
    _check_unit_interval("visibility", visibility)
    ns = n[0] * SX + n[1] * SY + n[2] * SZ
    plus = (I2 + ns) / 2
    minus = (I2 - ns) / 2
    mixed = (1.0 - visibility) / 2 * I2
    return PovmPair(visibility * plus + mixed, visibility * minus + mixed)


def _partial_trace_first(rho):
    return np.einsum("ijik->jk", rho.reshape(2, 2, 2, 2))


def generate_noisy_source(alpha: float, delta: float) -> np.ndarray:
    """Entangled pair made from |10> by a faulty Hadamard and a faulty CNOT."""
    _check_unit_interval("alpha", alpha)
    _check_unit_interval("delta", delta)
    ket = np.zeros(4, dtype=complex)
    ket[2] = 1.0
    rho = np.outer(ket, ket)
    h = np.kron(HADAMARD, I2)
    rho = alpha * (h @ rho @ h.conj().T) + (1 - alpha) / 2 * np.kron(I2, _partial_trace_first(rho))
    rho = delta * (CNOT @ rho @ CNOT.conj().T) + (1 - delta) / 4 * np.eye(4)
    return rho


def ad_kraus(g: float) -> KrausPair:
    _check_unit_interval("g", g)
    k0 = np.diag([1.0, np.sqrt(1 - g)]).astype(complex)
    k1 = np.zeros((2, 2), dtype=complex)
    k1[0, 1] = np.sqrt(g)
    return KrausPair(k0, k1)


def pd_kraus(g: float) -> KrausPair:
    _check_unit_interval("g", g)
    k0 = np.diag([1.0, np.sqrt(1 - g)]).astype(complex)
    k1 = np.diag([0.0, np.sqrt(g)]).astype(complex)
    return KrausPair(k0, k1)


def apply_channel_pair(rho, alice_ch: KrausPair, bob_ch: KrausPair) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((4, 4), dtype=complex)
    for ka in alice_ch:
        for kb in bob_ch:
            k = np.kron(ka, kb)
            out += k @ rho @ k.conj().T
    return out


def channels_for(noise: SourceNoise, channel_kind: str) -> tuple[KrausPair, KrausPair]:
    if channel_kind not in CHANNEL_KINDS:
        raise ValueError(f"unknown channel kind {channel_kind!r}")
    actual = noise.channel_kind()
    if actual != "none" and actual != channel_kind:
        raise ValueError(f"source carries {actual} damping but channel kind is {channel_kind}")
    if channel_kind == "amp":
        return ad_kraus(noise.gamma_amp), ad_kraus(noise.xi_amp)
    if channel_kind == "ph":
        return pd_kraus(noise.gamma_ph), pd_kraus(noise.xi_ph)
    return IDENTITY_CHANNEL, IDENTITY_CHANNEL


def effective_source_state(noise: SourceNoise, channel_kind: str = "none") -> np.ndarray:
    alice_ch, bob_ch = channels_for(noise, channel_kind)
    rho = apply_channel_pair(generate_noisy_source(noise.alpha, noise.delta), alice_ch, bob_ch)
    report = validate_state(rho)
    if not report:
        raise ValueError(f"channel output is not a valid state: {report}")
    return rho
