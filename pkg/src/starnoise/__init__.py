"""Noisy star-network nonlocality criteria, persistency analysis and an
exact density-matrix oracle for small networks."""

from .criteria import (
    CriterionResult,
    StarConfig,
    s_noncyclic,
    s_star,
    s_star_ad,
    s_star_gate_noise,
    s_star_max,
    s_star_noiseless,
    s_star_noisy,
    s_star_pd,
)
from .noise import SourceNoise, effective_source_state, generate_noisy_source
from .oracle import MeasurementSettings, build_star_state, compute_I_J, optimize_settings
from .persistency import INFINITE, CaseId, PartialNoiseCase, limit_value, n_max, s_of_n, table1
from .qstate import bloch_compose, bloch_decompose, correlation_spectrum, state_spectrum

__version__ = "0.1.0"
