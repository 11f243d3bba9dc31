import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starnoise.noise import generate_noisy_source
from starnoise.qstate import (
    BlochForm,
    DimensionError,
    StateValidityError,
    bloch_compose,
    bloch_decompose,
    correlation_spectrum,
    jacobi_eigenvalues,
    maximally_mixed,
    random_state,
    singlet,
    validate_state,
)

from conftest import random_rotation


def test_decompose_maximally_mixed():
    form = bloch_decompose(maximally_mixed())
    assert np.allclose(form.a, 0, atol=1e-15)
    assert np.allclose(form.b, 0, atol=1e-15)
    assert np.allclose(form.T, 0, atol=1e-15)


def test_decompose_singlet():
    form = bloch_decompose(singlet())
    assert np.allclose(form.a, 0, atol=1e-15)
    assert np.allclose(form.T, -np.eye(3), atol=1e-15)


def test_decompose_gate_noise_state():
    form = bloch_decompose(generate_noisy_source(0.9, 0.8))
    assert np.allclose(form.T, np.diag([-0.72, 0.72, 0.8]), atol=1e-12)


def test_decompose_rejects_bad_input():
    with pytest.raises(DimensionError):
        bloch_decompose(np.eye(2) / 2)
    with pytest.raises(StateValidityError):
        bloch_decompose(np.diag([1.5, -0.5, 0, 0]))


def test_compose_known_states():
    zero = BlochForm(np.zeros(3), np.zeros(3), np.zeros((3, 3)))
    assert np.allclose(bloch_compose(zero), np.eye(4) / 4, atol=1e-15)
    sing = BlochForm(np.zeros(3), np.zeros(3), -np.eye(3))
    assert np.allclose(bloch_compose(sing), singlet(), atol=1e-15)


def test_round_trip_random_states(rng):
    for _ in range(100):
        rho = random_state(rng, rank=int(rng.integers(1, 5)))
        assert np.max(np.abs(bloch_compose(bloch_decompose(rho)) - rho)) <= 1e-12
        form = bloch_decompose(rho)
        back = bloch_decompose(bloch_compose(form))
        for x, y in ((form.a, back.a), (form.b, back.b), (form.T, back.T)):
            assert np.max(np.abs(x - y)) <= 1e-12


def test_spectrum_of_gate_noise_tensor():
    a, d = 0.95, 0.97
    spec = correlation_spectrum(np.diag([-a * d, a * d, d]))
    assert spec.t1 == pytest.approx(d**2, abs=1e-12)
    assert spec.t2 == pytest.approx(a**2 * d**2, abs=1e-12)
    assert spec.t3 == pytest.approx(a**2 * d**2, abs=1e-12)
    assert spec.t2 == pytest.approx(0.84916225, abs=1e-12)


def test_spectrum_zero():
    assert tuple(correlation_spectrum(np.zeros((3, 3)))) == (0.0, 0.0, 0.0)


def test_spectrum_matches_svd(rng):
    for _ in range(200):
        T = rng.uniform(-1, 1, size=(3, 3))
        sv = np.linalg.svd(T, compute_uv=False)
        assert np.allclose(tuple(correlation_spectrum(T)), sv**2, atol=1e-10)


def test_jacobi_against_eigvalsh(rng):
    for _ in range(50):
        m = rng.normal(size=(3, 3))
        m = m + m.T
        assert np.allclose(np.sort(jacobi_eigenvalues(m)), np.linalg.eigvalsh(m), atol=1e-12)


def test_spectrum_rotation_invariant(rng):
    for _ in range(100):
        T = rng.uniform(-1, 1, size=(3, 3))
        o1, o2 = random_rotation(rng), random_rotation(rng)
        assert np.allclose(tuple(correlation_spectrum(T)), tuple(correlation_spectrum(o1 @ T @ o2)), atol=1e-10)


@given(st.lists(st.floats(-1, 1), min_size=9, max_size=9))
def test_spectrum_sorted_and_nonnegative(entries):
    spec = correlation_spectrum(np.array(entries).reshape(3, 3))
    assert spec.t1 >= spec.t2 >= spec.t3 >= -1e-12


def test_physical_states_have_contracting_tensor(rng):
    for _ in range(200):
        spec = correlation_spectrum(bloch_decompose(random_state(rng)).T)
        assert spec.t1 <= 1 + 1e-10


def test_validate_state():
    assert validate_state(np.eye(4) / 4)
    report = validate_state(np.diag([1.5, -0.5, 0, 0]))
    assert not report
    assert report.min_eigenvalue == pytest.approx(-0.5)
    assert not validate_state(np.diag([0.5, 0.25, 0.25, 0.25]))
    with pytest.raises(DimensionError):
        validate_state(np.eye(3) / 3)
