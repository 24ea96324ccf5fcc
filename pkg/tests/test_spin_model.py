import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strobeqnd.spin_model import (
    AtomSpec,
    VarianceTable,
    beta_from_polarization,
    noise_ratio,
    noise_statistics,
    partition_function,
    variance_per_atom,
)

from oracles import fx2_density_matrix

SPINS = [0.5, 1.0, 1.5, 2.0, 2.5]


def test_atom_spec_derived_fields():
    k = AtomSpec(1.5)
    assert (k.a, k.b) == (2.0, 1.0)
    assert k.dimension == 8
    with pytest.raises(ValueError):
        AtomSpec(0.7)
    with pytest.raises(ValueError):
        AtomSpec(0.0)


@pytest.mark.parametrize("P, expected", [(0.0, 0.0), (0.5, math.log(3)), (-0.5, -math.log(3))])
def test_beta_examples(P, expected):
    assert beta_from_polarization(P) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("P", [1.0, -1.0, 1.5])
def test_beta_domain_error(P):
    with pytest.raises(ValueError):
        beta_from_polarization(P)


@given(st.floats(min_value=-0.999999, max_value=0.999999))
def test_beta_is_odd(P):
    assert beta_from_polarization(-P) == -beta_from_polarization(P)


@pytest.mark.parametrize("I", SPINS)
def test_partition_function_state_count(I):
    assert partition_function(AtomSpec(I), 0.0) == 2 * (2 * I + 1)


def test_partition_function_at_ln3():
    # 8-term direct sum: (1/9 + 1/3 + 1 + 3 + 9) + (1/3 + 1 + 3) = 160/9
    assert partition_function(AtomSpec(1.5), math.log(3)) == pytest.approx(160 / 9, rel=1e-14)


def test_variance_examples():
    k = AtomSpec(1.5)
    assert variance_per_atom(k, 0.0) == pytest.approx(1.5, rel=1e-15)
    assert variance_per_atom(k, 1.0) == 1.0
    assert variance_per_atom(k, -1.0) == 1.0
    # density-matrix oracle value at P = 0.5
    assert variance_per_atom(k, 0.5) == pytest.approx(1.3, rel=1e-13)
    assert noise_ratio(k, 0.5) == pytest.approx(13 / 15, rel=1e-13)


def test_spin_half_is_flat():
    h = AtomSpec(0.5)
    values = [variance_per_atom(h, p) for p in np.linspace(-1, 1, 41)]
    assert np.allclose(values, 0.5, rtol=1e-13)


@pytest.mark.parametrize("I", SPINS)
def test_matches_density_matrix_oracle(I):
    atom = AtomSpec(I)
    for P in np.linspace(0.0, 0.999, 21):
        ref = fx2_density_matrix(I, P)
        assert abs(variance_per_atom(atom, P) - ref) / ref < 1e-10


def test_large_beta_no_overflow():
    k = AtomSpec(2.5)
    v = variance_per_atom(k, 1 - 1e-15)
    assert np.isfinite(v)
    assert v == pytest.approx(k.a / 2, rel=1e-9)


@given(st.floats(min_value=-1.0, max_value=1.0))
def test_noise_ratio_even(P):
    k = AtomSpec(1.5)
    assert noise_ratio(k, P) == pytest.approx(noise_ratio(k, -P), rel=1e-12)


def test_noise_ratio_monotone_and_limit():
    k = AtomSpec(1.5)
    grid = np.linspace(0, 1, 401)
    r = np.array([noise_ratio(k, p) for p in grid])
    assert r[0] == 1.0
    assert np.all(np.diff(r) <= 1e-15)
    assert abs(noise_ratio(k, 1 - 1e-12) - 2 / 3) < 1e-9
    assert noise_ratio(k, 1.0) == pytest.approx(2 / 3, abs=1e-15)


@given(st.sampled_from(SPINS), st.floats(min_value=-1.0, max_value=1.0))
def test_variance_positive(I, P):
    assert variance_per_atom(AtomSpec(I), P) > 0


def test_noise_statistics_bundle():
    s = noise_statistics(AtomSpec(1.5), 0.0)
    assert s.partition_function == 8
    assert s.ratio_to_unpolarized == 1.0


def test_variance_table_interpolation():
    k = AtomSpec(1.5)
    table = VarianceTable(k)
    P = np.linspace(-0.99, 0.99, 37)
    exact = np.array([variance_per_atom(k, p) for p in P])
    assert np.allclose(table(P), exact, rtol=1e-6)
