import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpma.errors import DimensionGuardError, ValidationError
from qpma.states import (
    BYZANTINE,
    DensityMatrix,
    DenseBlockState,
    PhaseBlockState,
    build_pvm,
    clock_apply,
    inner,
    make_phi,
    make_psi,
    measure,
    mix_ensemble,
    partial_trace,
    shift_apply,
    structured_apply,
    structured_to_dense,
    trace_distance,
    unitary_apply,
    von_neumann_entropy,
)

W3 = complex(-0.5, math.sqrt(3) / 2)


def clock_matrix(P, power):
    return np.diag([np.exp(2j * np.pi * power * k / P) for k in range(P)])


def site_operator(P, N, site, op):
    """Full P**N operator with ``op`` on ``site`` via explicit Kronecker products."""
    full = np.eye(1)
    for s in range(N):
        full = np.kron(full, op if s == site else np.eye(P))
    return full


def index_of(P, digits):
    return sum(d * P ** (len(digits) - 1 - i) for i, d in enumerate(digits))


# --- constructors -----------------------------------------------------------


def test_psi_three_qutrits_matches_written_form():
    psi = make_psi(3, 3)
    expected = np.zeros(27, dtype=complex)
    for s in ("000", "111", "222"):
        expected[int(s, 3)] = 1 / math.sqrt(3)
    assert np.allclose(psi.amplitudes, expected, atol=1e-15)


def test_psi_single_qubit():
    assert np.allclose(make_psi(2, 1).amplitudes, [1 / math.sqrt(2)] * 2)


@pytest.mark.parametrize("P, N", [(2, 1), (3, 3), (5, 2), (7, 3)])
def test_psi_normalized(P, N):
    a = make_psi(P, N).amplitudes
    assert abs(np.vdot(a, a) - 1) < 1e-12


def test_phi_examples_three_qutrits():
    r = 1 / math.sqrt(3)
    phi1 = make_phi(3, 3, 1).amplitudes
    assert np.allclose(phi1[[0, 13, 26]], [r, W3 * r, W3**2 * r], atol=1e-15)
    assert make_phi(3, 3, 0).allclose(make_psi(3, 3))
    # omega^4 = omega^1 on |222>
    assert abs(make_phi(3, 3, 2).amplitudes[26] - W3 * r) < 1e-15


def test_phi_rejects_out_of_range_m():
    with pytest.raises(ValidationError):
        make_phi(3, 2, 3)


def test_dimension_guard():
    with pytest.raises(DimensionGuardError):
        make_psi(11, 7)


def test_dense_state_requires_normalization():
    with pytest.raises(ValidationError):
        DenseBlockState(2, 1, np.array([1.0, 1.0]))


# --- clock operations -------------------------------------------------------


@pytest.mark.parametrize("P, N", [(2, 2), (3, 3), (5, 2)])
def test_clock_apply_matches_kronecker_oracle(P, N):
    rng = np.random.default_rng(1)
    v = rng.normal(size=P**N) + 1j * rng.normal(size=P**N)
    state = DenseBlockState(P, N, v / np.linalg.norm(v))
    for site in range(N):
        for power in range(P):
            expected = site_operator(P, N, site, clock_matrix(P, power)) @ state.amplitudes
            assert np.allclose(clock_apply(state, site, power).amplitudes, expected, atol=1e-13)


def test_clock_on_site_zero_maps_psi_to_phi1():
    assert clock_apply(make_psi(3, 3), 0, 1).allclose(make_phi(3, 3, 1), 1e-13)


def test_clock_power_zero_is_identity():
    s = make_phi(5, 2, 3)
    for site in range(2):
        assert clock_apply(s, site, 0).allclose(s, 0.0)


def test_clock_site_blind_on_psi():
    psi = make_psi(3, 3)
    assert clock_apply(psi, 2, 1).allclose(clock_apply(psi, 0, 1), 1e-13)


def test_clock_rejects_bad_site():
    with pytest.raises(ValidationError):
        clock_apply(make_psi(3, 2), 2, 1)
    with pytest.raises(ValidationError):
        structured_apply(PhaseBlockState.ghz(3, 2), -1, 1)


@given(
    st.sampled_from([(2, 3), (3, 2), (5, 2), (3, 3)]),
    st.lists(st.tuples(st.integers(0, 10), st.integers(0, 20)), max_size=8),
)
@settings(max_examples=60, deadline=None)
def test_site_blindness_on_ghz_subspace(pn, ops):
    P, N = pn
    state = PhaseBlockState.ghz(P, N)
    for site, power in ops:
        state = structured_apply(state, site % N, power % P)
    dense = structured_to_dense(state)
    for a in range(P):
        ref = clock_apply(dense, 0, a)
        for i in range(N):
            assert clock_apply(dense, i, a).allclose(ref, 1e-12)


@given(st.sampled_from([(2, 3), (3, 3), (5, 2), (7, 2)]), st.data())
@settings(max_examples=60, deadline=None)
def test_exponent_sum_law(pn, data):
    P, N = pn
    f = data.draw(st.lists(st.integers(0, P - 1), min_size=N, max_size=N))
    m = data.draw(st.integers(0, P - 1))
    start = make_phi(P, N, m)
    lhs = start
    for k, power in enumerate(f):
        lhs = clock_apply(lhs, k, power)
    rhs = clock_apply(start, 0, sum(f) % P)
    assert lhs.allclose(rhs, 1e-12)


@given(st.sampled_from([(2, 3), (3, 2), (5, 2)]), st.integers(0, 4), st.integers(0, 4), st.integers(0, 2))
@settings(max_examples=50, deadline=None)
def test_clock_preserves_norm(pn, power, seed, site):
    P, N = pn
    rng = np.random.default_rng(seed)
    v = rng.normal(size=P**N) + 1j * rng.normal(size=P**N)
    s = clock_apply(DenseBlockState(P, N, v / np.linalg.norm(v)), site % N, power % P)
    assert abs(np.linalg.norm(s.amplitudes) - 1.0) < 1e-13


# --- structured engine ------------------------------------------------------


def test_structured_apply_examples():
    s = structured_apply(PhaseBlockState.ghz(3, 3), 0, 1)
    assert s.exponents == (0, 1, 2)
    assert structured_apply(s, 1, 0) == s


@given(st.sampled_from([2, 3, 5, 7]), st.integers(0, 50), st.integers(0, 50))
def test_structured_powers_add(P, a, b):
    g = PhaseBlockState.ghz(P, 2)
    twice = structured_apply(structured_apply(g, 0, a % P), 1, b % P)
    once = structured_apply(g, 0, (a + b) % P)
    assert twice == once
    assert structured_to_dense(twice).allclose(clock_apply(clock_apply(structured_to_dense(g), 0, a), 1, b), 1e-12)


@pytest.mark.parametrize("P, N", [(2, 1), (3, 3), (5, 2), (7, 3)])
def test_structured_to_dense_examples(P, N):
    assert structured_to_dense(PhaseBlockState.ghz(P, N)).allclose(make_psi(P, N), 1e-15)
    for m in range(P):
        d = structured_to_dense(PhaseBlockState.fourier(P, N, m))
        assert d.allclose(make_phi(P, N, m), 1e-15)
        assert abs(inner(d, d) - 1) < 1e-12


@pytest.mark.parametrize("P", [2, 3, 5])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_engine_equivalence_random_sequences(P, N):
    rng = np.random.default_rng(1000 * P + N)
    for _ in range(200):
        fast = PhaseBlockState.ghz(P, N)
        dense = make_psi(P, N)
        for _ in range(rng.integers(0, 12)):
            site, power = int(rng.integers(N)), int(rng.integers(P))
            fast = structured_apply(fast, site, power)
            dense = clock_apply(dense, site, power)
        assert np.max(np.abs(structured_to_dense(fast).amplitudes - dense.amplitudes)) <= 1e-12


def test_phase_state_validation():
    with pytest.raises(ValidationError):
        PhaseBlockState(3, 2, (0, 1))
    with pytest.raises(ValidationError):
        PhaseBlockState(3, 2, (0, 1, 3))


def test_fourier_label():
    assert PhaseBlockState.fourier(5, 2, 3).fourier_label() == 3
    assert PhaseBlockState(3, 2, (1, 2, 0)).fourier_label() == 1  # global phase omega
    assert PhaseBlockState(3, 2, (0, 0, 1)).fourier_label() is None


def test_structured_probabilities_match_pvm_for_non_fourier_state():
    s = PhaseBlockState(5, 2, (0, 0, 1, 3, 3))
    fast = s.probabilities()
    dense = build_pvm(5, 2).probabilities(structured_to_dense(s))
    assert np.allclose(fast, dense, atol=1e-12)
    assert abs(fast.sum() - 1) < 1e-12


# --- inner products and the PVM ----------------------------------------------


@pytest.mark.parametrize("P", [2, 3, 5])
def test_fourier_orthonormality(P):
    phis = [make_phi(P, 3, m) for m in range(P)]
    for m, n in itertools.product(range(P), repeat=2):
        assert abs(inner(phis[m], phis[n]) - (m == n)) < 1e-13


def test_inner_is_conjugate_linear_in_first_argument():
    a, b = make_phi(3, 2, 1), make_phi(3, 2, 1)
    assert abs(inner(a, b) - 1) < 1e-13
    scaled = DenseBlockState(3, 2, 1j * a.amplitudes)
    assert abs(inner(scaled, b) - (-1j)) < 1e-13
    with pytest.raises(ValidationError):
        inner(make_psi(3, 2), make_psi(3, 3))


@pytest.mark.parametrize("P, N", [(3, 3), (2, 1), (2, 3), (5, 2)])
def test_pvm_axioms(P, N):
    pvm = build_pvm(P, N)
    total = np.zeros((P**N, P**N), dtype=complex)
    for label in pvm.labels:
        proj = pvm.projector(label)
        assert np.max(np.abs(proj @ proj - proj)) < 1e-12
        assert round(np.trace(proj).real) == pvm.rank(label)
        total += proj
    assert np.max(np.abs(total - np.eye(P**N))) < 1e-12


def test_pvm_ranks():
    assert build_pvm(3, 3).rank(BYZANTINE) == 24
    assert build_pvm(2, 1).rank(BYZANTINE) == 0
    assert len(build_pvm(3, 3).labels) == 4


@pytest.mark.parametrize("P, N", [(3, 3), (2, 2), (5, 2)])
def test_pvm_probabilities_match_projector_expectations(P, N):
    rng = np.random.default_rng(7)
    v = rng.normal(size=P**N) + 1j * rng.normal(size=P**N)
    state = DenseBlockState(P, N, v / np.linalg.norm(v))
    pvm = build_pvm(P, N)
    expected = [np.vdot(state.amplitudes, pvm.projector(lbl) @ state.amplitudes).real for lbl in pvm.labels]
    assert np.allclose(pvm.probabilities(state), expected, atol=1e-12)


def test_measure_examples():
    rng = np.random.default_rng(0)
    pvm = build_pvm(3, 3)
    assert measure(make_phi(3, 3, 2), pvm, rng) == (2, pytest.approx(1.0, abs=1e-12))
    assert measure(make_psi(3, 3), pvm, rng) == (0, pytest.approx(1.0, abs=1e-12))
    label, p = measure(DenseBlockState.basis(3, (0, 0, 1)), pvm, rng)
    assert label == BYZANTINE and abs(p - 1) < 1e-12


def test_measure_is_deterministic_and_follows_distribution():
    P, N = 3, 2
    s = structured_to_dense(PhaseBlockState(P, N, (0, 0, 1)))
    pvm = build_pvm(P, N)
    probs = pvm.probabilities(s)
    draws = [measure(s, pvm, np.random.default_rng(i))[0] for i in range(3000)]
    again = [measure(s, pvm, np.random.default_rng(i))[0] for i in range(3000)]
    assert draws == again
    for m in range(P):
        freq = draws.count(m) / len(draws)
        assert abs(freq - probs[m]) < 5 * math.sqrt(probs[m] * (1 - probs[m]) / len(draws)) + 1e-9


# --- density matrices ---------------------------------------------------------


def brute_partial_trace(state, keep):
    P, N = state.P, state.N
    rest = [s for s in range(N) if s not in keep]
    dk = P ** len(keep)
    rho = np.zeros((dk, dk), dtype=complex)
    for r in itertools.product(range(P), repeat=len(rest)):
        for a in itertools.product(range(P), repeat=len(keep)):
            for b in itertools.product(range(P), repeat=len(keep)):
                da, db = [0] * N, [0] * N
                for s, v in zip(rest, r):
                    da[s] = db[s] = v
                for s, v in zip(keep, a):
                    da[s] = v
                for s, v in zip(keep, b):
                    db[s] = v
                rho[index_of(P, a), index_of(P, b)] += (
                    state.amplitudes[index_of(P, da)] * state.amplitudes[index_of(P, db)].conj()
                )
    return rho


@pytest.mark.parametrize("keep", [[0], [1], [0, 2], [1, 2], [0, 1, 2]])
def test_partial_trace_matches_brute_force(keep):
    rng = np.random.default_rng(3)
    v = rng.normal(size=27) + 1j * rng.normal(size=27)
    state = DenseBlockState(3, 3, v / np.linalg.norm(v))
    assert np.allclose(partial_trace(state, keep).matrix, brute_partial_trace(state, keep), atol=1e-13)


@pytest.mark.parametrize("P, N", [(3, 3), (5, 2), (2, 3)])
def test_partial_trace_of_fourier_state_is_maximally_mixed(P, N):
    for m in range(P):
        rho = partial_trace(make_phi(P, N, m), [0])
        assert np.allclose(rho.matrix, np.eye(P) / P, atol=1e-13)
        assert abs(np.trace(rho.matrix) - 1) < 1e-12


def test_partial_trace_product_state():
    s = DenseBlockState.product(2, [np.array([1, 0]), np.array([0, 1])])
    assert np.allclose(partial_trace(s, [0]).matrix, [[1, 0], [0, 0]])
    with pytest.raises(ValidationError):
        partial_trace(s, [])


def test_mix_ensemble_examples():
    phi = make_phi(3, 2, 1)
    pure = mix_ensemble([(1.0, phi)])
    assert np.allclose(pure.matrix, np.outer(phi.amplitudes, phi.amplitudes.conj()))

    mix = mix_ensemble([(1 / 3, make_phi(3, 3, m)) for m in range(3)])
    expected = np.zeros((27, 27))
    for k in range(3):
        i = int(str(k) * 3, 3)
        expected[i, i] = 1 / 3
    assert np.allclose(mix.matrix, expected, atol=1e-13)

    half = mix_ensemble([(0.5, DenseBlockState.basis(2, (0,))), (0.5, DenseBlockState.basis(2, (1,)))])
    assert np.allclose(half.matrix, np.eye(2) / 2)


def test_mix_ensemble_rejects_bad_probabilities():
    s = make_psi(2, 1)
    with pytest.raises(ValidationError):
        mix_ensemble([(0.5, s), (0.6, s)])
    with pytest.raises(ValidationError):
        mix_ensemble([(-0.5, s), (1.5, s)])


def test_density_matrix_invariants():
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))


def test_trace_distance_examples():
    zero = DensityMatrix.pure(DenseBlockState.basis(2, (0,)))
    one = DensityMatrix.pure(DenseBlockState.basis(2, (1,)))
    assert trace_distance(zero, zero) == pytest.approx(0.0, abs=1e-15)
    assert trace_distance(zero, one) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValidationError):
        trace_distance(zero, DensityMatrix(np.eye(3) / 3))


def test_entropy_values():
    assert von_neumann_entropy(DensityMatrix.pure(make_phi(3, 2, 1))) == pytest.approx(0.0, abs=1e-10)
    assert von_neumann_entropy(DensityMatrix(np.eye(4) / 4)) == pytest.approx(2.0, abs=1e-12)


# --- tampering primitives -------------------------------------------------------


def test_shift_apply_matches_permutation_oracle():
    P, N = 3, 2
    shift = np.roll(np.eye(P), 1, axis=0)  # |k> -> |k+1>
    s = make_phi(P, N, 1)
    expected = site_operator(P, N, 1, shift) @ s.amplitudes
    assert np.allclose(shift_apply(s, 1).amplitudes, expected)


def test_unitary_apply_matches_kronecker_oracle():
    from scipy.stats import unitary_group

    P, N = 3, 3
    u = unitary_group.rvs(P, random_state=5)
    s = make_phi(P, N, 2)
    for site in range(N):
        expected = site_operator(P, N, site, u) @ s.amplitudes
        assert np.allclose(unitary_apply(s, site, u).amplitudes, expected, atol=1e-13)
