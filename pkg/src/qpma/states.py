"""Quantum-state engines for a single block of N qudits of dimension P.

Two representations are kept side by side:

* :class:`DenseBlockState` holds all ``P**N`` amplitudes. It is the brute
  force reference and the only engine that can represent tampered states.
* :class:`PhaseBlockState` holds the ``P`` integer phase exponents of a state
  supported on the GHZ strings ``|k...k>``. Every honest protocol state lives
  there, and per-site clock operations reduce to exact integer updates.

Basis strings ``(k_0, ..., k_{N-1})`` are indexed big-endian: site 0 is the
most significant base-P digit, which matches a C-order reshape to ``[P]*N``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionGuardError, ValidationError
from .field import PrimeField, omega_table

MAX_DENSE_DIM = 10**7
MAX_DENSITY_DIM = 4096

BYZANTINE = "BYZANTINE"

Label = Union[int, str]

NORM_TOL = 1e-12


def check_block_dims(P: int, N: int) -> int:
    """Validate ``(P, N)`` for a dense block and return ``P**N``."""
    PrimeField(P)
    if N < 1:
        raise ValidationError("party_count", f"N must be >= 1, got {N}")
    dim = P**N
    if dim > MAX_DENSE_DIM:
        raise DimensionGuardError(f"P**N = {P}**{N} = {dim} exceeds {MAX_DENSE_DIM}")
    return dim


def ghz_indices(P: int, N: int) -> np.ndarray:
    """Flat indices of ``|k...k>`` for ``k = 0..P-1``."""
    stride = sum(P**j for j in range(N))
    return np.arange(P, dtype=np.int64) * stride


def _check_site(site: int, N: int) -> None:
    if not 0 <= site < N:
        raise ValidationError("site_range", f"site {site} not in [0, {N})")


@dataclass(frozen=True, eq=False)
class DenseBlockState:
    P: int
    N: int
    amplitudes: np.ndarray

    def __post_init__(self):
        dim = check_block_dims(self.P, self.N)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (dim,):
            raise ValidationError("state_dimension", f"expected {dim} amplitudes, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError("normalization", f"squared norm {norm!r} != 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape([self.P] * self.N)

    @classmethod
    def basis(cls, P: int, digits: Sequence[int]) -> DenseBlockState:
        """The computational basis state ``|digits>``."""
        N = len(digits)
        dim = check_block_dims(P, N)
        index = 0
        for d in digits:
            if not 0 <= d < P:
                raise ValidationError("digit_range", f"digit {d} not in [0, {P})")
            index = index * P + d
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(P, N, amps)

    @classmethod
    def product(cls, P: int, factors: Sequence[np.ndarray]) -> DenseBlockState:
        """Tensor product of single-qudit vectors, site 0 first."""
        amps = np.ones(1, dtype=complex)
        for f in factors:
            amps = np.kron(amps, np.asarray(f, dtype=complex))
        return cls(P, len(factors), amps)

    def allclose(self, other: DenseBlockState, atol: float = 1e-12) -> bool:
        return (self.P, self.N) == (other.P, other.N) and bool(
            np.max(np.abs(self.amplitudes - other.amplitudes)) <= atol
        )


@dataclass(frozen=True)
class PhaseBlockState:
    """``(1/sqrt(P)) * sum_k omega**exponents[k] |k...k>``."""

    P: int
    N: int
    exponents: tuple[int, ...]

    def __post_init__(self):
        PrimeField(self.P)
        if self.N < 1:
            raise ValidationError("party_count", f"N must be >= 1, got {self.N}")
        exps = tuple(int(e) for e in self.exponents)
        if len(exps) != self.P:
            raise ValidationError("exponent_length", f"need {self.P} exponents, got {len(exps)}")
        if any(not 0 <= e < self.P for e in exps):
            raise ValidationError("exponent_range", f"exponents {exps} not canonical mod {self.P}")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def ghz(cls, P: int, N: int) -> PhaseBlockState:
        return cls(P, N, (0,) * P)

    @classmethod
    def fourier(cls, P: int, N: int, m: int) -> PhaseBlockState:
        return cls(P, N, tuple((m * k) % P for k in range(P)))

    def fourier_label(self) -> int | None:
        """``m`` if this state equals ``phi_m`` up to a global phase, else None."""
        e0 = self.exponents[0]
        m = (self.exponents[1] - e0) % self.P if self.P > 1 else 0
        if all((e - e0) % self.P == (m * k) % self.P for k, e in enumerate(self.exponents)):
            return m
        return None

    def probabilities(self) -> np.ndarray:
        """Outcome probabilities over ``0..P-1`` followed by BYZANTINE."""
        probs = np.zeros(self.P + 1)
        m = self.fourier_label()
        if m is not None:
            probs[m] = 1.0
            return probs
        # <phi_m|xi> = (1/P) * sum_k omega^(e_k - m k)
        P = self.P
        table = omega_table(P)
        k = np.arange(P)
        e = np.array(self.exponents)
        for mm in range(P):
            overlap = table[(e - mm * k) % P].sum() / P
            probs[mm] = abs(overlap) ** 2
        return probs


def make_phi(P: int, N: int, m: int) -> DenseBlockState:
    """Dense ``phi_m = (1/sqrt(P)) sum_k omega^(m k) |k...k>``."""
    dim = check_block_dims(P, N)
    if not 0 <= m < P:
        raise ValidationError("exponent_range", f"m={m} not in [0, {P})")
    amps = np.zeros(dim, dtype=complex)
    table = omega_table(P)
    scale = 1 / math.sqrt(P)
    for k in range(P):
        index = 0
        for _ in range(N):
            index = index * P + k
        amps[index] = table[(m * k) % P] * scale
    return DenseBlockState(P, N, amps)


def make_psi(P: int, N: int) -> DenseBlockState:
    return make_phi(P, N, 0)


def clock_apply(state: DenseBlockState, site: int, power: int) -> DenseBlockState:
    """Apply ``Z**power`` to one site of a dense state."""
    _check_site(site, state.N)
    P = state.P
    shape = [1] * state.N
    shape[site] = P
    phases = omega_table(P)[(int(power) * np.arange(P)) % P].reshape(shape)
    return DenseBlockState(P, state.N, (state.tensor() * phases).reshape(-1))


def shift_apply(state: DenseBlockState, site: int, shift: int = 1) -> DenseBlockState:
    """Apply the cyclic shift ``|k> -> |k+shift mod P>`` to one site."""
    _check_site(site, state.N)
    rolled = np.roll(state.tensor(), int(shift), axis=site)
    return DenseBlockState(state.P, state.N, rolled.reshape(-1))


def unitary_apply(state: DenseBlockState, site: int, unitary: np.ndarray) -> DenseBlockState:
    """Apply an arbitrary ``P x P`` unitary to one site."""
    _check_site(site, state.N)
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (state.P, state.P):
        raise ValidationError("unitary_shape", f"expected {state.P}x{state.P}, got {u.shape}")
    t = np.tensordot(u, state.tensor(), axes=([1], [site]))
    t = np.moveaxis(t, 0, site)
    return DenseBlockState(state.P, state.N, t.reshape(-1))


def structured_apply(state: PhaseBlockState, site: int, power: int) -> PhaseBlockState:
    """Apply ``Z**power`` at ``site``; on GHZ strings the site does not matter."""
    _check_site(site, state.N)
    P = state.P
    return PhaseBlockState(
        P, state.N, tuple((e + int(power) * k) % P for k, e in enumerate(state.exponents))
    )


def structured_to_dense(state: PhaseBlockState) -> DenseBlockState:
    dim = check_block_dims(state.P, state.N)
    amps = np.zeros(dim, dtype=complex)
    amps[ghz_indices(state.P, state.N)] = omega_table(state.P)[list(state.exponents)] / math.sqrt(state.P)
    return DenseBlockState(state.P, state.N, amps)


def inner(a: DenseBlockState, b: DenseBlockState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if (a.P, a.N) != (b.P, b.N):
        raise ValidationError("dimension_match", f"({a.P},{a.N}) vs ({b.P},{b.N})")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


@dataclass(frozen=True, eq=False)
class BlockPvm:
    """Fourier projectors ``|phi_m><phi_m|`` for every ``m`` plus one lumped
    complement projector labelled :data:`BYZANTINE`.

    The projectors are described implicitly: the Fourier states are supported
    on the GHZ indices, so overlaps are a length-P DFT of those amplitudes and
    the complement weight is everything off the GHZ strings.
    """

    P: int
    N: int

    def __post_init__(self):
        check_block_dims(self.P, self.N)

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(range(self.P)) + (BYZANTINE,)

    @property
    def dim(self) -> int:
        return self.P**self.N

    def rank(self, label: Label) -> int:
        return self.dim - self.P if label == BYZANTINE else 1

    def fourier_vector(self, m: int) -> np.ndarray:
        return make_phi(self.P, self.N, m).amplitudes

    def projector(self, label: Label) -> np.ndarray:
        """Materialise one projector as a dense matrix (small blocks only)."""
        if self.dim > MAX_DENSITY_DIM:
            raise DimensionGuardError(f"projector of dimension {self.dim} exceeds {MAX_DENSITY_DIM}")
        if label == BYZANTINE:
            proj = np.eye(self.dim, dtype=complex)
            for m in range(self.P):
                v = self.fourier_vector(m)
                proj -= np.outer(v, v.conj())
            return proj
        v = self.fourier_vector(int(label))
        return np.outer(v, v.conj())

    def probabilities(self, state: DenseBlockState) -> np.ndarray:
        if (state.P, state.N) != (self.P, self.N):
            raise ValidationError("dimension_match", "state and PVM dimensions differ")
        P = self.P
        ghz = state.amplitudes[ghz_indices(P, self.N)]
        table = omega_table(P)
        k = np.arange(P)
        # <phi_m|xi> = (1/sqrt(P)) sum_k omega^(-m k) xi_{k...k}
        dft = np.array([np.sum(table[(-m * k) % P] * ghz) for m in range(P)]) / math.sqrt(P)
        probs = np.empty(P + 1)
        probs[:P] = np.abs(dft) ** 2
        total = float(np.vdot(state.amplitudes, state.amplitudes).real)
        probs[P] = max(0.0, total - float(np.vdot(ghz, ghz).real))
        return probs


def build_pvm(P: int, N: int) -> BlockPvm:
    return BlockPvm(P, N)


def sample_label(labels: Sequence[Label], probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF sampling in label order; returns an index into ``labels``."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(labels) - 1)


def measure(
    state: DenseBlockState, pvm: BlockPvm, rng: np.random.Generator
) -> tuple[Label, float]:
    probs = pvm.probabilities(state)
    if abs(probs.sum() - 1.0) > 1e-10:
        raise ValidationError("normalization", f"outcome probabilities sum to {probs.sum()!r}")
    i = sample_label(pvm.labels, probs, rng)
    return pvm.labels[i], float(probs[i])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density_shape", f"not a square matrix: {rho.shape}")
        if rho.shape[0] > MAX_DENSITY_DIM:
            raise DimensionGuardError(f"density matrix dimension {rho.shape[0]} exceeds {MAX_DENSITY_DIM}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise ValidationError("hermitian", "density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValidationError("unit_trace", f"trace {np.trace(rho)!r} != 1")
        if np.linalg.eigvalsh(rho)[0] < -1e-10:
            raise ValidationError("positive_semidefinite", "negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, state: DenseBlockState) -> DensityMatrix:
        v = state.amplitudes
        return cls(np.outer(v, v.conj()))


def partial_trace(state: DenseBlockState, keep_sites: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on ``keep_sites`` (kept in ascending site order)."""
    keep = sorted(set(keep_sites))
    if not keep:
        raise ValidationError("keep_sites", "keep set must be nonempty")
    for s in keep:
        _check_site(s, state.N)
    rest = [s for s in range(state.N) if s not in keep]
    dk = state.P ** len(keep)
    if dk > MAX_DENSITY_DIM:
        raise DimensionGuardError(f"reduced dimension {dk} exceeds {MAX_DENSITY_DIM}")
    m = np.transpose(state.tensor(), keep + rest).reshape(dk, -1)
    return DensityMatrix(m @ m.conj().T)


def mix_ensemble(
    states: Sequence[tuple[float, Union[DenseBlockState, DensityMatrix]]],
) -> DensityMatrix:
    """``sum_j p_j rho_j``; pure states are promoted to projectors."""
    if not states:
        raise ValidationError("probability_sum", "empty ensemble")
    probs = np.array([p for p, _ in states], dtype=float)
    if np.any(probs < 0):
        raise ValidationError("probability_sum", "negative probability")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ValidationError("probability_sum", f"probabilities sum to {probs.sum()!r}")
    rho = None
    for p, s in states:
        term = DensityMatrix.pure(s).matrix if isinstance(s, DenseBlockState) else s.matrix
        rho = p * term if rho is None else rho + p * term
    return DensityMatrix(rho)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.dim != b.dim:
        raise ValidationError("dimension_match", f"{a.dim} vs {b.dim}")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits."""
    lam = np.linalg.eigvalsh(rho.matrix)
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log2(lam)))
