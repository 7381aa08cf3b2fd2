"""Numerical certificates for security, privacy, correctness and tampering.

Everything here runs on the dense engine with exact enumeration, so it is
meant for desk-scale parameters. Each check returns plain numbers; the
caller decides on tolerances (the defaults used by the CLI grid are the
module-level constants).
"""

from __future__ import annotations

import functools
import itertools
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionGuardError, ValidationError, ZeroProbabilityCondition
from .field import PrimeField, is_prime
from .protocol import (
    ByzantineSpec,
    Scenario,
    TamperMode,
    canonical_ordering,
    execute,
    incidence,
    seed_streams,
    tamper,
)
from .states import (
    BYZANTINE,
    DensityMatrix,
    DenseBlockState,
    build_pvm,
    check_block_dims,
    clock_apply,
    inner,
    make_phi,
    make_psi,
    mix_ensemble,
    partial_trace,
    structured_to_dense,
    trace_distance,
    von_neumann_entropy,
)

__all__ = [
    "ByzantineSpec",
    "TamperMode",
    "PriorModel",
    "verify_security",
    "verify_privacy",
    "verify_correctness_exhaustive",
    "byzantine_experiment",
    "verify_entropy_checks",
    "fourier_orthonormality_error",
    "run_verification_grid",
    "CheckRow",
    "format_table",
]

SECURITY_TOL = 1e-10
PRIVACY_TOL = 1e-12
PROBABILITY_TOL = 1e-10
ENTROPY_TOL = 1e-10
FOURIER_TOL = 1e-13


@dataclass(frozen=True)
class PriorModel:
    """iid Bernoulli(q) membership for every (party, element) pair."""

    q: float

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValidationError("membership_probability", f"q={self.q} not in [0, 1]")

    def weight(self, bits: Sequence[int]) -> float:
        ones = sum(bits)
        return self.q**ones * (1 - self.q) ** (len(bits) - ones)


def all_incidences(N: int, K: int) -> list[tuple[tuple[int, ...], ...]]:
    """Every N x K 0/1 incidence matrix, as tuples of party rows."""
    out = []
    for flat in itertools.product((0, 1), repeat=N * K):
        out.append(tuple(tuple(flat[i * K : (i + 1) * K]) for i in range(N)))
    return out


def dense_block_pipeline(
    P: int,
    column: Sequence[int],
    pads: Sequence[int | None],
    leader: int,
    leader_encodes: bool = True,
    byzantine: ByzantineSpec | None = None,
    decode: bool = True,
) -> DenseBlockState:
    """Run one block through encode (and optionally decode) on the dense engine.

    ``column[i]`` is party i's input for this block and ``pads[i]`` its pad
    (ignored for the leader). ``byzantine``, if given, applies to this block.
    """
    N = len(column)
    state = make_psi(P, N)
    for i in range(N):
        if i == leader:
            if leader_encodes:
                state = clock_apply(state, i, column[i] % P)
            continue
        power = (column[i] + (pads[i] or 0)) % P
        if byzantine is not None and byzantine.party == i:
            state = tamper(state, i, power, byzantine)
        else:
            state = clock_apply(state, i, power)
    if decode:
        for k in range(N):
            if k != leader:
                state = clock_apply(state, k, (-(pads[k] or 0)) % P)
    return state


def _pad_combinations(P: int, N: int, leader: int, use_pads: bool):
    others = [i for i in range(N) if i != leader]
    if not use_pads:
        yield [None] * N
        return
    for combo in itertools.product(range(P), repeat=len(others)):
        pads: list[int | None] = [None] * N
        for i, u in zip(others, combo):
            pads[i] = u
        yield pads


def eavesdropper_state(
    P: int,
    column: Sequence[int],
    intercept: Sequence[int],
    leader: int = 0,
    use_pads: bool = True,
) -> DensityMatrix:
    """Intercepted qudits of one encoded block, averaged exactly over all pads."""
    N = len(column)
    combos = list(_pad_combinations(P, N, leader, use_pads))
    w = 1.0 / len(combos)
    reduced = [
        (w, partial_trace(dense_block_pipeline(P, column, pads, leader, decode=False), intercept))
        for pads in combos
    ]
    return mix_ensemble(reduced)


@dataclass(frozen=True)
class SecurityResult:
    max_distance: float
    pairs: int
    intercept: tuple[int, ...]


def verify_security(
    N: int,
    K: int,
    P: int,
    assignments: Sequence[Sequence[Sequence[int]]] | None = None,
    leader: int = 0,
    intercept: Sequence[int] | None = None,
    use_pads: bool = True,
) -> SecurityResult:
    """Largest trace distance between eavesdropper views of different inputs.

    ``assignments`` is a list of N x K incidence matrices (all of them if
    omitted). ``intercept`` defaults to every non-leader site. Block ``l``
    only depends on column ``l``, so views are computed per distinct column.
    """
    PrimeField(P)
    check_block_dims(P, N)
    if P ** (N - 1) > 10**5:
        raise DimensionGuardError(f"{P}**{N - 1} pad combinations is too many to average exactly")
    if assignments is None:
        assignments = all_incidences(N, K)
    sites = tuple(sorted(intercept)) if intercept is not None else tuple(i for i in range(N) if i != leader)
    worst = 0.0
    pairs = 0
    cache: dict[tuple[int, ...], DensityMatrix] = {}
    for l in range(K):
        columns = sorted({tuple(E[i][l] for i in range(N)) for E in assignments})
        for c in columns:
            if c not in cache:
                cache[c] = eavesdropper_state(P, c, sites, leader, use_pads)
        for a, b in itertools.combinations(columns, 2):
            worst = max(worst, trace_distance(cache[a], cache[b]))
            pairs += 1
    return SecurityResult(worst, pairs, sites)


@functools.lru_cache(maxsize=32)
def _likelihood_table(N: int, K: int, P: int, leader: int, seed: int):
    """For every incidence matrix: its flat bits and per-block outcome probabilities."""
    table = []
    for i, E in enumerate(all_incidences(N, K)):
        run = execute(P, E, leader, seed + i, dense=True)
        pvm = build_pvm(P, N)
        probs = np.array([pvm.probabilities(b) for b in run.decoded])
        table.append((E, probs))
    return table


def verify_privacy(
    N: int,
    K: int,
    P: int,
    prior: PriorModel,
    k: int,
    l: int,
    m: int,
    leader: int = 0,
    seed: int = 0,
) -> tuple[float, float]:
    """``(P(E_k[l]=1 | block l measures m), P(E_k[l]=1 | sum_i E_i[l] = m mod P))``.

    Both are computed by enumerating every incidence matrix under the prior.
    The first uses the dense protocol's exact outcome probabilities.
    """
    if N * K > 20:
        raise DimensionGuardError(f"N*K={N * K} exceeds 20 for exhaustive enumeration")
    if not (0 <= k < N and 0 <= l < K and 0 <= m < P):
        raise ValidationError("privacy_indices", f"(k,l,m)={(k, l, m)} out of range")
    num_q = den_q = num_s = den_s = 0.0
    for E, probs in _likelihood_table(N, K, P, leader, seed):
        w = prior.weight([b for row in E for b in row])
        bit = E[k][l]
        pm = probs[l][m]
        den_q += w * pm
        num_q += w * pm * bit
        if sum(row[l] for row in E) % P == m:
            den_s += w
            num_s += w * bit
    if den_q <= 0.0 or den_s <= 0.0:
        raise ZeroProbabilityCondition(f"outcome m={m} has probability zero (N={N}, P={P}, q={prior.q})")
    return num_q / den_q, num_s / den_s


@dataclass
class CorrectnessResult:
    passed: bool
    configurations: int
    max_probability_error: float
    max_engine_error: float
    failures: list[str] = field(default_factory=list)


def verify_correctness_exhaustive(
    N: int, K: int, P: int, leader: int = 0, seed: int = 0
) -> CorrectnessResult:
    """Run every incidence configuration through both engines.

    The structured run supplies the sampled outcome and the pads; the dense
    route replays the same pads with explicit clock matrices and measures the
    probability of the expected outcome with the Fourier PVM.
    """
    if 2 ** (N * K) > 2**16:
        raise DimensionGuardError(f"2**(N*K) = 2**{N * K} configurations exceeds 2**16")
    check_block_dims(P, N)
    pvm = build_pvm(P, N)
    failures = []
    max_prob_err = 0.0
    max_engine_err = 0.0
    configs = all_incidences(N, K)
    for i, E in enumerate(configs):
        run = execute(P, E, leader, seed + i)
        for l in range(K):
            expected = sum(row[l] for row in E) % P
            column = [row[l] for row in E]
            pads = [run.pads[j][l] if j != leader else None for j in range(N)]
            dense = dense_block_pipeline(P, column, pads, leader)
            p = pvm.probabilities(dense)[expected]
            max_prob_err = max(max_prob_err, abs(p - 1.0))
            engine_err = float(np.max(np.abs(structured_to_dense(run.decoded[l]).amplitudes - dense.amplitudes)))
            max_engine_err = max(max_engine_err, engine_err)
            outcome = run.outcomes[l][0]
            if outcome != expected or abs(p - 1.0) > PROBABILITY_TOL:
                failures.append(f"E={E} block={l}: outcome={outcome} expected={expected} p={p:.3e}")
    return CorrectnessResult(not failures, len(configs), max_prob_err, max_engine_err, failures)


@dataclass
class ByzantineResult:
    trials: int
    detection_rate: float
    misreport_rate: float
    exact_detection: float
    exact_misreport: float
    outcome_shifts: Counter = field(default_factory=Counter)


def byzantine_experiment(
    scenario: Scenario, spec: ByzantineSpec, trials: int, seed: int | None = None
) -> ByzantineResult:
    """Repeat the protocol with one tampering party and tally what the leader sees.

    Detection means some tampered block measured BYZANTINE; a misreport is an
    undetected trial where some tampered block reads a wrong count. Untampered
    blocks are honest and independent, so only tampered blocks are simulated.
    """
    if trials < 1:
        raise ValidationError("trials", "need at least one trial")
    scenario = replace(scenario, byzantine=spec)
    P, N, L = scenario.P, scenario.N, scenario.leader
    check_block_dims(P, N)
    ordering = canonical_ordering(scenario.universal_set)
    E = [incidence(s, ordering) for s in scenario.resolved_sets()]
    pvm = build_pvm(P, N)
    rng = np.random.default_rng(seed if seed is not None else seed_streams(scenario.master_seed).tamper)
    cache: dict[tuple, np.ndarray] = {}
    others = [i for i in range(N) if i != L]
    expected = {l: sum(row[l] for row in E) % P for l in spec.blocks}
    labels = tuple(range(P)) + (BYZANTINE,)

    detected = misreported = 0
    exact_det = exact_mis = 0.0
    shifts: Counter = Counter()
    for _ in range(trials):
        pads = rng.integers(0, P, size=(len(others), len(spec.blocks)))
        no_detect = all_right = 1.0
        trial_detect = trial_wrong = False
        for j, l in enumerate(spec.blocks):
            key = (l, tuple(pads[:, j]))
            probs = cache.get(key)
            if probs is None:
                block_pads: list[int | None] = [None] * N
                for i, u_val in zip(others, pads[:, j]):
                    block_pads[i] = int(u_val)
                column = [row[l] for row in E]
                state = dense_block_pipeline(P, column, block_pads, L, scenario.leader_encodes, spec)
                probs = pvm.probabilities(state)
                cache[key] = probs
            no_detect *= 1.0 - probs[P]
            all_right *= probs[expected[l]]
            i = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
            outcome = labels[min(i, P)]
            if outcome == BYZANTINE:
                trial_detect = True
            else:
                shifts[(outcome - expected[l]) % P] += 1
                if outcome != expected[l]:
                    trial_wrong = True
        exact_det += 1.0 - no_detect
        exact_mis += no_detect - all_right
        detected += trial_detect
        misreported += (not trial_detect) and trial_wrong
    return ByzantineResult(
        trials=trials,
        detection_rate=detected / trials,
        misreport_rate=misreported / trials,
        exact_detection=exact_det / trials,
        exact_misreport=exact_mis / trials,
        outcome_shifts=shifts,
    )


@dataclass(frozen=True)
class EntropyReport:
    pure: float
    fourier_mixture: float
    single_qudit: float
    expected_mixed: float

    @property
    def passed(self) -> bool:
        return (
            abs(self.pure) <= ENTROPY_TOL
            and abs(self.fourier_mixture - self.expected_mixed) <= ENTROPY_TOL
            and abs(self.single_qudit - self.expected_mixed) <= ENTROPY_TOL
        )


def verify_entropy_checks(P: int, N: int) -> EntropyReport:
    """Von Neumann entropies (bits) of a Fourier state, the uniform Fourier
    mixture, and a single-qudit marginal."""
    dim = check_block_dims(P, N)
    if dim > 4096:
        raise DimensionGuardError(f"density matrices of dimension {dim} are too large")
    m = 1 % P
    phi = make_phi(P, N, m)
    pure = von_neumann_entropy(DensityMatrix.pure(phi))
    mixture = von_neumann_entropy(mix_ensemble([(1.0 / P, make_phi(P, N, j)) for j in range(P)]))
    single = von_neumann_entropy(partial_trace(make_psi(P, N), [0]))
    return EntropyReport(pure, mixture, single, math.log2(P))


def fourier_orthonormality_error(P: int, N: int) -> float:
    """``max |<phi_m|phi_n> - delta_mn|`` over all ``m, n`` in ``[P]``."""
    phis = [make_phi(P, N, m) for m in range(P)]
    return max(
        abs(inner(phis[m], phis[n]) - (1.0 if m == n else 0.0)) for m in range(P) for n in range(P)
    )


@dataclass(frozen=True)
class CheckRow:
    case: str
    quantity: str
    value: float
    tolerance: float
    passed: bool


def format_table(rows: Sequence[CheckRow]) -> str:
    header = f"{'case':<34} {'quantity':<28} {'value':>12} {'tolerance':>10}  result"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.case:<34} {r.quantity:<28} {r.value:>12.3e} {r.tolerance:>10.1e}  {'PASS' if r.passed else 'FAIL'}"
        )
    failed = sum(not r.passed for r in rows)
    lines.append(f"{len(rows)} checks, {failed} failed")
    return "\n".join(lines) + "\n"


def _primes_between(lo: int, hi: int) -> list[int]:
    return [p for p in range(lo, hi + 1) if is_prime(p)]


def run_verification_grid(
    max_n: int = 3, max_k: int = 2, max_p: int = 5, trials: int = 2000, seed: int = 0
) -> list[CheckRow]:
    """Run every analysis check over ``2 <= N <= max_n``, ``1 <= K <= max_k``
    and primes ``N <= P <= max_p``."""
    rows: list[CheckRow] = []
    for N in range(2, max_n + 1):
        for P in _primes_between(N, max_p):
            tag = f"N={N},P={P}"
            err = fourier_orthonormality_error(P, N)
            rows.append(CheckRow(tag, "fourier_orthonormality", err, FOURIER_TOL, err < FOURIER_TOL))
            ent = verify_entropy_checks(P, N)
            rows.append(CheckRow(tag, "entropy_pure", abs(ent.pure), ENTROPY_TOL, abs(ent.pure) <= ENTROPY_TOL))
            for name, val in (("entropy_fourier_mix", ent.fourier_mixture), ("entropy_marginal", ent.single_qudit)):
                dev = abs(val - ent.expected_mixed)
                rows.append(CheckRow(tag, name, dev, ENTROPY_TOL, dev <= ENTROPY_TOL))
            for K in range(1, max_k + 1):
                ktag = f"{tag},K={K}"
                if 2 ** (N * K) <= 2**16:
                    res = verify_correctness_exhaustive(N, K, P, seed=seed)
                    rows.append(CheckRow(ktag, "correctness_prob_error", res.max_probability_error, PROBABILITY_TOL, res.passed))
                for label, sites in (("all_links", None), ("single_link", (1,))):
                    sec = verify_security(N, K, P, intercept=sites)
                    rows.append(CheckRow(ktag, f"security_{label}", sec.max_distance, SECURITY_TOL, sec.max_distance < SECURITY_TOL))
                if N * K <= 12:
                    worst = 0.0
                    for q in (0.25, 0.5, 0.75):
                        prior = PriorModel(q)
                        for k, l, m in itertools.product(range(N), range(K), range(P)):
                            try:
                                a, b = verify_privacy(N, K, P, prior, k, l, m, seed=seed)
                            except ZeroProbabilityCondition:
                                continue
                            worst = max(worst, abs(a - b))
                    rows.append(CheckRow(ktag, "privacy_posterior_gap", worst, PRIVACY_TOL, worst <= PRIVACY_TOL))
            rows.extend(_byzantine_rows(N, P, trials, seed))
    return rows


def _byzantine_rows(N: int, P: int, trials: int, seed: int) -> list[CheckRow]:
    tag = f"N={N},P={P}"
    universe = ("x",)
    scenario = Scenario(N, universe, party_sets=tuple(universe if i % 2 == 0 else () for i in range(N)),
                        prime_override=P, master_seed=seed)
    rows = []
    wrong = byzantine_experiment(scenario, ByzantineSpec(1, TamperMode.WRONG_PHASE, (0,)), trials, seed)
    rows.append(CheckRow(tag, "wrong_phase_detection", wrong.detection_rate, 0.0, wrong.detection_rate == 0.0))
    miss_gap = abs(wrong.misreport_rate - 1.0)
    rows.append(CheckRow(tag, "wrong_phase_misreport_gap", miss_gap, 0.0, miss_gap == 0.0))
    shift = byzantine_experiment(scenario, ByzantineSpec(1, TamperMode.SHIFT, (0,)), trials, seed)
    shift_gap = abs(shift.exact_detection - 1.0)
    rows.append(CheckRow(tag, "shift_detection_gap", shift_gap, 1e-12, shift_gap <= 1e-12))
    rnd = byzantine_experiment(scenario, ByzantineSpec(1, TamperMode.RANDOM_UNITARY, (0,), seed=seed), trials, seed)
    gap = abs(rnd.detection_rate - rnd.exact_detection)
    tol = 5 / math.sqrt(trials)
    rows.append(CheckRow(tag, "random_unitary_rate_gap", gap, tol, gap <= tol))
    return rows
