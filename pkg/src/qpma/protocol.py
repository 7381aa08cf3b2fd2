"""End-to-end simulation of private membership aggregation over GHZ blocks.

One block of N qudits is shared per element of the universal set; party ``i``
owns site ``i`` of every block. Each party applies ``Z**(U_i + E_i)`` to its
site, ships its qudits to the leader, and the leader strips the pads with
``Z**(-U_i)``. The decoded block for element ``l`` is ``phi_m`` with
``m = sum_i E_i[l] mod P``, which a Fourier PVM reads off with certainty.

Honest runs use the exact :class:`~qpma.states.PhaseBlockState` engine. A
run with a :class:`ByzantineSpec` switches to dense blocks so that tampering
outside the clock group can be represented.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.stats import unitary_group

from .errors import ProtocolAbort, ValidationError
from .field import PrimeField, is_prime, smallest_prime_geq
from .states import (
    BYZANTINE,
    BlockPvm,
    DenseBlockState,
    Label,
    PhaseBlockState,
    build_pvm,
    clock_apply,
    sample_label,
    shift_apply,
    structured_apply,
    structured_to_dense,
    unitary_apply,
)

Block = Union[PhaseBlockState, DenseBlockState]
IncidenceVector = tuple[int, ...]
RandomPad = tuple[int, ...]


class TamperMode(str, enum.Enum):
    WRONG_PHASE = "WRONG_PHASE"
    SHIFT = "SHIFT"
    RANDOM_UNITARY = "RANDOM_UNITARY"


@dataclass(frozen=True)
class ByzantineSpec:
    """A non-leader party that deviates on some blocks.

    WRONG_PHASE applies ``Z**(intended + delta)``; SHIFT applies the honest
    phase followed by ``X**shift``; RANDOM_UNITARY applies the honest phase
    followed by a Haar-random unitary drawn from ``seed``.
    """

    party: int
    mode: TamperMode
    blocks: tuple[int, ...]
    delta: int = 1
    shift: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", TamperMode(self.mode))
        object.__setattr__(self, "blocks", tuple(sorted(set(int(b) for b in self.blocks))))
        if not self.blocks:
            raise ValidationError("byzantine_blocks", "Byzantine spec needs at least one block")

    def unitary(self, P: int) -> np.ndarray:
        return haar_unitary(P, self.seed)


@functools.lru_cache(maxsize=64)
def haar_unitary(P: int, seed: int) -> np.ndarray:
    u = unitary_group.rvs(P, random_state=np.random.default_rng(seed))
    u.setflags(write=False)
    return u


@dataclass(frozen=True)
class Scenario:
    N: int
    universal_set: tuple[str, ...]
    party_sets: tuple[tuple[str, ...], ...] | None = None
    q: float = 0.5
    leader: int = 0
    prime_override: int | None = None
    master_seed: int = 0
    leader_encodes: bool = True
    byzantine: ByzantineSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "universal_set", tuple(self.universal_set))
        if self.party_sets is not None:
            object.__setattr__(self, "party_sets", tuple(tuple(s) for s in self.party_sets))
        if self.N < 2:
            raise ValidationError("party_count", f"N must be >= 2, got {self.N}")
        if not self.universal_set:
            raise ValidationError("universal_nonempty", "universal set must have K >= 1 elements")
        canonical_ordering(self.universal_set)
        if not 0 <= self.leader < self.N:
            raise ValidationError("leader_range", f"leader {self.leader} not in [0, {self.N})")
        if self.prime_override is not None:
            if not is_prime(self.prime_override):
                raise ValidationError("prime_override", f"{self.prime_override} is not prime")
            if self.prime_override < self.N:
                raise ValidationError("prime_override", f"P={self.prime_override} < N={self.N}")
        if not 0.0 <= self.q <= 1.0:
            raise ValidationError("membership_probability", f"q={self.q} not in [0, 1]")
        if self.party_sets is not None:
            if len(self.party_sets) != self.N:
                raise ValidationError("party_sets_count", f"{len(self.party_sets)} sets for N={self.N}")
            universe = set(self.universal_set)
            for i, s in enumerate(self.party_sets):
                unknown = [x for x in s if x not in universe]
                if unknown:
                    raise ValidationError("subset_of_universal", f"party {i} holds unknown {unknown}")
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("seed_range", "master_seed must fit in 64 unsigned bits")
        b = self.byzantine
        if b is not None:
            if not 0 <= b.party < self.N or b.party == self.leader:
                raise ValidationError("byzantine_party", f"party {b.party} must be a non-leader party")
            if any(not 0 <= x < self.K for x in b.blocks):
                raise ValidationError("byzantine_blocks", f"blocks {b.blocks} out of range [0, {self.K})")

    @property
    def K(self) -> int:
        return len(self.universal_set)

    @property
    def P(self) -> int:
        return self.prime_override if self.prime_override is not None else smallest_prime_geq(self.N)

    def resolved_sets(self) -> tuple[tuple[str, ...], ...]:
        """The party sets, drawing iid Bernoulli(q) membership if none are given."""
        if self.party_sets is not None:
            return self.party_sets
        rng = np.random.default_rng(seed_streams(self.master_seed).sets)
        member = rng.random((self.N, self.K)) < self.q
        return tuple(
            tuple(x for x, hit in zip(self.universal_set, row) if hit) for row in member
        )


@dataclass(frozen=True)
class SeedStreams:
    sets: np.random.SeedSequence
    pads: np.random.SeedSequence
    measurement: np.random.SeedSequence
    tamper: np.random.SeedSequence


def seed_streams(master_seed: int) -> SeedStreams:
    """Independent child streams so pads never share state with set generation."""
    return SeedStreams(*np.random.SeedSequence(master_seed).spawn(4))


def canonical_ordering(universal_set: Sequence[str]) -> dict[str, int]:
    ordering: dict[str, int] = {}
    for label in universal_set:
        if label in ordering:
            raise ValidationError("distinct_labels", f"duplicate label {label!r}")
        ordering[label] = len(ordering)
    return ordering


def incidence(party_set, ordering: Mapping[str, int]) -> IncidenceVector:
    vec = [0] * len(ordering)
    for x in party_set:
        if x not in ordering:
            raise ValidationError("subset_of_universal", f"unknown label {x!r}")
        vec[ordering[x]] = 1
    return tuple(vec)


@dataclass(frozen=True)
class AnswerMessage:
    """What party ``party`` hands over after encoding.

    ``powers`` records the clock power applied to each block and ``blocks`` is
    the joint block state after this party acted.
    """

    party: int
    powers: tuple[int, ...]
    blocks: tuple[Block, ...]
    tampered: tuple[int, ...] = ()

    @property
    def qudit_count(self) -> int:
        return len(self.blocks)


@dataclass
class Channel:
    """Ordered, reliable delivery to the leader with passive tap points."""

    leader: int
    taps: list[Callable[[AnswerMessage], None]] = field(default_factory=list)
    inbox: dict[int, AnswerMessage] = field(default_factory=dict)
    log: list[AnswerMessage] = field(default_factory=list)

    def send(self, msg: AnswerMessage) -> None:
        if msg.party == self.leader:
            raise ValidationError("leader_no_transmit", "the leader does not transmit to itself")
        for tap in self.taps:
            tap(msg)
        self.log.append(msg)
        self.inbox[msg.party] = msg

    @property
    def transmitted_qudits(self) -> int:
        return sum(m.qudit_count for m in self.log)

    def digest(self) -> str:
        h = hashlib.sha256()
        for m in self.log:
            h.update(f"party={m.party};powers={','.join(map(str, m.powers))};tampered={','.join(map(str, m.tampered))}\n".encode())
        return h.hexdigest()


def setup(
    P: int, N: int, K: int, leader: int, pad_seed: np.random.SeedSequence | int | None = None
) -> tuple[tuple[PhaseBlockState, ...], dict[int, RandomPad]]:
    """K blocks in the GHZ state and a uniform pad in F_P^K per non-leader party."""
    PrimeField(P)
    rng = np.random.default_rng(pad_seed)
    blocks = tuple(PhaseBlockState.ghz(P, N) for _ in range(K))
    pads = {
        i: tuple(int(u) for u in rng.integers(0, P, size=K)) for i in range(N) if i != leader
    }
    return blocks, pads


def setup_scenario(scenario: Scenario):
    return setup(
        scenario.P, scenario.N, scenario.K, scenario.leader, seed_streams(scenario.master_seed).pads
    )


def apply_phase(block: Block, site: int, power: int) -> Block:
    if isinstance(block, PhaseBlockState):
        return structured_apply(block, site, power)
    return clock_apply(block, site, power)


def tamper(block: DenseBlockState, site: int, intended: int, spec: ByzantineSpec) -> DenseBlockState:
    """Replace the honest ``Z**intended`` at ``site`` with the spec's deviation."""
    P = block.P
    if spec.mode is TamperMode.WRONG_PHASE:
        return clock_apply(block, site, (intended + spec.delta) % P)
    honest = clock_apply(block, site, intended)
    if spec.mode is TamperMode.SHIFT:
        return shift_apply(honest, site, spec.shift)
    return unitary_apply(honest, site, spec.unitary(P))


def encode_party(
    party: int,
    E: Sequence[int],
    U: Sequence[int] | None,
    blocks: Sequence[Block],
    byzantine: ByzantineSpec | None = None,
) -> AnswerMessage:
    """Apply ``Z**((U + E)_l)`` at site ``party`` of every block ``l``.

    ``U=None`` means no pad (the leader's own encoding).
    """
    P = blocks[0].P
    K = len(blocks)
    if len(E) != K or (U is not None and len(U) != K):
        raise ValidationError("vector_length", f"expected length-{K} vectors")
    pad = U if U is not None else (0,) * K
    powers = tuple((int(u) + int(e)) % P for u, e in zip(pad, E))
    bad = set(byzantine.blocks) if byzantine is not None and byzantine.party == party else set()
    out = []
    for l, (block, power) in enumerate(zip(blocks, powers)):
        if l in bad:
            if not isinstance(block, DenseBlockState):
                raise ValidationError("dense_engine", "tampering requires dense blocks")
            out.append(tamper(block, party, power, byzantine))
        else:
            out.append(apply_phase(block, party, power))
    return AnswerMessage(party, powers, tuple(out), tuple(sorted(bad)))


def leader_decode(
    answers: Mapping[int, AnswerMessage],
    pads: Mapping[int, Sequence[int]],
    blocks: Sequence[Block],
    leader: int,
) -> tuple[Block, ...]:
    """Strip every pad with ``Z**(-U_k)`` on site ``k``; abort on a missing answer."""
    missing = sorted(k for k in pads if k not in answers)
    if missing:
        raise ProtocolAbort(f"leader {leader} never received answers from parties {missing}")
    P = blocks[0].P
    out = list(blocks)
    for k, pad in pads.items():
        if k == leader:
            continue
        for l, u in enumerate(pad):
            out[l] = apply_phase(out[l], k, (-int(u)) % P)
    return tuple(out)


def block_probabilities(block: Block, pvm: BlockPvm | None = None) -> np.ndarray:
    if isinstance(block, PhaseBlockState):
        return block.probabilities()
    return (pvm or build_pvm(block.P, block.N)).probabilities(block)


def measure_blocks(
    blocks: Sequence[Block], rng: np.random.Generator, pvm: BlockPvm | None = None
) -> list[tuple[Label, float]]:
    """Measure each block independently; returns ``(label, probability)`` per block."""
    results = []
    for block in blocks:
        probs = block_probabilities(block, pvm)
        labels = tuple(range(block.P)) + (BYZANTINE,)
        i = sample_label(labels, probs, rng)
        results.append((labels[i], float(probs[i])))
    return results


@dataclass(frozen=True)
class DownloadCost:
    bits: float
    per_element_bits: float
    qudits: int


def download_cost(N: int, K: int, P: int) -> DownloadCost:
    if N < 2 or K < 1 or not is_prime(P) or P < N:
        raise ValidationError("cost_arguments", f"need N>=2, K>=1, prime P>=N; got {(N, K, P)}")
    per = (N - 1) * math.log2(P)
    return DownloadCost(bits=K * per, per_element_bits=per, qudits=(N - 1) * K)


@dataclass(frozen=True)
class Execution:
    """Internal record of one pipeline pass, shared by aggregation and summation."""

    encoded: tuple[Block, ...]
    decoded: tuple[Block, ...]
    outcomes: tuple[tuple[Label, float], ...]
    channel: Channel
    pads: dict[int, RandomPad]


def execute(
    P: int,
    inputs: Sequence[Sequence[int]],
    leader: int,
    master_seed: int,
    leader_encodes: bool = True,
    byzantine: ByzantineSpec | None = None,
    taps: Sequence[Callable[[AnswerMessage], None]] = (),
    dense: bool = False,
) -> Execution:
    N = len(inputs)
    K = len(inputs[0])
    streams = seed_streams(master_seed)
    blocks, pads = setup(P, N, K, leader, streams.pads)
    if dense or byzantine is not None:
        blocks = tuple(structured_to_dense(b) for b in blocks)
    channel = Channel(leader, list(taps))
    current: tuple[Block, ...] = blocks
    for i in range(N):
        if i == leader:
            if leader_encodes:
                current = encode_party(i, inputs[i], None, current).blocks
            continue
        msg = encode_party(i, inputs[i], pads[i], current, byzantine)
        channel.send(msg)
        current = msg.blocks
    encoded = current
    decoded = leader_decode(channel.inbox, pads, encoded, leader)
    rng = np.random.default_rng(streams.measurement)
    pvm = build_pvm(P, N) if isinstance(decoded[0], DenseBlockState) else None
    outcomes = tuple(measure_blocks(decoded, rng, pvm))
    return Execution(encoded, decoded, outcomes, channel, pads)


@dataclass(frozen=True)
class ElementOutcome:
    label: str
    outcome: Label
    probability: float
    true_sum: int
    refined_count: int | None


@dataclass(frozen=True)
class AggregationReport:
    N: int
    K: int
    P: int
    leader: int
    leader_encodes: bool
    per_element: tuple[ElementOutcome, ...]
    leader_refined: tuple[tuple[str, int], ...]
    decoded_labels: tuple[int | None, ...]
    download_cost_bits: float
    per_element_cost_bits: float
    transmitted_qudits: int
    transcript_digest: str
    byzantine: ByzantineSpec | None = None

    @property
    def outcomes(self) -> tuple[Label, ...]:
        return tuple(e.outcome for e in self.per_element)

    @property
    def byzantine_flags(self) -> tuple[bool, ...]:
        return tuple(e.outcome == BYZANTINE for e in self.per_element)


def decoded_label(block: Block) -> int | None:
    """Fourier index of a decoded block, or None if it is not a Fourier state."""
    if isinstance(block, PhaseBlockState):
        return block.fourier_label()
    probs = build_pvm(block.P, block.N).probabilities(block)
    m = int(np.argmax(probs))
    return m if m < block.P and abs(probs[m] - 1.0) <= 1e-10 else None


def refine(outcome: Label, own_bit: int, N: int, leader_encodes: bool) -> int | None:
    """Turn a raw outcome into a count using the leader's own membership bit."""
    if outcome == BYZANTINE:
        return None
    if not leader_encodes:
        # the outcome counts only the N-1 other parties, always < P
        return int(outcome) + own_bit
    if outcome == 0 and own_bit == 1:
        return N
    return int(outcome)


def run_qpma(
    scenario: Scenario, taps: Sequence[Callable[[AnswerMessage], None]] = ()
) -> AggregationReport:
    P, N, K, L = scenario.P, scenario.N, scenario.K, scenario.leader
    ordering = canonical_ordering(scenario.universal_set)
    E = [incidence(s, ordering) for s in scenario.resolved_sets()]
    run = execute(P, E, L, scenario.master_seed, scenario.leader_encodes, scenario.byzantine, taps)

    per_element = []
    refined = []
    for l, label in enumerate(scenario.universal_set):
        outcome, prob = run.outcomes[l]
        true_sum = sum(e[l] for e in E)
        count = refine(outcome, E[L][l], N, scenario.leader_encodes)
        per_element.append(ElementOutcome(label, outcome, prob, true_sum, count))
        if count is not None and count != outcome:
            refined.append((label, count))
    qudits = run.channel.transmitted_qudits
    return AggregationReport(
        N=N,
        K=K,
        P=P,
        leader=L,
        leader_encodes=scenario.leader_encodes,
        per_element=tuple(per_element),
        leader_refined=tuple(refined),
        decoded_labels=tuple(decoded_label(b) for b in run.decoded),
        download_cost_bits=qudits * math.log2(P),
        per_element_cost_bits=qudits * math.log2(P) / K,
        transmitted_qudits=qudits,
        transcript_digest=run.channel.digest(),
        byzantine=scenario.byzantine,
    )


@dataclass(frozen=True)
class SummationConfig:
    """Per-party input vectors over F_P; one block per vector coordinate."""

    P: int
    inputs: tuple[tuple[int, ...], ...]
    leader: int = 0
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(tuple(int(x) for x in row) for row in self.inputs))
        PrimeField(self.P)
        if len(self.inputs) < 2:
            raise ValidationError("party_count", "summation needs at least 2 parties")
        K = len(self.inputs[0])
        if K < 1 or any(len(r) != K for r in self.inputs):
            raise ValidationError("vector_length", "all input vectors must share one nonzero length")
        for i, row in enumerate(self.inputs):
            if any(not 0 <= x < self.P for x in row):
                raise ValidationError("input_range", f"party {i} input {row} not in [0, {self.P})")
        if not 0 <= self.leader < len(self.inputs):
            raise ValidationError("leader_range", f"leader {self.leader} out of range")


@dataclass(frozen=True)
class SummationResult:
    P: int
    sums: tuple[Label, ...]
    probabilities: tuple[float, ...]
    transcript_digest: str


def run_summation(config: SummationConfig) -> SummationResult:
    run = execute(config.P, config.inputs, config.leader, config.master_seed)
    return SummationResult(
        P=config.P,
        sums=tuple(o for o, _ in run.outcomes),
        probabilities=tuple(p for _, p in run.outcomes),
        transcript_digest=run.channel.digest(),
    )
