"""Ideal coin tossing cannot exist; this module grinds out the proof.

The argument is backward induction.  In an ideal protocol the party about
to send the last message already knows the outcome, so conditioning on
that outcome must leave the receiver with perfectly distinguishable
states -- pairwise fidelity zero.  When that holds, the last round can be
deleted: the receiver reads the outcome off the support projectors of the
conditional states instead of waiting for the message.  Iterating strips
every round.  A zero-round protocol starts from a product state, whose
halves share no mutual information, so the parties cannot agree on a
random outcome: contradiction.  A protocol where some conditional pair
stays distinguishable only with error certifies itself as not ideal, with
the offending fidelity as witness.

The round-count module ties off the quantitative side: any protocol whose
per-round information advance is at most epsilon while the parties' known
information never drifts apart by more than epsilon needs at least
ceil(1/epsilon) rounds to walk from (0,0) to (1,1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import protocol as proto
from . import qcore
from .fidelity import fidelity_trace
from .protocol import (
    KIND_COIN,
    ProtocolError,
    Projector,
    Round,
    other_actor,
)
from .qcore import InvariantViolation, Partition, PureState, zero_state

IDEAL_TOL = 1e-8
SUPPORT_CUTOFF = 1e-10
PURITY_TOL = 1e-8
COMPLETENESS_TOL = 1e-8
MI_TOL = 1e-9
OUTCOME_LABELS = ("0", "1", "invalid")
FLOAT_DENOMINATOR_CAP = 10 ** 12


@dataclass(frozen=True)
class CoinProtocol:
    """Alternating-round coin protocol with three-way outcome rules.

    ``outcome_rules`` maps each actor to projectors labeled "0", "1" and
    "invalid" that partition the actor's end-of-protocol holding: the last
    sender reads only their machine, the other party may also read the
    channel they just received.
    """

    name: str
    partition: Partition
    initial_alice: tuple
    initial_bob: tuple
    rounds: tuple
    outcome_rules: dict
    ancilla_owners: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for prev, rnd in zip(self.rounds, self.rounds[1:]):
            if prev.actor == rnd.actor:
                raise InvariantViolation("coin-toss rounds must strictly alternate")
        for rnd in self.rounds:
            if any(isinstance(op, proto.MeasureOp) for op in rnd.ops):
                raise InvariantViolation(
                    "coin protocol still contains measurements; purify first")
        if set(self.outcome_rules) != set(proto.ACTORS):
            raise InvariantViolation("outcome rules must cover alice and bob")
        sender = self.rounds[-1].actor if self.rounds else None
        for actor, rules in self.outcome_rules.items():
            if tuple(sorted(rules)) != tuple(sorted(OUTCOME_LABELS)):
                raise InvariantViolation(
                    f"{actor} outcome labels must be exactly 0, 1, invalid")
            holding = set(self.partition.machine(actor))
            if actor != sender:
                holding |= self.partition.channel_qubits
            space = set()
            for label, rule in rules.items():
                outside = set(rule.qubits) - holding
                if outside:
                    raise InvariantViolation(
                        f"{actor} outcome rule {label!r} reads qubit "
                        f"{min(outside)} outside their holding")
                space |= set(rule.qubits)
            space = tuple(sorted(space))
            total = sum(rules[label].lifted_matrix(space) for label in OUTCOME_LABELS)
            if np.max(np.abs(total - np.eye(2 ** len(space)))) > COMPLETENESS_TOL:
                raise InvariantViolation(
                    f"{actor} outcome rules do not sum to the identity within "
                    f"{COMPLETENESS_TOL}")

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    def declared_counts(self) -> dict:
        base = self.partition.num_qubits - len(self.ancilla_owners)
        return {
            "alice": sum(1 for q in self.partition.alice_qubits if q < base),
            "bob": sum(1 for q in self.partition.bob_qubits if q < base),
            "channel": len(self.partition.channel_qubits),
        }


@dataclass(frozen=True)
class FidelityTriple:
    """Pairwise fidelities of the receiver's conditional states.

    An entry is None when either outcome of its pair never occurs; absent
    pairs are vacuously orthogonal, so they count as 0 toward the maximum.
    ``present`` lists the outcome labels that actually occur.
    """

    f01: float | None
    f0inv: float | None
    f1inv: float | None
    present: tuple

    def __post_init__(self):
        for label, value in self.items():
            if value is not None and not -1e-12 <= value <= 1.0 + 1e-9:
                raise InvariantViolation(
                    f"fidelity {label} = {value} outside [0, 1]")
        bad = [p for p in self.present if p not in OUTCOME_LABELS]
        if bad:
            raise InvariantViolation(f"unknown outcome label {bad[0]!r}")
        object.__setattr__(self, "present", tuple(self.present))

    def items(self):
        return (("f01", self.f01), ("f0inv", self.f0inv), ("f1inv", self.f1inv))

    def max_fidelity(self) -> float:
        values = [v for _, v in self.items() if v is not None]
        return max(values) if values else 0.0

    def worst_pair(self):
        """(name, value) of the largest present fidelity, or (None, 0.0)."""
        best = (None, 0.0)
        for label, value in self.items():
            if value is not None and value >= best[1]:
                best = (label, value)
        return best


class NotIdealError(Exception):
    """Truncation refused: some conditional pair is not orthogonal."""

    def __init__(self, round_index: int, triple: FidelityTriple, tol: float):
        self.round_index = round_index
        self.triple = triple
        pair, value = triple.worst_pair()
        self.pair = pair
        self.fidelity = value
        super().__init__(
            f"round {round_index}: conditional fidelity {pair} = {value:.6g} "
            f"exceeds the orthogonality threshold {tol:g}")


@dataclass(frozen=True)
class TruncationStep:
    round_index: int
    sender: str
    triple: FidelityTriple


@dataclass(frozen=True)
class InductionVerdict:
    verdict: str                  # "contradiction" | "not_ideal"
    rounds: int
    steps: tuple
    mutual_information: float | None
    witness_round: int | None
    witness_fidelity: float | None
    witness_pair: str | None
    message: str


# ---------------------------------------------------------------------------
# parsing

_COIN_TOP_KEYS = ("name", "kind", "qubits", "params", "initial", "rounds",
                  "outcomes", "ancillas")


def parse_coin_protocol(document, *, param_overrides=None) -> CoinProtocol:
    """Parse a coin-toss document; measurements are compiled away on entry."""
    data = proto._load_yaml(document) if isinstance(document, str) else document
    data = proto._as_dict(data, "")
    proto._check_keys(data, _COIN_TOP_KEYS, "")
    kind = data.get("kind")
    if kind != KIND_COIN:
        raise ProtocolError(
            f"document kind {kind!r} is not coin-toss; bit-commitment documents "
            "go through parse_protocol", "kind")

    name, partition, owners, decl_a, decl_b, _ = proto._parse_header(data)
    params, env = proto._parse_params(data, param_overrides)

    initial = proto._as_dict(data.get("initial", {}) or {}, "initial")
    proto._check_keys(initial, ("alice", "bob"), "initial")
    prep_a = proto._parse_prep(initial.get("alice", []), env=env, allowed=decl_a,
                               num_qubits=partition.num_qubits,
                               describe="alice's declared qubits", loc="initial.alice")
    prep_b = proto._parse_prep(initial.get("bob", []), env=env, allowed=decl_b,
                               num_qubits=partition.num_qubits,
                               describe="bob's declared qubits", loc="initial.bob")

    results = {}
    rounds, _ = proto._parse_rounds(
        proto._req(data, "rounds", ""), env=env, partition=partition,
        loc="rounds", results=results, allow_measure=True,
        strict_alternation=True)
    owners_list = list(owners)
    partition, rounds = proto._purify_round_list(partition, owners_list, {}, rounds) \
        if any(isinstance(op, proto.MeasureOp) for rnd in rounds for op in rnd.ops) \
        else (partition, rounds)

    outcomes = proto._as_dict(proto._req(data, "outcomes", ""), "outcomes")
    proto._check_keys(outcomes, proto.ACTORS, "outcomes")
    rules = {}
    for actor in proto.ACTORS:
        section = proto._as_dict(proto._req(outcomes, actor, "outcomes"),
                                 f"outcomes.{actor}")
        labeled = {str(key): value for key, value in section.items()}
        if len(labeled) != len(section):
            raise ProtocolError("outcome labels repeat", f"outcomes.{actor}")
        unknown = [k for k in labeled if k not in OUTCOME_LABELS]
        if unknown:
            raise ProtocolError(
                f"outcome label must be 0, 1 or invalid, got {unknown[0]!r}",
                f"outcomes.{actor}")
        missing = [k for k in OUTCOME_LABELS if k not in labeled]
        if missing:
            raise ProtocolError(f"missing outcome label {missing[0]!r}",
                                f"outcomes.{actor}")
        machine = tuple(sorted(partition.machine(actor)))
        allowed = set(machine) | partition.channel_qubits
        rules[actor] = {
            label: proto._parse_projector(
                labeled[label], env=env, default_qubits=machine, allowed=allowed,
                num_qubits=partition.num_qubits, loc=f"outcomes.{actor}.{label}",
                allow_zero=True)
            for label in OUTCOME_LABELS
        }

    try:
        return CoinProtocol(
            name=name, partition=partition, initial_alice=prep_a,
            initial_bob=prep_b, rounds=rounds, outcome_rules=rules,
            ancilla_owners=tuple(owners_list), params=params)
    except InvariantViolation as exc:
        raise ProtocolError(str(exc)) from None


def load_coin_protocol(source: str, *, param_overrides=None) -> CoinProtocol:
    data, positional = proto.resolve_document(source)
    merged = dict(positional)
    merged.update(param_overrides or {})
    return parse_coin_protocol(data, param_overrides=merged)


# ---------------------------------------------------------------------------
# honest execution


def run_rounds(p: CoinProtocol) -> PureState:
    state = zero_state(p.partition.num_qubits)
    for op in p.initial_alice:
        state = qcore.apply_gate(state, op)
    for op in p.initial_bob:
        state = qcore.apply_gate(state, op)
    for rnd in p.rounds:
        for op in rnd.ops:
            state = qcore.apply_gate(state, op)
    return state


def outcome_distribution(p: CoinProtocol) -> dict:
    """Honest Born probabilities of each label, per actor."""
    state = run_rounds(p)
    return {
        actor: {label: rule.expectation(state) for label, rule in rules.items()}
        for actor, rules in p.outcome_rules.items()
    }


# ---------------------------------------------------------------------------
# last-round conditioning


def _condition_on_sender(p: CoinProtocol, allow_mixed_invalid: bool):
    """Project the sender's outcome rule on the pre-transmission state.

    Returns (sender, receiver, receiver machine, {label: (prob, rho)}) where
    rho is the receiver-machine reduction conditioned on the sender reading
    that label.  The channel still sits with the sender, so it is traced out.
    """
    if not p.rounds:
        raise ValueError("protocol has no rounds; nothing to condition on")
    state = run_rounds(p)
    sender = p.rounds[-1].actor
    receiver = other_actor(sender)
    keep = tuple(sorted(p.partition.machine(receiver)))
    conditional = {}
    for label in OUTCOME_LABELS:
        prob, post = p.outcome_rules[sender][label].project(state)
        if post is None:
            continue
        conditional[label] = (prob, qcore.partial_trace(post, keep))
    if "invalid" in conditional and not allow_mixed_invalid:
        rho = conditional["invalid"][1].entries
        purity = float(np.real(np.trace(rho @ rho)))
        if purity < 1.0 - PURITY_TOL:
            raise ValueError(
                f"the invalid outcome conditions the receiver on a mixed state "
                f"(purity {purity:.6g}); pass allow_mixed_invalid=True to drop "
                "the single-pure-state assumption")
    return sender, receiver, keep, conditional


def _triple_of(conditional) -> FidelityTriple:
    def pair(x, y):
        if x in conditional and y in conditional:
            return fidelity_trace(conditional[x][1], conditional[y][1])
        return None

    return FidelityTriple(
        f01=pair("0", "1"), f0inv=pair("0", "invalid"), f1inv=pair("1", "invalid"),
        present=tuple(label for label in OUTCOME_LABELS if label in conditional))


def last_round_fidelities(p: CoinProtocol, *, allow_mixed_invalid=False) -> FidelityTriple:
    """Pairwise fidelities of the receiver's sender-conditioned states."""
    _, _, _, conditional = _condition_on_sender(p, allow_mixed_invalid)
    return _triple_of(conditional)


def _support_projector(rho: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(rho)
    basis = vectors[:, values > SUPPORT_CUTOFF]
    return basis @ basis.conj().T


def truncate_last_round(p: CoinProtocol, *, tol=IDEAL_TOL,
                        allow_mixed_invalid=False) -> CoinProtocol:
    """Delete the final round of an ideal protocol, preserving outcomes.

    The receiver's new rule discriminates the supports of their conditional
    states (everything else counts as invalid); the sender's rule is pulled
    back through the deleted round's unitary.  Raises NotIdealError when
    any conditional pair has fidelity above ``tol``.
    """
    sender, receiver, keep, conditional = _condition_on_sender(p, allow_mixed_invalid)
    triple = _triple_of(conditional)
    if triple.max_fidelity() > tol:
        raise NotIdealError(p.num_rounds, triple, tol)

    dim = 2 ** len(keep)
    supports = {}
    for label in ("0", "1"):
        if label in conditional:
            supports[label] = _support_projector(conditional[label][1].entries)
        else:
            supports[label] = np.zeros((dim, dim), dtype=complex)
    remainder = np.eye(dim, dtype=complex) - supports["0"] - supports["1"]
    receiver_rules = {
        "0": Projector(keep, supports["0"]),
        "1": Projector(keep, supports["1"]),
        "invalid": Projector(keep, remainder),
    }

    last = p.rounds[-1]
    sender_space = tuple(sorted(set(p.partition.machine(sender))
                                | p.partition.channel_qubits))
    unitary = proto._circuit_matrix(last.ops, sender_space)
    sender_rules = {}
    for label in OUTCOME_LABELS:
        lifted = p.outcome_rules[sender][label].lifted_matrix(sender_space)
        sender_rules[label] = Projector(
            sender_space, unitary.conj().T @ lifted @ unitary)

    return CoinProtocol(
        name=p.name, partition=p.partition, initial_alice=p.initial_alice,
        initial_bob=p.initial_bob, rounds=p.rounds[:-1],
        outcome_rules={sender: sender_rules, receiver: receiver_rules},
        ancilla_owners=p.ancilla_owners, params=p.params)


def _channel_holder(p: CoinProtocol) -> str:
    channel = p.partition.channel_qubits
    for actor in proto.ACTORS:
        for rule in p.outcome_rules[actor].values():
            if channel & set(rule.qubits):
                return actor
    return "alice"


def induction_report(p: CoinProtocol, *, tol=IDEAL_TOL,
                     allow_mixed_invalid=False) -> InductionVerdict:
    """Run the backward induction to its verdict.

    Either every round truncates away and the zero-round protocol exposes
    the no-communication contradiction (a product state carries no mutual
    information, so requirement 3's agreed random outcome is unreachable),
    or some round refuses to truncate and the protocol is certified not
    ideal with the witness fidelity.
    """
    steps = []
    current = p
    while current.rounds:
        try:
            triple = last_round_fidelities(
                current, allow_mixed_invalid=allow_mixed_invalid)
            truncated = truncate_last_round(
                current, tol=tol, allow_mixed_invalid=allow_mixed_invalid)
        except NotIdealError as exc:
            return InductionVerdict(
                verdict="not_ideal", rounds=p.num_rounds, steps=tuple(steps),
                mutual_information=None, witness_round=exc.round_index,
                witness_fidelity=exc.fidelity, witness_pair=exc.pair,
                message=f"not ideal: {exc}")
        steps.append(TruncationStep(
            round_index=current.num_rounds, sender=current.rounds[-1].actor,
            triple=triple))
        current = truncated

    state = run_rounds(current)
    a_side = set(current.partition.machine("alice"))
    if _channel_holder(current) == "alice":
        a_side |= current.partition.channel_qubits
    mi = qcore.mutual_information(state, tuple(sorted(a_side)))
    shown = "0" if mi <= MI_TOL else f"{mi:.3e}"
    return InductionVerdict(
        verdict="contradiction", rounds=p.num_rounds, steps=tuple(steps),
        mutual_information=mi, witness_round=None, witness_fidelity=None,
        witness_pair=None,
        message=f"contradiction: mutual information {shown} at N=0")


# ---------------------------------------------------------------------------
# the N * epsilon >= 1 bound


def _as_fraction(value, what: str) -> Fraction:
    if isinstance(value, bool):
        raise TypeError(f"{what} must be a number, not a bool")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"{what} must be finite")
        return Fraction(value).limit_denominator(FLOAT_DENOMINATOR_CAP)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"{what} is not a rational literal: {value!r}") from None
    raise TypeError(f"{what} must be a number, Fraction, or rational string")


def min_rounds(epsilon) -> int:
    """ceil(1/epsilon): rounds needed when information moves <= epsilon per round.

    Floats are snapped to the nearest fraction with denominator at most
    10^12, so min_rounds(0.1) is 10, not the off-by-one a naive 1/float
    would give.
    """
    eps = _as_fraction(epsilon, "epsilon")
    if not 0 < eps <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return math.ceil(1 / eps)


@dataclass(frozen=True)
class WalkResult:
    ok: bool
    first_violation: int | None
    reason: str | None


def validate_walk(trajectory, epsilon) -> WalkResult:
    """Check an information walk: gap <= epsilon throughout, endpoint (1,1).

    ``trajectory`` is a sequence of (alice, bob) information pairs starting
    at (0, 0); values outside [0, 1] and a wrong start raise, anything else
    is a verdict.  Comparisons are exact rational arithmetic.
    """
    eps = _as_fraction(epsilon, "epsilon")
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    pairs = []
    for i, pair in enumerate(trajectory):
        try:
            a_raw, b_raw = pair
        except (TypeError, ValueError):
            raise ValueError(f"trajectory entry {i} is not a pair") from None
        a = _as_fraction(a_raw, f"trajectory[{i}][0]")
        b = _as_fraction(b_raw, f"trajectory[{i}][1]")
        if not (0 <= a <= 1 and 0 <= b <= 1):
            raise ValueError(f"trajectory entry {i} leaves [0, 1]")
        pairs.append((a, b))
    if not pairs:
        raise ValueError("trajectory is empty")
    if pairs[0] != (Fraction(0), Fraction(0)):
        raise ValueError("trajectory must start at (0, 0)")
    for i, (a, b) in enumerate(pairs):
        if abs(a - b) > eps:
            return WalkResult(
                ok=False, first_violation=i,
                reason=f"information gap {float(abs(a - b)):.6g} exceeds epsilon "
                       f"at step {i}")
    if pairs[-1] != (Fraction(1), Fraction(1)):
        return WalkResult(
            ok=False, first_violation=len(pairs) - 1,
            reason="endpoint is not (1, 1)")
    return WalkResult(ok=True, first_violation=None, reason=None)


# ---------------------------------------------------------------------------
# document emission


def _rule_node(rule: Projector):
    if not np.any(rule.matrix):
        return {"qubits": list(rule.qubits), "zero": True}
    return proto._projector_node(rule)


def coin_to_document(p: CoinProtocol) -> dict:
    doc = {
        "name": p.name,
        "kind": KIND_COIN,
        "qubits": p.declared_counts(),
        "initial": {
            "alice": [proto._op_node(op) for op in p.initial_alice],
            "bob": [proto._op_node(op) for op in p.initial_bob],
        },
        "rounds": [proto._round_node(r) for r in p.rounds],
        "outcomes": {
            actor: {label: _rule_node(p.outcome_rules[actor][label])
                    for label in OUTCOME_LABELS}
            for actor in proto.ACTORS
        },
    }
    if p.ancilla_owners:
        doc["ancillas"] = list(p.ancilla_owners)
    return doc
