"""Protocol documents: parsing, validation, purification, honest execution.

A protocol document is YAML describing a two-party commitment protocol in
the two-machines-plus-channel register model: qubit counts, Alice's two
initial preparations (one per committed bit), Bob's preparation, the
commit and open round lists, and Bob's per-bit acceptance projectors.
Measurements inside rounds are legal in documents; ``purify_protocol``
compiles them away into ancilla entanglement so every analysis runs on a
closed unitary circuit.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from . import qcore
from .fidelity import fidelity_trace
from .qcore import GateOp, InvariantViolation, Partition, PureState, zero_state

PROJECTOR_TOL = 1e-8
PRESENCE_CUTOFF = 1e-12
BRANCH_CUTOFF = 1e-15

ACTORS = ("alice", "bob")
BUILTIN_NAMES = ("bell-bc", "bb84-bc", "leaky-bc", "ideal-ct", "guess-ct")

KIND_COMMITMENT = "bit-commitment"
KIND_COIN = "coin-toss"


class ProtocolError(ValueError):
    """Document rejected; ``location`` is the field path of the problem."""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def other_actor(actor: str) -> str:
    return "bob" if actor == "alice" else "alice"


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class MeasureOp:
    """Computational-basis measurement recording its result under a label."""

    targets: tuple
    result_id: str

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclass(frozen=True)
class Round:
    actor: str
    ops: tuple
    allow_consecutive: bool = False


@dataclass(frozen=True)
class Projector:
    """Hermitian idempotent on an explicit, strictly increasing qubit list."""

    qubits: tuple
    matrix: np.ndarray

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        if not qubits or any(a >= b for a, b in zip(qubits, qubits[1:])):
            raise InvariantViolation(f"projector qubits must strictly increase, got {qubits}")
        mat = np.array(self.matrix, dtype=complex)
        want = 2 ** len(qubits)
        if mat.shape != (want, want):
            raise InvariantViolation(
                f"projector matrix shape {mat.shape} does not match {len(qubits)} qubits")
        if np.max(np.abs(mat - mat.conj().T)) > PROJECTOR_TOL:
            raise InvariantViolation(f"projector is not Hermitian within {PROJECTOR_TOL}")
        if np.max(np.abs(mat @ mat - mat)) > PROJECTOR_TOL:
            raise InvariantViolation(f"projector is not idempotent within {PROJECTOR_TOL}")
        mat.setflags(write=False)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "matrix", mat)

    def expectation(self, state: PureState) -> float:
        projected = qcore._apply_matrix(
            state.amplitudes, self.matrix, self.qubits, state.num_qubits)
        return float(np.real(np.vdot(state.amplitudes, projected)))

    def project(self, state: PureState, cutoff: float = PRESENCE_CUTOFF):
        """(probability, normalized post-state or None when below cutoff)."""
        projected = qcore._apply_matrix(
            state.amplitudes, self.matrix, self.qubits, state.num_qubits)
        prob = float(np.real(np.vdot(projected, projected)))
        if prob <= cutoff:
            return prob, None
        return prob, PureState(projected / math.sqrt(prob))

    def lifted_matrix(self, space) -> np.ndarray:
        """The same operator written on a sorted superset of qubits."""
        space = tuple(space)
        positions = tuple(space.index(q) for q in self.qubits)
        return _embed(self.matrix, positions, len(space))


@dataclass(frozen=True)
class Protocol:
    """A parsed bit-commitment protocol over an explicit register partition."""

    name: str
    partition: Partition
    initial_alice: tuple          # (ops for b=0, ops for b=1)
    initial_bob_channel: tuple
    commit_rounds: tuple
    open_rounds: tuple
    verification: tuple           # (accept projector for b=0, for b=1)
    ancilla_owners: tuple = ()
    params: dict = field(default_factory=dict)

    @property
    def ancilla_count(self) -> int:
        return len(self.ancilla_owners)

    @property
    def all_rounds(self) -> tuple:
        return self.commit_rounds + self.open_rounds

    @property
    def has_measurements(self) -> bool:
        return any(
            isinstance(op, MeasureOp) for rnd in self.all_rounds for op in rnd.ops)

    def declared_counts(self) -> dict:
        """Qubit counts of the document header, ancillas excluded."""
        base = self.partition.num_qubits - len(self.ancilla_owners)
        return {
            "alice": sum(1 for q in self.partition.alice_qubits if q < base),
            "bob": sum(1 for q in self.partition.bob_qubits if q < base),
            "channel": len(self.partition.channel_qubits),
        }


# ---------------------------------------------------------------------------
# small matrix helpers


def _embed(matrix: np.ndarray, positions, k: int) -> np.ndarray:
    """Lift an operator on ``positions`` to the full 2^k space."""
    t = len(positions)
    if t == k and positions == tuple(range(k)):
        return np.array(matrix, dtype=complex)
    op = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * t))
    full = np.eye(2 ** k, dtype=complex).reshape((2,) * k + (2 ** k,))
    out = np.tensordot(op, full, axes=(tuple(range(t, 2 * t)), tuple(positions)))
    out = np.moveaxis(out, tuple(range(t)), tuple(positions))
    return out.reshape(2 ** k, 2 ** k)


def _circuit_matrix(ops, qubits) -> np.ndarray:
    """Matrix of a gate list on the subspace spanned by ``qubits`` (sorted)."""
    k = len(qubits)
    mat = np.eye(2 ** k, dtype=complex)
    for op in ops:
        positions = tuple(qubits.index(t) for t in op.targets)
        mat = _embed(qcore.gate_matrix(op), positions, k) @ mat
    return mat


# ---------------------------------------------------------------------------
# document loading


def _load_yaml(text: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "document"
        raise ProtocolError(f"YAML syntax error at {where}: {exc}") from exc
    if not isinstance(data, dict):
        raise ProtocolError("protocol document must be a mapping")
    return data


def _builtin_text(name: str) -> str:
    path = resources.files("qcheat").joinpath("builtins", f"{name}.yaml")
    return path.read_text(encoding="utf-8")


def resolve_document(source: str):
    """Builtin name (optionally with a parenthesized parameter) or file path.

    Returns (document dict, parameter overrides).
    """
    source = source.strip()
    overrides = {}
    if source.endswith(")") and "(" in source:
        name, _, arg = source[:-1].partition("(")
        name = name.strip()
        if name in BUILTIN_NAMES:
            try:
                value = float(arg)
            except ValueError:
                raise ProtocolError(
                    f"bad parameter value {arg!r} in {source!r}") from None
            data = _load_yaml(_builtin_text(name))
            params = data.get("params")
            if not isinstance(params, dict) or len(params) != 1:
                raise ProtocolError(
                    f"{name!r} does not take exactly one positional parameter")
            overrides = {next(iter(params)): value}
            return data, overrides
    if source in BUILTIN_NAMES:
        return _load_yaml(_builtin_text(source)), overrides
    try:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProtocolError(
            f"{source!r} is neither a built-in protocol nor a readable file "
            f"({exc.strerror or exc})") from exc
    return _load_yaml(text), overrides


# ---------------------------------------------------------------------------
# field accessors with location-bearing diagnostics


def _loc(parent, child):
    return f"{parent}.{child}" if parent else str(child)


def _req(data, key, loc):
    if key not in data:
        raise ProtocolError(f"missing required field {key!r}", loc)
    return data[key]


def _as_dict(value, loc):
    if not isinstance(value, dict):
        raise ProtocolError("expected a mapping", loc)
    return value


def _as_list(value, loc):
    if not isinstance(value, list):
        raise ProtocolError("expected a list", loc)
    return value


def _as_str(value, loc):
    if not isinstance(value, str):
        raise ProtocolError("expected a string", loc)
    return value


def _as_count(value, loc):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ProtocolError("expected a positive integer", loc)
    return value


def _check_keys(data, allowed, loc):
    unknown = [k for k in data if k not in allowed]
    if unknown:
        raise ProtocolError(f"unknown field {unknown[0]!r}", loc)


def _as_number(value, loc):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError("expected a number", loc)
    return float(value)


# ---------------------------------------------------------------------------
# angle expressions

_BIN_OPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def _eval_expr(node, env, loc, source):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise ProtocolError(f"unknown name {node.id!r} in angle {source!r}", loc)
        return float(env[node.id])
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        value = _eval_expr(node.operand, env, loc, source)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
        left = _eval_expr(node.left, env, loc, source)
        right = _eval_expr(node.right, env, loc, source)
        try:
            return _BIN_OPS[type(node.op)](left, right)
        except ZeroDivisionError:
            raise ProtocolError(f"division by zero in angle {source!r}", loc) from None
    raise ProtocolError(
        f"unsupported construct in angle {source!r} (numbers, parameter names, "
        "+, -, *, /, ** only)", loc)


def _parse_angle(value, env, loc):
    if isinstance(value, bool):
        raise ProtocolError("angle must be a number or expression string", loc)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            tree = ast.parse(value, mode="eval")
        except SyntaxError:
            raise ProtocolError(f"malformed angle expression {value!r}", loc) from None
        return _eval_expr(tree.body, env, loc, value)
    raise ProtocolError("angle must be a number or expression string", loc)


# ---------------------------------------------------------------------------
# matrix literals: [re, im] pairs, flat row-major or nested by rows


def _parse_pair(entry, loc):
    if not isinstance(entry, list) or len(entry) != 2:
        raise ProtocolError("matrix entries must be [re, im] pairs", loc)
    return complex(_as_number(entry[0], loc), _as_number(entry[1], loc))


def _parse_matrix(node, loc):
    rows = _as_list(node, loc)
    if not rows:
        raise ProtocolError("empty matrix literal", loc)
    nested = isinstance(rows[0], list) and rows[0] and isinstance(rows[0][0], list)
    if nested:
        dim = len(rows)
        out = np.zeros((dim, dim), dtype=complex)
        for i, row in enumerate(rows):
            row = _as_list(row, loc)
            if len(row) != dim:
                raise ProtocolError(
                    f"matrix row {i} has {len(row)} entries, expected {dim}", loc)
            for j, entry in enumerate(row):
                out[i, j] = _parse_pair(entry, loc)
        return out
    dim = math.isqrt(len(rows))
    if dim * dim != len(rows):
        raise ProtocolError(
            f"flat matrix literal has {len(rows)} entries, not a square count", loc)
    flat = np.array([_parse_pair(entry, loc) for entry in rows], dtype=complex)
    return flat.reshape(dim, dim)


# ---------------------------------------------------------------------------
# ops and rounds

_OP_KEYS = ("gate", "targets", "angle", "matrix", "control_classical")
_MEASURE_KEYS = ("measure", "targets", "result_id")


def _parse_targets(node, allowed, num_qubits, loc, describe):
    targets = _as_list(_req(node, "targets", loc), _loc(loc, "targets"))
    out = []
    for t in targets:
        if isinstance(t, bool) or not isinstance(t, int):
            raise ProtocolError("targets must be integers", _loc(loc, "targets"))
        if not 0 <= t < num_qubits:
            raise ProtocolError(
                f"target {t} outside the {num_qubits}-qubit register", _loc(loc, "targets"))
        if t not in allowed:
            raise ProtocolError(
                f"target {t} is outside {describe}", _loc(loc, "targets"))
        out.append(t)
    return tuple(out)


def _parse_op(node, *, env, allowed, num_qubits, describe, loc,
              results, actor, allow_measure):
    node = _as_dict(node, loc)
    if "measure" in node:
        if not allow_measure:
            raise ProtocolError("measurements are not allowed here", loc)
        _check_keys(node, _MEASURE_KEYS, loc)
        if node["measure"] is not True:
            raise ProtocolError("measure must be the literal true", _loc(loc, "measure"))
        targets = _parse_targets(node, allowed, num_qubits, loc, describe)
        if not targets:
            raise ProtocolError("measurement needs at least one target", loc)
        result_id = _as_str(_req(node, "result_id", loc), _loc(loc, "result_id"))
        if result_id in results:
            raise ProtocolError(f"duplicate result_id {result_id!r}", _loc(loc, "result_id"))
        results[result_id] = (actor, len(targets))
        return MeasureOp(targets, result_id)

    _check_keys(node, _OP_KEYS, loc)
    name = _as_str(_req(node, "gate", loc), _loc(loc, "gate"))
    if name not in qcore.GATE_NAMES:
        raise ProtocolError(f"unknown gate name {name!r}", _loc(loc, "gate"))
    targets = _parse_targets(node, allowed, num_qubits, loc, describe)
    angle = None
    if "angle" in node:
        angle = _parse_angle(node["angle"], env, _loc(loc, "angle"))
    matrix = None
    if "matrix" in node:
        matrix = _parse_matrix(node["matrix"], _loc(loc, "matrix"))
    control = None
    if "control_classical" in node:
        control = _as_str(node["control_classical"], _loc(loc, "control_classical"))
        if actor is None:
            raise ProtocolError("classical controls are not allowed here",
                                _loc(loc, "control_classical"))
        if control not in results:
            raise ProtocolError(
                f"classical control references unknown or later result {control!r}",
                _loc(loc, "control_classical"))
        owner = results[control][0]
        if owner != actor:
            raise ProtocolError(
                f"classical control {control!r} belongs to {owner}; only the "
                "measuring party may condition on it", _loc(loc, "control_classical"))
    try:
        return GateOp(name, targets, param=angle, matrix=matrix, control_classical=control)
    except InvariantViolation as exc:
        raise ProtocolError(str(exc), loc) from None


def _parse_prep(nodes, *, env, allowed, num_qubits, describe, loc):
    ops = []
    for i, node in enumerate(_as_list(nodes, loc)):
        ops.append(_parse_op(
            node, env=env, allowed=allowed, num_qubits=num_qubits,
            describe=describe, loc=f"{loc}[{i}]",
            results={}, actor=None, allow_measure=False))
    return tuple(ops)


def _parse_rounds(nodes, *, env, partition, loc, results, allow_measure,
                  strict_alternation, prev_actor=None):
    rounds = []
    for i, node in enumerate(_as_list(nodes, loc)):
        rloc = f"{loc}[{i}]"
        node = _as_dict(node, rloc)
        _check_keys(node, ("actor", "ops", "allow_consecutive"), rloc)
        actor = _as_str(_req(node, "actor", rloc), _loc(rloc, "actor"))
        if actor not in ACTORS:
            raise ProtocolError(f"actor must be alice or bob, got {actor!r}",
                                _loc(rloc, "actor"))
        allow_consecutive = bool(node.get("allow_consecutive", False))
        if actor == prev_actor:
            if strict_alternation:
                raise ProtocolError("rounds must strictly alternate actors", rloc)
            if not allow_consecutive:
                raise ProtocolError(
                    f"{actor} acts twice in a row; annotate allow_consecutive "
                    "if intended", rloc)
        allowed = partition.machine(actor) | partition.channel_qubits
        describe = f"{actor}'s machine or the channel"
        ops = []
        for j, op_node in enumerate(_as_list(_req(node, "ops", rloc), _loc(rloc, "ops"))):
            ops.append(_parse_op(
                op_node, env=env, allowed=allowed, num_qubits=partition.num_qubits,
                describe=describe, loc=f"{rloc}.ops[{j}]",
                results=results, actor=actor, allow_measure=allow_measure))
        rounds.append(Round(actor, tuple(ops), allow_consecutive))
        prev_actor = actor
    return tuple(rounds), prev_actor


# ---------------------------------------------------------------------------
# projector specs

_PROJECTOR_KEYS = ("qubits", "gates", "accept_states", "matrix", "zero")


def _parse_projector(spec, *, env, default_qubits, allowed, num_qubits, loc,
                     allow_zero=False):
    spec = _as_dict(spec, loc)
    _check_keys(spec, _PROJECTOR_KEYS, loc)
    if "qubits" in spec:
        qubits = []
        for q in _as_list(spec["qubits"], _loc(loc, "qubits")):
            if isinstance(q, bool) or not isinstance(q, int):
                raise ProtocolError("qubits must be integers", _loc(loc, "qubits"))
            qubits.append(q)
        qubits = tuple(qubits)
        if any(a >= b for a, b in zip(qubits, qubits[1:])) or not qubits:
            raise ProtocolError("qubits must be strictly increasing", _loc(loc, "qubits"))
        bad = [q for q in qubits if q not in allowed]
        if bad:
            raise ProtocolError(f"qubit {bad[0]} is outside the allowed holding",
                                _loc(loc, "qubits"))
    else:
        qubits = tuple(default_qubits)
        if not qubits:
            raise ProtocolError("no default qubits available; give an explicit list", loc)
    k = len(qubits)

    forms = [key for key in ("zero", "matrix", "accept_states") if key in spec]
    if len(forms) != 1:
        raise ProtocolError(
            "projector spec needs exactly one of: matrix, accept_states, zero", loc)

    if "zero" in spec:
        if not allow_zero:
            raise ProtocolError("zero projectors are not allowed here", _loc(loc, "zero"))
        if spec["zero"] is not True:
            raise ProtocolError("zero must be the literal true", _loc(loc, "zero"))
        if "gates" in spec:
            raise ProtocolError("zero takes no gates", _loc(loc, "gates"))
        return Projector(qubits, np.zeros((2 ** k, 2 ** k), dtype=complex))

    if "matrix" in spec:
        if "gates" in spec:
            raise ProtocolError("give either a matrix or a gate list, not both",
                                _loc(loc, "gates"))
        matrix = _parse_matrix(spec["matrix"], _loc(loc, "matrix"))
        try:
            return Projector(qubits, matrix)
        except InvariantViolation as exc:
            raise ProtocolError(str(exc), _loc(loc, "matrix")) from None

    gates = []
    for j, node in enumerate(_as_list(spec.get("gates", []), _loc(loc, "gates"))):
        gates.append(_parse_op(
            node, env=env, allowed=set(qubits), num_qubits=num_qubits,
            describe="the projector's qubit list", loc=f"{loc}.gates[{j}]",
            results={}, actor=None, allow_measure=False))
    states = _as_list(spec["accept_states"], _loc(loc, "accept_states"))
    mask = np.zeros(2 ** k)
    for s in states:
        s = _as_str(s, _loc(loc, "accept_states"))
        if len(s) != k or any(ch not in "01" for ch in s):
            raise ProtocolError(
                f"accept state {s!r} is not a {k}-bit string", _loc(loc, "accept_states"))
        index = int(s, 2)
        if mask[index]:
            raise ProtocolError(f"accept state {s!r} repeats", _loc(loc, "accept_states"))
        mask[index] = 1.0
    circuit = _circuit_matrix(gates, qubits)
    matrix = circuit.conj().T @ (mask[:, None] * circuit)
    return Projector(qubits, matrix)


# ---------------------------------------------------------------------------
# whole-document parsing

_TOP_KEYS = ("name", "kind", "qubits", "params", "initial",
             "commit_rounds", "open_rounds", "verify", "ancillas")


def _parse_header(data):
    """Shared front matter: name, params env, partition, declared ranges."""
    name = _as_str(_req(data, "name", ""), "name")
    counts = _as_dict(_req(data, "qubits", ""), "qubits")
    _check_keys(counts, ("alice", "bob", "channel"), "qubits")
    na = _as_count(_req(counts, "alice", "qubits"), "qubits.alice")
    nb = _as_count(_req(counts, "bob", "qubits"), "qubits.bob")
    nc = _as_count(_req(counts, "channel", "qubits"), "qubits.channel")

    declared_alice = frozenset(range(na))
    declared_bob = frozenset(range(na, na + nb))
    declared_channel = frozenset(range(na + nb, na + nb + nc))
    partition = Partition(declared_alice, declared_bob, declared_channel)

    owners = []
    for i, owner in enumerate(_as_list(data.get("ancillas", []), "ancillas")):
        owner = _as_str(owner, f"ancillas[{i}]")
        if owner not in ACTORS:
            raise ProtocolError(f"ancilla owner must be alice or bob, got {owner!r}",
                                f"ancillas[{i}]")
        partition = partition.add_ancilla(owner)
        owners.append(owner)
    if partition.num_qubits > qcore.MAX_QUBITS:
        raise ProtocolError(
            f"{partition.num_qubits} qubits declared; the register is capped at "
            f"{qcore.MAX_QUBITS}", "qubits")

    return name, partition, tuple(owners), declared_alice, declared_bob, declared_channel


def _parse_params(data, overrides):
    params = {}
    for key, value in _as_dict(data.get("params", {}) or {}, "params").items():
        params[str(key)] = _as_number(value, f"params.{key}")
    if overrides:
        unknown = [k for k in overrides if k not in params]
        if unknown:
            raise ProtocolError(f"override for undeclared parameter {unknown[0]!r}",
                                "params")
        params.update({k: float(v) for k, v in overrides.items()})
    env = dict(params)
    env["pi"] = math.pi
    return params, env


def parse_protocol(document, *, param_overrides=None) -> Protocol:
    """Parse and validate a bit-commitment document (YAML text or mapping)."""
    data = _load_yaml(document) if isinstance(document, str) else document
    data = _as_dict(data, "")
    _check_keys(data, _TOP_KEYS, "")
    kind = data.get("kind", KIND_COMMITMENT)
    if kind != KIND_COMMITMENT:
        raise ProtocolError(
            f"document kind {kind!r} is not a bit commitment; coin-toss documents "
            "go through parse_coin_protocol", "kind")

    name, partition, owners, decl_a, decl_b, decl_c = _parse_header(data)
    params, env = _parse_params(data, param_overrides)

    initial = _as_dict(data.get("initial", {}) or {}, "initial")
    _check_keys(initial, ("alice0", "alice1", "bob_channel"), "initial")
    prep0 = _parse_prep(initial.get("alice0", []), env=env, allowed=decl_a,
                        num_qubits=partition.num_qubits,
                        describe="alice's declared qubits", loc="initial.alice0")
    prep1 = _parse_prep(initial.get("alice1", []), env=env, allowed=decl_a,
                        num_qubits=partition.num_qubits,
                        describe="alice's declared qubits", loc="initial.alice1")
    prep_bc = _parse_prep(initial.get("bob_channel", []), env=env,
                          allowed=decl_b | decl_c,
                          num_qubits=partition.num_qubits,
                          describe="bob's declared qubits or the channel",
                          loc="initial.bob_channel")

    results = {}
    commit_rounds, last = _parse_rounds(
        data.get("commit_rounds", []), env=env, partition=partition,
        loc="commit_rounds", results=results, allow_measure=True,
        strict_alternation=False)
    open_rounds, _ = _parse_rounds(
        data.get("open_rounds", []), env=env, partition=partition,
        loc="open_rounds", results=results, allow_measure=True,
        strict_alternation=False, prev_actor=last)

    verify = _as_dict(data.get("verify", {}) or {}, "verify")
    _check_keys(verify, ("accept_b0", "accept_b1"), "verify")
    default_qubits = tuple(sorted(decl_b | decl_c))
    identity = Projector(default_qubits, np.eye(2 ** len(default_qubits)))
    accept = []
    for key in ("accept_b0", "accept_b1"):
        if key in verify:
            accept.append(_parse_projector(
                verify[key], env=env, default_qubits=default_qubits,
                allowed=decl_b | decl_c, num_qubits=partition.num_qubits,
                loc=f"verify.{key}"))
        else:
            accept.append(identity)

    return Protocol(
        name=name, partition=partition, initial_alice=(prep0, prep1),
        initial_bob_channel=prep_bc, commit_rounds=commit_rounds,
        open_rounds=open_rounds, verification=tuple(accept),
        ancilla_owners=owners, params=params)


def load_protocol(source: str, *, param_overrides=None) -> Protocol:
    """Resolve a builtin name or file path and parse it as bit commitment."""
    data, positional = resolve_document(source)
    merged = dict(positional)
    merged.update(param_overrides or {})
    return parse_protocol(data, param_overrides=merged)


# ---------------------------------------------------------------------------
# purification: compile measurements into ancilla entanglement


def purify_protocol(p: Protocol) -> Protocol:
    """Replace measurements by CNOTs onto fresh per-actor ancillas.

    Classically controlled gates become quantum-controlled on the recording
    ancillas (firing when every recorded bit is 1); the compiled protocol is
    measurement-free and reproduces the original's outcome distribution
    exactly, branch for branch.
    """
    if not p.has_measurements:
        return p
    partition = p.partition
    owners = list(p.ancilla_owners)
    recorded = {}
    partition, commit = _purify_round_list(partition, owners, recorded, p.commit_rounds)
    partition, opened = _purify_round_list(partition, owners, recorded, p.open_rounds)
    return replace(p, partition=partition, commit_rounds=commit,
                   open_rounds=opened, ancilla_owners=tuple(owners))


def _purify_round_list(partition, owners, recorded, rounds):
    """One compiler pass over a round list; mutates ``owners`` and ``recorded``."""
    new_rounds = []
    for rnd in rounds:
        new_ops = []
        for op in rnd.ops:
            if isinstance(op, MeasureOp):
                ancillas = []
                for target in op.targets:
                    anc = partition.num_qubits
                    if anc >= qcore.MAX_QUBITS:
                        raise ProtocolError(
                            f"purification exceeds the {qcore.MAX_QUBITS}-qubit cap")
                    partition = partition.add_ancilla(rnd.actor)
                    owners.append(rnd.actor)
                    ancillas.append(anc)
                    new_ops.append(GateOp("CX", (target, anc)))
                recorded[op.result_id] = tuple(ancillas)
            elif op.control_classical is not None:
                new_ops.append(_compile_control(op, recorded[op.control_classical]))
            else:
                new_ops.append(op)
        new_rounds.append(Round(rnd.actor, tuple(new_ops), rnd.allow_consecutive))
    return partition, tuple(new_rounds)


def _compile_control(op: GateOp, ancillas) -> GateOp:
    base = GateOp(op.kind, op.targets, param=op.param, matrix=op.matrix)
    if len(ancillas) == 1 and op.kind == "X":
        return GateOp("CX", (ancillas[0],) + op.targets)
    if len(ancillas) == 1 and op.kind == "Z":
        return GateOp("CZ", (ancillas[0],) + op.targets)
    total = len(ancillas) + len(op.targets)
    if total > qcore.MAX_RAW_TARGETS:
        raise ProtocolError(
            f"classically controlled {op.kind} needs {total} qubits as a raw "
            f"controlled gate; the basis caps raw gates at {qcore.MAX_RAW_TARGETS}")
    unitary = qcore.gate_matrix(base)
    dim = 2 ** total
    block = unitary.shape[0]
    matrix = np.eye(dim, dtype=complex)
    matrix[dim - block:, dim - block:] = unitary
    return GateOp("RAW", tuple(ancillas) + op.targets, matrix=matrix)


# ---------------------------------------------------------------------------
# honest execution


def _require_unitary(p: Protocol, operation: str):
    if p.has_measurements:
        raise ValueError(
            f"{operation} needs a measurement-free protocol; run purify_protocol first")


def _apply_prep(state: PureState, ops) -> PureState:
    for op in ops:
        state = qcore.apply_gate(state, op)
    return state


def run_commit(p: Protocol, b: int) -> PureState:
    """Joint pure state after Alice commits to bit ``b`` honestly."""
    if b not in (0, 1):
        raise ValueError(f"committed bit must be 0 or 1, got {b!r}")
    _require_unitary(p, "run_commit")
    state = zero_state(p.partition.num_qubits)
    state = _apply_prep(state, p.initial_alice[b])
    state = _apply_prep(state, p.initial_bob_channel)
    for rnd in p.commit_rounds:
        state = _apply_prep(state, rnd.ops)
    return state


def run_open(p: Protocol, state: PureState, claimed_b: int) -> float:
    """Apply the open rounds, then Bob's acceptance probability for the claim."""
    if claimed_b not in (0, 1):
        raise ValueError(f"claimed bit must be 0 or 1, got {claimed_b!r}")
    _require_unitary(p, "run_open")
    if state.num_qubits != p.partition.num_qubits:
        raise ValueError(
            f"state has {state.num_qubits} qubits, protocol register has "
            f"{p.partition.num_qubits}")
    for rnd in p.open_rounds:
        state = _apply_prep(state, rnd.ops)
    return p.verification[claimed_b].expectation(state)


# ---------------------------------------------------------------------------
# channel custody and the concealment defect


def commit_custody(p: Protocol, override=None) -> str:
    """Who holds the channel when the commit phase ends.

    Default: the receiver of the last commit-round transmission; Bob when
    the commit phase is empty.
    """
    if override is not None:
        if override not in ACTORS:
            raise ValueError(f"custody must be alice or bob, got {override!r}")
        return override
    if p.commit_rounds:
        return other_actor(p.commit_rounds[-1].actor)
    return "bob"


def alice_side(p: Protocol, custody: str) -> tuple:
    """Alice's full holding at commit time: machine, her ancillas, channel if hers."""
    side = set(p.partition.machine("alice"))
    if custody == "alice":
        side |= p.partition.channel_qubits
    return tuple(sorted(side))


def bob_holding(p: Protocol, custody: str) -> tuple:
    side = set(p.partition.machine("bob"))
    if custody != "alice":
        side |= p.partition.channel_qubits
    return tuple(sorted(side))


def commit_delta(p: Protocol, custody=None):
    """Concealment defect after the commit phase.

    Returns (delta, rho0, rho1) where rho_b is Bob's holding reduced from
    the honest commit state for bit b and delta = 1 - F(rho0, rho1).
    """
    custody = commit_custody(p, custody)
    keep = bob_holding(p, custody)
    rho0 = qcore.partial_trace(run_commit(p, 0), keep)
    rho1 = qcore.partial_trace(run_commit(p, 1), keep)
    delta = min(max(1.0 - fidelity_trace(rho0, rho1), 0.0), 1.0)
    return delta, rho0, rho1


# ---------------------------------------------------------------------------
# exact branch enumeration of un-purified protocols (measurement oracle)


def enumerate_branches(p: Protocol, b: int):
    """All classical branches of an honest run, measurements taken literally.

    Returns a list of (probability, results dict, final PureState); branch
    probabilities below 1e-15 are dropped.
    """
    if b not in (0, 1):
        raise ValueError(f"committed bit must be 0 or 1, got {b!r}")
    state = zero_state(p.partition.num_qubits)
    state = _apply_prep(state, p.initial_alice[b])
    state = _apply_prep(state, p.initial_bob_channel)
    branches = [(1.0, {}, state)]
    for rnd in p.all_rounds:
        for op in rnd.ops:
            if isinstance(op, MeasureOp):
                branches = _measure_branches(branches, op)
            else:
                next_branches = []
                for prob, results, st in branches:
                    if op.control_classical is not None:
                        fire = all(results[op.control_classical])
                        if fire:
                            bare = GateOp(op.kind, op.targets, param=op.param,
                                          matrix=op.matrix)
                            st = qcore.apply_gate(st, bare)
                    else:
                        st = qcore.apply_gate(st, op)
                    next_branches.append((prob, results, st))
                branches = next_branches
    return branches


def _measure_branches(branches, op: MeasureOp):
    k = len(op.targets)
    out = []
    for prob, results, state in branches:
        for value in range(2 ** k):
            proj = np.zeros((2 ** k, 2 ** k), dtype=complex)
            proj[value, value] = 1.0
            amps = qcore._apply_matrix(state.amplitudes, proj, op.targets,
                                       state.num_qubits)
            weight = float(np.real(np.vdot(amps, amps)))
            if prob * weight <= BRANCH_CUTOFF:
                continue
            bits = tuple((value >> (k - 1 - i)) & 1 for i in range(k))
            new_results = dict(results)
            new_results[op.result_id] = bits
            out.append((prob * weight, new_results, PureState(amps / math.sqrt(weight))))
    return out


def enumerate_acceptance(p: Protocol, b: int, claimed_b: int) -> float:
    """Acceptance probability with measurements branch-enumerated exactly."""
    if claimed_b not in (0, 1):
        raise ValueError(f"claimed bit must be 0 or 1, got {claimed_b!r}")
    projector = p.verification[claimed_b]
    return sum(prob * projector.expectation(state)
               for prob, _, state in enumerate_branches(p, b))


# ---------------------------------------------------------------------------
# document emission (for the purify command and round-trip tests)


def _matrix_rows(matrix: np.ndarray):
    return [[[float(entry.real), float(entry.imag)] for entry in row]
            for row in np.asarray(matrix, dtype=complex)]


def _op_node(op):
    if isinstance(op, MeasureOp):
        return {"measure": True, "targets": list(op.targets),
                "result_id": op.result_id}
    node = {"gate": op.kind, "targets": list(op.targets)}
    if op.param is not None:
        node["angle"] = float(op.param)
    if op.matrix is not None:
        node["matrix"] = _matrix_rows(op.matrix)
    if op.control_classical is not None:
        node["control_classical"] = op.control_classical
    return node


def _round_node(rnd: Round):
    node = {"actor": rnd.actor, "ops": [_op_node(op) for op in rnd.ops]}
    if rnd.allow_consecutive:
        node["allow_consecutive"] = True
    return node


def _projector_node(proj: Projector):
    return {"qubits": list(proj.qubits), "matrix": _matrix_rows(proj.matrix)}


def protocol_to_document(p: Protocol) -> dict:
    """Serialize back to document form; angles appear fully evaluated."""
    doc = {
        "name": p.name,
        "kind": KIND_COMMITMENT,
        "qubits": p.declared_counts(),
        "initial": {
            "alice0": [_op_node(op) for op in p.initial_alice[0]],
            "alice1": [_op_node(op) for op in p.initial_alice[1]],
            "bob_channel": [_op_node(op) for op in p.initial_bob_channel],
        },
        "commit_rounds": [_round_node(r) for r in p.commit_rounds],
        "open_rounds": [_round_node(r) for r in p.open_rounds],
        "verify": {
            "accept_b0": _projector_node(p.verification[0]),
            "accept_b1": _projector_node(p.verification[1]),
        },
    }
    if p.ancilla_owners:
        doc["ancillas"] = list(p.ancilla_owners)
    return doc


def document_to_yaml(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=10 ** 6)
