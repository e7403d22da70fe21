"""Alice's EPR cheating strategy, run end to end against a parsed protocol.

The script is always the same: commit honestly to b=0 while keeping every
qubit she is allowed to keep in superposition, decide the bit at open
time, and if the decision is 1, rotate her own holding by the unitary
that best aligns the b=0 commit state with the b=1 commit state.  The
achievable overlap is exactly the fidelity of Bob's two reduced states,
so a concealing protocol (small delta) is an open book for her.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import protocol as proto
from .fidelity import fidelity_trace
from .protocol import Protocol, ProtocolError
from .qcore import InvariantViolation, apply_unitary, partial_trace
from .schmidt import uhlmann_unitary

PROBABILITY_DUST = 1e-9
PROBABILITY_CEILING = 1.0 + 1e-9
OVERLAP_IDENTITY_TOL = 1e-6


def _clamp_probability(value: float, what: str) -> float:
    """Zero out negative numerical dust; anything worse is a real violation."""
    if -PROBABILITY_DUST <= value < 0.0:
        return 0.0
    return float(value)


@dataclass(frozen=True)
class AttackReport:
    """Success metrics of one EPR attack."""

    protocol_name: str
    channel_custody: str
    delta: float
    fidelity: float
    achieved_overlap: float
    honest_accept: tuple
    cheat_accept: float

    def __post_init__(self):
        object.__setattr__(self, "honest_accept", tuple(self.honest_accept))
        fields = [
            ("delta", self.delta),
            ("fidelity", self.fidelity),
            ("achieved_overlap", self.achieved_overlap),
            ("honest_accept[0]", self.honest_accept[0]),
            ("honest_accept[1]", self.honest_accept[1]),
            ("cheat_accept", self.cheat_accept),
        ]
        for name, value in fields:
            if not 0.0 <= value <= PROBABILITY_CEILING:
                raise InvariantViolation(
                    f"attack report field {name} = {value} outside [0, 1]")
        drift = abs(self.achieved_overlap - (1.0 - self.delta))
        if drift > OVERLAP_IDENTITY_TOL:
            raise InvariantViolation(
                f"achieved overlap {self.achieved_overlap} disagrees with "
                f"1 - delta = {1.0 - self.delta} by {drift:.3e}")


def epr_attack(p: Protocol, custody=None) -> AttackReport:
    """Synthesize and score Alice's cheating unitary against ``p``.

    The unitary acts on Alice's machine, her ancillas, and the channel
    when custody assigns it to her; Bob's holding is untouched, so his
    acceptance of the switched bit is the whole story.
    """
    if p.has_measurements:
        raise ValueError(
            "epr_attack needs a measurement-free protocol; run purify_protocol first")
    custody = proto.commit_custody(p, custody)
    state0 = proto.run_commit(p, 0)
    state1 = proto.run_commit(p, 1)

    a_side = proto.alice_side(p, custody)
    unitary, overlap = uhlmann_unitary(state0, state1, a_side)

    keep = proto.bob_holding(p, custody)
    rho0 = partial_trace(state0, keep)
    rho1 = partial_trace(state1, keep)
    fidelity = fidelity_trace(rho0, rho1)
    delta = min(max(1.0 - fidelity, 0.0), 1.0)

    honest = tuple(
        _clamp_probability(proto.run_open(p, proto.run_commit(p, b), b),
                           f"honest_accept[{b}]")
        for b in (0, 1))
    cheat_state = apply_unitary(state0, unitary, a_side)
    cheat = _clamp_probability(proto.run_open(p, cheat_state, 1), "cheat_accept")

    return AttackReport(
        protocol_name=p.name, channel_custody=custody, delta=delta,
        fidelity=fidelity, achieved_overlap=overlap, honest_accept=honest,
        cheat_accept=cheat)


@dataclass(frozen=True)
class SweepPoint:
    """One grid point of a parameter sweep; exactly one of report/error is set."""

    param: str
    value: float
    report: AttackReport | None
    error: str | None


def sweep_parameter(document: dict, param=None) -> str:
    """The parameter a sweep varies: the named one, or the document's only one."""
    params = document.get("params") or {}
    if param is not None:
        if param not in params:
            raise ProtocolError(f"protocol declares no parameter {param!r}", "params")
        return param
    if len(params) == 1:
        return next(iter(params))
    raise ProtocolError(
        "sweep family must declare exactly one parameter, or name one explicitly",
        "params")


def attack_sweep(source, grid, *, param=None, custody=None):
    """Run epr_attack across a parameter grid; per-point failures stay in-row."""
    document = source if isinstance(source, dict) else proto.resolve_document(source)[0]
    param = sweep_parameter(document, param)
    points = []
    for raw in grid:
        value = float(raw)
        try:
            p = proto.parse_protocol(document, param_overrides={param: value})
            p = proto.purify_protocol(p)
            report = epr_attack(p, custody=custody)
            points.append(SweepPoint(param, value, report, None))
        except (ProtocolError, ValueError, InvariantViolation) as exc:
            points.append(SweepPoint(param, value, None, str(exc)))
    return points
