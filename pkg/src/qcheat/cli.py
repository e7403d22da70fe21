"""Command-line frontend.

Every command resolves a protocol document (built-in name or file path),
runs one analysis, and emits a report whose bytes are a pure function of
the inputs: JSON with insertion-ordered keys and 17-significant-digit
floats, or CSV with a fixed header.  Exit codes: 0 success, 2 rejected
input, 3 a broken internal invariant.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import attack as attacks
from . import cointoss as coins
from . import protocol as proto
from .fidelity import (fidelity_povm, fidelity_purification, fidelity_trace,
                       povm_overlap, random_povm)
from .qcore import InvariantViolation

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3

DEFAULT_SEED = 7
POVM_SAMPLE_TOL = 1e-8


# ---------------------------------------------------------------------------
# deterministic serialization


class Report:
    """A finished report: a JSON value plus an optional tabular projection."""

    def __init__(self, value, csv_header=None, csv_rows=None):
        self.value = value
        self.csv_header = csv_header
        self.csv_rows = csv_rows


def _format_float(value: float) -> str:
    return format(float(value), ".17g")


def _json_scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot serialize {type(value).__name__} in a report")


def _render_json(value, level=0) -> str:
    # json.dumps formats floats with repr; reports pin them to %.17g instead,
    # so the tree is rendered by hand.
    pad = "  " * level
    inner = "  " * (level + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = [f"{inner}{json.dumps(str(key))}: {_render_json(item, level + 1)}"
                 for key, item in value.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        parts = [f"{inner}{_render_json(item, level + 1)}" for item in value]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    return _json_scalar(value)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return _format_float(value)
    return str(value)


def _write_text(text: str, path) -> int:
    data = text.encode("utf-8")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "wb") as fh:
            fh.write(data)
    return len(data)


def emit_report(report: Report, fmt: str = "json", path=None) -> int:
    """Serialize one report and write it to ``path`` (stdout when None).

    Returns the number of bytes written.  The same report always yields
    the same bytes.
    """
    if fmt == "json":
        text = _render_json(report.value) + "\n"
    elif fmt == "csv":
        if report.csv_header is None:
            raise ValueError("this report has no tabular form; use --output json")
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(report.csv_header)
        for row in report.csv_rows:
            writer.writerow([_csv_cell(cell) for cell in row])
        text = buffer.getvalue()
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return _write_text(text, path)


# ---------------------------------------------------------------------------
# document loading


def _load_commitment(source: str) -> proto.Protocol:
    data, overrides = proto.resolve_document(source)
    if data.get("kind", proto.KIND_COMMITMENT) == proto.KIND_COIN:
        raise proto.ProtocolError(
            f"{data.get('name', source)!r} is a coin-toss document; "
            "use the cointoss command")
    p = proto.parse_protocol(data, param_overrides=overrides)
    return proto.purify_protocol(p)


def _load_coin(source: str) -> coins.CoinProtocol:
    data, overrides = proto.resolve_document(source)
    if data.get("kind", proto.KIND_COMMITMENT) != proto.KIND_COIN:
        raise proto.ProtocolError(
            f"{data.get('name', source)!r} is a bit-commitment document; "
            "use simulate, attack, sweep, or fidelity")
    return coins.parse_coin_protocol(data, param_overrides=overrides)


# ---------------------------------------------------------------------------
# commands


def _cmd_simulate(ns) -> Report:
    p = _load_commitment(ns.protocol)
    custody = proto.commit_custody(p, ns.channel_custody)
    delta, _, _ = proto.commit_delta(p, custody)
    honest = [proto.run_open(p, proto.run_commit(p, b), b) for b in (0, 1)]
    cross01 = proto.run_open(p, proto.run_commit(p, 0), 1)
    cross10 = proto.run_open(p, proto.run_commit(p, 1), 0)
    value = {
        "command": "simulate",
        "protocol": p.name,
        "channel_custody": custody,
        "ancillas": p.ancilla_count,
        "delta": delta,
        "honest_accept": {"0": honest[0], "1": honest[1]},
        "cross_accept": {"commit0_open1": cross01, "commit1_open0": cross10},
    }
    header = ["protocol", "channel_custody", "ancillas", "delta",
              "honest_accept_0", "honest_accept_1",
              "cross_accept_commit0_open1", "cross_accept_commit1_open0"]
    row = [p.name, custody, p.ancilla_count, delta,
           honest[0], honest[1], cross01, cross10]
    return Report(value, header, [row])


_ATTACK_HEADER = ["protocol", "channel_custody", "delta", "fidelity",
                  "achieved_overlap", "honest_accept_0", "honest_accept_1",
                  "cheat_accept"]


def _attack_row(rep: attacks.AttackReport) -> list:
    return [rep.protocol_name, rep.channel_custody, rep.delta, rep.fidelity,
            rep.achieved_overlap, rep.honest_accept[0], rep.honest_accept[1],
            rep.cheat_accept]


def _cmd_attack(ns) -> Report:
    p = _load_commitment(ns.protocol)
    rep = attacks.epr_attack(p, custody=ns.channel_custody)
    value = {
        "command": "attack",
        "protocol": rep.protocol_name,
        "channel_custody": rep.channel_custody,
        "delta": rep.delta,
        "fidelity": rep.fidelity,
        "achieved_overlap": rep.achieved_overlap,
        "honest_accept": {"0": rep.honest_accept[0], "1": rep.honest_accept[1]},
        "cheat_accept": rep.cheat_accept,
    }
    return Report(value, _ATTACK_HEADER, [_attack_row(rep)])


def _parse_grid(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"grid must be start:stop:count, got {text!r}") from None
    if count < 1:
        raise ValueError("grid count must be at least 1")
    return [float(x) for x in np.linspace(start, stop, count)]


def _cmd_sweep(ns) -> Report:
    grid = _parse_grid(ns.grid)
    data, _ = proto.resolve_document(ns.protocol)
    if data.get("kind", proto.KIND_COMMITMENT) == proto.KIND_COIN:
        raise proto.ProtocolError(
            f"{data.get('name', ns.protocol)!r} is a coin-toss document; "
            "use the cointoss command")
    param = attacks.sweep_parameter(data, ns.param)
    points = attacks.attack_sweep(data, grid, param=param,
                                  custody=ns.channel_custody)
    items = []
    rows = []
    for pt in points:
        if pt.report is None:
            items.append({"value": pt.value, "error": pt.error})
            rows.append([param, pt.value] + [None] * 6 + [pt.error])
        else:
            rep = pt.report
            items.append({
                "value": pt.value,
                "delta": rep.delta,
                "fidelity": rep.fidelity,
                "achieved_overlap": rep.achieved_overlap,
                "honest_accept": {"0": rep.honest_accept[0],
                                  "1": rep.honest_accept[1]},
                "cheat_accept": rep.cheat_accept,
                "error": None,
            })
            rows.append([param, pt.value, rep.delta, rep.fidelity,
                         rep.achieved_overlap, rep.honest_accept[0],
                         rep.honest_accept[1], rep.cheat_accept, None])
    value = {
        "command": "sweep",
        "protocol": data.get("name"),
        "param": param,
        "points": items,
    }
    header = ["param", "value", "delta", "fidelity", "achieved_overlap",
              "honest_accept_0", "honest_accept_1", "cheat_accept", "error"]
    return Report(value, header, rows)


def _cmd_fidelity(ns) -> Report:
    p = _load_commitment(ns.protocol)
    custody = proto.commit_custody(p, ns.channel_custody)
    delta, rho0, rho1 = proto.commit_delta(p, custody)
    f_trace = fidelity_trace(rho0, rho1)
    f_purif, _ = fidelity_purification(rho0, rho1)
    f_povm, _ = fidelity_povm(rho0, rho1)

    samples = int(ns.povm_samples)
    if samples < 0:
        raise ValueError("--povm-samples must be nonnegative")
    sample_min = None
    samples_ok = None
    if samples:
        # every measurement's overlap must sit at or above the minimum
        rng = np.random.default_rng(ns.seed)
        dim = rho0.dim
        values = [povm_overlap(rho0, rho1, random_povm(dim, dim + 1, rng))
                  for _ in range(samples)]
        sample_min = min(values)
        samples_ok = bool(sample_min >= f_povm - POVM_SAMPLE_TOL)

    value = {
        "command": "fidelity",
        "protocol": p.name,
        "channel_custody": custody,
        "delta": delta,
        "fidelity_trace": f_trace,
        "fidelity_purification": f_purif,
        "fidelity_povm": f_povm,
        "gap_purification": abs(f_trace - f_purif),
        "gap_povm": abs(f_trace - f_povm),
        "seed": int(ns.seed),
        "povm_samples": samples,
        "povm_sample_min": sample_min,
        "povm_samples_ok": samples_ok,
    }
    header = ["protocol", "channel_custody", "delta", "fidelity_trace",
              "fidelity_purification", "fidelity_povm", "gap_purification",
              "gap_povm", "seed", "povm_samples", "povm_sample_min",
              "povm_samples_ok"]
    row = [p.name, custody, delta, f_trace, f_purif, f_povm,
           abs(f_trace - f_purif), abs(f_trace - f_povm), int(ns.seed),
           samples, sample_min, samples_ok]
    return Report(value, header, [row])


def _cmd_cointoss(ns) -> Report:
    cp = _load_coin(ns.protocol)
    verdict = coins.induction_report(
        cp, tol=ns.ideal_tol, allow_mixed_invalid=ns.allow_mixed_invalid)
    dist = coins.outcome_distribution(cp)
    distribution = {
        actor: {label: dist[actor][label] for label in coins.OUTCOME_LABELS}
        for actor in ("alice", "bob")
    }
    steps = []
    for step in verdict.steps:
        t = step.triple
        steps.append({
            "round": step.round_index,
            "sender": step.sender,
            "f01": t.f01,
            "f0_invalid": t.f0inv,
            "f1_invalid": t.f1inv,
            "present": list(t.present),
        })
    value = {
        "command": "cointoss",
        "protocol": cp.name,
        "rounds": verdict.rounds,
        "verdict": verdict.verdict,
        "outcome_distribution": distribution,
        "steps": steps,
        "mutual_information": verdict.mutual_information,
        "witness_round": verdict.witness_round,
        "witness_fidelity": verdict.witness_fidelity,
        "witness_pair": verdict.witness_pair,
        "message": verdict.message,
    }
    header = ["protocol", "rounds", "verdict", "mutual_information",
              "witness_round", "witness_fidelity", "witness_pair", "message"]
    row = [cp.name, verdict.rounds, verdict.verdict,
           verdict.mutual_information, verdict.witness_round,
           verdict.witness_fidelity, verdict.witness_pair, verdict.message]
    return Report(value, header, [row])


def _cmd_purify(ns) -> str:
    data, overrides = proto.resolve_document(ns.protocol)
    if data.get("kind", proto.KIND_COMMITMENT) == proto.KIND_COIN:
        cp = coins.parse_coin_protocol(data, param_overrides=overrides)
        document = coins.coin_to_document(cp)
    else:
        p = proto.purify_protocol(
            proto.parse_protocol(data, param_overrides=overrides))
        document = proto.protocol_to_document(p)
    return proto.document_to_yaml(document)


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcheat",
        description="Simulate two-party quantum protocols and synthesize "
                    "Alice's cheating unitaries.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, *, custody=True, output=True):
        sp.add_argument(
            "--protocol", required=True, metavar="NAME_OR_PATH",
            help="built-in name, built-in with a value like leaky-bc(0.5), "
                 "or a document path")
        if custody:
            sp.add_argument(
                "--channel-custody", choices=("alice", "bob"), default=None,
                dest="channel_custody",
                help="who holds the channel at commit time "
                     "(default: the receiver of the last commit round)")
        if output:
            sp.add_argument("--output", choices=("json", "csv"), default="json",
                            help="report format (default: json)")
            sp.add_argument("--out", default=None, metavar="PATH",
                            help="write the report to PATH instead of stdout")

    sp = sub.add_parser(
        "simulate", help="run both honest commit/open flows and report "
                         "the hiding defect and acceptance table")
    common(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser(
        "attack", help="synthesize Alice's cheating unitary and score it")
    common(sp)
    sp.set_defaults(func=_cmd_attack)

    sp = sub.add_parser("sweep", help="run the attack across a parameter grid")
    common(sp)
    sp.add_argument("--grid", required=True, metavar="START:STOP:COUNT",
                    help="inclusive linear grid, e.g. 0:1.5707963267948966:9")
    sp.add_argument("--param", default=None, metavar="NAME",
                    help="parameter to vary (default: the document's only one)")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser(
        "fidelity", help="compare the trace, purification, and measurement "
                         "routes to the fidelity of Bob's two states")
    common(sp)
    sp.add_argument("--povm-samples", type=int, default=0, dest="povm_samples",
                    metavar="N", help="also score N random measurements "
                                      "against the minimizer (default: 0)")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED,
                    help=f"random measurement seed (default: {DEFAULT_SEED})")
    sp.set_defaults(func=_cmd_fidelity)

    sp = sub.add_parser(
        "cointoss", help="backward-induction analysis of a coin-toss document")
    common(sp, custody=False)
    sp.add_argument("--ideal-tol", type=float, default=coins.IDEAL_TOL,
                    dest="ideal_tol", metavar="TOL",
                    help="orthogonality threshold for truncation "
                         f"(default: {coins.IDEAL_TOL:g})")
    sp.add_argument("--allow-mixed-invalid", action="store_true",
                    dest="allow_mixed_invalid",
                    help="permit a mixed conditional state on the invalid outcome")
    sp.set_defaults(func=_cmd_cointoss)

    sp = sub.add_parser(
        "purify", help="compile measurements into ancilla entanglement and "
                       "print the resulting document")
    common(sp, custody=False, output=False)
    sp.add_argument("--out", default=None, metavar="PATH",
                    help="write the document to PATH instead of stdout")
    sp.set_defaults(func=_cmd_purify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        result = ns.func(ns)
        if isinstance(result, str):
            _write_text(result, ns.out)
        else:
            emit_report(result, ns.output, ns.out)
        return EXIT_OK
    except proto.ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
