"""Protocol documents: parsing, honest execution, purification, emission."""

import math

import numpy as np
import pytest

from qcheat.protocol import (
    BUILTIN_NAMES,
    MeasureOp,
    Projector,
    ProtocolError,
    alice_side,
    bob_holding,
    commit_custody,
    commit_delta,
    document_to_yaml,
    enumerate_acceptance,
    enumerate_branches,
    load_protocol,
    parse_protocol,
    protocol_to_document,
    purify_protocol,
    resolve_document,
    run_commit,
    run_open,
)
from qcheat.qcore import partial_trace


def minimal_doc(**extra):
    """Smallest well-formed commitment: one qubit each, one round per phase."""
    doc = {
        "name": "tiny",
        "qubits": {"alice": 1, "bob": 1, "channel": 1},
        "commit_rounds": [{"actor": "alice", "ops": [{"gate": "X", "targets": [2]}]}],
        "open_rounds": [{"actor": "bob", "ops": [{"gate": "X", "targets": [2]}]}],
    }
    doc.update(extra)
    return doc


# --- parsing the shipped protocols ---------------------------------------

def test_builtin_names_cover_the_commitment_family():
    assert {"bell-bc", "bb84-bc", "leaky-bc"} <= set(BUILTIN_NAMES)


def test_bell_bc_shape():
    p = load_protocol("bell-bc")
    assert p.declared_counts() == {"alice": 1, "bob": 1, "channel": 1}
    assert len(p.commit_rounds) == 1 and len(p.open_rounds) == 2
    assert not p.has_measurements
    assert p.verification[0].qubits == p.verification[1].qubits == (1, 2)


def test_bb84_bc_shape():
    p = load_protocol("bb84-bc")
    assert p.declared_counts() == {"alice": 2, "bob": 1, "channel": 1}
    assert p.has_measurements
    measured = [op for rnd in p.all_rounds for op in rnd.ops
                if isinstance(op, MeasureOp)]
    assert [m.result_id for m in measured] == ["coin"]


def test_leaky_bc_parameter_default():
    p = load_protocol("leaky-bc")
    assert p.params == {"theta": pytest.approx(math.pi / 4)}


# --- resolve_document ------------------------------------------------------

def test_resolve_positional_parameter():
    doc, overrides = resolve_document("leaky-bc(0.5)")
    assert overrides == {"theta": 0.5}
    p = parse_protocol(doc, param_overrides=overrides)
    assert p.params["theta"] == 0.5


def test_resolve_rejects_positional_on_parameterless_builtin():
    with pytest.raises(ProtocolError, match="exactly one positional parameter"):
        resolve_document("bell-bc(0.3)")


def test_resolve_rejects_bad_parameter_literal():
    with pytest.raises(ProtocolError, match="bad parameter value"):
        resolve_document("leaky-bc(up)")


def test_resolve_missing_file():
    with pytest.raises(ProtocolError, match="neither a built-in"):
        resolve_document("no-such-protocol")


def test_resolve_path_with_parentheses_falls_through_to_filesystem(tmp_path):
    target = tmp_path / "odd(1).yaml"
    target.write_text(document_to_yaml(minimal_doc()), encoding="utf-8")
    doc, overrides = resolve_document(str(target))
    assert overrides == {} and doc["name"] == "tiny"


def test_resolve_file_path(tmp_path):
    target = tmp_path / "proto.yaml"
    target.write_text(document_to_yaml(minimal_doc()), encoding="utf-8")
    p = load_protocol(str(target))
    assert p.name == "tiny"


# --- diagnostics carry field paths ----------------------------------------

def test_error_location_for_bad_gate_name():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"].append({"gate": "Q", "targets": [2]})
    with pytest.raises(ProtocolError, match=r"commit_rounds\[0\]\.ops\[1\]\.gate"):
        parse_protocol(doc)


def test_error_location_for_foreign_target():
    # alice acting on bob's machine qubit
    doc = minimal_doc(commit_rounds=[
        {"actor": "alice", "ops": [{"gate": "X", "targets": [1]}]}])
    with pytest.raises(ProtocolError, match=r"commit_rounds\[0\]\.ops\[0\]"):
        parse_protocol(doc)


def test_error_location_for_unknown_field():
    doc = minimal_doc(flavor="strawberry")
    with pytest.raises(ProtocolError, match="unknown field 'flavor'"):
        parse_protocol(doc)


def test_repeated_actor_needs_annotation():
    doc = minimal_doc(commit_rounds=[
        {"actor": "alice", "ops": [{"gate": "X", "targets": [2]}]},
        {"actor": "alice", "ops": [{"gate": "Z", "targets": [2]}]},
    ])
    with pytest.raises(ProtocolError, match="twice in a row"):
        parse_protocol(doc)
    doc["commit_rounds"][1]["allow_consecutive"] = True
    assert len(parse_protocol(doc).commit_rounds) == 2


def test_measurement_rejected_in_initial_prep():
    doc = minimal_doc(initial={"alice0": [{"measure": True, "targets": [0],
                                           "result_id": "m"}]})
    with pytest.raises(ProtocolError, match="not allowed here"):
        parse_protocol(doc)


def test_duplicate_result_id_rejected():
    doc = minimal_doc(commit_rounds=[
        {"actor": "alice", "ops": [
            {"measure": True, "targets": [0], "result_id": "m"},
            {"measure": True, "targets": [2], "result_id": "m"},
        ]}])
    with pytest.raises(ProtocolError, match="duplicate result_id"):
        parse_protocol(doc)


def test_coin_document_directed_to_other_parser():
    with pytest.raises(ProtocolError, match="parse_coin_protocol"):
        parse_protocol(minimal_doc(kind="coin-toss"))


def test_yaml_syntax_error_is_wrapped():
    with pytest.raises(ProtocolError, match="YAML syntax error"):
        parse_protocol("name: [unclosed")


# --- angle expressions ------------------------------------------------------

def test_angle_expressions_evaluate_against_params():
    doc = minimal_doc(params={"theta": 0.3})
    doc["commit_rounds"][0]["ops"] = [
        {"gate": "RY", "targets": [2], "angle": "pi/2"},
        {"gate": "RY", "targets": [2], "angle": "-theta"},
        {"gate": "RZ", "targets": [2], "angle": "2*theta"},
    ]
    ops = parse_protocol(doc).commit_rounds[0].ops
    assert ops[0].param == pytest.approx(math.pi / 2)
    assert ops[1].param == pytest.approx(-0.3)
    assert ops[2].param == pytest.approx(0.6)


def test_angle_unknown_name():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"] = [{"gate": "RY", "targets": [2], "angle": "phi"}]
    with pytest.raises(ProtocolError, match="unknown name 'phi'"):
        parse_protocol(doc)


def test_angle_malformed_expression():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"] = [{"gate": "RY", "targets": [2], "angle": "1+"}]
    with pytest.raises(ProtocolError, match="malformed angle"):
        parse_protocol(doc)


def test_angle_division_by_zero():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"] = [{"gate": "RY", "targets": [2], "angle": "1/0"}]
    with pytest.raises(ProtocolError, match="division by zero"):
        parse_protocol(doc)


# --- matrix literals ---------------------------------------------------------

def test_matrix_flat_and_nested_forms_agree():
    # a flat literal lists dim^2 [re, im] pairs row-major
    flat = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
    nested = [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]
    for form in (flat, nested):
        doc = minimal_doc()
        doc["commit_rounds"][0]["ops"] = [
            {"gate": "RAW", "targets": [2], "matrix": form}]
        op = parse_protocol(doc).commit_rounds[0].ops[0]
        np.testing.assert_allclose(op.matrix, [[0, 1], [1, 0]], atol=0)


def test_matrix_must_be_unitary():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"] = [
        {"gate": "RAW", "targets": [2],
         "matrix": [[1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}]
    with pytest.raises(ProtocolError, match="not unitary"):
        parse_protocol(doc)


def test_matrix_bad_pair_entry():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"] = [
        {"gate": "RAW", "targets": [2],
         "matrix": [[[1, 0, 0], [0, 0]], [[0, 0], [1, 0]]]}]
    with pytest.raises(ProtocolError, match=r"\[re, im\]"):
        parse_protocol(doc)


def test_matrix_flat_non_square_count():
    doc = minimal_doc()
    doc["commit_rounds"][0]["ops"] = [
        {"gate": "RAW", "targets": [2],
         "matrix": [[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}]
    with pytest.raises(ProtocolError, match="square count"):
        parse_protocol(doc)


# --- honest execution -------------------------------------------------------

@pytest.mark.parametrize("name", ["bell-bc", "bb84-bc", "leaky-bc"])
def test_honest_runs_accept(name):
    p = load_protocol(name)
    if p.has_measurements:
        p = purify_protocol(p)
    for b in (0, 1):
        assert run_open(p, run_commit(p, b), b) == pytest.approx(1.0, abs=1e-12)


def test_bell_bc_cross_claim_rejected():
    p = load_protocol("bell-bc")
    assert run_open(p, run_commit(p, 0), 1) == pytest.approx(0.0, abs=1e-12)


def test_bb84_bc_cross_claim_half():
    # wrong-basis verification passes half the time
    p = purify_protocol(load_protocol("bb84-bc"))
    assert run_open(p, run_commit(p, 0), 1) == pytest.approx(0.5, abs=1e-12)
    assert run_open(p, run_commit(p, 1), 0) == pytest.approx(0.5, abs=1e-12)


def test_run_commit_rejects_measurements():
    p = load_protocol("bb84-bc")
    with pytest.raises(ValueError, match="purify_protocol"):
        run_commit(p, 0)


def test_run_open_checks_register_width():
    p = load_protocol("bell-bc")
    q = purify_protocol(load_protocol("bb84-bc"))
    with pytest.raises(ValueError, match="qubits"):
        run_open(p, run_commit(q, 0), 0)


def test_bad_bit_values():
    p = load_protocol("bell-bc")
    with pytest.raises(ValueError):
        run_commit(p, 2)
    with pytest.raises(ValueError):
        run_open(p, run_commit(p, 0), "0")


# --- custody and the concealment defect -------------------------------------

def test_custody_goes_to_the_receiver_of_the_last_commit_round():
    # bell-bc's single commit round is alice's, so the channel sits with bob
    assert commit_custody(load_protocol("bell-bc")) == "bob"
    doc = minimal_doc(
        commit_rounds=[{"actor": "bob", "ops": [{"gate": "X", "targets": [2]}]}],
        open_rounds=[{"actor": "alice", "ops": [{"gate": "X", "targets": [2]}]}])
    assert commit_custody(parse_protocol(doc)) == "alice"


def test_custody_default_without_commit_rounds():
    p = parse_protocol(minimal_doc(commit_rounds=[]))
    assert commit_custody(p) == "bob"


def test_custody_override():
    p = load_protocol("bell-bc")
    assert commit_custody(p, "bob") == "bob"
    with pytest.raises(ValueError):
        commit_custody(p, "carol")


def test_side_split_is_a_partition():
    p = purify_protocol(load_protocol("bb84-bc"))
    for custody in ("alice", "bob"):
        a = alice_side(p, custody)
        b = bob_holding(p, custody)
        assert sorted(a + b) == list(range(p.partition.num_qubits))
        assert set(a).isdisjoint(b)
    # channel qubit 3 changes hands with custody
    assert 3 in alice_side(p, "alice") and 3 in bob_holding(p, "bob")


def test_commit_delta_bell_is_zero():
    delta, rho0, rho1 = commit_delta(load_protocol("bell-bc"))
    assert delta <= 1e-12
    np.testing.assert_allclose(rho0.entries, rho1.entries, atol=1e-12)


def test_commit_delta_leaky_matches_angle():
    for theta in (0.0, 0.4, 1.1, math.pi / 2):
        doc, ov = resolve_document(f"leaky-bc({theta})")
        p = parse_protocol(doc, param_overrides=ov)
        delta, _, _ = commit_delta(p)
        assert delta == pytest.approx(1.0 - math.cos(theta), abs=1e-10)


# --- purification ------------------------------------------------------------

def test_purify_bb84_moves_measurement_to_an_ancilla():
    p = purify_protocol(load_protocol("bb84-bc"))
    assert not p.has_measurements
    assert p.ancilla_owners == ("alice",)
    assert p.partition.num_qubits == 5
    # declared counts stay what the document said
    assert p.declared_counts() == {"alice": 2, "bob": 1, "channel": 1}


def test_purify_without_measurements_is_identity():
    p = load_protocol("bell-bc")
    assert purify_protocol(p) is p


def test_purified_distribution_matches_branches():
    p = load_protocol("bb84-bc")
    q = purify_protocol(p)
    for b in (0, 1):
        exact = enumerate_acceptance(p, b, b)
        assert run_open(q, run_commit(q, b), b) == pytest.approx(exact, abs=1e-10)


def test_branches_of_bb84_are_two_fair_coins():
    branches = enumerate_branches(load_protocol("bb84-bc"), 0)
    assert len(branches) == 2
    probs = sorted(prob for prob, _, _ in branches)
    np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-12)
    assert {results["coin"] for _, results, _ in branches} == {(0,), (1,)}


def test_branch_probabilities_sum_to_one():
    p = load_protocol("bb84-bc")
    for b in (0, 1):
        total = sum(prob for prob, _, _ in enumerate_branches(p, b))
        assert total == pytest.approx(1.0, abs=1e-12)


def controlled_doc(ops_after_measure):
    """2 alice + 1 bob + 1 channel, alice measures q1 then conditions."""
    return {
        "name": "cc",
        "qubits": {"alice": 2, "bob": 1, "channel": 1},
        "initial": {"alice1": [{"gate": "X", "targets": [0]}]},
        "commit_rounds": [
            {"actor": "alice", "ops": [
                {"gate": "H", "targets": [1]},
                {"gate": "CX", "targets": [1, 3]},
                {"measure": True, "targets": [1], "result_id": "m"},
            ] + ops_after_measure},
        ],
        "open_rounds": [{"actor": "bob", "ops": [{"gate": "H", "targets": [2]}]}],
        "verify": {"accept_b0": {"qubits": [2], "accept_states": ["0"]},
                   "accept_b1": {"qubits": [2], "accept_states": ["1"]}},
    }


@pytest.mark.parametrize("gate", ["X", "Z", "H"])
def test_classically_controlled_gate_matches_branches(gate):
    doc = controlled_doc([{"gate": gate, "targets": [3], "control_classical": "m"}])
    p = parse_protocol(doc)
    q = purify_protocol(p)
    for b in (0, 1):
        for claim in (0, 1):
            exact = enumerate_acceptance(p, b, claim)
            purified = run_open(q, run_commit(q, b), claim)
            assert purified == pytest.approx(exact, abs=1e-10)


def test_controlled_cx_compiles_within_target_budget():
    doc = controlled_doc([{"gate": "CX", "targets": [3, 0], "control_classical": "m"}])
    q = purify_protocol(parse_protocol(doc))
    widths = [len(op.targets) for rnd in q.all_rounds for op in rnd.ops]
    assert max(widths) <= 3
    p = parse_protocol(doc)
    for b in (0, 1):
        exact = enumerate_acceptance(p, b, 0)
        assert run_open(q, run_commit(q, b), 0) == pytest.approx(exact, abs=1e-10)


def test_controlled_gate_under_two_bit_record():
    # both record bits must read 1 for the X to fire; compiles to 3 raw targets
    doc = {
        "name": "cc2",
        "qubits": {"alice": 2, "bob": 1, "channel": 1},
        "commit_rounds": [
            {"actor": "alice", "ops": [
                {"gate": "H", "targets": [0]},
                {"gate": "H", "targets": [1]},
                {"measure": True, "targets": [0, 1], "result_id": "mm"},
                {"gate": "X", "targets": [3], "control_classical": "mm"},
            ]},
        ],
        "open_rounds": [{"actor": "bob", "ops": [{"gate": "X", "targets": [2]}]}],
    }
    p = parse_protocol(doc)
    q = purify_protocol(p)
    for b in (0, 1):
        exact = enumerate_acceptance(p, b, 1)
        assert run_open(q, run_commit(q, b), 1) == pytest.approx(exact, abs=1e-10)


def test_controlled_two_qubit_gate_under_two_bit_record_exceeds_budget():
    # 2 record ancillas + 2 gate targets = 4 raw targets, past the cap
    doc = {
        "name": "cc3",
        "qubits": {"alice": 3, "bob": 1, "channel": 1},
        "commit_rounds": [
            {"actor": "alice", "ops": [
                {"measure": True, "targets": [0, 1], "result_id": "mm"},
                {"gate": "SWAP", "targets": [2, 4], "control_classical": "mm"},
            ]},
        ],
        "open_rounds": [{"actor": "bob", "ops": [{"gate": "X", "targets": [3]}]}],
    }
    with pytest.raises(ProtocolError, match="caps raw gates"):
        purify_protocol(parse_protocol(doc))


# --- document emission -------------------------------------------------------

@pytest.mark.parametrize("name", ["bell-bc", "leaky-bc"])
def test_roundtrip_preserves_acceptance(name):
    p = load_protocol(name)
    text = document_to_yaml(protocol_to_document(p))
    q = parse_protocol(text)
    for b in (0, 1):
        for claim in (0, 1):
            want = run_open(p, run_commit(p, b), b and claim or claim)
            got = run_open(q, run_commit(q, b), b and claim or claim)
            assert got == pytest.approx(want, abs=1e-12)


def test_roundtrip_of_purified_protocol():
    p = purify_protocol(load_protocol("bb84-bc"))
    doc = protocol_to_document(p)
    assert doc["ancillas"] == ["alice"]
    q = parse_protocol(document_to_yaml(doc))
    assert q.partition.num_qubits == p.partition.num_qubits
    for b in (0, 1):
        assert run_open(q, run_commit(q, b), b) == pytest.approx(1.0, abs=1e-10)


def test_emitted_angles_are_numeric():
    doc = protocol_to_document(load_protocol("leaky-bc"))
    assert "params" not in doc
    angle = doc["commit_rounds"][0]["ops"][0]["angle"]
    assert isinstance(angle, float)


def test_projector_expectation_and_lift():
    p = load_protocol("bell-bc")
    state = run_commit(p, 0)
    proj = Projector((2,), np.diag([1.0, 0.0]))
    # the committed channel half of the bell pair is maximally mixed
    assert proj.expectation(state) == pytest.approx(0.5, abs=1e-12)
    lifted = proj.lifted_matrix((0, 1, 2))
    np.testing.assert_allclose(lifted, np.kron(np.eye(4), np.diag([1.0, 0.0])), atol=0)


def test_reduced_state_helper_consistency():
    p = load_protocol("bell-bc")
    state = run_commit(p, 0)
    rho = partial_trace(state, bob_holding(p, commit_custody(p)))
    assert rho.dim == 2 ** len(bob_holding(p, commit_custody(p)))
