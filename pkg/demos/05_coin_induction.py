"""
Backward induction over a coin toss
===================================

An ideal coin toss ends with both parties reading the same random bit
and catching any deviation.  If the protocol really is ideal, its last
round carries no information that the outcome rules need, so it can be
deleted; repeating the argument leaves a zero-round protocol whose two
sides share a random bit without ever communicating.  That is the
contradiction.  A protocol that is not ideal stops the induction instead
and is certified as such by a fidelity witness.
"""

from qcheat import induction_report, load_coin_protocol, outcome_distribution

for name in ("ideal-ct", "guess-ct"):
    p = load_coin_protocol(name)
    dist = outcome_distribution(p)
    print(f"== {name} ({p.num_rounds} rounds) ==")
    for actor in ("alice", "bob"):
        labels = ", ".join(
            f"{label}: {value:.4f}" for label, value in dist[actor].items())
        print(f"  {actor} reads  {labels}")

    report = induction_report(p)
    for step in report.steps:
        worst = step.triple.max_fidelity()
        print(f"  round {step.round_index} ({step.sender} sent last): "
              f"conditional fidelities at most {worst:.3g}, truncated")
    if report.verdict == "contradiction":
        print(f"  N=0: mutual information across the split = "
              f"{report.mutual_information:.3g}")
    else:
        print(f"  round {report.witness_round} refuses: "
              f"{report.witness_pair} = {report.witness_fidelity:.6f}")
    print(f"  verdict: {report.message}")
    print()
