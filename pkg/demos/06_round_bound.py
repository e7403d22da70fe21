"""
How many rounds does epsilon-fair information transfer need?
============================================================

Model each party's knowledge of the outcome as a number in [0, 1] that
only moves when that party receives a message, and demand fairness: the
two numbers never differ by more than epsilon.  Reaching (1, 1) from
(0, 0) then takes at least ceil(1/epsilon) messages.  The arithmetic
here is exact (rationals, no floats), so the bound has no tolerance.
"""

from fractions import Fraction

from qcheat import min_rounds, validate_walk

for eps in (Fraction(1, 2), Fraction(1, 3), Fraction(1, 10), Fraction(3, 7)):
    print(f"epsilon = {eps}:  at least {min_rounds(eps)} rounds")

# floats are snapped to the nearest simple rational before dividing,
# so the obvious decimal inputs give the intended answers
print(f"epsilon = 0.1 (float): {min_rounds(0.1)} rounds")

# a compliant trajectory that alternates epsilon-sized advances
eps = Fraction(1, 3)
walk = [(Fraction(0), Fraction(0))]
while walk[-1] != (1, 1):
    a, b = walk[-1]
    if a <= b:
        a = min(a + eps, Fraction(1))
    else:
        b = min(b + eps, Fraction(1))
    walk.append((a, b))

result = validate_walk(walk, eps)
print(f"\nladder with {len(walk) - 1} steps at epsilon = {eps}: ok = {result.ok}")

# skipping ahead violates fairness and is pinpointed
greedy = [(Fraction(0), Fraction(0)), (Fraction(2, 3), Fraction(0)),
          (Fraction(1), Fraction(1))]
result = validate_walk(greedy, eps)
print(f"greedy walk: ok = {result.ok}, step {result.first_violation}: "
      f"{result.reason}")

# stopping early fails on the endpoint
short = [(Fraction(0), Fraction(0)), (eps, eps)]
result = validate_walk(short, eps)
print(f"short walk:  ok = {result.ok}, {result.reason}")
