"""Flows attached to the non-smooth sl2 Heisenberg subalgebra."""

from dshierarchy import flow_commutator, generate_flow_generalized, get_heisenberg, make_sln
from dshierarchy.lie import NONSMOOTH_CONJUGATOR, ptilde

spec = get_heisenberg("nonsmooth-sl2", make_sln(2))
c = NONSMOOTH_CONJUGATOR
for i in range(-1, 3):
    print(f"C^-1 p~{i} C =", (c.inverse_2x2() @ ptilde(i).with_grading(c.grading) @ c).to_text())

p = spec.basis(-1)[0]
flows = [generate_flow_generalized(spec, p, -m) for m in range(4)]
for f in flows:
    print(f.to_text())
print("pairwise commuting:",
      all(not r for a in flows for b in flows for r in flow_commutator(a, b).values()))
