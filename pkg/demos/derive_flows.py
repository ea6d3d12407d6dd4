"""Print the first few flows of the sl2 and sl3 hierarchies and check they commute."""

from dshierarchy import flow_commutator, generate_flow_kdv, generate_flow_mkdv, make_sln
from dshierarchy.hierarchy import flow_indices

for n in (2, 3):
    lie = make_sln(n)
    for gen in (generate_flow_kdv, generate_flow_mkdv):
        flows = [gen(lie, m) for m in flow_indices(lie, 5)]
        print(f"-- {lie.id} {flows[0].hierarchy_kind}")
        for f in flows:
            print(f.to_text())
        ok = all(not p for a in flows for b in flows for p in flow_commutator(a, b).values())
        print("pairwise commuting:", ok)
