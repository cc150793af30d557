"""Tour of the two-qubit gate analysis toolbox.

Weyl chamber coordinates, Makhlin local invariants, gate concurrence,
perfect-entangler distance, and population loss for a handful of named
gates, plus a round-trip through the canonical-gate construction.
"""

import numpy as np

from qoc import gates

named = {
    "identity": gates.IDENTITY4,
    "CNOT": gates.CNOT,
    "SWAP": gates.SWAP,
    "iSWAP": gates.ISWAP,
    "sqrt(iSWAP)": gates.SQRT_ISWAP,
}

print(f"{'gate':12s} {'c/pi':>22s} {'(g1,g2,g3)':>22s} "
      f"{'C':>7s} {'D_PE':>7s} {'PE?':>4s}")
for name, u in named.items():
    c = gates.weyl_coordinates(u)
    g = gates.local_invariants(u)
    conc = gates.concurrence(u)
    dpe = gates.d_pe(*g)
    member = gates.in_pe_polyhedron(*c)
    c_str = "({:.2f},{:.2f},{:.2f})".format(*(np.array(c) / np.pi))
    g_str = "({:+.2f},{:+.2f},{:+.2f})".format(*g)
    print(f"{name:12s} {c_str:>22s} {g_str:>22s} "
          f"{conc:7.3f} {dpe:+7.3f} {str(member):>4s}")

# canonical gates reproduce their own coordinates
rng = np.random.default_rng(7)
print("\nround-trip through canonical_gate on random chamber points:")
for _ in range(5):
    while True:
        c1 = rng.uniform(0, np.pi)
        c2 = rng.uniform(0, np.pi / 2)
        c3 = rng.uniform(0, np.pi / 2)
        if gates.in_weyl_chamber(c1, c2, c3, slack=-0.05):
            break
    back = gates.weyl_coordinates(gates.canonical_gate(c1, c2, c3))
    err = np.max(np.abs(np.array(back) - np.array([c1, c2, c3])))
    print(f"  ({c1:.4f}, {c2:.4f}, {c3:.4f}) -> err {err:.2e}")

# the PE distance decreases monotonically along the controlled-phase family
print("\ncontrolled-phase family (alpha, 0, 0): D_PE = 2 cos^4(alpha)")
for alpha in np.linspace(0.0, np.pi / 2, 6):
    dpe = gates.d_pe_gate(gates.canonical_gate(alpha, 0, 0))
    print(f"  alpha = {alpha:.3f}: D_PE = {dpe:.6f} "
          f"(analytic {2 * np.cos(alpha) ** 4:.6f})")
