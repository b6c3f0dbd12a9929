"""One-parameter flows: exact flow maps, the group law, and the sampled
trajectory data behind the rotation-flow figures.

Run:  python demos/demo_flows.py
"""

import math

from viscosym import flow_map, sample_flow, samples_to_csv, standard_basis
from viscosym.expr import to_text
from viscosym.vector_fields import parse_basis_combination

X1, X2, X3, X4, X5 = standard_basis()

print("--- Exact flow maps ---")
for label, gen in (("X4", X4), ("X1", X1), ("X4 + X3", X4 + X3),
                   ("X4 + X1", parse_basis_combination("X4 + X1"))):
    fm = flow_map(gen)
    print(f"{label}: Phi_eps(x, y, t) = ({to_text(fm.x_eps)}, "
          f"{to_text(fm.y_eps)}, {to_text(fm.t_eps)})")

print("\nThe rotation flow is clockwise: the seed (1, 0, 0) reaches "
      "(0, -1, 0) at eps = pi/2.")
fm = flow_map(X4)
print("Phi_{pi/2}(1, 0, 0) =", tuple(round(c, 12) for c in fm.at((1, 0, 0), math.pi / 2)))

print("\n--- Sampled trajectories (the data behind the flow figures) ---")
seeds = [(1.0, 0.0, 0.0), (0.5, 0.5, 0.0), (2.0, 0.0, 1.0)]
samples = sample_flow(flow_map(X4 + X3), seeds, (0.0, 2 * math.pi, 9))
print(samples_to_csv(samples[:9]))

print("Projection onto the (x, y, 0)-plane (t column dropped):")
projected = sample_flow(flow_map(X4), seeds[:1], (0.0, math.pi, 5),
                        project_xy=True)
print(samples_to_csv(projected))

print("The same data is available from the command line:")
print("    viscosym flow --generator X4 --seeds seeds.json --eps 0:6.28:50 "
      "--project-xy --format csv")
