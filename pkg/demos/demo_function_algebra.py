"""Tour of the piecewise-quadratic cost algebra behind the solver.

Builds a few functions by hand, applies each operation, and prints the
piece tables so you can see how data terms, minima, and change envelopes
reshape a cost-to-come function.
"""

import numpy as np

from graphseg import (
    PiecewiseQuad,
    add_constant,
    add_point_loss,
    global_min,
    min_geq_envelope,
    min_leq_envelope,
    pointwise_min,
)

DOM = (-5.0, 5.0)


def show(name, f):
    print(f"\n{name}  (domain {f.domain})")
    for p in f.pieces:
        print(f"  [{p.lo:8.4f}, {p.hi:8.4f}]  {p.a:+.3f}*m^2 {p.b:+.3f}*m {p.c:+.3f}")


print("Start from the zero function and absorb two observations, y=1 then y=3.")
f = PiecewiseQuad.zero(DOM)
f = add_point_loss(f, 1.0)
show("after y=1 (this is (m-1)^2)", f)
f = add_point_loss(f, 3.0)
show("after y=3 (sum of both squared errors)", f)
arg, val = global_min(f)
print(f"best single mean for [1, 3]: m*={arg} with cost {val} (the sample mean, cost 2)")

print("\nTwo competing hypotheses and their pointwise minimum:")
a = PiecewiseQuad.point_loss(0.0, DOM)                  # m^2
b = add_constant(PiecewiseQuad.point_loss(2.0, DOM), 1.0)  # (m-2)^2 + 1
h = pointwise_min(a, b)
show("min(m^2, (m-2)^2 + 1) crosses at m=1.25", h)

print("\nChange envelopes: the cheapest history given the new mean must differ.")
base = PiecewiseQuad.point_loss(1.0, DOM)
up = min_leq_envelope(base, 2.0)
show("up-change with gap 2: D(m) = min over m' <= m-2 of (m'-1)^2", up)
print("  note the clipped region below m=-3: no feasible predecessor there")
down = min_geq_envelope(base, 0.0)
show("down-change with gap 0: running minimum from the right", down)

print("\nDense-grid sanity check of the composed function:")
grid = np.linspace(*DOM, 11)
print("  m:     ", np.round(grid, 2))
print("  up(m): ", np.round([up(m) for m in grid], 3))
