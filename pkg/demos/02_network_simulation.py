"""Sampling stochastic max-plus ReLU networks and running them forward.

Shows the pair recursion (F, G) against the plain ReLU recursion, the
fully symbolic forward pass, and how the symbolic output feeds region
counting.
"""

import numpy as np

from tropnet import (
    NetworkSpec,
    count_linear_regions,
    forward_relu_direct,
    run_network,
    run_symbolic,
    sample_network,
    uniform_int,
    uniform_real,
)

spec = NetworkSpec(
    widths=(2, 3, 1),
    r=2,
    weight_dist=uniform_int(-2, 2),        # integer weight matrices
    bias_dist=uniform_real(-1.0, 1.0),     # real bias vectors
    coeff_dists=uniform_real(-1.0, 1.0),   # initialization coefficients
    exponent_dists=uniform_int(0, 2),      # initialization slopes
    thresholds=("relu", "identity"),       # last layer linear
    input_box=((-1.0, 1.0), (-1.0, 1.0)),
)

# --- one numeric run -------------------------------------------------------
x = np.array([0.4, -0.8])
run = run_network(spec, x, seed=7)
print("input x          =", x)
for l in range(spec.depth + 1):
    print(f"layer {l}: F={np.round(run.f[l], 4)} G={np.round(run.g[l], 4)} "
          f"nu={np.round(run.nu[l], 4)}")

# The pair recursion nu = F - G must equal the direct recursion
# nu' = max(A nu + b, t) with the same parameter draw.
net = sample_network(spec, seed=7)
nu = run.nu[0]
for layer in net.layers:
    nu = forward_relu_direct(nu, layer)
print("\ndirect recursion output:", nu, " pair output:", run.nu[-1])

# --- symbolic run ----------------------------------------------------------
# The same draw, but carrying full tropical polynomials through the
# layers instead of numbers.
sym = run_symbolic(spec, seed=7)
f_out = sym.f_polys[-1][0]
g_out = sym.g_polys[-1][0]
print("\nsymbolic output nu = f (-) g with",
      f_out.num_monomials, "and", g_out.num_monomials, "monomials")
print("symbolic nu(x) =", sym.evaluate_nu(spec.depth, x)[0],
      "  numeric nu(x) =", run.nu[-1][0])

# The numerator polynomial bounds the number of connected regions where
# the network output clears any fixed threshold.
print("regions of f:", count_linear_regions(f_out).count,
      " (monomials:", f_out.num_monomials, ")")

# --- reproducibility -------------------------------------------------------
again = run_network(spec, x, seed=7)
print("\nsame seed reproduces bitwise:",
      all(np.array_equal(a, b) for a, b in zip(run.nu, again.nu)))
