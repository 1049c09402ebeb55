"""
Walk through pricing a put under CEV local volatility with Merton jumps.

Prints the European value at each expansion order, then the Bermudan value
in both kernel modes, then the American value from the Richardson ladder.

    python3 demos/price_cev_merton.py
"""

import time

import numpy as np

from levycos import BermudanProblem, CharFnExpansion, cev_merton, european_price, make_grid, price_american, price_bermudan

K, T, M = 1.2, 1.0, 10

model = cev_merton()
grid = make_grid(model, T)
print(f"model {model.name}: S0={model.spot}, r={model.rate}")
print(f"COS range [{grid.a:.3f}, {grid.b:.3f}] with N={grid.N}")

# European put: each expansion order adds a correction term
print("\nEuropean put, K=%.2f T=%.2f" % (K, T))
for order in range(3):
    rep = european_price(model, CharFnExpansion(model, order), grid, K, T)
    print(f"  order {order}: {rep.value:.6f}  delta {rep.delta:+.4f}  gamma {rep.gamma:.4f}")

exp2 = CharFnExpansion(model, 2)
prob = BermudanProblem.uniform(K, T, M)

# "leading" freezes the kernel at the spot; "panels" re-expands it piecewise
print(f"\nBermudan put, {M} exercise dates")
for terms in ("leading", "panels"):
    t0 = time.perf_counter()
    rep = price_bermudan(model, exp2, prob, grid, terms)
    ms = 1e3 * (time.perf_counter() - t0)
    print(f"  {terms:8s} {rep.value:.6f}  ({ms:.0f} ms)")
    b = np.asarray(rep.boundary)
    print(f"           exercise boundary S* from {np.exp(b[0]):.4f} to {np.exp(b[-1]):.4f}")

rep = price_american(model, exp2, K, T, grid, d=1)
print("\nAmerican put via 4-point Richardson")
for m, v in zip(rep.diagnostics["M"], rep.diagnostics["bermudan"]):
    print(f"  M={m:3d}  {v:.6f}")
print(f"  extrapolated {rep.value:.6f}")
