"""
Delta and Gamma of a Bermudan put against bumped finite differences.

The analytic Greeks come from differentiating the final COS sum in x; the
bumped prices keep the expansion point fixed so both see the same kernel.

    python3 demos/greeks_check.py
"""

from dataclasses import replace

import numpy as np

from levycos import BermudanProblem, CharFnExpansion, cev_vg, make_grid, price_bermudan

T, M = 1.0, 10
model = cev_vg()
grid = make_grid(model, T)
h = 1e-4 * model.spot

print("   K     value      delta    fd delta      gamma    fd gamma")
for K in (0.8, 1.0, 1.2, 1.4):
    prob = BermudanProblem.uniform(K, T, M)
    rep = price_bermudan(model, CharFnExpansion(model, 2), prob, grid)
    vals = []
    for s in (model.spot - h, model.spot, model.spot + h):
        bumped = replace(model, spot=s)
        vals.append(price_bermudan(bumped, CharFnExpansion(bumped, 2, xbar=model.x0), prob, grid).value)
    fd_delta = (vals[2] - vals[0]) / (2 * h)
    fd_gamma = (vals[2] - 2 * vals[1] + vals[0]) / h**2
    print(f"{K:5.2f}  {rep.value:.6f}  {rep.delta:+.5f}  {fd_delta:+.5f}  {rep.gamma:9.5f}  {fd_gamma:9.5f}")
