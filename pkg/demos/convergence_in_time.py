"""
Small-time accuracy of the expanded characteristic function.

Compares each expansion order with a Monte Carlo estimate of E[exp(i xi X_t)]
and fits the log-log slope of the error against t. Uses few paths so that it
runs in about a minute; the acceptance suite uses 10^6.

    python3 demos/convergence_in_time.py
"""

import numpy as np

from levycos import cev_merton
from levycos.mc_oracle import SimConfig, convergence_order, mc_char_fn_grid

model = cev_merton()
t_grid = np.array([1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2])
xi = np.linspace(0.0, 20.0, 41)
cfg = SimConfig(n_paths=100_000, steps_per_year=512, seed=11)

mc = mc_char_fn_grid(model, t_grid, xi, cfg, control=True, extrapolate=True)

print("order  slope   stderr   sup error by t")
for n in range(3):
    res = convergence_order(model, n, xi, t_grid, cfg, mc=mc)
    errs = " ".join(f"{e:.1e}" for e in res.error)
    flag = "  (at noise level)" if res.inconclusive else ""
    print(f"  {n}    {res.slope:5.2f}   {res.stderr:5.2f}   {errs}{flag}")
