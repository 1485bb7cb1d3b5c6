"""Re-ranking past experiments once input noise is taken into account.

A cliff-shaped response is sampled on an 8 x 8 lattice.  The raw best sample
sits right at the cliff edge; after reweighting under Gaussian input noise the
preferred sample moves onto the plateau, where a small slip costs little.

    python demos/reweight_cliff.py
"""

import numpy as np

import robustree as rt
from robustree.surfaces import get_surface, grid_points

surface = get_surface("cliff")
X = grid_points(surface, 8)
y = surface.evaluate(X)
data = rt.Dataset(surface.columns, X, y, "f")

# A single fully grown tree interpolates the samples exactly.
forest = rt.fit(data, rt.TreeParams("regression_tree"))
noise = [rt.Normal(1.0), rt.Normal(1.0)]
rw = rt.reweight(data, forest, noise)

raw = int(np.argmin(y))
print(f"raw best:    x={X[raw]}, f={y[raw]:.3f}, robust merit={rw.estimates.expectation[raw]:.3f}")
b = rw.best_index
print(f"robust best: x={X[b]}, f={y[b]:.3f}, robust merit={rw.estimates.expectation[b]:.3f}")

# Noise-free reweighting gives back the observations.
plain = rt.reweight(data, forest, [rt.Delta(), rt.Delta()])
print("delta noise reproduces targets:", np.allclose(plain.estimates.expectation, y, atol=1e-12))

# A forest adds a spread across trees, usable as a confidence band.
ens = rt.fit(data, rt.TreeParams("extra_trees", n_trees=50, rng_seed=0))
est = rt.estimate(ens, X, noise)
lcb = rt.lower_confidence_expectation(est)
order = np.argsort(est.expectation)[:5]
print("\nfive best rows under the forest (E, sd of E across trees, E - 1.96 sd):")
for i in order:
    print(f"  x={X[i]}  {est.expectation[i]:7.3f}  {est.expectation_std[i]:6.3f}  {lcb[i]:7.3f}")
