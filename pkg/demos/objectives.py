"""Trading off the robust mean against output variability.

For inputs drawn around a query, the tree surrogate gives both the expected
response and its standard deviation.  Two ways to turn them into one merit
are shown on a noisy sine landscape.
"""

import numpy as np

import robustree as rt
from robustree.surfaces import get_surface

rng = np.random.default_rng(1)
surface = get_surface("sine")
X = rng.uniform(surface.lower, surface.upper, size=(300, 2))
data = rt.Dataset(surface.columns, X, surface.evaluate(X), "f")
forest = rt.fit(data, rt.TreeParams("random_forest", n_trees=30, rng_seed=1))

noise = [rt.Uniform(0.3), rt.Uniform(0.3)]
est = rt.estimate(forest, X, noise)

mean_only = rt.weighted_sum(1.0, 0.0)
cautious = rt.weighted_sum(1.0, 2.0)
hierarchy = rt.threshold_hierarchy(rt.Objective("expectation", "min", -0.1),
                                   rt.Objective("output_std"))

for name, s in [("mean only", mean_only), ("mean + 2 sd", cautious), ("mean <= -0.1, then sd", hierarchy)]:
    i = int(np.argmin(rt.scalarize(s, est)))
    print(f"{name:>22}: x={np.round(X[i], 3)}  E={est.expectation[i]:.3f}  sd={est.output_std[i]:.3f}")
