"""Does steering a campaign by robust merits pay off?

One benchmark cell: the cliff surface with Gaussian input noise, explored by a
random planner.  Each repeat runs once steering by robust merits and once by
raw observations; regret is summed over iterations using the true robust
objective of the incumbent.  This takes a couple of minutes.
"""

import numpy as np

from robustree import campaign as cp
from robustree.surfaces import benchmark_spec, ground_truth

spec = benchmark_spec("S1")
truth = ground_truth(spec, density=200, cache_dir=".cache/ground_truth")
print(f"raw minimum at {truth.raw_min}, robust minimum at {np.round(truth.robust_min, 2)}")
print(f"improvement from optimizing the robust objective: {100 * truth.improvement:.1f}%")

res = cp.benchmark(spec, truth, cp.PlannerConfig("random"), "noiseless", repeats=20)
on, off = res.normalized()
cmp = res.comparison()
print(f"mean normalized regret, robust merits: {on.mean():.3f}")
print(f"mean normalized regret, raw merits:    {off.mean():.3f}")
print(f"bootstrap probability that robust merits help: {cmp.probability:.3f} "
      f"(significant: {cmp.significant})")
