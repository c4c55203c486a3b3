"""
Decayed versus constant signal strength
=======================================

Later regions get a slightly smaller strong-signal bound, shrinking with the
number of columns already covered by earlier regions. Both settings use the
same random streams, so the comparison is paired run by run.
"""

import numpy as np

from birs.simulation import ExperimentConfig, decay_adjust, generate_signal_layout, run_experiment
from birs.rng import make_rng

layout = generate_signal_layout(make_rng(1), 4, 1024)
print("region lengths:", [r.length for r in layout.regions])
print("decayed bounds:", np.round(decay_adjust(1.0, layout, 300, 1024), 4))

base = dict(design="weak-equal", beta=4, delta=1.0, delta0=0.05, p=1024, n=300, m=200, runs=30, n_boot=300)
for decay in (False, True):
    res = run_experiment(ExperimentConfig(decay=decay, **base))
    print(f"decay={'on ' if decay else 'off'}  TPR {res.tpr:.3f}  FDR {res.fdr:.3f}")
