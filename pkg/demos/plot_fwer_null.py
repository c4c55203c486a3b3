"""
Family-wise error under the null
================================

With no signal anywhere, any detected column is a false detection. The
fraction of Monte Carlo runs with at least one detection estimates the
FWER, which should sit near the nominal level.
"""

from birs.simulation import ExperimentConfig, run_experiment

cfg = ExperimentConfig(design="mdep-equal", delta=0.0, p=1024, n=300, m=200, runs=100, n_boot=300)
res = run_experiment(cfg)

print(f"design {cfg.design}: FWER {res.fwer:.3f} over {cfg.runs} runs (alpha {cfg.alpha})")
print(f"mean tests per run: {res.mean_tests:.2f}")

# runs with a false detection, and what was found
for rec in res.records:
    if rec.false_detection:
        print("  run", rec.run, rec.result.regions)
