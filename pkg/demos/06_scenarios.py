"""Declarative scenarios: the same runs the command line performs.

Run: python3 demos/06_scenarios.py [output-dir]
The shell equivalent is ``evolab run fig1b-logit-hypnodisk -o runs/fig1b``.
"""
import sys

from evolab.scenario import ScenarioConfig, bundled, bundled_scenarios, run_scenario

print("bundled scenarios:", [p.stem for p in bundled_scenarios()])

cfg = ScenarioConfig.load(bundled("fig1b-logit-hypnodisk"))
print(cfg.to_json())

out = sys.argv[1] if len(sys.argv) > 1 else "runs/fig1b-logit-hypnodisk"
manifest = run_scenario(cfg, out_dir=out)
for run in manifest.runs:
    print(f"ic-{run['ic']}: converged={run['converged']} distance={run['final_distance']:.2e}")
print("checks:", [(c["check"], c["verdict"]) for c in manifest.checks])
print("manifest written to", out)
