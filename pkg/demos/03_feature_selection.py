"""Wrapper and filter selection on a course with two planted features.

    python demos/03_feature_selection.py
"""

from studperf.experiments import ExperimentConfig, run_selection_analysis
from studperf.synthgen import PlantSpec, generate_bundle

bundle, truth = generate_bundle(PlantSpec(n_learners=200, seed=11, informative={"time": 1.0, "verbal": 1.0}))
config = ExperimentConfig(experiment="selection", folds=5, grids={"dt": {"max_depth": [3, 5]}})
results, tables = run_selection_analysis(bundle, config)

print("planted:", sorted(truth.informative))
rfecv = results["RFECV"]
print(f"RFECV keeps k* = {rfecv.chosen_k} ({rfecv.notes})")
for k, mean, std, se in rfecv.curve:
    print(f"  k={k:2d}  accuracy {mean:6.2f}  std {std:5.2f}")
for method in ("FE", "BE", "RFECV"):
    print(f"{method:6s} -> {', '.join(results[method].selected)}")
print("ANOVA F ranking:", ", ".join(results["ANOVA"].ranking[:5]))
print("Kendall tau ranking:", ", ".join(results["KENDALL"].ranking[:5]))
print()
print(tables[3].to_markdown())
