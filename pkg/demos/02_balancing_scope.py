"""Why balancing belongs inside the training folds.

Oversampling before the split copies minority rows into both sides of a
fold, so the tree is partly tested on rows it has memorised. The
``leaked_rows`` counter shows this directly.

    python demos/02_balancing_scope.py
"""

from studperf.features import build_features, encode, filter_complete
from studperf.learners import ModelSpec, cross_validate
from studperf.resample import TECHNIQUES, BalanceSpec, class_counts
from studperf.synthgen import PlantSpec, generate_bundle

bundle, _ = generate_bundle(PlantSpec(n_learners=150, seed=3, pass_rate=0.25, noise=0.1))
X = encode(filter_complete(build_features(bundle)))
print("class counts (fail, pass):", class_counts(X.y))

model = ModelSpec("dt", {"max_depth": 5})
print(f"{'technique':12s} {'scope':14s} {'accuracy':>8s} {'f-score':>8s} {'leaked':>6s}")
for technique in TECHNIQUES:
    for scope in ("train-folds", "whole-dataset"):
        if technique == "none" and scope == "whole-dataset":
            continue
        rep = cross_validate(X, model, BalanceSpec(technique, smote_k=5, scope=scope), k=10, seed=0)
        print(f"{technique:12s} {scope:14s} {rep.mean('accuracy'):8.2f} {rep.mean('f_score'):8.2f} "
              f"{rep.leaked_rows:6d}")
