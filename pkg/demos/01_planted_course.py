"""Generate a course with a known pass rule and check that a tree finds it.

The generator plants the label on ``time`` and ``verbal``. Every other
feature is noise, so the tree's importance should sit on those two.

    python demos/01_planted_course.py
"""

from studperf.features import build_features, encode, filter_complete
from studperf.ingest import validate_bundle
from studperf.learners import ModelSpec, cross_validate, train_tree
from studperf.learners.models import feature_importance
from studperf.synthgen import PlantSpec, generate_bundle

bundle, truth = generate_bundle(PlantSpec(n_learners=200, seed=7, noise=0.05, incomplete_rate=0.05))
print("rule:", truth.rule)
print("validation:", validate_bundle(bundle).summary())

features = build_features(bundle)
print(f"{len(features)} learners, {len(features.quarantine)} quarantined (no final attempt, so no label)")
X = encode(filter_complete(features))
print("encoded columns:", ", ".join(X.columns))

report = cross_validate(X, ModelSpec("dt", {"max_depth": 3}), k=10, seed=0)
print(f"10-fold accuracy {report.mean('accuracy'):.2f} +- {report.std('accuracy'):.2f}")

tree = train_tree(X, max_depth=3)
ranked = sorted(feature_importance(tree, level="feature").items(), key=lambda kv: -kv[1])
print("top features by Gini importance:")
for name, share in ranked[:5]:
    mark = "  <- planted" if name in truth.informative else ""
    print(f"  {name:14s} {100 * share:6.2f}%{mark}")
print("importance by source category:",
      {k: round(100 * v, 1) for k, v in feature_importance(tree, level="category").items()})
