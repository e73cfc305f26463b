"""The command line end to end: write a course, validate it, run an experiment.

The model comparison only sees the features every dataset shares (age,
education level, interaction count), so both courses plant their rule there.

Equivalent shell session:

    studperf synth --out /tmp/course --n 120 --seed 2 --informative nb_action=1,age=1
    studperf validate --kind D1 --path /tmp/course
    studperf run --experiment models --config demo.json --out /tmp/results --folds 5

    python demos/04_cli_round_trip.py
"""

import json
import tempfile
from pathlib import Path

from studperf.cli import main

work = Path(tempfile.mkdtemp(prefix="studperf-demo-"))
course = work / "course"
main(["synth", "--out", str(course), "--n", "120", "--seed", "2",
      "--informative", "nb_action=1,age=1"])
main(["validate", "--kind", "D1", "--path", str(course)])

config = {
    "datasets": {
        "written": {"kind": "D1", "path": str(course)},
        "fresh": {"kind": "synthetic", "plant": {"n_learners": 120, "seed": 9, "pass_rate": 0.4,
                                                 "informative": {"ed_level": 1.0, "nb_action": 1.0}}},
    },
    "grids": {"dt": {"max_depth": [2, 4]}, "rf": {"n_trees": [20], "max_depth": [4]}, "svm": {"C": [0.1, 1.0]}},
}
(work / "demo.json").write_text(json.dumps(config))
main(["run", "--experiment", "models", "--config", str(work / "demo.json"), "--out", str(work / "results"),
      "--folds", "5"])
table = (work / "results" / "models" / "accuracy.md").read_text()
print(table.split("-->", 1)[1].strip())  # skip the provenance comment
