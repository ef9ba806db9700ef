"""The file-based batch pipeline, end to end, in a temp directory.

Equivalent to:
    edxmine synth --spec corpus.json --out work/corpus
    edxmine validate work/corpus/events.log
    edxmine pipeline work/corpus/events.log --run-config run.json --out work/out
    edxmine mine work/corpus/events.log --run-config run.json --out work/out \
        --class studier,box_checker --min-support 0.2 --max-len 3

Stages communicate via files and rerunning any stage on the same inputs
produces byte-identical outputs.
"""

import json
import tempfile
from pathlib import Path

from edxmine.cli import main
from edxmine.manifest import manifest_to_dict
from edxmine.synth import corpus_spec_to_dict, default_corpus_spec

with tempfile.TemporaryDirectory() as tmp:
    work = Path(tmp)
    spec = default_corpus_spec(users_per_class=6, seed=7)
    (work / "corpus.json").write_text(json.dumps(corpus_spec_to_dict(spec)))
    (work / "manifest.json").write_text(json.dumps(manifest_to_dict(spec.manifest)))
    (work / "run.json").write_text(
        json.dumps(
            {
                "manifest": "manifest.json",
                "cohorts": [{"pattern": "SYN", "modality": "on_campus", "term": "Fall 2021"}],
                "passing_threshold": 0.7,
                "gap_minutes": 30,
            }
        )
    )

    for argv in (
        ["synth", "--spec", str(work / "corpus.json"), "--out", str(work / "corpus")],
        ["validate", str(work / "corpus" / "events.log")],
        ["pipeline", str(work / "corpus" / "events.log"),
         "--run-config", str(work / "run.json"), "--out", str(work / "out"),
         "--exclude-no-show"],
        ["mine", str(work / "corpus" / "events.log"),
         "--run-config", str(work / "run.json"), "--out", str(work / "out"),
         "--class", "studier,box_checker", "--min-support", "0.2", "--max-len", "3"],
    ):
        print(f"\n$ edxmine {' '.join(argv)}")
        code = main(argv)
        assert code == 0, f"exit {code}"

    print("\noutput files:")
    for path in sorted((work / "out").iterdir()):
        print(f"  {path.name:<28} {path.stat().st_size:>8} bytes")
