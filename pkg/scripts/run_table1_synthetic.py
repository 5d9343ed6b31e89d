"""Run every Table 1 variant on a freshly generated synthetic corpus.

    python scripts/run_table1_synthetic.py OUT_DIR --subjects 6 --duration 12 --seed 0 --workers 2

Absolute numbers are not comparable with real-data results: identification
uses the stand-in statistics embedder and the data are synthetic.
"""
import argparse
import sys
from pathlib import Path

from gazepriv.harness import cli
from gazepriv.synthetic import subject_corpus, write_recording_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--subjects", type=int, default=6)
    ap.add_argument("--duration", type=float, default=12.0, help="seconds per recording")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    out = Path(args.out)
    data = out / "data"
    data.mkdir(parents=True, exist_ok=True)
    for r in subject_corpus(args.subjects, duration_s=args.duration, seed=args.seed):
        write_recording_csv(r, data / f"{r.key}.csv")
    return cli.main(["run", "--preset", "table1", "--seed", str(args.seed), "--workers", str(args.workers),
                     "--data", str(data), "--output", str(out / "run")])


if __name__ == "__main__":
    sys.exit(main())
