"""Write a synthetic multi-subject corpus in the ingestion CSV schema.

    python scripts/make_synthetic_dataset.py OUT_DIR --subjects 12 --duration 30 --seed 0
"""
import argparse
from pathlib import Path

from gazepriv.synthetic import subject_corpus, write_recording_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--subjects", type=int, default=12)
    ap.add_argument("--duration", type=float, default=30.0, help="seconds per recording")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    recs = subject_corpus(args.subjects, duration_s=args.duration, seed=args.seed)
    for r in recs:
        write_recording_csv(r, out / f"{r.key}.csv")
    print(f"wrote {len(recs)} recordings to {out}")


if __name__ == "__main__":
    main()
