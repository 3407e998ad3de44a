#!/usr/bin/env python3
"""Write a planted-error dataset usable with ``llmrefine refine`` and a sim backend config."""

import argparse
import json

from llmrefine.sim import make_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--major", type=int, default=3)
    ap.add_argument("--minor", type=int, default=4)
    ap.add_argument("--length", type=int, default=12)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    with open(args.out, "w", encoding="utf-8") as f:
        for i in range(args.n):
            inst = make_instance(args.seed * 1_000_003 + i, args.major, args.minor, args.length)
            f.write(json.dumps({"id": f"planted-{i}", "kind": "planted", "instance": inst.to_dict()}) + "\n")


if __name__ == "__main__":
    main()
