"""Regenerates tests/data/cvss_frozen.jsonl from the reference `cvss` package."""
import json
import random
import sys

from cvss import CVSS3

BASE = [("AV", "NALP"), ("AC", "LH"), ("PR", "NLH"), ("UI", "NR"), ("S", "UC"),
        ("C", "HLN"), ("I", "HLN"), ("A", "HLN")]
TEMPORAL = [("E", "XUPFH"), ("RL", "XOTWU"), ("RC", "XURC")]
ENV = [("CR", "XLMH"), ("IR", "XLMH"), ("AR", "XLMH"), ("MAV", "XNALP"), ("MAC", "XLH"),
       ("MPR", "XNLH"), ("MUI", "XNR"), ("MS", "XUC"), ("MC", "XNLH"), ("MI", "XNLH"), ("MA", "XNLH")]


def vector(rng):
    version = rng.choice(["3.0", "3.1", "3.1"])
    parts = [f"{m}:{rng.choice(v)}" for m, v in BASE]
    for group in (TEMPORAL, ENV):
        if rng.random() < 0.75:
            for m, v in group:
                if rng.random() < 0.7:
                    parts.append(f"{m}:{rng.choice(v)}")
    return f"CVSS:{version}/" + "/".join(parts)


def main():
    rng = random.Random(int(sys.argv[1]) if len(sys.argv) > 1 else 20240601)
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 600
    for _ in range(n):
        v = vector(rng)
        base, temporal, env = CVSS3(v).scores()
        print(json.dumps({"vector": v, "base": base, "temporal": temporal, "environmental": env}))


if __name__ == "__main__":
    main()
