#!/usr/bin/env python3
"""Generate the bundled synthetic report dataset (JSONL, one report per line).

Descriptions mix task-indicative phrases with filler and year-specific product
names, so the vocabulary drifts over time and every class of every task shows
up in every year.
"""
import argparse
import json
import random

TASKS = {
    "confidentiality": {
        "none": ["no information disclosure"],
        "partial": ["read some files", "leak partial memory"],
        "complete": ["read arbitrary files", "dump the entire database"],
    },
    "integrity": {
        "none": ["cannot modify data"],
        "partial": ["modify some settings", "inject limited content"],
        "complete": ["execute arbitrary code", "overwrite system files"],
    },
    "availability": {
        "none": ["service remains available"],
        "partial": ["degrade performance", "crash a worker thread"],
        "complete": ["cause a denial of service", "crash the whole server"],
    },
    "access_vector": {
        "network": ["remote attackers", "via crafted network packets"],
        "adjacent_network": ["attackers on the local subnet", "adjacent network users"],
        "local": ["local users", "via a crafted local file"],
    },
    "access_complexity": {
        "low": ["easily exploitable", "default configuration"],
        "medium": ["requires user interaction", "when a victim opens a link"],
        "high": ["race condition window", "requires uncommon configuration"],
    },
    "authentication": {
        "none": ["unauthenticated", "without logging in"],
        "single": ["authenticated users", "with a valid account"],
        "multiple": ["administrators after two logins", "with multiple credentials"],
    },
    "severity": {
        "low": ["minor issue"],
        "medium": ["moderate issue"],
        "high": ["critical issue"],
    },
}

COMPONENTS = ["parser", "login handler", "upload servlet", "image decoder", "template engine",
              "session manager", "xml processor", "admin console", "rpc endpoint", "cache layer"]
FILLER = ["in", "the", "of", "a", "allows", "vulnerability", "component", "before", "version", "function"]


def product(year, rng):
    return "prod{}{}".format(chr(ord("a") + (year - 2010)), rng.randrange(3))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/synthetic_reports.jsonl")
    ap.add_argument("--records", type=int, default=200)
    ap.add_argument("--first-year", type=int, default=2010)
    ap.add_argument("--years", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    per_year = args.records // args.years
    rows = []
    for y in range(args.years):
        year = args.first_year + y
        # Class cycles shuffled per year keep every class present each year.
        cycles = {}
        for task, classes in TASKS.items():
            names = sorted(classes)
            seq = [names[i % len(names)] for i in range(per_year)]
            rng.shuffle(seq)
            cycles[task] = seq
        for i in range(per_year):
            labels = {task: cycles[task][i] for task in TASKS}
            words = ["{} {} {}".format(rng.choice(FILLER), product(year, rng), rng.choice(COMPONENTS))]
            for task, cls in labels.items():
                if rng.random() < 0.85:
                    words.append(rng.choice(TASKS[task][cls]))
                words.append(rng.choice(FILLER))
            rng.shuffle(words)
            month, day = rng.randrange(1, 13), rng.randrange(1, 29)
            rows.append({
                "id": "SYN-{}-{:04d}".format(year, i + 1),
                "description": " ".join(words).capitalize() + ".",
                "date": "{:04d}-{:02d}-{:02d}".format(year, month, day),
                "labels": labels,
            })
    with open(args.out, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
