#!/usr/bin/env python3
"""Turns a simulated event log into a raw-share order flow on the exchange clock."""
import argparse
import csv
import random


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("events", help="simulated events CSV (normalized units)")
    ap.add_argument("out", help="raw order-flow CSV to write")
    ap.add_argument("--median", type=int, default=150, help="shares per volume unit")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    with open(args.events, newline="") as f:
        rows = list(csv.DictReader(f))
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["timestamp_ms", "side", "type", "price_ticks", "size"])
        # A few pre-open quotes at 09:02, outside the session window.
        for k in range(3):
            w.writerow([32_520_000 + k, "B", "L", 9990 - k, args.median])
        for r in rows:
            units = int(r["size"])
            shares = args.median * (units - 1) + rng.randint(1, args.median)
            w.writerow([r["timestamp_ms"], r["side"], r["type"], r["price_ticks"], shares])


if __name__ == "__main__":
    main()
