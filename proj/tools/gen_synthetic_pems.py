#!/usr/bin/env python3
"""Synthetic stand-in for the Los Angeles PeMS extract.

Writes roads.csv (postmiles of the 20 roads, invented interchange nodes) and
sensors.csv (5-minute car and truck flows for every mainline cell, onramp and
offramp, 06:00-18:55). Flows come from a static downstream propagation of
onramp demand with per-cell capacities, so bottlenecks show up as flat
measured peaks. Deterministic for a given seed.

    python3 tools/gen_synthetic_pems.py scenarios/pems_synthetic
"""

import argparse
import csv
import math
import os
import random

# road, freeway, pm_start, pm_end, from_node, to_node
ROADS = [
    ("e1", "I405-S", 52.93, 45.14, "", "A"),
    ("e2", "I405-S", 44.37, 37.08, "A", "B"),
    ("e3", "I405-S", 36.34, 31.82, "B", "C"),
    ("e4", "I405-S", 30.55, 20.65, "C", ""),
    ("e5", "I105-E", 2.50, 7.20, "B", "D"),
    ("e6", "I105-E", 7.56, 13.20, "D", "F"),
    ("e7", "I105-E", 13.86, 17.30, "F", "G"),
    ("e8", "I110-S", 15.22, 13.50, "", "F"),
    ("e9", "I110-S", 13.33, 9.93, "F", "H"),
    ("e10", "SR91-E", 0.56, 5.40, "H", "I"),
    ("e11", "SR91-E", 6.20, 10.22, "I", "J"),
    ("e12", "SR91-E", 11.37, 18.14, "J", "M"),
    ("e13", "SR91-E", 19.17, 23.87, "M", ""),
    ("e14", "I5-S", 123.21, 114.71, "", "N"),
    ("e15", "I5-S", 113.99, 107.25, "N", "O"),
    ("e16", "I5-S", 105.71, 95.25, "O", ""),
    ("e17", "I710-S", 12.52, 10.50, "O", "G"),
    ("e18", "I710-S", 10.29, 8.33, "G", "J"),
    ("e19", "I710-S", 7.54, 4.29, "J", ""),
    ("e20", "I605-S", 9.35, 7.25, "M", ""),
]

# Share of trucks by freeway; the port corridor carries the most.
TRUCK_SHARE = {"I405-S": 0.05, "I105-E": 0.04, "I110-S": 0.06, "SR91-E": 0.07,
               "I5-S": 0.06, "I710-S": 0.14, "I605-S": 0.05}

# Cells whose capacity is reduced (lane drops, weaving at interchanges).
BOTTLENECKS = {"e2_4": 0.62, "e3_2": 0.7, "e6_3": 0.66, "e9_2": 0.7, "e11_2": 0.68,
               "e12_1": 0.6, "e15_3": 0.72, "e18_1": 0.55, "e19_1": 0.7}

CELL_MI = 2.0
LANE_CAPACITY = 1500.0  # veh/h/lane, mainline
SOURCE_FLOW = 5200.0     # boundary flow of the three entry roads, folded into their first onramp


def segment(length):
    n = int(math.floor(length / CELL_MI + 1e-9))
    if n == 0:
        return [length]
    cells = [CELL_MI] * n
    rem = length - n * CELL_MI
    if rem >= 0.5 * CELL_MI:
        cells.append(rem)
    else:
        cells[-1] += rem
    cells[-1] = length - CELL_MI * (len(cells) - 1)
    return cells


def profile(minute):
    """Demand multiplier over the day: morning and evening peaks."""
    h = minute / 60.0
    am = math.exp(-((h - 7.75) / 1.1) ** 2)
    pm = math.exp(-((h - 17.0) / 1.3) ** 2)
    return 0.45 + 0.75 * am + 0.6 * pm


def build(seed):
    rng = random.Random(seed)
    cells = []  # (road, id, length) in road order
    first_of = {}
    last_of = {}
    for road, fwy, a, b, src, dst in ROADS:
        parts = segment(abs(a - b))
        ids = [f"{road}_{m + 1}" for m in range(len(parts))]
        first_of[road] = ids[0]
        last_of[road] = ids[-1]
        for cid, length in zip(ids, parts):
            cells.append((road, fwy, cid, length))

    # Downstream structure: next cell on the road, or the first cells of the
    # roads leaving the end node.
    leaving = {}
    for road, _, _, _, src, dst in ROADS:
        if src:
            leaving.setdefault(src, []).append(road)
    succ = {}
    for idx, (road, fwy, cid, length) in enumerate(cells):
        nxt = []
        if cid != last_of[road]:
            nxt = [cells[idx + 1][2]]
        else:
            dst = next(r[5] for r in ROADS if r[0] == road)
            nxt = [first_of[r] for r in leaving.get(dst, [])]
        succ[cid] = nxt

    params = {}
    for road, fwy, cid, length in cells:
        lanes = 6
        cap = LANE_CAPACITY * lanes * BOTTLENECKS.get(cid, 1.0) * rng.uniform(0.95, 1.05)
        on = rng.uniform(250.0, 700.0) * length / CELL_MI
        if cid == first_of[road] and not next(r[4] for r in ROADS if r[0] == road):
            on += SOURCE_FLOW
        params[cid] = {
            "cap": cap,
            "on": on,
            "off_car": rng.uniform(0.04, 0.12),
            "off_truck": rng.uniform(0.01, 0.06),
            "split": [rng.uniform(0.3, 0.7) for _ in succ[cid]],
            "truck": TRUCK_SHARE[fwy],
        }
    return cells, succ, params


def day(cells, succ, params, rng):
    upstream = {cid: [] for _, _, cid, _ in cells}
    for cid, nxt in succ.items():
        for j in nxt:
            upstream[j].append(cid)
    # Topological order (the interchange graph is acyclic).
    order, seen = [], set()

    def visit(c):
        if c in seen:
            return
        seen.add(c)
        for u in upstream[c]:
            visit(u)
        order.append(c)

    for _, _, cid, _ in cells:
        visit(cid)

    rows = []
    for minute in range(6 * 60, 19 * 60, 5):
        m = profile(minute)
        noise = lambda: rng.uniform(0.93, 1.07)
        into = {cid: [0.0, 0.0] for cid in order}
        for cid in order:
            p = params[cid]
            on_total = p["on"] * m * noise()
            on = [on_total * (1 - p["truck"]), on_total * p["truck"]]
            flow = [into[cid][0] + on[0], into[cid][1] + on[1]]
            total = flow[0] + flow[1]
            if total > p["cap"]:
                scale = p["cap"] / total
                flow = [flow[0] * scale, flow[1] * scale]
            off = [flow[0] * p["off_car"], flow[1] * p["off_truck"]]
            through = [flow[0] - off[0], flow[1] - off[1]]
            nxt = succ[cid]
            if nxt:
                w = p["split"]
                tw = sum(w)
                for j, wj in zip(nxt, w):
                    into[j][0] += through[0] * wj / tw
                    into[j][1] += through[1] * wj / tw
            else:
                off = [off[0] + through[0], off[1] + through[1]]
            stamp = f"2012-02-08T{minute // 60:02d}:{minute % 60:02d}:00"
            for k, name in enumerate(("car", "truck")):
                rows.append((stamp, cid, name, flow[k]))
                rows.append((stamp, cid + "_on", name, on[k]))
                rows.append((stamp, cid + "_off", name, off[k]))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=20120208)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    rng = random.Random(args.seed)
    cells, succ, params = build(args.seed)

    with open(os.path.join(args.out_dir, "roads.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["road", "freeway", "pm_start", "pm_end", "from_node", "to_node", "lanes"])
        for road, fwy, a, b, src, dst in ROADS:
            w.writerow([road, fwy, f"{a:.2f}", f"{b:.2f}", src, dst, 6])

    rows = day(cells, succ, params, rng)
    rows.sort(key=lambda r: (r[1], r[2], r[0]))
    with open(os.path.join(args.out_dir, "sensors.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["timestamp", "cell_id", "commodity", "flow_vph"])
        for stamp, cid, name, v in rows:
            w.writerow([stamp, cid, name, f"{v:.1f}"])


if __name__ == "__main__":
    main()
