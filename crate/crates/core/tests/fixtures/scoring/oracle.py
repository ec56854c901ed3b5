"""Brute-force scoring oracle for the 10-publication fixture.

Writes the fixture inputs and the expected outputs. Run from this directory:

    python3 oracle.py
"""
import csv
import json
from statistics import median

PERIOD = (2004, 2006)
LIFESCI = {"BIO"}

ROSTER = [
    ("a1", "U1", "S1", {2004: 1.0, 2005: 1.0, 2006: 1.0}),
    ("a2", "U1", "S1", {2004: 1.0, 2005: 1.0, 2006: 0.5}),
    ("b1", "U2", "S1", {2004: 1.0, 2005: 1.0, 2006: 1.0}),
    ("b2", "U2", "S1", {2005: 1.0, 2006: 1.0}),
    ("c1", "U1", "S2", {2004: 1.0, 2005: 1.0, 2006: 1.0}),
    ("c2", "U1", "S2", {2004: 1.0, 2005: 1.0, 2006: 1.0}),
    ("c3", "U1", "S2", {2004: 0.25}),
]
UNIT = {sid: (u, s) for sid, u, s, _ in ROSTER}


def a(author_id):
    return (author_id, UNIT.get(author_id))


PUBS = [
    ("p01", 2004, 10, ["MATH"], [a("a1"), a("x1")]),
    ("p02", 2004, 2, ["MATH"], [a("b1")]),
    ("p03", 2004, 0, ["MATH"], [a("a2"), a("b1")]),
    ("p04", 2005, 0, ["PHYS"], [a("c1")]),
    ("p05", 2005, 0, ["PHYS"], [a("c2"), a("x2")]),
    ("p06", 2005, 8, ["MATH", "PHYS"], [a("a1"), a("c1"), a("x3")]),
    ("p07", 2005, 0, ["PHYS"], [a("c3"), a("c2")]),
    ("p08", 2006, 12, ["BIO"], [a("a1"), a("x4"), a("x5"), a("x6"), a("b2")]),
    ("p09", 2006, 30, ["BIO"], [a("a2"), a("c1"), a("x7"), a("x8"), a("a1")]),
    ("p10", 2006, 6, ["BIO"], [a("b1"), a("x9"), a("x10"), a("c2")]),
]


def baselines():
    cells = {}
    for _, year, cites, cats, _ in PUBS:
        for c in cats:
            cells.setdefault((year, c), []).append(cites)
    out = {}
    for key, vals in cells.items():
        m = median(vals)
        if m > 0:
            out[key] = (m, "none", len(vals))
        elif sum(vals) > 0:
            out[key] = (sum(vals) / len(vals), "mean", len(vals))
        else:
            out[key] = (1.0, "one", len(vals))
    return out


def weight(pos, n, lifesci, shared):
    """Weight of the author at 1-based position `pos` of `n`."""
    if not lifesci:
        return 1.0 / n
    if n == 1:
        return 1.0
    if n == 2:
        return 0.5
    if shared:
        return 0.4 if pos in (1, n) else 0.2 / (n - 2)
    if n == 3:
        return [0.3, 0.4, 0.3][pos - 1]
    if n == 4:
        return [0.3, 0.2, 0.2, 0.3][pos - 1]
    if pos in (1, n):
        return 0.3
    if pos in (2, n - 1):
        return 0.15
    return 0.1 / (n - 4)


def main():
    base = baselines()
    unit_fsc, unit_pubs, sci_fsc = {}, {}, {}
    for pid, year, cites, cats, authors in PUBS:
        impact = cites / (sum(base[(year, c)][0] for c in cats) / len(cats))
        ls = any(c in LIFESCI for c in cats)
        first, last = authors[0][1], authors[-1][1]
        shared = first is not None and last is not None and first[0] == last[0]
        for pos, (aid, unit) in enumerate(authors, start=1):
            if unit is None:
                continue
            contrib = impact * weight(pos, len(authors), ls, shared)
            unit_fsc[unit] = unit_fsc.get(unit, 0.0) + contrib
            if weight(pos, len(authors), ls, shared) > 0:
                unit_pubs.setdefault(unit, set()).add(pid)
            sci_fsc[aid] = sci_fsc.get(aid, 0.0) + contrib

    years = PERIOD[1] - PERIOD[0] + 1
    rs = {}
    for _, u, s, hc in ROSTER:
        rs[(u, s)] = rs.get((u, s), 0.0) + sum(f for y, f in hc.items() if PERIOD[0] <= y <= PERIOD[1]) / years
    units = sorted(set(rs) | set(unit_fsc))

    with open("publications.jsonl", "w") as f:
        for pid, year, cites, cats, authors in PUBS:
            rec = {
                "pub_id": pid,
                "year": year,
                "citations": cites,
                "categories": cats,
                "authors": [
                    {
                        "author_id": aid,
                        "university_id": unit[0] if unit else None,
                        "sds_id": unit[1] if unit else None,
                        "position": i,
                    }
                    for i, (aid, unit) in enumerate(authors, start=1)
                ],
            }
            f.write(json.dumps(rec) + "\n")
    with open("roster.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scientist_id", "university_id", "sds_id", "year", "fraction"])
        for sid, u, s, hc in ROSTER:
            for y, frac in sorted(hc.items()):
                w.writerow([sid, u, s, y, frac])
    with open("config.toml", "w") as f:
        f.write('[data]\npublications = "publications.jsonl"\nroster = "roster.csv"\n')
        f.write(f"period_start = {PERIOD[0]}\nperiod_end = {PERIOD[1]}\n")
        f.write('life_science_categories = ["BIO"]\n')

    # Full precision, for numeric comparison.
    with open("oracle_units.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["university_id", "sds_id", "fsc", "rs", "n_pubs"])
        for u in units:
            w.writerow([u[0], u[1], repr(unit_fsc.get(u, 0.0)), repr(rs.get(u, 0.0)), len(unit_pubs.get(u, ()))])
    with open("oracle_scientists.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scientist_id", "fsc"])
        for sid, _, _, _ in ROSTER:
            w.writerow([sid, repr(sci_fsc.get(sid, 0.0))])

    # Golden files in the output format.
    with open("golden_unit_scores.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["university_id", "sds_id", "fsc", "rs", "productivity", "n_pubs"])
        for u in units:
            r = rs.get(u, 0.0)
            fsc = unit_fsc.get(u, 0.0)
            w.writerow([u[0], u[1], "%g" % fsc, "%g" % r, "%g" % (fsc / r) if r > 0 else "NA", len(unit_pubs.get(u, ()))])
    with open("golden_scientist_scores.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scientist_id", "university_id", "sds_id", "fsc"])
        for sid, u, s, _ in ROSTER:
            w.writerow([sid, u, s, "%g" % sci_fsc.get(sid, 0.0)])
    with open("golden_baselines.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["year", "category", "value", "fallback_used", "n_pubs"])
        for (year, cat), (v, fb, n) in sorted(base.items()):
            w.writerow([year, cat, "%g" % v, fb, n])


if __name__ == "__main__":
    main()
