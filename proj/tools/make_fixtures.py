#!/usr/bin/env python3
"""Regenerates the bundled fixtures under data/fixtures.

    python3 tools/make_fixtures.py [data_dir]
"""
import json
import os
import random
import sys


def leaves(node, out):
    if "object" in node:
        out.append(node["name"])
    for c in node.get("children", []):
        leaves(c, out)


def categories(node, out):
    kids = node.get("children", [])
    if kids and all("object" in c for c in kids):
        out.append([c["name"] for c in kids])
        return
    for c in kids:
        if "object" in c:
            out.append([c["name"]])
        else:
            categories(c, out)


def truth_rows(labels, groups):
    group_of = {l: i for i, g in enumerate(groups) for l in g}
    rows = []
    for a in labels:
        g = groups[group_of[a]]
        rows.append([1.0 / len(g) if group_of[b] == group_of[a] else 0.0 for b in labels])
    return rows


def write_matrix(path, labels, rows):
    with open(path, "w") as f:
        json.dump({"labels": labels, "rows": [[float("%.9g" % v) for v in r] for r in rows]}, f, indent=1)
        f.write("\n")


def mix_with_uniform(rows, w):
    n = len(rows)
    return [[(1 - w) * v + w / n for v in r] for r in rows]


def rle(mask):
    out, p = [], 0
    while p < len(mask):
        if not mask[p]:
            p += 1
            continue
        q = p
        while q < len(mask) and mask[q]:
            q += 1
        out += [p, q - p]
        p = q
    return " ".join(map(str, out))


def rect_mask(w, h, r):
    x0, y0, x1, y1 = r
    return [1 if x0 <= p % w < x1 and y0 <= p // w < y1 else 0 for p in range(w * h)]


def openworld(out_dir, groups, rng):
    os.makedirs(out_dir, exist_ok=True)
    w, h = 32, 24
    multi = [g for g in groups if len(g) > 1]
    for k in range(6):
        group = multi[k % len(multi)]
        target, related = group[0], group[1]
        others = [l for g in groups if g is not group for l in g]
        rng.shuffle(others)
        # a 2x2 layout of shelf sections with slightly overlapping crops
        rects = [[0, 0, 17, 13], [15, 0, 32, 13], [0, 11, 17, 24], [15, 11, 32, 24]]
        hit = rng.randrange(4)
        labels = others[:4]
        labels[hit] = related
        truth = rle(rect_mask(w, h, rects[hit]))
        rel = [round(rng.uniform(0.5, 1.0), 3) for _ in rects]
        for method, order in (("aligned", labels), ("shuffled", labels[1:] + labels[:1])):
            crops = [{"rect": r, "label": l, "relevance": v} for r, l, v in zip(rects, order, rel)]
            doc = {"width": w, "height": h, "method": method, "target": target, "truth_rle": truth, "crops": crops}
            with open(os.path.join(out_dir, "scene%02d_%s.json" % (k, method)), "w") as f:
                json.dump(doc, f, indent=1)
                f.write("\n")


def ocr(path, labels, rng):
    # per-object OCR similarity scores over the pharmacy label list
    doc = {}
    for name in labels[:6]:
        scores = [round(rng.uniform(0.0, 0.3), 3) for _ in labels]
        scores[labels.index(name)] = round(rng.uniform(0.6, 0.9), 3)
        doc[name] = {"scores": scores}
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def main():
    data = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data")
    tax = json.load(open(os.path.join(data, "taxonomies", "pharmacy.json")))
    labels, groups = [], []
    leaves(tax, labels)
    categories(tax, groups)
    fx = os.path.join(data, "fixtures")
    os.makedirs(fx, exist_ok=True)
    rows = truth_rows(labels, groups)
    write_matrix(os.path.join(fx, "pharmacy_affinity_good.json"), labels, mix_with_uniform(rows, 0.2))
    write_matrix(os.path.join(fx, "pharmacy_affinity_noisy.json"), labels, mix_with_uniform(rows, 0.8))
    rng = random.Random(7)
    ocr(os.path.join(fx, "pharmacy_ocr.json"), labels, rng)
    openworld(os.path.join(fx, "openworld"), groups, rng)


if __name__ == "__main__":
    main()
