"""Independent counts for the toy corpus, written to toy_counts.json.

Run from the repository root: python3 fixtures/golden/count_toy.py
"""
import json

corpus = json.load(open("fixtures/toy_corpus.json"))
preds = [json.loads(l) for l in open("fixtures/toy_pred.jsonl") if l.strip()]
acc = [a for a in corpus["annotations"] if a["status"] == "accepted"]

def stats():
    rows = {}
    for a in acc:
        r = rows.setdefault((a["doc_id"], a["annotator_id"]), [0, set()])
        r[0] += 1
        r[1] |= set(a["cuis"])
    people = {}
    for a in acc:
        p = people.setdefault(a["annotator_id"], [0, set()])
        p[0] += 1
        p[1] |= set(a["cuis"])
    return {
        "rows": [[d, w, n, len(c)] for (d, w), (n, c) in sorted(rows.items())],
        "annotators": [[w, n, len(c)] for w, (n, c) in sorted(people.items())],
        "totals": {
            "documents": len({a["doc_id"] for a in acc}),
            "annotators": len(people),
            "span_count": len(acc),
            "unique_cui_count": len({c for a in acc for c in a["cuis"]}),
            "cui_less_count": sum(a["cui_less"] for a in acc),
            "multi_cui_count": sum(len(a["cuis"]) > 1 for a in acc),
        },
    }

def labels_by_span(who):
    out = {}
    for a in acc:
        if a["annotator_id"] == who:
            key = (a["doc_id"], a["start"], a["end"])
            out.setdefault(key, set()).update(a["cuis"] + (["CUI-less"] if a["cui_less"] else []))
    return out

def agreement(x, y):
    a, b = labels_by_span(x), labels_by_span(y)
    shared = set(a) & set(b)
    union = set(a) | set(b)
    agreed = [k for k in shared if a[k] & b[k]]
    return {
        "spans_a": len(a), "spans_b": len(b), "spans_union": len(union),
        "spans_intersection": len(shared), "concordant_spans": len(shared),
        "cui_agreed_spans": len(agreed),
    }

def framework(mode):
    gold = {}
    for a in acc:
        gold.setdefault((a["doc_id"], a["start"], a["end"]), set()).update(a["cuis"])
    gold = {k: v for k, v in gold.items() if v}
    def hit(k, p):
        if p["doc_id"] != k[0]:
            return False
        if mode == "exact":
            return (p["start"], p["end"]) == (k[1], k[2])
        return max(p["start"], k[1]) < min(p["end"], k[2])
    cred = {}
    for k, cuis in gold.items():
        m = [p for p in preds if hit(k, p)]
        cred[k] = (bool(m), any(p["cui"] in cuis for p in m))
    def inside(o, i):
        return o[0] == i[0] and o != i and o[1] <= i[1] and i[2] <= o[2]
    comp = [0, 0, 0, 0]
    for k in gold:
        sub = [j for j in gold if inside(k, j)]
        if not sub or any(inside(j, k) for j in gold):
            continue
        comp[0] += 1
        if cred[k][0]:
            comp[1] += 1
        else:
            comp[2] += 1
            comp[3] += any(cred[j][1] for j in sub)
    return {
        "gold_count": len(gold),
        "spans_correct": sum(c[0] for c in cred.values()),
        "cuis_correct": sum(c[1] for c in cred.values()),
        "compound": comp,
    }

def lenient():
    gold = {}
    for a in acc:
        g = gold.setdefault((a["doc_id"], a["start"], a["end"]), [set(), False])
        g[0] |= set(a["cuis"])
        g[1] = g[1] or a["cui_less"]
    rec = cor = 0
    for (d, s, e), (cuis, cl) in gold.items():
        same = [p for p in preds if p["doc_id"] == d]
        ov = [p for p in same if max(p["start"], s) < min(p["end"], e)]
        cl_ok = cl and not any((p["start"], p["end"]) == (s, e) and p["cui"] != "CUI-less" for p in same)
        rec += bool(ov) or cl_ok
        cor += any(p["cui"] in cuis for p in ov) or cl_ok
    return {"gold_count": len(gold), "spans_correct": rec, "cuis_correct": cor}

out = {
    "stats": stats(),
    "agreement_ann1_ann2": agreement("ann1", "ann2"),
    "framework_exact": framework("exact"),
    "framework_overlap": framework("overlap"),
    "lenient": lenient(),
}
with open("fixtures/golden/toy_counts.json", "w") as f:
    json.dump(out, f, indent=2)
    f.write("\n")
