#!/usr/bin/env python3
"""Regenerates the bundled toy data under data/toy/.

Outputs:
  records.jsonl          concept-set records ({"concepts": [...], "sentence": ...})
  graph.tsv              concept graph edges (head, relation, tail)
  sentence_vectors.txt   one vector per record sentence, keyed by sentence hash
  corpus.txt             context corpus, one sentence per line
  word_vectors.txt       word vectors for the substitution fallback
  config.json            pipeline config using the files above

Everything is seeded; running the script twice gives identical files.
"""

import json
import os
import random
import string
import sys

SCENES = [
    # (a, b, c, verbs as (3rd person, -ing))
    ("dog", "sheep", "field", [("herds", "herding"), ("chases", "chasing"), ("guards", "guarding")]),
    ("cat", "mouse", "kitchen", [("hunts", "hunting"), ("catches", "catching"), ("watches", "watching")]),
    ("boy", "kite", "beach", [("flies", "flying"), ("pulls", "pulling"), ("holds", "holding")]),
    ("girl", "bike", "street", [("rides", "riding"), ("pushes", "pushing"), ("fixes", "fixing")]),
    ("farmer", "tractor", "barn", [("drives", "driving"), ("repairs", "repairing"), ("parks", "parking")]),
    ("chef", "onion", "knife", [("chops", "chopping"), ("slices", "slicing"), ("peels", "peeling")]),
    ("bird", "nest", "tree", [("builds", "building"), ("guards", "guarding"), ("leaves", "leaving")]),
    ("player", "ball", "goal", [("kicks", "kicking"), ("passes", "passing"), ("throws", "throwing")]),
    ("student", "book", "library", [("reads", "reading"), ("borrows", "borrowing"), ("carries", "carrying")]),
    ("woman", "cake", "oven", [("bakes", "baking"), ("decorates", "decorating"), ("cuts", "cutting")]),
    ("horse", "rider", "fence", [("carries", "carrying"), ("follows", "following"), ("throws", "throwing")]),
    ("painter", "wall", "brush", [("paints", "painting"), ("cleans", "cleaning"), ("covers", "covering")]),
]

RECORD_TEMPLATES = [
    "the {a} {v} the {b} in the {c} .",
    "a {a} is {ving} a {b} near the {c} .",
    "there is a {a} {ving} the {b} by the {c} .",
    "in the {c} , the {a} {v} a {b} .",
    "the {b} stays still while the {a} {v} it beside the {c} .",
    "an old {a} {v} the {b} next to the {c} .",
]
PAIR_TEMPLATES = [
    "the {a} {v} the {b} .",
    "a young {a} is {ving} the {b} .",
    "every morning the {a} {v} a {b} .",
]

CONTEXT_STYLES = {
    "action": [
        "the {x} quickly {v} the {y} .",
        "one {x} {v} the {y} again and again .",
        "after lunch the {x} {v} the {y} .",
    ],
    "description": [
        "a {adj} {x} stands next to a {adj2} {y} .",
        "the {x} looks {adj} beside the {y} .",
        "a {adj} {y} and a {adj2} {x} are together .",
    ],
    "scene": [
        "people saw the {x} and the {y} near the {z} .",
        "at the {z} there was a {x} with a {y} .",
        "near the {z} , a {x} waited for the {y} .",
    ],
}
ADJ = ["small", "brown", "quiet", "happy", "tired", "tall", "busy", "calm", "young", "noisy"]
FILLER = ["is very {adj} today .", "sleeps in the afternoon .", "was seen yesterday .", "looks {adj} in the sun ."]
RELATIONS = ["RelatedTo", "AtLocation", "UsedFor", "CapableOf"]


def tokenize(text):
    out, cur = [], []
    for ch in text:
        if ch.isspace():
            if cur:
                out.append("".join(cur))
                cur = []
        elif ch in string.punctuation:
            if cur:
                out.append("".join(cur))
                cur = []
            out.append(ch)
        else:
            cur.append(ch.lower() if ord(ch) < 128 else ch)
    if cur:
        out.append("".join(cur))
    return out


def sentence_key(tokens):
    h = 0xCBF29CE484222325
    for b in " ".join(tokens).encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return "%016x" % h


def unit(rng, dim):
    v = [rng.gauss(0, 1) for _ in range(dim)]
    n = sum(x * x for x in v) ** 0.5
    return [x / n for x in v]


def fmt_vec(v):
    return " ".join("%.6f" % x for x in v)


def main(out_dir):
    rng = random.Random(20240611)
    os.makedirs(out_dir, exist_ok=True)

    # Records: triple-concept sentences plus pair-only sentences.
    records = []
    for a, b, c, verbs in SCENES:
        for i, t in enumerate(RECORD_TEMPLATES):
            v, ving = verbs[i % len(verbs)]
            records.append(([a, b, c], t.format(a=a, b=b, c=c, v=v, ving=ving)))
        for (x, y) in [(a, c), (b, c)]:
            for i, t in enumerate(PAIR_TEMPLATES):
                v, ving = verbs[(i + 1) % len(verbs)]
                records.append(([x, y], t.format(a=x, b=y, v=v, ving=ving)))
    # A near-duplicate so the dedup stage has something to remove.
    dup_src = records[0][1]
    records.append((records[0][0], dup_src.replace("the field", "the big field")))

    with open(os.path.join(out_dir, "records.jsonl"), "w") as f:
        for concepts, s in records:
            f.write(json.dumps({"concepts": concepts, "sentence": s}) + "\n")

    dim = 16
    with open(os.path.join(out_dir, "sentence_vectors.txt"), "w") as f:
        base = None
        for i, (_, s) in enumerate(records):
            v = unit(rng, dim)
            if i == 0:
                base = v
            if i == len(records) - 1:
                v = [x + 0.05 * y for x, y in zip(base, unit(rng, dim))]
            f.write(sentence_key(tokenize(s)) + " " + fmt_vec(v) + "\n")

    # Graph: scene triangles, minus one edge in the last scene so one pair
    # needs its sentence's third concept as the intermediate node.
    with open(os.path.join(out_dir, "graph.tsv"), "w") as f:
        for si, (a, b, c, _) in enumerate(SCENES):
            edges = [(a, b), (a, c), (b, c)]
            if si == len(SCENES) - 1:
                edges = [(a, c), (b, c)]
            for h, t in edges:
                f.write("%s\t%s\t%s\n" % (h, RELATIONS[rng.randrange(len(RELATIONS))], t))

    # Context corpus: three styles per pair, plus single-concept filler.
    corpus = []
    for a, b, c, verbs in SCENES:
        for (x, y, z) in [(a, b, c), (a, c, b), (b, c, a)]:
            for style in ("action", "description", "scene"):
                for t in CONTEXT_STYLES[style]:
                    v, _ = verbs[rng.randrange(len(verbs))]
                    corpus.append(t.format(x=x, y=y, z=z, v=v, adj=rng.choice(ADJ), adj2=rng.choice(ADJ)))
        for w in (a, b, c):
            for _ in range(2):
                corpus.append("the " + w + " " + rng.choice(FILLER).format(adj=rng.choice(ADJ)))
    assert len(corpus) <= 500, len(corpus)
    with open(os.path.join(out_dir, "corpus.txt"), "w") as f:
        for s in corpus:
            f.write(s + "\n")

    # Word vectors: scene words share a centroid; everything else is random.
    words = sorted({t for s in corpus for t in tokenize(s)} | {t for _, s in records for t in tokenize(s)})
    centroid = {}
    for a, b, c, _ in SCENES:
        cvec = unit(rng, dim)
        for w in (a, b, c):
            centroid[w] = cvec
    with open(os.path.join(out_dir, "word_vectors.txt"), "w") as f:
        f.write("%d %d\n" % (len(words), dim))
        for w in words:
            noise = unit(rng, dim)
            v = [x + 0.3 * y for x, y in zip(centroid[w], noise)] if w in centroid else noise
            f.write(w + " " + fmt_vec(v) + "\n")

    config = {
        "paths": {
            "corpora": [{"path": "corpus.txt", "format": "plain"}],
            "word_vectors": "word_vectors.txt",
            "records": "records.jsonl",
            "graph": "graph.tsv",
            "sentence_vectors": "sentence_vectors.txt",
            "dataset_dir": "../../build/toy/dataset",
            "workdir": "../../build/toy/run",
        },
        "dataset": {"dev_size": 4, "test_size": 8},
        "retriever": {"n": 3, "m": 5, "k": 3, "alpha": 1.0, "epochs": 20, "hash_dim": 16384},
        "generator": {"n": 3, "em_iters": 10},
        "decoder": {"kind": "beam", "beam": 4, "max_len": 25},
        "seed": 1,
    }
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")
    print("records %d, corpus %d, words %d" % (len(records), len(corpus), len(words)))


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "..", "data", "toy"))
