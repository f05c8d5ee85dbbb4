#!/usr/bin/env python3
"""Builds data/corpus.txt and data/synonyms.tsv from a WordNet 3.0 database.

The corpus is made of WordNet glosses and usage examples (human-written
English), grouped by lexicographer file into blank-line-separated documents.
The synonym table is drawn from WordNet synsets, restricted to words that
land inside the default vocabulary of the corpus.

usage: build_dataset.py WORDNET_DICT_DIR OUT_DIR
"""

import collections
import os
import re
import sys

DOC_MIN_TOKENS = 480
MAX_DOCS = 520
VOCAB_SIZE = 4096
MAX_CLASSES = 500

STOPWORDS = set("""
a an the of to and or in on at by for with from as is are was were be been
being it its this that these those which who whom whose what when where why
how not no nor but if then than so such can could may might must shall should
will would do does did done have has had having i me my we us our you your he
him his she her they them their there here all any some each every one two
three first second s t into onto out up down over under about after before
also more most less least very much many other another same own only just
""".split())

TOKEN_RE = re.compile(r"[^\s\w]|\w+", re.UNICODE)


def tokenize(text):
    out = []
    for chunk in text.lower().split():
        cur = ""
        for ch in chunk:
            if ch.isascii() and not ch.isalnum() and ch != "_" and ch.isprintable():
                if cur:
                    out.append(cur)
                    cur = ""
                out.append(ch)
            else:
                cur += ch
        if cur:
            out.append(cur)
    return out


def read_data(path):
    with open(path, encoding="latin-1") as f:
        for line in f:
            if line.startswith("  "):
                continue
            head, _, gloss = line.partition("|")
            parts = head.split()
            offset, lexfile, pos = parts[0], int(parts[1]), parts[2]
            n = int(parts[3], 16)
            words = [parts[4 + 2 * i] for i in range(n)]
            yield offset, lexfile, pos, words, gloss.strip()


def gloss_to_sentences(word, gloss):
    pieces = [p.strip() for p in gloss.split(";") if p.strip()]
    definition = [p for p in pieces if not p.startswith('"')]
    examples = [p.strip('"').strip() for p in pieces if p.startswith('"')]
    head = word.replace("_", " ")
    text = head + ": " + "; ".join(definition) + "."
    for ex in examples:
        ex = ex.rstrip(".")
        text += " " + ex[:1].upper() + ex[1:] + "."
    return text


def main():
    wn_dir, out_dir = sys.argv[1], sys.argv[2]
    lexnames = {}
    with open(os.path.join(wn_dir, "lexnames")) as f:
        for line in f:
            num, name, _ = line.split()
            lexnames[int(num)] = name

    by_lexfile = collections.defaultdict(list)
    synsets = {}
    for pos_file in ("noun", "verb", "adj", "adv"):
        for offset, lexfile, pos, words, gloss in read_data(os.path.join(wn_dir, "data." + pos_file)):
            synsets[(pos_file, offset)] = words
            if '"' not in gloss:
                continue
            by_lexfile[lexfile].append(gloss_to_sentences(words[0], gloss))

    docs_by_file = {}
    for lexfile, sentences in sorted(by_lexfile.items()):
        docs, cur, cur_len = [], [], 0
        for s in sentences:
            cur.append(s)
            cur_len += len(tokenize(s))
            if cur_len >= DOC_MIN_TOKENS:
                docs.append(" ".join(cur))
                cur, cur_len = [], 0
        docs_by_file[lexfile] = docs

    docs = []
    files = sorted(docs_by_file)
    i = 0
    while len(docs) < MAX_DOCS and any(docs_by_file[f] for f in files):
        f = files[i % len(files)]
        if docs_by_file[f]:
            docs.append(docs_by_file[f].pop(0))
        i += 1

    with open(os.path.join(out_dir, "corpus.txt"), "w") as f:
        f.write("\n\n".join(docs) + "\n")

    freq = collections.Counter()
    first = {}
    for doc in docs:
        for tok in tokenize(doc):
            freq[tok] += 1
            first.setdefault(tok, len(first))
    ranked = sorted(freq, key=lambda w: (-freq[w], first[w]))
    vocab = set(ranked[: VOCAB_SIZE - 2])

    index = collections.defaultdict(list)
    for pos_file in ("noun", "verb", "adj", "adv"):
        with open(os.path.join(wn_dir, "index." + pos_file), encoding="latin-1") as f:
            for line in f:
                if line.startswith("  "):
                    continue
                parts = line.split()
                lemma = parts[0]
                n_synsets = int(parts[2])
                offsets = parts[-n_synsets:]
                for off in offsets[:2]:
                    index[lemma].append((pos_file, off))

    def eligible(w):
        return w in vocab and w not in STOPWORDS and w.isalpha() and len(w) > 2

    assigned = set()
    classes = []
    for w in ranked:
        if len(classes) >= MAX_CLASSES:
            break
        if not eligible(w) or w in assigned:
            continue
        best = []
        for key in index.get(w, []):
            members = []
            for lemma in synsets.get(key, []):
                lemma = re.sub(r"\(.*\)$", "", lemma).lower()
                if lemma != w and eligible(lemma) and lemma not in assigned and lemma not in members:
                    members.append(lemma)
            if len(members) > len(best):
                best = members
        if best:
            cls = [w] + best[:3]
            assigned.update(cls)
            classes.append(cls)

    with open(os.path.join(out_dir, "synonyms.tsv"), "w") as f:
        for cls in classes:
            f.write("\t".join(cls) + "\n")
    print(f"{len(docs)} documents, {sum(freq.values())} tokens, "
          f"{len(freq)} distinct, {len(classes)} synonym classes")


if __name__ == "__main__":
    main()
