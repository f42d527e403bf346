#!/usr/bin/env python3
"""POS/DEP annotator for `paste --annotator`.

Reads JSONL {"tokens": [...]} on stdin and writes {"pos": [...], "dep": [...]}
per line on stdout. Tokenization is taken as given. POS is the fine-grained
(Penn Treebank) tag; DEP is the label of each token's incoming arc.
"""
import argparse
import importlib
import json
import sys

import spacy
from spacy.tokens import Doc


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default="en_core_web_sm")
    args = parser.parse_args()

    try:
        nlp = spacy.load(args.model, disable=["ner"])
    except OSError:
        nlp = importlib.import_module(args.model).load(disable=["ner"])
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        tokens = json.loads(line)["tokens"]
        doc = Doc(nlp.vocab, words=tokens)
        for _, proc in nlp.pipeline:
            doc = proc(doc)
        out = {"pos": [t.tag_ for t in doc], "dep": [t.dep_ for t in doc]}
        sys.stdout.write(json.dumps(out) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
