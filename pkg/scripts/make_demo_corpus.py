#!/usr/bin/env python3
"""Generate a synthetic English/target parallel corpus for demo runs.

The "translation" reverses word order and suffixes every token with _x, so
the true alignment is the mirror permutation: easy to learn, nontrivial to
project through. Entity tags follow the mirrored spans, giving a gold file
the pipeline output can be scored against.
"""

import argparse
import random
from pathlib import Path

PERSONS = ["maya", "rohan", "asha", "vikram", "nisha", "arjun", "kiran"]
PLACES = ["pune", "delhi", "jaipur", "kochi", "nagpur", "indore"]
ORGS = [("state", "bank"), ("indian", "railways"), ("tata", "motors")]
# words of a multi-word org also occur alone (as O) so they are not
# statistically interchangeable; EM cannot tell apart words that only ever
# co-occur
ORG_WORDS = [w for org in ORGS for w in org]
MONTHS = ["january", "march", "june", "august", "october"]


def sample_sentence(rng):
    """Return (tokens, tags) for one English sentence."""
    roll = rng.random()
    if roll < 0.25:
        a, b = rng.sample(PERSONS, 2)
        place = rng.choice(PLACES)
        tokens = [a, "met", b, "in", place]
        tags = ["B-PER", "O", "B-PER", "O", "B-LOC"]
    elif roll < 0.45:
        person = rng.choice(PERSONS)
        place = rng.choice(PLACES)
        month = rng.choice(MONTHS)
        tokens = [person, "visited", place, "in", month]
        tags = ["B-PER", "O", "B-LOC", "O", "O"]
    elif roll < 0.6:
        org = rng.choice(ORGS)
        place = rng.choice(PLACES)
        tokens = [*org, "opened", "a", "branch", "in", place]
        tags = ["B-ORG", "I-ORG", "O", "O", "O", "O", "B-LOC"]
    elif roll < 0.75:
        person = rng.choice(PERSONS)
        org = rng.choice(ORGS)
        tokens = [person, "works", "at", *org]
        tags = ["B-PER", "O", "O", "B-ORG", "I-ORG"]
    elif roll < 0.85:
        a, b = rng.sample(PLACES, 2)
        tokens = [a, "and", b, "are", "twin", "cities"]
        tags = ["B-LOC", "O", "B-LOC", "O", "O", "O"]
    elif roll < 0.92:
        word = rng.choice(ORG_WORDS)
        tokens = ["the", word, "story", "was", "in", "the", "news"]
        tags = ["O"] * len(tokens)
    else:
        tokens = rng.choice(
            [
                ["the", "games", "were", "fun", "today"],
                ["it", "rained", "all", "week"],
                ["the", "match", "ended", "in", "a", "draw"],
            ]
        )
        tags = ["O"] * len(tokens)
    return tokens, tags


def mirror(tokens, tags):
    n = len(tokens)
    tgt_tokens = [f"{w}_x" for w in reversed(tokens)]
    tgt_tags = ["O"] * n
    start = None
    for i, tag in enumerate(list(tags) + ["O"]):
        if start is not None and not tag.startswith("I-"):
            etype = tags[start][2:]
            lo, hi = n - i, n - 1 - start
            tgt_tags[lo] = f"B-{etype}"
            for k in range(lo + 1, hi + 1):
                tgt_tags[k] = f"I-{etype}"
            start = None
        if tag.startswith("B-"):
            start = i
    return tgt_tokens, tgt_tags


def conll(sentences):
    blocks = []
    for tokens, tags in sentences:
        blocks.append("".join(f"{w}\t{t}\n" for w, t in zip(tokens, tags)))
    return "\n".join(blocks) + ("\n" if blocks else "")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("demo"))
    ap.add_argument("--pairs", type=int, default=400)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    english, gold, bitext_lines = [], [], []
    for _ in range(args.pairs):
        tokens, tags = sample_sentence(rng)
        tgt_tokens, tgt_tags = mirror(tokens, tags)
        english.append((tokens, tags))
        gold.append((tgt_tokens, tgt_tags))
        bitext_lines.append(" ".join(tokens) + "\t" + " ".join(tgt_tokens))

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "bitext.tsv").write_text("\n".join(bitext_lines) + "\n", "utf-8")
    (args.out / "english.conll").write_text(conll(english), "utf-8")
    (args.out / "gold.conll").write_text(conll(gold), "utf-8")
    print(f"wrote {args.pairs} pairs under {args.out}/")


if __name__ == "__main__":
    main()
