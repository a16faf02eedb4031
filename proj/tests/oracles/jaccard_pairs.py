"""Writes fixtures/jaccard_pairs.tsv: 50 sentence pairs with token-set Jaccard
computed independently (lowercase, whitespace split, 1.0 for two empty sets)."""
import random
import sys


def jaccard(a: str, b: str) -> float:
    ta, tb = set(a.lower().split()), set(b.lower().split())
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


WORDS = ("i miss my dog so much she was a good friend the family never notices "
         "her work we should plan dinner together Would you like to donate to help "
         "children in need today It is Hard when people do not listen").split()


def main(path: str) -> None:
    rng = random.Random(20240501)
    rows = []
    for i in range(50):
        a = " ".join(rng.choice(WORDS) for _ in range(rng.randint(0 if i == 0 else 1, 12)))
        if i % 5 == 0:
            b = a.upper()
        else:
            b = " ".join(rng.choice(WORDS) for _ in range(rng.randint(0 if i == 0 else 1, 12)))
        rows.append(f"{a}\t{b}\t{jaccard(a, b):.17g}")
    with open(path, "w") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
