"""Recomputes the coverage and hallucination reference values from scratch.

Run: python3 scripts/score_oracle.py
"""

from collections import Counter
from fractions import Fraction


def alnum(s):
    return "".join(ch for ch in s if ch.isalnum())


def coverage(source, cells):
    src = Counter(alnum(t) for t in source.split() if alnum(t))
    tab = Counter(alnum(t) for c in cells for t in c.split() if alnum(t))
    total = sum(len(t) * n for t, n in src.items())
    covered = sum(len(t) * min(n, tab[t]) for t, n in src.items())
    return Fraction(covered, total)


def cell_coverage(source, cell):
    if not alnum(cell) or cell.strip() in source:
        return Fraction(1)
    toks = [alnum(t) for t in cell.split() if alnum(t)]
    src = set(alnum(t) for t in source.split())
    return Fraction(sum(len(t) for t in toks if t in src), sum(len(t) for t in toks))


def hallucination(source, rows):
    rates = [sum(1 - cell_coverage(source, c) for c in row) / len(row) for row in rows]
    return sum(rates) / len(rates)


if __name__ == "__main__":
    cov = coverage("Revenue 750 Cost 320", ["Revenue", "750", "Cost", ""])
    hal = hallucination("alpha beta gamma", [["alpha", "beta omeg"], ["gamma"]])
    print(f"coverage {cov} = {float(cov):.12f}")
    print(f"hallucination {hal} = {float(hal):.12f}")
    assert cov == 1 - Fraction(3, 17)
    assert hal == Fraction(1, 8)
