#!/usr/bin/env python3
"""Reads the CPLEX LP files written by export_lp and solves them with scipy.

Usage: lp_check.py FILE [--objective N] [--rows N]
       lp_check.py --expected LISTFILE   (lines: `path objective`)
Exit status 0 when every expectation holds, 77 when scipy is missing.
"""
import argparse
import re
import sys

try:
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
except ImportError:
    print("scipy not available")
    sys.exit(77)

TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d+)?)?\s*([A-Za-z_][A-Za-z0-9_]*)")


def parse_expr(text):
    terms = []
    text = text.strip()
    pos = 0
    while pos < len(text):
        m = TERM.match(text, pos)
        if not m:
            if text[pos:].strip() in ("", "0"):
                break
            raise ValueError("cannot parse expression near: " + text[pos:])
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        terms.append((m.group(3), sign * coef))
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return terms


def read_lp(path):
    section = None
    objective = []
    rows = []
    lower = {}
    integer = set()
    buf = ""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("\\")]
    # Join continuation lines (those not starting a new item).
    items = []
    for ln in lines:
        head = ln.strip()
        if head in ("Minimize", "Subject To", "Bounds", "General", "End"):
            if buf:
                items.append((section, buf))
                buf = ""
            section = head
            continue
        if section in ("Subject To",) and re.match(r"^\s\S+:", ln) and buf:
            items.append((section, buf))
            buf = ""
        buf += " " + ln.strip() if buf else ln.strip()
        if section in ("Bounds",):
            items.append((section, buf))
            buf = ""
    if buf:
        items.append((section, buf))
    for sec, text in items:
        if sec == "Minimize":
            objective = parse_expr(text.split(":", 1)[1])
        elif sec == "Subject To":
            name, body = text.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(-?\d+(?:\.\d+)?)\s*$", body)
            rows.append((name.strip(), parse_expr(m.group(1)), m.group(2), float(m.group(3))))
        elif sec == "Bounds":
            m = re.match(r"(\S+)\s*>=\s*(-?\d+)", text)
            lower[m.group(1)] = float(m.group(2))
        elif sec == "General":
            integer.update(text.split())
    return objective, rows, lower, integer


def solve(path):
    objective, rows, lower, integer = read_lp(path)
    names = sorted({v for v, _ in objective} | {v for _, t, _, _ in rows for v, _ in t} | integer)
    if not rows:
        return 0.0, 0
    idx = {v: i for i, v in enumerate(names)}
    c = np.zeros(len(names))
    for v, k in objective:
        c[idx[v]] += k
    a = np.zeros((len(rows), len(names)))
    lo = np.full(len(rows), -np.inf)
    hi = np.full(len(rows), np.inf)
    for r, (_, terms, sense, rhs) in enumerate(rows):
        for v, k in terms:
            a[r, idx[v]] += k
        if sense in ("<=", "="):
            hi[r] = rhs
        if sense in (">=", "="):
            lo[r] = rhs
    # Flow and capacity variables are nonnegative in the exported model.
    lb = np.array([lower.get(v, 0.0) for v in names])
    integrality = np.array([1 if v in integer else 0 for v in names])
    res = milp(c, constraints=LinearConstraint(a, lo, hi), bounds=Bounds(lb, np.inf), integrality=integrality)
    if not res.success:
        raise RuntimeError(f"{path}: {res.message}")
    return float(res.fun), len(rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("file", nargs="?")
    ap.add_argument("--objective", type=float)
    ap.add_argument("--rows", type=int)
    ap.add_argument("--expected")
    args = ap.parse_args()
    checks = []
    if args.file:
        checks.append((args.file, args.objective, args.rows))
    if args.expected:
        with open(args.expected) as f:
            for line in f:
                path, obj = line.split()
                checks.append((path, float(obj), None))
    ok = True
    for path, want_obj, want_rows in checks:
        obj, nrows = solve(path)
        good = (want_obj is None or abs(obj - want_obj) < 1e-6) and (want_rows is None or nrows == want_rows)
        print(f"{'ok' if good else 'MISMATCH'} {path}: objective {obj:g}, {nrows} constraints")
        ok &= good
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
