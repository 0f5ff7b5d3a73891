#!/usr/bin/env python3
"""Solve an exported sphere-bound SOS problem and write a certificate.

Reads the SDPA file written by `zerocluster bound --sos-export`, solves the
dual form  max F0.Y  s.t.  Fi.Y = ci, Y psd  with cvxpy, and writes
{"c", "G", "lambda"} for `zerocluster bound --sos-cert`.

    python3 scripts/solve_sdpa.py problem.dat-s cert.json [--solver CLARABEL]
"""

import argparse
import json
import sys

import cvxpy as cp
import numpy as np


def parse(path):
    comments, header, entries = [], [], []
    with open(path) as fh:
        for raw in fh:
            t = raw.strip()
            if not t:
                continue
            if not header and t[0] in '*"':
                comments.append(t[1:].strip())
                continue
            t = t.translate(str.maketrans("{}(),", "     "))
            if len(header) < 4:
                header.append(t)
                continue
            m, b, i, j, v = t.split()
            entries.append((int(m), int(b), int(i), int(j), float(v)))
    m = int(header[0].split()[0])
    blocks = [int(x) for x in header[2].split()]
    c = [float(x) for x in header[3].split()]
    return comments, m, blocks, c, entries


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("problem")
    ap.add_argument("certificate")
    ap.add_argument("--solver", default="CLARABEL")
    args = ap.parse_args()

    comments, m, blocks, c, entries = parse(args.problem)
    meta = {}
    for line in comments:
        if line.startswith("sos "):
            f = line.split()
            meta["level"], meta["dim"] = int(f[2]), int(f[4])
        elif line.startswith("lambda"):
            meta["lambda"] = [[int(e) for e in tok.split(",")] for tok in line.split()[1:]]
    if "dim" not in meta:
        sys.exit("not an SOS export: missing `sos level` comment")

    ys = []
    cons = []
    for size in blocks:
        if size > 0:
            y = cp.Variable((size, size), symmetric=True)
            cons.append(y >> 0)
        else:
            y = cp.Variable(-size)
            cons.append(y >= 0)
        ys.append(y)

    exprs = [0] * (m + 1)
    for mat, blk, i, j, v in entries:
        size = blocks[blk - 1]
        y = ys[blk - 1]
        if size > 0:
            term = v * y[i - 1, j - 1] if i == j else 2 * v * y[i - 1, j - 1]
        else:
            term = v * y[i - 1]
        exprs[mat] = exprs[mat] + term
    cons += [exprs[k] == c[k - 1] for k in range(1, m + 1)]
    prob = cp.Problem(cp.Maximize(exprs[0]), cons)
    prob.solve(solver=args.solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        sys.exit(f"solver status: {prob.status}")

    gram = np.asarray(ys[0].value)
    gram = 0.5 * (gram + gram.T)
    lp = np.asarray(ys[1].value)
    cval = float(lp[0] - lp[1])
    terms = []
    for k, exp in enumerate(meta["lambda"]):
        v = float(lp[2 + 2 * k] - lp[3 + 2 * k])
        if v != 0.0:
            terms.append({"exp": exp, "re": v})
    cert = {
        "c": cval,
        "G": gram.tolist(),
        "lambda": {"n": meta["dim"], "terms": terms},
    }
    with open(args.certificate, "w") as fh:
        json.dump(cert, fh, indent=1)
    print(f"status {prob.status}, c = {cval:.10f}")


if __name__ == "__main__":
    main()
