"""Solve both semidefinite relaxations of an instance file with a general
interior-point solver. Used to produce the frozen reference values in the
core crate's tests.

    python3 tools/sdp_oracle.py instance.json
"""
import json
import sys

import cvxpy as cp
import numpy as np

TOL = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)


def one_hot_value(m):
    n, k = m["num_nodes"], m["num_labels"]
    z = cp.Variable((n + k, n + k), PSD=True)
    obj, offset = 0, 0.0
    for t in m["unary"]:
        obj += -t["weight"] * z[t["node"], n + t["label"]]
        offset += t["weight"]
    for t in m["binary"]:
        obj += -t["weight"] * z[t["i"], t["j"]]
        offset += t["weight"]
    cons = [cp.diag(z)[:n] == 1, z[n:, n:] == np.eye(k)]
    p = cp.Problem(cp.Minimize(obj), cons)
    p.solve(solver="CLARABEL", **TOL)
    return p.value + offset


def pm_value(m):
    n, k = m["num_nodes"], m["num_labels"]
    d = n * k + 1
    last = d - 1
    y = cp.Variable((d, d), PSD=True)
    obj = 0
    for t in m["unary"]:
        a = t["node"] * k + t["label"]
        obj += t["weight"] * (1 - (y[a, last] + 1) / 2)
    for t in m["binary"]:
        agree = 0
        for l in range(k):
            a, b = t["i"] * k + l, t["j"] * k + l
            agree += (y[a, b] + y[a, last] + y[b, last] + 1) / 4
        obj += t["weight"] * (1 - agree)
    cons = [cp.diag(y) == 1]
    cons += [sum(y[i * k + l, last] for l in range(k)) == 2 - k for i in range(n)]
    p = cp.Problem(cp.Minimize(obj), cons)
    p.solve(solver="CLARABEL", **TOL)
    return p.value


if __name__ == "__main__":
    inst = json.load(open(sys.argv[1]))
    print(f"one_hot {float(one_hot_value(inst))!r}")
    print(f"pm {float(pm_value(inst))!r}")
