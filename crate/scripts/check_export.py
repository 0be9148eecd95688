#!/usr/bin/env python3
"""Solve an exported LP-format model with an independent MILP solver.

Reads the LP text format produced by `bbap export` (Maximize / Subject To /
Binaries / End sections), feeds it to scipy's HiGHS-backed MILP solver, and
prints the optimal objective as `objective <int>` or `infeasible`.

Usage: check_export.py MODEL.lp
"""

import re
import sys

import numpy as np
from scipy.optimize import LinearConstraint, milp


def logical_lines(text):
    """Join continuation lines (indented, starting with '+') onto their row."""
    rows = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        stripped = raw.strip()
        if raw.startswith((" ", "\t")) and stripped.startswith("+"):
            rows[-1] += " " + stripped
        else:
            rows.append(raw.rstrip())
    return rows


TERM = re.compile(r"([+-]?\s*\d+)\s+(\S+)")


def parse_terms(expr):
    terms = []
    for coeff, name in TERM.findall(expr):
        terms.append((int(coeff.replace(" ", "")), name))
    return terms


def main(path):
    with open(path) as fh:
        lines = logical_lines(fh.read())

    section = None
    objective = {}
    constraints = []  # (terms, sense, rhs)
    binaries = []
    for line in lines:
        stripped = line.strip()
        if stripped in ("Maximize", "Subject To", "Binaries", "End"):
            section = stripped
            continue
        if section == "Maximize":
            body = stripped.split(":", 1)[1]
            for coeff, name in parse_terms(body):
                objective[name] = objective.get(name, 0) + coeff
        elif section == "Subject To":
            _, body = stripped.split(":", 1)
            if "<=" in body:
                expr, rhs = body.split("<=")
                sense = "<="
            else:
                expr, rhs = body.split("=")
                sense = "="
            constraints.append((parse_terms(expr), sense, int(rhs)))
        elif section == "Binaries":
            binaries.extend(stripped.split())

    index = {name: i for i, name in enumerate(binaries)}
    n = len(binaries)
    c = np.zeros(n)
    for name, coeff in objective.items():
        c[index[name]] = -coeff  # milp minimizes

    rows = []
    lower = []
    upper = []
    for terms, sense, rhs in constraints:
        row = np.zeros(n)
        for coeff, name in terms:
            row[index[name]] += coeff
        rows.append(row)
        lower.append(rhs if sense == "=" else -np.inf)
        upper.append(rhs)

    res = milp(
        c,
        constraints=LinearConstraint(np.array(rows), np.array(lower), np.array(upper)),
        integrality=np.ones(n),
        bounds=(0, 1),
    )
    if res.status == 2:
        print("infeasible")
        return 0
    if not res.success:
        print(f"solver status {res.status}: {res.message}", file=sys.stderr)
        return 1
    print(f"objective {round(-res.fun)}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
