#!/usr/bin/env python3
"""Solve an LP file emitted by `rankopt emit-lp` with scipy's HiGHS backend.

Usage: solve_lp.py <file.lp> [out.json]

Reads the Maximize / Subject To / Bounds / End stanzas, substitutes fixed
variables, maximizes, and writes the optimum objective plus the variable
values as JSON.
"""

import json
import sys

import numpy as np
from scipy.optimize import linprog


def parse(path):
    objective = {}
    constraints = []  # (terms, rhs)
    free_vars = []
    fixed = {}
    section = None
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("\\"):
                continue
            if line in ("Maximize", "Subject To", "Bounds", "End"):
                section = line
                continue
            if section == "Maximize":
                body = line.split("obj:", 1)[1]
                objective = parse_terms(body)
            elif section == "Subject To":
                _, rest = line.split(":", 1)
                lhs, rhs = rest.split("<=")
                constraints.append((parse_terms(lhs), float(rhs)))
            elif section == "Bounds":
                fields = line.split()
                if fields[1] == ">=":
                    free_vars.append(fields[0])
                elif fields[1] == "=":
                    fixed[fields[0]] = float(fields[2])
    return objective, constraints, free_vars, fixed


def parse_terms(body):
    tokens = body.split()
    terms = {}
    if tokens == ["0"]:
        return terms
    for i in range(0, len(tokens), 3):
        sign = 1.0 if tokens[i] == "+" else -1.0
        terms[tokens[i + 2]] = sign * float(tokens[i + 1])
    return terms


def main():
    path = sys.argv[1]
    objective, constraints, free_vars, fixed = parse(path)
    index = {name: k for k, name in enumerate(free_vars)}
    n = len(free_vars)
    c = np.zeros(n)
    for var, coef in objective.items():
        c[index[var]] = -coef  # maximize
    a_ub = np.zeros((len(constraints), n))
    b_ub = np.zeros(len(constraints))
    for row, (terms, rhs) in enumerate(constraints):
        b_ub[row] = rhs
        for var, coef in terms.items():
            if var in fixed:
                b_ub[row] -= coef * fixed[var]
            else:
                a_ub[row, index[var]] = coef
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * n, method="highs")
    if not res.success:
        raise SystemExit(f"solver failed: {res.message}")
    out = {
        "solver": "scipy.optimize.linprog (highs)",
        "objective": -res.fun,
        "values": {name: res.x[index[name]] for name in free_vars},
    }
    text = json.dumps(out, indent=2, sort_keys=True)
    if len(sys.argv) > 2:
        with open(sys.argv[2], "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


if __name__ == "__main__":
    main()
