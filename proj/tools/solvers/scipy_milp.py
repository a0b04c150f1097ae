#!/usr/bin/env python3
"""Solve a binary LP-format model with scipy's HiGHS MILP interface.

Usage: scipy_milp.py <model.lp> <solution.txt> [timelimit_seconds]

Solution file format:
    =status= optimal|infeasible|limit|error
    =obj= <objective>
    =lb= <best lower bound>
    <variable> <value>       one line per nonzero (and zero) variable
"""

import sys

import numpy as np
from scipy.optimize import LinearConstraint, milp
from scipy.sparse import lil_matrix


def parse_terms(tokens):
    terms = []
    sign = 1.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
        elif tok == "-":
            sign = -1.0
            i += 1
        else:
            coef = float(tok)
            var = tokens[i + 1]
            terms.append((var, sign * coef))
            sign = 1.0
            i += 2
    return terms


def parse_lp(path):
    mode = None
    objective_lines = []
    constraint_lines = []
    binaries = []
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("\\"):
                continue
            if line in ("Minimize", "Subject To", "Binary", "End"):
                mode = line
                continue
            if mode == "Minimize":
                objective_lines.append(line)
            elif mode == "Subject To":
                constraint_lines.append(line)
            elif mode == "Binary":
                binaries.append(line)
    obj_text = " ".join(objective_lines).split(":", 1)[1]
    objective = parse_terms(obj_text.split())

    merged = []
    for line in constraint_lines:
        if ":" in line:
            merged.append(line)
        else:
            merged[-1] += " " + line

    constraints = []
    for line in merged:
        _, rest = line.split(":", 1)
        tokens = rest.split()
        rhs = float(tokens[-1])
        sense = tokens[-2]
        constraints.append((parse_terms(tokens[:-2]), sense, rhs))
    return objective, constraints, binaries


def main():
    if len(sys.argv) < 3:
        print("usage: scipy_milp.py <model.lp> <solution.txt> [timelimit]", file=sys.stderr)
        return 2
    model_path, solution_path = sys.argv[1], sys.argv[2]
    time_limit = float(sys.argv[3]) if len(sys.argv) > 3 else None

    objective, constraints, variables = parse_lp(model_path)
    index = {name: i for i, name in enumerate(variables)}
    costs = np.zeros(len(variables))
    for name, coef in objective:
        costs[index[name]] += coef

    a = lil_matrix((len(constraints), len(variables)))
    lower = np.empty(len(constraints))
    upper = np.empty(len(constraints))
    for row, (terms, sense, rhs) in enumerate(constraints):
        for name, coef in terms:
            a[row, index[name]] += coef
        if sense == "<=":
            lower[row], upper[row] = -np.inf, rhs
        elif sense == ">=":
            lower[row], upper[row] = rhs, np.inf
        else:
            lower[row], upper[row] = rhs, rhs

    options = {}
    if time_limit is not None:
        options["time_limit"] = time_limit
    result = milp(
        c=costs,
        constraints=LinearConstraint(a.tocsr(), lower, upper),
        integrality=np.ones(len(variables)),
        bounds=(0, 1),
        options=options,
    )

    with open(solution_path, "w") as out:
        if result.status == 0:
            out.write("=status= optimal\n")
            out.write(f"=obj= {result.fun!r}\n")
            out.write(f"=lb= {result.fun!r}\n")
            for name, value in zip(variables, result.x):
                out.write(f"{name} {int(round(value))}\n")
        elif result.status == 2:
            out.write("=status= infeasible\n")
        elif result.status == 1:
            out.write("=status= limit\n")
            if result.x is not None:
                out.write(f"=obj= {result.fun!r}\n")
                for name, value in zip(variables, result.x):
                    out.write(f"{name} {int(round(value))}\n")
        else:
            out.write("=status= error\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
