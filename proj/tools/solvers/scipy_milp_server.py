#!/usr/bin/env python3
"""Persistent variant of scipy_milp.py.

Reads one job per line from stdin: `<model.lp> <solution.txt> [timelimit]`,
writes the solution file, then answers `done` (or `error <msg>`) on stdout.
Exits on EOF. Keeping the process alive amortizes the interpreter and scipy
import cost across many small solves, e.g. the inner loop of a DDD run.
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import scipy_milp


def main():
    sys.stderr.write("scipy milp server ready\n")
    sys.stderr.flush()
    for line in sys.stdin:
        parts = line.split()
        if not parts:
            continue
        try:
            sys.argv = ["scipy_milp.py"] + parts
            scipy_milp.main()
            sys.stdout.write("done\n")
        except Exception as exc:  # keep serving; the client sees the message
            sys.stdout.write(f"error {exc}\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
