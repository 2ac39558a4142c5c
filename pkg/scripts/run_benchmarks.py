#!/usr/bin/env python3
"""Run the headline query on every bundled network and print a table.

Each row gives the network, the size of its compiled loop program, the
query, the answer (exact, with a decimal rendering when the answer is a
plain number) and the wall-clock time.
"""

import argparse
import time
from fractions import Fraction
from pathlib import Path

from psolve.bayesnet import DynBayesNet, load_bn_path
from psolve.encode import compile_bn, compile_dynbn
from psolve.queries import (
    conditional_moment,
    expected_samples,
    forward_filter,
    joint_moment,
    predict,
)
from psolve.symbolic import Polynomial, decimal_str

DATA = Path(__file__).resolve().parent.parent / "data"


def average_poly():
    return (
        Polynomial.var("ALG") + Polynomial.var("ANL") + Polynomial.var("Stat")
    ) * Fraction(1, 3)


def fmt(result, digits):
    value = result.value
    if hasattr(value, "is_const") and value.is_const():
        exact = result.exact()
        return f"{exact} = {decimal_str(value.const_value(), digits)}"
    return result.exact()


def last_step(result, digits):
    labels = dict(result.extras)["states"].split(" | ")
    parts = [
        f"P({label}) = {decimal_str(p.const_value(), digits)}"
        for label, p in zip(labels, result.value[-1])
    ]
    return "; ".join(parts)


ROWS = [
    ("grass", "P(R | G)",
     lambda bn, d: fmt(conditional_moment(bn, "R", 1, {"G": 1}), d)),
    ("alarm", "P(B | A)",
     lambda bn, d: fmt(conditional_moment(bn, "B", 1, {"A": 1}), d)),
    ("alarm_sens", "P(B | A) symbolic",
     lambda bn, d: fmt(conditional_moment(bn, "B", 1, {"A": 1}), d)),
    ("asia", "E[samples | Asia, Lung]",
     lambda bn, d: fmt(expected_samples(bn, {"Asia": 1, "Lung": 1}), d)),
    ("asia_det_either", "P(Asia, Lung)",
     lambda bn, d: fmt(joint_moment(bn, "Asia*Lung"), d)),
    ("marks", "E[Stat]",
     lambda bn, d: fmt(joint_moment(bn, "Stat"), d)),
    ("marks", "E[(ALG+ANL+Stat)/3]",
     lambda bn, d: fmt(joint_moment(bn, average_poly()), d)),
    ("marks_sens", "E[Stat] symbolic",
     lambda bn, d: fmt(joint_moment(bn, "Stat"), d)),
    ("rats", "E[W2 | D]",
     lambda bn, d: fmt(conditional_moment(bn, "W2", 1, {"D": 1}), d)),
    ("rats_sens", "E[W2 | D] symbolic",
     lambda bn, d: fmt(conditional_moment(bn, "W2", 1, {"D": 1}), d)),
    ("umbrella", "E[R] closed form",
     lambda bn, d: str(joint_moment(bn, "R").value)),
    ("umbrella", "lim E[R]",
     lambda bn, d: fmt(predict(bn, "R", limit=True), d)),
    ("umbrella_sens", "lim E[R] symbolic",
     lambda bn, d: fmt(predict(bn, "R", limit=True), d)),
    ("umbrella_filter", "filter [U, U]",
     lambda bn, d: last_step(forward_filter(bn, [{"U": 1}, {"U": 1}]), d)),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--digits", type=int, default=6)
    args = ap.parse_args()

    nets = {}
    n_vars = {}
    for name, _, _ in ROWS:
        if name in nets:
            continue
        bn = load_bn_path(DATA / f"{name}.json")
        nets[name] = bn
        prog = compile_dynbn(bn) if isinstance(bn, DynBayesNet) else compile_bn(bn)
        n_vars[name] = len(prog.variables)

    print(f"{'network':<16} {'vars':>4}  {'query':<26} {'time':>8}  answer")
    print("-" * 100)
    for name, query, run in ROWS:
        t0 = time.monotonic()
        answer = run(nets[name], args.digits)
        dt = time.monotonic() - t0
        print(f"{name:<16} {n_vars[name]:>4}  {query:<26} {dt:>7.3f}s  {answer}")


if __name__ == "__main__":
    main()
