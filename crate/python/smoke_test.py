"""Smoke test for the di_toolkit_py extension module.

Build and install first, e.g.  pip install --no-build-isolation ./crates/python
"""

import math
from fractions import Fraction

import di_toolkit_py as dt


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    close(dt.secrecy_bound(0.801777), 0.361042, 1e-4)
    close(dt.bell_diag_bound((2 + math.sqrt(2)) / 4), -1.0, 1e-9)
    close(dt.binary_entropy(0.5), 1.0, 1e-15)

    chsh = dt.Game.chsh()
    assert chsh.win(0, 1, 1, 1)
    value, dual, kappa = chsh.ns_value()
    close(value, 1.0, 1e-9)
    assert kappa <= 16 + 1e-9 and len(dual) == 20
    assert chsh.classical_value() == 0.75
    pr = dt.SingleRoundBox.pr_box()
    assert pr.is_nonsignalling()
    close(chsh.winning_probability(pr), 1.0, 1e-12)
    again = dt.Game.from_json(chsh.to_json())
    close(again.ns_value()[0], 1.0, 1e-9)

    b_eq_x = dt.SingleRoundBox((2, 2, 2, 2), [[[[0.5, 0.0], [0.5, 0.0]]] * 2, [[[0.0, 0.5], [0.0, 0.5]]] * 2])
    q = [[0.25, 0.25], [0.25, 0.25]]
    close(dt.sig_measure(b_eq_x, q, "AtoB", 0, 0, 0), 0.125, 1e-15)

    assert dt.tau_entry_exact([[0, 0, 1, 0]]) == Fraction(1, 8)
    assert dt.reduction_factor(2, 4, 4) == 531441

    mu = dt.mu_opt(0.820736, 1e-3, 1.0, 1e8, 1e-6, 1e-6)
    close(mu["value"], 0.502133, 2e-3)

    sim = dt.estimate_abort_probability(10_000, 0.5, 0.81, 0.02, 100, 7)
    assert sim["freq"] <= math.exp(-8) + 3 * math.sqrt(math.exp(-8) / 100) + 1e-12
    assert sim == dt.estimate_abort_probability(10_000, 0.5, 0.81, 0.02, 100, 7)

    rate = dt.optimize_rate(1e10, 0.025)
    close(rate["rate"], 0.489571, 0.01)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
