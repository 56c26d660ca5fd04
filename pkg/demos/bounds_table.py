"""Table of the critical-mass bounds over a range of dipolar strengths.

Prints the Sobolev lower bound, the Gaussian-ansatz upper bound, the optimal
aspect ratio and the (b - 1)^{5/2}-scaled values, which approach a constant
as b grows.

    python demos/bounds_table.py
"""

from gplhy.bounds import bounds_report


def main():
    print(f"{'b':>6} {'lower':>12} {'F1 solve':>12} {'upper':>12} {'alpha*':>8} {'upper*(b-1)^2.5':>16}")
    for b in (1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0):
        r = bounds_report(b)
        print(f"{b:6g} {r.lower:12.6g} {r.lower_numeric:12.6g} {r.upper_numeric:12.6g} "
              f"{r.alpha_star:8.4f} {r.scaled_upper:16.6g}")
    print()
    print(bounds_report(2.0).discrepancy_note)


if __name__ == "__main__":
    main()
