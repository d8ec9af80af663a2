"""Regenerates synthetic_report.txt from first principles.

The dataset is a fixed integer recipe shared with test_timing.cpp; statistics
are computed with exact rational arithmetic.
"""

from fractions import Fraction
from math import sqrt
from pathlib import Path

NOMINAL_NS = 1_000_000
COUNT = 1000


def dataset():
    for i in range(COUNT):
        period_ns = NOMINAL_NS + (i * 7919) % 2001 - 1000
        exec_ns = 20_000 + (i * 104729) % 15013
        yield period_ns, exec_ns


def stats(values_ns):
    xs = [Fraction(v, 1000) for v in values_ns]
    mean = sum(xs) / len(xs)
    var = sum((x - mean) ** 2 for x in xs) / len(xs)
    # Keep every value clear of a rounding tie at the third decimal.
    for v in (mean, min(xs), max(xs)):
        frac = (v * 1000) % 1
        assert abs(frac - Fraction(1, 2)) > Fraction(1, 10**6), v
    return float(mean), sqrt(float(var)), float(min(xs)), float(max(xs))


def us(v):
    return "0" if v == 0.0 else f"{v:.3f}"


def pad(text, width):
    return text + " " * (width - len(text) if len(text) < width else 1)


def main():
    rows = list(dataset())
    period = stats(p for p, _ in rows)
    jitter = stats(abs(p - NOMINAL_NS) for p, _ in rows)
    exe = stats(e for _, e in rows)

    out = ["Real-time loop timing", f"samples: {COUNT}  nominal period: 1000.000 us", ""]

    def row(name, a, b):
        out.append(pad(name, 15) + pad(a, 24) + b)

    row("Metric", "Avg. ± St.D", "Min / Max")
    for name, (avg, std, lo, hi) in (
        ("T_period (us)", period),
        ("T_jitter (us)", jitter),
        ("T_exec (us)", exe),
    ):
        row(name, f"{us(avg)} ± {us(std)}", f"{us(lo)} / {us(hi)}")
    Path(__file__).with_name("synthetic_report.txt").write_text("\n".join(out) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
