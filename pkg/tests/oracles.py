"""Slow, independent reference computations used as test oracles."""
from __future__ import annotations

import math
import statistics
from fractions import Fraction


def naive_window_stats(series, size, stride, features, exact=True):
    """Per-window statistics by plain Python loops over each window.

    With ``exact`` the third and fourth moments use rational arithmetic;
    otherwise a compensated two-pass float sum, which is much faster and
    still good to a few ulps.
    """
    rows, flags = [], []
    for start in range(0, len(series) - size + 1, stride):
        w = [float(v) for v in series[start:start + size]]
        n = len(w)
        mean = math.fsum(w) / n
        m2 = float(statistics.pvariance(w))
        degenerate = min(w) == max(w)
        if degenerate:
            m2 = 0.0
            skew = kurt = 0.0
        elif not exact:
            mu = mean + math.fsum(v - mean for v in w) / n
            d = [v - mu for v in w]
            m2f = math.fsum(x * x for x in d) / n
            skew = math.fsum(x ** 3 for x in d) / n / m2f ** 1.5
            kurt = math.fsum(x ** 4 for x in d) / n / (m2f * m2f)
        else:
            # third and fourth moments about an exact mean
            exact_mean = sum(Fraction(v) for v in w) / n
            d = [Fraction(v) - exact_mean for v in w]
            m2f = sum(x * x for x in d) / n
            skew = float(sum(x ** 3 for x in d) / n) / float(m2f) ** 1.5
            kurt = float(sum(x ** 4 for x in d) / n / (m2f * m2f))
        srt = sorted(w)
        median = srt[n // 2] if n % 2 else (srt[n // 2 - 1] + srt[n // 2]) / 2
        values = {"mean": mean, "std": math.sqrt(m2), "var": m2, "sum": math.fsum(w),
                  "min": srt[0], "max": srt[-1], "median": median,
                  "skewness": skew, "kurtosis": kurt}
        rows.append([values[f] for f in features])
        flags.append(degenerate)
    return rows, flags


def exhaustive_split(X, y, n_classes, min_samples_leaf=1):
    """Exact weighted-Gini search over every (feature, midpoint threshold).

    Returns (feature, threshold, gini) with ties broken by lowest feature then
    lowest threshold, or None when no split separates the samples.
    """
    n = len(y)
    best = None
    for f in range(len(X[0])):
        values = sorted({row[f] for row in X})
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            left = [y[i] for i in range(n) if X[i][f] <= thr]
            right = [y[i] for i in range(n) if X[i][f] > thr]
            if len(left) < min_samples_leaf or len(right) < min_samples_leaf:
                continue
            g = Fraction(0)
            for part in (left, right):
                p = Fraction(1)
                for c in range(n_classes):
                    p -= Fraction(part.count(c), len(part)) ** 2
                g += Fraction(len(part), n) * p
            if best is None or g < best[2]:
                best = (f, thr, g)
    return best
