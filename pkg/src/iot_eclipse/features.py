"""Interarrival times and sliding-window statistics over packet traces."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .trace import ClassLabel, Trace, TraceError, balance_classes

logger = logging.getLogger(__name__)

STATISTICS = ("mean", "std", "var", "sum", "min", "max", "median", "skewness", "kurtosis")
#: eight statistics per series; ``sum`` is left out because mean * N already carries it
DEFAULT_FEATURES = ("mean", "std", "var", "min", "max", "median", "skewness", "kurtosis")


class InsufficientDataError(TraceError):
    pass


class Source(str, Enum):
    INTERARRIVAL = "interarrival"
    SIZE = "size"
    COMBINED = "combined"


@dataclass(frozen=True)
class WindowParams:
    size: int = 180
    stride: int | None = None
    features: tuple = DEFAULT_FEATURES
    source: Source = Source.COMBINED

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "features", tuple(self.features))
        if self.stride is None:
            object.__setattr__(self, "stride", self.size)
        if self.size < 1:
            raise ValueError("window size must be >= 1")
        if not 1 <= self.stride <= self.size:
            raise ValueError(f"stride must be in [1, {self.size}], got {self.stride}")
        if not self.features:
            raise ValueError("feature set must not be empty")
        if len(set(self.features)) != len(self.features):
            raise ValueError("feature set has duplicates")
        unknown = set(self.features) - set(STATISTICS)
        if unknown:
            raise ValueError(f"unknown statistics: {sorted(unknown)}")

    def replace(self, **changes) -> "WindowParams":
        d = {"size": self.size, "stride": self.stride, "features": self.features,
             "source": self.source}
        if "size" in changes and "stride" not in changes and self.stride == self.size:
            d["stride"] = None
        d.update(changes)
        return WindowParams(**d)

    @property
    def feature_names(self) -> tuple:
        if self.source is Source.COMBINED:
            return tuple(f"size_{f}" for f in self.features) + \
                   tuple(f"iat_{f}" for f in self.features)
        prefix = "iat" if self.source is Source.INTERARRIVAL else "size"
        return tuple(f"{prefix}_{f}" for f in self.features)

    def to_dict(self) -> dict:
        return {"size": self.size, "stride": self.stride, "features": list(self.features),
                "source": self.source.value}

    @classmethod
    def from_dict(cls, d) -> "WindowParams":
        d = dict(d)
        if "features" in d:
            d["features"] = tuple(d["features"])
        return cls(**d)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: ClassLabel | None
    window_index: int
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Stacked per-window feature vectors from one series or trace."""

    values: np.ndarray
    window_index: np.ndarray
    degenerate: np.ndarray
    names: tuple
    label: ClassLabel | None = None

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i) -> FeatureVector:
        return FeatureVector(self.values[i], self.label, int(self.window_index[i]),
                             bool(self.degenerate[i]))

    def __iter__(self) -> Iterator[FeatureVector]:
        return (self[i] for i in range(len(self)))

    def with_label(self, label) -> "FeatureMatrix":
        return FeatureMatrix(self.values, self.window_index, self.degenerate, self.names, label)


def interarrival_times(trace: Trace) -> np.ndarray:
    """Element ``i`` is ``t[i+1] - t[i]``; zero gaps are kept."""
    if len(trace) < 2:
        raise InsufficientDataError(
            f"need at least 2 packets for interarrival times, got {len(trace)}")
    return np.diff(trace.timestamps)


def n_windows(length: int, size: int, stride: int) -> int:
    return 0 if length < size else (length - size) // stride + 1


def _block_stats(w: np.ndarray, features: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    lo = w.min(axis=1)
    hi = w.max(axis=1)
    degenerate = lo == hi
    n = w.shape[1]
    s = w.sum(axis=1)
    mean = s / n
    # central moments of range-scaled deviations; keeps m2 clear of underflow
    scale = np.where(degenerate, 1.0, hi - lo)
    z = (w - mean[:, None]) / scale[:, None]
    z2 = z * z
    m2z = z2.mean(axis=1)
    m2z[degenerate] = 0.0
    m2 = m2z * scale * scale
    out = {}
    need = set(features)
    if "mean" in need:
        out["mean"] = np.where(degenerate, lo, mean)
    if "sum" in need:
        out["sum"] = s
    if "var" in need:
        out["var"] = m2
    if "std" in need:
        out["std"] = np.sqrt(m2z) * scale
    if "min" in need:
        out["min"] = lo
    if "max" in need:
        out["max"] = hi
    if "median" in need:
        out["median"] = np.median(w, axis=1)
    if need & {"skewness", "kurtosis"}:
        safe = np.where(degenerate, 1.0, m2z)
        if "skewness" in need:
            m3z = (z2 * z).mean(axis=1)
            out["skewness"] = np.where(degenerate, 0.0, m3z / safe ** 1.5)
        if "kurtosis" in need:
            m4z = (z2 * z2).mean(axis=1)
            out["kurtosis"] = np.where(degenerate, 0.0, m4z / (safe * safe))
    return np.column_stack([out[f] for f in features]), degenerate


_BLOCK_ELEMENTS = 1 << 21


def window_stats(series, params: WindowParams) -> FeatureMatrix:
    """Statistics over windows of ``params.size`` elements every ``params.stride``.

    Moments are population (divide by N). Kurtosis is non-excess. A window
    whose values are all equal has std, var, skewness and kurtosis set to 0
    and is flagged as degenerate.
    """
    x = np.asarray(series, dtype=np.float64)
    N, stride = params.size, params.stride
    if x.ndim != 1:
        raise ValueError("series must be 1-d")
    if len(x) < N:
        raise InsufficientDataError(f"series of length {len(x)} is shorter than window {N}")
    windows = sliding_window_view(x, N)[::stride]
    step = max(1, _BLOCK_ELEMENTS // N)
    vals, degen = [], []
    for b in range(0, len(windows), step):
        v, d = _block_stats(windows[b:b + step], params.features)
        vals.append(v)
        degen.append(d)
    values = np.concatenate(vals)
    degenerate = np.concatenate(degen)
    return FeatureMatrix(values, np.arange(len(values)), degenerate, tuple(params.features))


def extract_features(trace: Trace, params: WindowParams) -> FeatureMatrix:
    """Window features for one trace.

    The size series drops the first packet so that size windows and
    interarrival windows cover the same packet transitions; combined vectors
    are ``[size stats, interarrival stats]``.
    """
    iat = interarrival_times(trace)
    if len(iat) < params.size:
        raise InsufficientDataError(
            f"trace of {len(trace)} packets yields no window of {params.size}")
    if params.source is Source.INTERARRIVAL:
        fm = window_stats(iat, params)
    elif params.source is Source.SIZE:
        fm = window_stats(trace.sizes[1:], params)
    else:
        fs = window_stats(trace.sizes[1:], params)
        fi = window_stats(iat, params)
        fm = FeatureMatrix(np.hstack([fs.values, fi.values]), fs.window_index,
                           fs.degenerate | fi.degenerate, ())
    return FeatureMatrix(fm.values, fm.window_index, fm.degenerate,
                         params.feature_names, trace.label)


# ---------------------------------------------------------------------------
# labeled datasets

@dataclass(frozen=True, eq=False)
class Dataset:
    """A labeled design matrix for the forest.

    ``labels`` are indices into ``classes``; ``groups`` records which input
    trace each row came from.
    """

    X: np.ndarray
    labels: np.ndarray
    classes: tuple
    window_index: np.ndarray | None = None
    groups: np.ndarray | None = None
    names: tuple = ()
    notes: tuple = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "classes", tuple(self.classes))
        n = len(X)
        if self.window_index is None:
            object.__setattr__(self, "window_index", np.arange(n))
        if self.groups is None:
            object.__setattr__(self, "groups", np.zeros(n, dtype=np.int64))
        if len(self.labels) != n:
            raise ValueError("labels and X differ in length")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature matrix contains NaN or infinite values")

    def __len__(self):
        return len(self.X)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> dict:
        counts = np.bincount(self.labels, minlength=len(self.classes))
        return {c: int(n) for c, n in zip(self.classes, counts)}

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.labels[idx], self.classes, self.window_index[idx],
                       self.groups[idx], self.names, self.notes)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.X, labels, self.classes, self.window_index, self.groups,
                       self.names, self.notes)

    @classmethod
    def from_matrices(cls, matrices: Sequence[FeatureMatrix], classes=None) -> "Dataset":
        if classes is None:
            classes = []
            for m in matrices:
                if m.label not in classes:
                    classes.append(m.label)
        classes = tuple(classes)
        index = {c: i for i, c in enumerate(classes)}
        matrices = list(matrices)
        if not matrices:
            raise ValueError("no feature matrices given")
        return cls(np.vstack([m.values for m in matrices]),
                   np.concatenate([np.full(len(m), index[m.label]) for m in matrices]),
                   classes,
                   np.concatenate([m.window_index for m in matrices]),
                   np.concatenate([np.full(len(m), g) for g, m in enumerate(matrices)]),
                   matrices[0].names)

    def to_csv(self, comments: Sequence[str] = ()) -> str:
        out = io.StringIO()
        for c in comments:
            out.write(f"# {c}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["label", "window_index", *self.names])
        for row, lab, wi in zip(self.X.tolist(), self.labels.tolist(), self.window_index.tolist()):
            w.writerow([str(self.classes[lab]), wi, *(repr(v) for v in row)])
        return out.getvalue()


def build_dataset(traces: Sequence[Trace], params: WindowParams, classes=None) -> Dataset:
    """Extract features from every trace; windows never span two traces."""
    return Dataset.from_matrices([extract_features(t, params) for t in traces], classes)


def raw_dataset(traces: Sequence[Trace], source: Source | str = Source.INTERARRIVAL,
                classes=None) -> Dataset:
    """Per-packet raw values as 1-dimensional samples (no windowing)."""
    source = Source(source)
    mats = []
    for t in traces:
        if source is Source.INTERARRIVAL:
            v = interarrival_times(t)[:, None]
        elif source is Source.SIZE:
            v = t.sizes[1:, None].astype(np.float64)
        else:
            v = np.column_stack([t.sizes[1:], interarrival_times(t)]).astype(np.float64)
        name = {"interarrival": ("iat",), "size": ("size",)}.get(source.value, ("size", "iat"))
        mats.append(FeatureMatrix(v, np.arange(len(v)), np.zeros(len(v), bool), name, t.label))
    return Dataset.from_matrices(mats, classes)


def raw_baseline(traces: Sequence[Trace], fparams, source: Source | str = Source.INTERARRIVAL,
                 max_per_class: int | None = 2000, seed: int = 0):
    """Cross-validated accuracy on raw per-packet values.

    Each packet's raw value is one sample. The balanced dataset is capped
    at ``max_per_class`` samples per class to keep tree growth affordable;
    the report carries a note saying so.
    """
    from .forest import cross_validate

    ds = balance_classes(raw_dataset(traces, source), seed=seed)
    per_class = len(ds) // len(ds.classes)
    if max_per_class is not None and per_class > max_per_class:
        rng = np.random.default_rng([seed, 1])
        keep = []
        for c in range(len(ds.classes)):
            idx = np.flatnonzero(ds.labels == c)
            keep.append(np.sort(rng.choice(idx, size=max_per_class, replace=False)))
        ds = ds.subset(np.sort(np.concatenate(keep)))
    report = cross_validate(ds, fparams)
    report.notes = (f"raw per-packet {Source(source).value} baseline: each packet value is a "
                    f"1-dimensional sample; {len(ds) // len(ds.classes)} samples per class",)
    return report


# ---------------------------------------------------------------------------
# window-size sweep

@dataclass
class SweepPoint:
    window_size: int
    accuracy: float | None
    n_samples: int = 0
    warning: str | None = None


def sweep_window_sizes(traces: Sequence[Trace], sizes: Sequence[int], params: WindowParams,
                       fparams, balance_seed: int = 0) -> list[SweepPoint]:
    """Cross-validated accuracy for each window size, in the given order.

    Sizes that leave some class with fewer than ``k_folds`` samples after
    balancing are skipped and reported with a warning.
    """
    from .forest import cross_validate

    curve = []
    for N in sizes:
        wp = params.replace(size=int(N))
        try:
            ds = balance_classes(build_dataset(traces, wp), seed=balance_seed)
        except InsufficientDataError as exc:
            logger.warning("window size %d skipped: %s", N, exc)
            curve.append(SweepPoint(int(N), None, 0, str(exc)))
            continue
        per_class = len(ds) // len(ds.classes)
        if per_class < fparams.k_folds:
            msg = (f"only {per_class} samples per class, fewer than "
                   f"k_folds={fparams.k_folds}")
            logger.warning("window size %d skipped: %s", N, msg)
            curve.append(SweepPoint(int(N), None, len(ds), msg))
            continue
        report = cross_validate(ds, fparams)
        logger.info("window size %d: accuracy %.4f over %d samples", N, report.accuracy, len(ds))
        curve.append(SweepPoint(int(N), report.accuracy, len(ds)))
    return curve
