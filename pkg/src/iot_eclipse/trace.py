"""Trace data model: packet records, labels, canonical CSV I/O, synthesis,
chunking and class balancing."""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np


class TraceError(ValueError):
    """Base class for trace-level failures."""


class EmptyTraceError(TraceError):
    pass


class TraceParseError(TraceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# labels

DEVICES = ("EchoDot", "Echo", "GoogleNestMini", "Noise")
SERVICES = ("Music", "News", "None")
_SYNTHETIC_DEVICE = re.compile(r"^Synthetic-\d+$")

_SHORT_NAMES = {"EchoDot": "ED", "Echo": "Echo", "GoogleNestMini": "GN"}


@dataclass(frozen=True, order=True)
class ClassLabel:
    device: str
    service: str = "None"

    def __post_init__(self):
        if self.device not in DEVICES and not _SYNTHETIC_DEVICE.match(self.device):
            raise ValueError(f"unknown device {self.device!r}")
        if self.service not in SERVICES:
            raise ValueError(f"unknown service {self.service!r}")
        if self.device == "Noise" and self.service != "None":
            raise ValueError("Noise carries service None")

    def __str__(self) -> str:
        return f"{self.device}/{self.service}"

    @property
    def short_name(self) -> str:
        """Confusion-matrix style name, e.g. ``ED Music``."""
        if self.device == "Noise":
            return "Noise"
        name = _SHORT_NAMES.get(self.device, self.device)
        return name if self.service == "None" else f"{name} {self.service}"

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        device, _, service = text.strip().partition("/")
        return cls(device, service or "None")


NOISE = ClassLabel("Noise")
ED_MUSIC = ClassLabel("EchoDot", "Music")
ED_NEWS = ClassLabel("EchoDot", "News")
ECHO_MUSIC = ClassLabel("Echo", "Music")
ECHO_NEWS = ClassLabel("Echo", "News")
GN_MUSIC = ClassLabel("GoogleNestMini", "Music")

#: the five device/service classes, in confusion-matrix order
SPEAKER_CLASSES = (ED_MUSIC, ED_NEWS, ECHO_MUSIC, ECHO_NEWS, GN_MUSIC)


def synthetic_label(k: int, service: str = "None") -> ClassLabel:
    return ClassLabel(f"Synthetic-{k}", service)


# ---------------------------------------------------------------------------
# records and traces

@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    size: int

    def __post_init__(self):
        if not self.timestamp >= 0:
            raise ValueError(f"timestamp must be non-negative, got {self.timestamp}")
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trace:
    """An ordered packet sequence with a class label.

    Timestamps and sizes are stored as read-only numpy arrays; ``records``
    gives the per-packet view.
    """

    timestamps: np.ndarray
    sizes: np.ndarray
    label: ClassLabel | None = None

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=np.float64)
        s = np.array(self.sizes)
        if s.size and not np.issubdtype(s.dtype, np.integer):
            if not np.all(s == np.floor(s)):
                raise TraceError("sizes must be integers")
        s = s.astype(np.int64)
        if t.ndim != 1 or t.shape != s.shape:
            raise TraceError("timestamps and sizes must be 1-d arrays of equal length")
        if t.size:
            if not np.all(np.isfinite(t)) or t.min() < 0:
                raise TraceError("timestamps must be finite and non-negative")
            if np.any(np.diff(t) < 0):
                raise TraceError("timestamps must be non-decreasing")
            if s.min() < 1:
                raise TraceError("sizes must be >= 1")
        object.__setattr__(self, "timestamps", _frozen(t))
        object.__setattr__(self, "sizes", _frozen(s))

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord], label=None) -> "Trace":
        records = list(records)
        return cls(np.array([r.timestamp for r in records], dtype=np.float64),
                   np.array([r.size for r in records], dtype=np.int64), label)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __iter__(self) -> Iterator[PacketRecord]:
        for t, s in zip(self.timestamps.tolist(), self.sizes.tolist()):
            yield PacketRecord(t, s)

    @property
    def records(self) -> list[PacketRecord]:
        return list(self)

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0]) if len(self) else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.label == other.label
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.sizes, other.sizes))

    def __repr__(self) -> str:
        return f"Trace(label={self.label}, packets={len(self)}, duration={self.duration:.6g}s)"

    def rebased(self) -> "Trace":
        if not len(self):
            return self
        return Trace(self.timestamps - self.timestamps[0], self.sizes, self.label)

    def slice(self, start: int, stop: int) -> "Trace":
        """Records ``start:stop``, rebased to epoch 0."""
        return Trace(self.timestamps[start:stop], self.sizes[start:stop], self.label).rebased()

    def with_label(self, label: ClassLabel | None) -> "Trace":
        return Trace(self.timestamps, self.sizes, label)


# ---------------------------------------------------------------------------
# canonical CSV

CSV_HEADER = ("timestamp", "size")
TIMESTAMP_DECIMALS = 6


def _resolve_column(col, header: Sequence[str]) -> int:
    if isinstance(col, int):
        index = col
    elif isinstance(col, str) and col in header:
        index = header.index(col)
    elif isinstance(col, str) and re.fullmatch(r"col\d+", col):
        index = int(col[3:])
    else:
        raise ConfigurationError(f"column {col!r} not found in header {list(header)}")
    if not 0 <= index < len(header):
        raise ConfigurationError(f"column index {index} out of range for header {list(header)}")
    return index


def parse_csv_trace(source, label: ClassLabel | None = None,
                    columns: Mapping[str, object] | None = None) -> Trace:
    """Read a trace from CSV text.

    ``source`` may be a path, bytes, or a text/binary file object. The header
    row is mandatory; lines starting with ``#`` are ignored. ``columns`` maps
    ``timestamp``/``size`` to header names, zero-based indices or ``colN``
    names for datasets with a different schema. Rows are sorted by time and
    rebased so the first record is at 0.
    """
    text = _read_text(source)
    lines = [(i, line) for i, line in enumerate(text.splitlines(), start=1)
             if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise EmptyTraceError("empty trace file")
    reader = csv.reader([line for _, line in lines])
    rows = list(reader)
    header = [h.strip() for h in rows[0]]
    columns = dict(columns or {})
    ti = _resolve_column(columns.get("timestamp", columns.get("time", "timestamp")), header)
    si = _resolve_column(columns.get("size", "size"), header)

    times, sizes = [], []
    for (lineno, _), row in zip(lines[1:], rows[1:]):
        try:
            t = float(row[ti])
            s_raw = float(row[si])
        except (ValueError, IndexError):
            raise TraceParseError(f"malformed row {','.join(row)!r}", lineno) from None
        if not math.isfinite(t) or t < 0:
            raise TraceParseError(f"negative or non-finite timestamp {row[ti]!r}", lineno)
        if not math.isfinite(s_raw) or s_raw != int(s_raw) or s_raw < 1:
            raise TraceParseError(f"size must be a positive integer, got {row[si]!r}", lineno)
        times.append(t)
        sizes.append(int(s_raw))
    if not times:
        raise EmptyTraceError("trace file has a header but no records")

    t = np.asarray(times, dtype=np.float64)
    s = np.asarray(sizes, dtype=np.int64)
    order = np.argsort(t, kind="stable")
    t, s = t[order], s[order]
    return Trace(t - t[0], s, label)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def format_csv_trace(trace: Trace, comments: Sequence[str] = ()) -> str:
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    out.write(",".join(CSV_HEADER) + "\n")
    fmt = f"{{:.{TIMESTAMP_DECIMALS}f}},{{}}\n"
    for t, s in zip(trace.timestamps.tolist(), trace.sizes.tolist()):
        out.write(fmt.format(t, s))
    return out.getvalue()


def write_csv_trace(trace: Trace, dest, comments: Sequence[str] = ()) -> None:
    text = format_csv_trace(trace, comments)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# synthesis

def _check_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class Distribution:
    """A univariate interarrival distribution.

    Families: ``lognormal(mu, sigma)``, ``exponential(scale)``,
    ``constant(value)``, ``uniform(low, high)`` and ``mixture`` of weighted
    components.
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    components: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        p = self.params
        if self.family == "lognormal":
            if not math.isfinite(p.get("mu", math.nan)):
                raise ConfigurationError("lognormal needs a finite mu")
            _check_positive("sigma", p.get("sigma"))
        elif self.family == "exponential":
            _check_positive("scale", p.get("scale"))
        elif self.family == "constant":
            v = p.get("value")
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"constant value must be >= 0, got {v!r}")
        elif self.family == "uniform":
            lo, hi = p.get("low"), p.get("high")
            if lo is None or hi is None or not 0 <= lo <= hi:
                raise ConfigurationError("uniform needs 0 <= low <= high")
        elif self.family == "mixture":
            if not self.components or len(self.components) != len(self.weights):
                raise ConfigurationError("mixture needs one weight per component")
            _check_weights(self.weights)
        else:
            raise ConfigurationError(f"unknown distribution family {self.family!r}")

    @classmethod
    def lognormal(cls, mu, sigma):
        return cls("lognormal", {"mu": mu, "sigma": sigma})

    @classmethod
    def constant(cls, value):
        return cls("constant", {"value": value})

    @classmethod
    def exponential(cls, scale):
        return cls("exponential", {"scale": scale})

    @classmethod
    def mixture(cls, components, weights):
        return cls("mixture", components=tuple(components), weights=tuple(weights))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.family == "lognormal":
            return rng.lognormal(p["mu"], p["sigma"], n)
        if self.family == "exponential":
            return rng.exponential(p["scale"], n)
        if self.family == "constant":
            return np.full(n, float(p["value"]))
        if self.family == "uniform":
            return rng.uniform(p["low"], p["high"], n)
        which = rng.choice(len(self.components), size=n, p=np.asarray(self.weights, float))
        out = np.empty(n)
        for k, comp in enumerate(self.components):
            mask = which == k
            out[mask] = comp.sample(rng, int(mask.sum()))
        return out

    def mean(self) -> float:
        p = self.params
        if self.family == "lognormal":
            return math.exp(p["mu"] + p["sigma"] ** 2 / 2)
        if self.family == "exponential":
            return p["scale"]
        if self.family == "constant":
            return p["value"]
        if self.family == "uniform":
            return (p["low"] + p["high"]) / 2
        return sum(w * c.mean() for c, w in zip(self.components, self.weights))

    def to_dict(self) -> dict:
        if self.family == "mixture":
            return {"family": "mixture",
                    "components": [c.to_dict() for c in self.components],
                    "weights": list(self.weights)}
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Distribution":
        d = dict(d)
        family = d.pop("family", None)
        if family == "mixture":
            return cls.mixture([cls.from_dict(c) for c in d["components"]], d["weights"])
        return cls(family, d)


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ConfigurationError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"weights must sum to 1, got {w.sum()!r}")


@dataclass(frozen=True)
class SizeDistribution:
    """Categorical distribution over packet sizes in bytes."""

    values: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.values) != len(self.weights) or not self.values:
            raise ConfigurationError("size distribution needs one weight per value")
        if any(int(v) != v or v < 1 for v in self.values):
            raise ConfigurationError("size outcomes must be integers >= 1")
        _check_weights(self.weights)

    @classmethod
    def point(cls, size: int) -> "SizeDistribution":
        return cls((size,), (1.0,))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        values = np.asarray(self.values, dtype=np.int64)
        return values[rng.choice(len(values), size=n, p=np.asarray(self.weights, float))]

    def to_dict(self) -> dict:
        return {"values": list(self.values), "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SizeDistribution":
        return cls(tuple(d["values"]), tuple(d["weights"]))


@dataclass(frozen=True)
class SynthProfile:
    interarrival: Distribution
    sizes: SizeDistribution
    seed: int = 0
    label: ClassLabel | None = None

    def to_dict(self) -> dict:
        d = {"interarrival": self.interarrival.to_dict(), "sizes": self.sizes.to_dict(),
             "seed": self.seed}
        if self.label is not None:
            d["label"] = str(self.label)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthProfile":
        try:
            label = d.get("label")
            return cls(Distribution.from_dict(d["interarrival"]),
                       SizeDistribution.from_dict(d["sizes"]),
                       int(d.get("seed", 0)),
                       ClassLabel.parse(label) if isinstance(label, str) else label)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"invalid synth profile: {exc}") from exc


def synthesize_trace(profile: SynthProfile, n_packets: int) -> Trace:
    """Draw ``n_packets`` i.i.d. interarrivals and sizes; timestamps start at 0."""
    if n_packets < 1:
        raise ConfigurationError("n_packets must be >= 1")
    rng = np.random.default_rng(profile.seed)
    gaps = profile.interarrival.sample(rng, n_packets - 1)
    sizes = profile.sizes.sample(rng, n_packets)
    timestamps = np.concatenate(([0.0], np.cumsum(gaps)))
    return Trace(timestamps, sizes, profile.label)


# ---------------------------------------------------------------------------
# chunking, splitting, balancing

def chunk_trace(trace: Trace, chunk_len: int) -> list[Trace]:
    """Consecutive, non-overlapping chunks of exactly ``chunk_len`` records.

    The trailing remainder is discarded. Each chunk is rebased to epoch 0.
    """
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    if chunk_len > len(trace):
        raise TraceError(f"chunk_len {chunk_len} exceeds trace length {len(trace)}")
    return [trace.slice(i, i + chunk_len)
            for i in range(0, len(trace) - chunk_len + 1, chunk_len)]


def split_trace(trace: Trace, train_fraction: float = 0.8) -> tuple[Trace, Trace]:
    """Contiguous time split: first ``train_fraction`` of packets, then the rest."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    cut = int(round(len(trace) * train_fraction))
    if cut < 1 or cut >= len(trace):
        raise TraceError(f"trace of {len(trace)} packets is too short to split")
    return trace.slice(0, cut), trace.slice(cut, len(trace))


def balance_classes(dataset, seed: int = 0):
    """Downsample every class to the smallest class count.

    Works on any object with a ``labels`` array and a ``subset(indices)``
    method (see :class:`iot_eclipse.features.Dataset`). Selection is uniform
    without replacement; kept samples stay in their original order.
    """
    labels = np.asarray(dataset.labels)
    classes, counts = np.unique(labels, return_counts=True)
    n_declared = len(getattr(dataset, "classes", classes))
    if len(classes) < n_declared or (counts == 0).any():
        raise ValueError("cannot balance: at least one class has no samples")
    if n_declared < 2:
        raise ValueError("balancing needs at least two classes")
    target = counts.min()
    rng = np.random.default_rng(seed)
    keep = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if len(idx) > target:
            idx = np.sort(rng.choice(idx, size=target, replace=False))
        keep.append(idx)
    return dataset.subset(np.sort(np.concatenate(keep)))
