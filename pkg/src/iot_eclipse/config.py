"""Declarative experiment configuration (JSON documents)."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .features import WindowParams
from .forest import ForestParams
from .trace import ClassLabel, ConfigurationError, SynthProfile, Trace, parse_csv_trace


@dataclass(frozen=True)
class TraceSource:
    path: Path
    label: ClassLabel | None
    columns: dict = field(default_factory=dict)

    def load(self) -> Trace:
        return parse_csv_trace(self.path, self.label, self.columns or None)


@dataclass
class ExperimentConfig:
    seed: int
    traces: list = field(default_factory=list)
    noise: TraceSource | None = None
    window: WindowParams = field(default_factory=WindowParams)
    forest: ForestParams = field(default_factory=ForestParams)
    window_sizes: list = field(default_factory=list)
    delays: list | None = None
    pad: bool = True
    jitter: bool = True
    train_fraction: float = 0.8
    test_chunk_len: int | None = None
    synth: dict = field(default_factory=dict)
    output: Path | None = None
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self, *extra: str) -> list[str]:
        return [f"iot-eclipse {__version__}", f"config-sha256 {self.digest}",
                f"seed {self.seed}", *extra]

    def load_traces(self) -> list[Trace]:
        return [s.load() for s in self.traces]

    @classmethod
    def from_dict(cls, raw: dict, base: Path = Path("."), check_paths: bool = True
                  ) -> "ExperimentConfig":
        raw = dict(raw)
        if raw.get("seed") is None:
            raise ConfigurationError("a seed is required (set 'seed' or pass --seed)")
        try:
            seed = int(raw["seed"])
            traces = [_source(t, base, check_paths) for t in raw.get("traces", [])]
            noise = _source(raw["noise"], base, check_paths) if raw.get("noise") else None
            if raw.get("manifest"):
                more, manifest_noise = _manifest(base / raw["manifest"], check_paths)
                traces += more
                noise = noise or manifest_noise
            window = WindowParams.from_dict(raw.get("window", {}))
            forest = ForestParams.from_dict({**raw.get("forest", {}), "seed": seed})
            sweep = raw.get("sweep", {})
            eclipse = raw.get("eclipse", {})
            detect = raw.get("detect", {})
            out = raw.get("output")
            return cls(seed=seed, traces=traces, noise=noise, window=window, forest=forest,
                       window_sizes=[int(n) for n in sweep.get("window_sizes", [])],
                       delays=eclipse.get("delays"),
                       pad=bool(eclipse.get("pad", True)),
                       jitter=bool(eclipse.get("jitter", True)),
                       train_fraction=float(detect.get("train_fraction", 0.8)),
                       test_chunk_len=detect.get("test_chunk_len"),
                       synth=raw.get("synth", {}),
                       output=(base / out) if out else None,
                       raw=raw)
        except ConfigurationError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path, overrides: dict | None = None, check_paths: bool = True
             ) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(raw, path.parent, check_paths)


def _manifest(path: Path, check_paths: bool):
    """Trace list written by ``iot-eclipse synth`` (paths relative to the manifest)."""
    if not path.exists():
        if check_paths:
            raise FileNotFoundError(f"manifest not found: {path}")
        return [], None
    doc = json.loads(path.read_text(encoding="utf-8"))
    traces = [_source(t, path.parent, check_paths) for t in doc.get("traces", [])]
    noise = _source(doc["noise"], path.parent, check_paths) if doc.get("noise") else None
    return traces, noise


def _source(d, base: Path, check_paths: bool) -> TraceSource:
    if isinstance(d, str):
        d = {"path": d}
    path = base / d["path"]
    if check_paths and not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    label = d.get("label")
    return TraceSource(path, ClassLabel.parse(label) if label else None,
                       dict(d.get("columns", {})))


def synth_profiles(section: dict, seed: int) -> list[tuple[SynthProfile, int]]:
    """(profile, n_packets) pairs from a ``synth`` config section.

    Either ``{"benchmark": name, "n_packets": n}`` for a built-in family or an
    explicit ``{"profiles": [...]}`` list whose entries may carry their own
    ``n_packets``.
    """
    from . import benchmarks

    n_default = int(section.get("n_packets", 20000))
    out = []
    name = section.get("benchmark")
    if name:
        families = {"identification": benchmarks.identification_profiles,
                    "timing": benchmarks.timing_profiles}
        if name == "detection":
            out = [(p, n_default) for p in benchmarks.identification_profiles(seed)]
            n_noise = int(section.get("noise_packets", 3 * n_default))
            out.append((benchmarks.noise_profile(seed), n_noise))
        elif name in families:
            out = [(p, n_default) for p in families[name](seed)]
        else:
            raise ConfigurationError(f"unknown benchmark {name!r}")
    for d in section.get("profiles", []):
        prof = SynthProfile.from_dict({"seed": seed, **d})
        out.append((prof, int(d.get("n_packets", n_default))))
    if not out:
        raise ConfigurationError("synth section names no benchmark and no profiles")
    return out


def trace_filename(label: ClassLabel | None, index: int) -> str:
    name = "trace" if label is None else str(label).replace("/", "_")
    return f"{index:02d}_{name}.csv"


def relpath(path, start) -> str:
    return os.path.relpath(path, start)
