"""Eclipse: constant-size padding and order-preserving random forwarding delays."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import Source, WindowParams, build_dataset
from .forest import ForestParams, cross_validate
from .trace import Trace, TraceError, balance_classes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReshapePolicy:
    pad_to: int | None = None        # None: sizes untouched
    max_delay: float | None = None   # seconds; None or 0: timing untouched
    seed: int = 0

    def __post_init__(self):
        if self.max_delay is not None and not self.max_delay >= 0:
            raise ValueError("max_delay must be >= 0")
        if self.pad_to is not None and self.pad_to < 1:
            raise ValueError("pad_to must be >= 1")


def pad_sizes(trace: Trace, pad_to: int) -> Trace:
    """Pad every packet to ``pad_to`` bytes. Never truncates."""
    if len(trace) and pad_to < trace.sizes.max():
        raise TraceError(f"pad_to={pad_to} is below the largest packet "
                         f"({trace.sizes.max()} bytes); padding cannot truncate")
    return Trace(trace.timestamps, np.full(len(trace), pad_to, dtype=np.int64), trace.label)


def jitter_delays(trace: Trace, policy: ReshapePolicy, stream: int = 0) -> Trace:
    """Delay each packet by U[0, max_delay] while keeping FIFO order.

    ``departure[i] = max(t[i] + d[i], departure[i-1])``. ``stream`` selects an
    independent delay sequence, e.g. one per trace.
    """
    if not policy.max_delay or not len(trace):
        return trace
    rng = np.random.default_rng([policy.seed, stream])
    delays = rng.uniform(0.0, policy.max_delay, size=len(trace))
    departures = np.maximum.accumulate(trace.timestamps + delays)
    return Trace(departures, trace.sizes, trace.label)


def reshape(trace: Trace, policy: ReshapePolicy, stream: int = 0) -> Trace:
    if policy.pad_to is not None:
        trace = pad_sizes(trace, policy.pad_to)
    return jitter_delays(trace, policy, stream)


def added_delay(original: Trace, reshaped: Trace) -> np.ndarray:
    """Per-packet delay introduced by reshaping."""
    if len(original) != len(reshaped):
        raise ValueError("traces differ in packet count")
    return reshaped.timestamps - original.timestamps


def default_delay_grid() -> list[float]:
    """0 plus 11 log-spaced points from 10 us to 0.5 ms."""
    return [0.0, *np.logspace(np.log10(1e-5), np.log10(5e-4), 11).tolist()]


@dataclass
class DelayPoint:
    max_delay: float
    acc_clean_model: float
    acc_retrained: float


def sweep_delay(traces: Sequence[Trace], delays: Sequence[float],
                wparams: WindowParams | None = None, fparams: ForestParams | None = None,
                pad: bool = True, jitter: bool = True, seed: int = 0) -> list[DelayPoint]:
    """Accuracy against maximum delay.

    For every delay the traces are padded to the largest packet in the whole
    dataset and jittered, then scored two ways with the same stratified
    folds: by forests trained on the clean windows (the attacker's existing
    model) and by forests retrained on reshaped windows.
    """
    wparams = wparams or WindowParams(size=180, source=Source.COMBINED)
    fparams = fparams or ForestParams()
    if list(delays) != sorted(delays):
        raise ValueError("delays must be sorted ascending")
    clean = build_dataset(traces, wparams)
    balanced = balance_classes(clean, seed=seed)
    pad_to = int(max(t.sizes.max() for t in traces))

    curve = []
    for D in delays:
        policy = ReshapePolicy(pad_to if pad else None, D if jitter else None, seed)
        reshaped = [reshape(t, policy, stream=i) for i, t in enumerate(traces)]
        shaped = balance_classes(build_dataset(reshaped, wparams, clean.classes), seed=seed)
        acc_clean = cross_validate(balanced, fparams, test_dataset=shaped).accuracy
        acc_retrained = cross_validate(shaped, fparams).accuracy
        logger.info("max delay %.3g s: clean-model %.4f, retrained %.4f",
                    D, acc_clean, acc_retrained)
        curve.append(DelayPoint(float(D), acc_clean, acc_retrained))
    return curve


def delay_curve_csv(curve: Sequence[DelayPoint], comments: Sequence[str] = ()) -> str:
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["delay_s", "acc_clean_model", "acc_retrained"])
    for p in curve:
        w.writerow([repr(p.max_delay), f"{p.acc_clean_model:.6f}", f"{p.acc_retrained:.6f}"])
    return out.getvalue()
