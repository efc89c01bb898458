"""One-vs-noise detectors for device/service traffic in crowded WiFi captures."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import InsufficientDataError, WindowParams, build_dataset, extract_features
from .forest import (ForestParams, RandomForest, binary_metrics, cross_validate, fit_dataset)
from .trace import (NOISE, SPEAKER_CLASSES, ClassLabel, Trace, TraceError, balance_classes,
                    chunk_trace, split_trace)

logger = logging.getLogger(__name__)

DETECTOR_FORMAT = "iot-eclipse/detector"
DEGENERATE_ACCURACY = 0.55


class InsufficientNoiseError(TraceError):
    pass


class DegenerateSeparationError(ValueError):
    """Target and noise could not be told apart during validation."""

    def __init__(self, target, accuracy):
        self.accuracy = accuracy
        super().__init__(f"detector for {target} rejected: cross-validated accuracy "
                         f"{accuracy:.3f} <= {DEGENERATE_ACCURACY}, target and noise "
                         f"look alike")


@dataclass(eq=False)
class Detector:
    target: ClassLabel
    forest: RandomForest
    wparams: WindowParams
    chunk_len: int
    validation_accuracy: float | None = None

    def __post_init__(self):
        if tuple(self.forest.classes) != (self.target, NOISE):
            raise ValueError("detector forest must have classes (target, Noise)")

    def to_dict(self) -> dict:
        return {"format": DETECTOR_FORMAT, "version": 1, "target": str(self.target),
                "chunk_len": self.chunk_len, "wparams": self.wparams.to_dict(),
                "validation_accuracy": self.validation_accuracy,
                "forest": self.forest.to_dict()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "Detector":
        d = json.loads(text)
        if d.get("format") != DETECTOR_FORMAT:
            raise ValueError("not a serialized detector")
        return cls(ClassLabel.parse(d["target"]), RandomForest.from_dict(d["forest"]),
                   WindowParams.from_dict(d["wparams"]), int(d["chunk_len"]),
                   d.get("validation_accuracy"))


def build_detector(target_trace: Trace, noise_trace: Trace,
                   wparams: WindowParams | None = None, fparams: ForestParams | None = None,
                   validate: bool = False) -> Detector:
    """Train a two-class forest: target traffic against chunks of crowd noise.

    The noise capture is cut into chunks as long as the target trace, every
    chunk feeds the negative class, and classes are balanced before
    training. With ``validate`` the pair is cross-validated first and
    rejected if accuracy is no better than a coin flip.
    """
    wparams = wparams or WindowParams(size=180)
    fparams = fparams or ForestParams()
    if target_trace.label is None or target_trace.label == NOISE:
        raise ValueError("target trace needs a non-noise label")
    n = len(target_trace)
    if len(noise_trace) < n:
        raise InsufficientNoiseError(
            f"noise trace has {len(noise_trace)} packets but {n} are required "
            f"(short by {n - len(noise_trace)})")
    chunks = [c.with_label(NOISE) for c in chunk_trace(noise_trace, n)]
    target = target_trace.label
    ds = build_dataset([target_trace, *chunks], wparams, classes=(target, NOISE))
    ds = balance_classes(ds, seed=fparams.seed)

    accuracy = None
    if validate:
        accuracy = cross_validate(ds, fparams).accuracy
        if accuracy <= DEGENERATE_ACCURACY:
            logger.warning("degenerate separation for %s: accuracy %.3f", target, accuracy)
            raise DegenerateSeparationError(target, accuracy)
    return Detector(target, fit_dataset(ds, fparams), wparams, n, accuracy)


@dataclass
class ChunkVerdict:
    index: int
    label: ClassLabel
    vote_share: float   # fraction of windows voting for ``label``
    n_windows: int


@dataclass
class DetectionReport:
    target: ClassLabel
    verdicts: list = field(default_factory=list)
    truth: ClassLabel | None = None

    @property
    def n_chunks(self) -> int:
        return len(self.verdicts)

    def detection_rate(self) -> float:
        return float(np.mean([v.label == self.target for v in self.verdicts]))


def detect(detector: Detector, unknown: Trace, chunk_len: int | None = None) -> DetectionReport:
    """Chunk ``unknown`` and label each chunk by majority over its windows.

    Traffic shorter than one chunk is scored whole, as long as it yields at
    least one window. Ties between target and noise go to the target.
    """
    chunk_len = chunk_len or detector.chunk_len
    chunks = chunk_trace(unknown, chunk_len) if len(unknown) >= chunk_len else [unknown]
    report = DetectionReport(detector.target, truth=unknown.label)
    for i, chunk in enumerate(chunks):
        fm = extract_features(chunk, detector.wparams)
        if not len(fm):
            raise InsufficientDataError("chunk yields no windows")
        pred = detector.forest.predict_index(fm.values)
        counts = np.bincount(pred, minlength=2)
        k = int(np.argmax(counts))
        report.verdicts.append(ChunkVerdict(i, detector.forest.classes[k],
                                            float(counts[k] / len(pred)), len(pred)))
    return report


@dataclass
class DetectionRow:
    device: str
    service: str
    tpr: float | None
    fpr: float | None
    accuracy: float | None
    positives: int
    negatives: int


TABLE_HEADER = ("Device", "Service", "TPR", "FPR", "Accuracy")
_TABLE_ORDER = (SPEAKER_CLASSES[0], SPEAKER_CLASSES[1], SPEAKER_CLASSES[3], SPEAKER_CLASSES[2],
                SPEAKER_CLASSES[4])


def evaluate_detection(detectors: Sequence[Detector], test_traces: Sequence[Trace],
                       chunk_len: int | None = None,
                       include_other_targets: bool = False) -> list[DetectionRow]:
    """Per-detector TPR/FPR/accuracy over chunk verdicts on labeled test traffic.

    Each detector is scored on test traces of its own target (positives) and
    noise (negatives). Traffic of other devices is counted as negative only
    with ``include_other_targets``. Rows for the five known classes come in
    the usual table order; other targets follow in input order.
    """
    rows = []
    for det in detectors:
        tp = fn = fp = tn = 0
        for trace in test_traces:
            if trace.label is None:
                raise ValueError("test traces must be labeled")
            positive = trace.label == det.target
            if not (positive or trace.label == NOISE or include_other_targets):
                continue
            for v in detect(det, trace, chunk_len).verdicts:
                hit = v.label == det.target
                if positive:
                    tp += hit
                    fn += not hit
                else:
                    fp += hit
                    tn += not hit
        m = binary_metrics(((det.target, NOISE), [[tp, fn], [fp, tn]]), det.target)
        rows.append(DetectionRow(det.target.device, det.target.service, m.tpr, m.fpr,
                                 m.accuracy, tp + fn, fp + tn))

    def key(item):
        i, row = item
        lab = ClassLabel(row.device, row.service)
        return (_TABLE_ORDER.index(lab), 0) if lab in _TABLE_ORDER else (len(_TABLE_ORDER), i)

    return [row for _, row in sorted(enumerate(rows), key=key)]


def detection_table_csv(rows: Sequence[DetectionRow], comments: Sequence[str] = ()) -> str:
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in rows:
        w.writerow([r.device, r.service, *("undefined" if v is None else f"{v:.6f}"
                                            for v in (r.tpr, r.fpr, r.accuracy))])
    return out.getvalue()


def split_for_detection(traces: Sequence[Trace], train_fraction: float = 0.8):
    """Contiguous time split of each trace into (train, test) lists."""
    pairs = [split_trace(t, train_fraction) for t in traces]
    return [p[0] for p in pairs], [p[1] for p in pairs]
