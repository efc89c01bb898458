"""Smart-home device/service identification from encrypted WiFi traffic
(packet sizes and interarrival times only), and the Eclipse reshaping
countermeasure."""

__version__ = "0.1.0"

from .trace import (NOISE, SPEAKER_CLASSES, ClassLabel, Distribution, PacketRecord,
                    SizeDistribution, SynthProfile, Trace, balance_classes, chunk_trace,
                    parse_csv_trace, split_trace, synthesize_trace, write_csv_trace)
from .pcap import convert_pcap
from .features import (Dataset, Source, WindowParams, build_dataset, extract_features,
                       interarrival_times, raw_baseline, sweep_window_sizes, window_stats)
from .forest import (EvaluationReport, ForestParams, RandomForest, binary_metrics,
                     cross_validate, train_forest, train_tree)
from .detect import (Detector, build_detector, detect, detection_table_csv, evaluate_detection,
                     split_for_detection)
from .eclipse import (ReshapePolicy, added_delay, delay_curve_csv, jitter_delays, pad_sizes,
                      reshape, sweep_delay)
from . import benchmarks

__all__ = [
    "NOISE", "SPEAKER_CLASSES", "ClassLabel", "Distribution", "PacketRecord",
    "SizeDistribution", "SynthProfile", "Trace", "balance_classes", "chunk_trace",
    "parse_csv_trace", "split_trace", "synthesize_trace", "write_csv_trace", "convert_pcap",
    "Dataset", "Source", "WindowParams", "build_dataset", "extract_features",
    "interarrival_times", "raw_baseline", "sweep_window_sizes", "window_stats",
    "EvaluationReport", "ForestParams", "RandomForest", "binary_metrics", "cross_validate",
    "train_forest", "train_tree", "Detector", "build_detector", "detect",
    "evaluate_detection", "detection_table_csv", "split_for_detection", "ReshapePolicy",
    "added_delay", "delay_curve_csv", "jitter_delays", "pad_sizes", "reshape", "sweep_delay",
    "benchmarks",
]
