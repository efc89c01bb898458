"""One detector per class, each trained against crowd noise.

Run: python demos/03_detection.py
"""
# %%
from iot_eclipse import (ForestParams, WindowParams, benchmarks, build_detector, detect,
                         detection_table_csv, evaluate_detection, split_for_detection,
                         synthesize_trace)

targets = benchmarks.make_traces(benchmarks.identification_profiles(seed=0), 20000)
noise = synthesize_trace(benchmarks.noise_profile(seed=0), 60000)

# %% [markdown]
# The first 80% of every trace (by time) trains, the last 20% tests, so
# no window straddles the split.  Noise is cut into chunks of the target
# length, giving a binary target-vs-noise problem per class.

# %%
train, test = split_for_detection(targets)
(noise_train,), (noise_test,) = split_for_detection([noise])
wp, fp = WindowParams(180), ForestParams(n_trees=30, k_folds=15, seed=0)
detectors = [build_detector(t, noise_train, wp, fp, validate=True) for t in train]
for d in detectors:
    print(f"{str(d.target):<22} validation accuracy {d.validation_accuracy:.3f}")

# %%
rows = evaluate_detection(detectors, [*test, noise_test], chunk_len=wp.size + 1)
print(detection_table_csv(rows))

# %% [markdown]
# A single verdict: majority vote over the windows of one unknown chunk.

# %%
report = detect(detectors[0], test[0].slice(0, 1000), chunk_len=181)
print([(v.label.short_name, round(v.vote_share, 2)) for v in report.verdicts])
