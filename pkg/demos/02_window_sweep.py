"""How identification accuracy depends on the window length N.

Run: python demos/02_window_sweep.py
"""
# %%
from iot_eclipse import ForestParams, Source, WindowParams, benchmarks, sweep_window_sizes

traces = benchmarks.make_traces(benchmarks.identification_profiles(seed=1), 12000)
fp = ForestParams(n_trees=15, k_folds=10, seed=1)

# %% [markdown]
# Small windows give many noisy samples; large windows give few clean
# ones.  Sizes that leave a class with fewer windows than folds are
# skipped with a warning instead of failing the sweep.

# %%
for source in (Source.INTERARRIVAL, Source.SIZE, Source.COMBINED):
    curve = sweep_window_sizes(traces, [20, 60, 120, 200, 400, 1200],
                               WindowParams(100, source=source), fp)
    cells = [f"N={p.window_size}:" + ("skip" if p.accuracy is None else f"{p.accuracy:.2f}")
             for p in curve]
    print(f"{source.value:<12}", "  ".join(cells))
