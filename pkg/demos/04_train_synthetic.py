"""
Training a small ensemble on synthetic data
===========================================

A scaled-down version of the full pipeline: generate three synthetic series
with daily/weekly/yearly structure, train a two-member ensemble with
truncated backpropagation through time, and forecast three unseen days.
Training is deterministic given the seeds, so rerunning this script prints
identical numbers.
"""

import datetime as dt
import time

import numpy as np

from loadcast import (
    LossConfig,
    ModelConfig,
    TrainRecipe,
    build_training_set,
    forecast,
    synthetic_store,
    train_ensemble,
)

store = synthetic_store(n_series=3, days=365, start=dt.date(2024, 1, 1),
                        seed=11)
series = [store.get(sid) for sid in store.series_ids]
train_until = dt.date(2024, 12, 17)
data = build_training_set(series, (dt.date(2024, 1, 1), train_until))
print(f"{len(data)} training samples from {len(series)} series")

config = ModelConfig(cell_variant="gru1", hidden_size=16, embed_size=8)
recipe = TrainRecipe(epochs=10, learning_rates={1: 3e-3, 6: 1e-3, 9: 3e-4},
                     batch_sizes={1: 3}, seeds=(0, 1))
started = time.monotonic()
ensemble = train_ensemble(data, config, recipe, loss_config=LossConfig())
print(f"trained {len(ensemble.members)} members in "
      f"{time.monotonic() - started:.1f}s\n")

# forecast the three days after the training cutoff and compare to truth
for offset in range(1, 4):
    target = train_until + dt.timedelta(days=offset)
    record = forecast(ensemble, series[0], target)
    start = series[0].day_start_index(target)
    actual = series[0].window(start, 24)
    mae = float(np.mean(np.abs(record.point - actual)))
    width = float(np.mean(record.upper - record.lower))
    inside = int(np.sum((actual >= record.lower) & (actual <= record.upper)))
    print(f"{target}: MAE {mae:6.1f} MW   mean PI width {width:6.1f} MW   "
          f"{inside}/24 hours inside the 90% band")

print("\nsnapshots for the first forecast day:")
target = train_until + dt.timedelta(days=1)
record = forecast(ensemble, series[0], target)
start = series[0].day_start_index(target)
actual = series[0].window(start, 24)
for hour in (6, 12, 18):
    print(f"  {hour:02d}:00  actual {actual[hour]:7.1f}   "
          f"point {record.point[hour]:7.1f}   "
          f"band [{record.lower[hour]:7.1f}, {record.upper[hour]:7.1f}]")
