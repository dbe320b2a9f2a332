"""Cross-learning trainer and day-ahead forecasting.

One model is trained on the pooled samples of every series.  Each epoch
shuffles the series, groups them into batches of the scheduled size, and
walks the batch through successive truncated windows: every window-group
produces one Adam update from the composite loss averaged over all
(series, day) pairs it contains.  Hidden state carries across windows of
the same contiguous stretch but is detached between them, so gradients
never reach past a window boundary.  Ensembling trains one member per
seed and averages forecasts in megawatt space after decoding.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    LoadcastError,
    NoTrainableSamplesError,
    TrainingDivergedError,
)
from .evaluation import ForecastRecord
from .loss import LossConfig, composite_loss, composite_loss_grad
from .network import (
    ModelConfig,
    StackedModel,
    model_build,
    model_new_state,
    model_step,
    model_unroll,
)
from .preprocess import (
    HOURS_PER_WEEK,
    HourlySeries,
    TrainingSet,
    build_extended_input,
    decode_day,
    standardize_week,
)
from .tape import Tape

#: days of history unrolled before a forecast when available
WARMUP_DAYS = 56

_DAY = dt.timedelta(days=1)


def _validated_schedule(schedule, name, *, integral=False):
    if not schedule:
        raise ConfigError(f"{name} schedule is empty")
    for epoch, value in schedule.items():
        if not isinstance(epoch, int) or epoch < 1:
            raise ConfigError(f"{name} schedule keys must be epochs >= 1")
        if integral and not isinstance(value, int):
            raise ConfigError(f"{name} schedule values must be integers")
        if value <= 0 or not np.isfinite(value):
            raise ConfigError(f"{name} schedule values must be positive")
    if 1 not in schedule:
        raise ConfigError(f"{name} schedule must start at epoch 1")
    return dict(sorted(schedule.items()))


def _schedule_value(schedule, epoch):
    value = None
    for start, v in schedule.items():
        if start > epoch:
            break
        value = v
    return value


@dataclass(frozen=True)
class TrainRecipe:
    """Epoch count, staged learning rates and batch sizes, Adam settings.

    Schedules are change-point maps: the value at epoch e is the entry
    with the largest key <= e.  Defaults follow the reference regime of
    10 epochs with rates 3e-3 / 1e-3 / 3e-4 / 1e-4 switching at epochs
    6, 7 and 8, and series-batches of 2 growing to 5 at epoch 4.
    """

    epochs: int = 10
    learning_rates: dict = field(
        default_factory=lambda: {1: 3e-3, 6: 1e-3, 7: 3e-4, 8: 1e-4})
    batch_sizes: dict = field(default_factory=lambda: {1: 2, 4: 5})
    window_days: int = 56
    clip_norm: float | None = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seeds: tuple = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        object.__setattr__(self, "learning_rates", _validated_schedule(
            self.learning_rates, "learning rate"))
        object.__setattr__(self, "batch_sizes", _validated_schedule(
            self.batch_sizes, "batch size", integral=True))
        if self.window_days < 1:
            raise ConfigError("window_days must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0.0:
            raise ConfigError("clip_norm must be positive or None")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise ConfigError("Adam epsilon must be positive")
        if not self.seeds:
            raise ConfigError("need at least one ensemble seed")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def lr_at(self, epoch: int) -> float:
        return _schedule_value(self.learning_rates, epoch)

    def batch_at(self, epoch: int) -> int:
        return _schedule_value(self.batch_sizes, epoch)


class Adam:
    """Adam with bias correction, updating named arrays in place."""

    def __init__(self, arrays, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.arrays = list(arrays)
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.step_count = 0
        self._m = {name: np.zeros_like(arr) for name, arr in self.arrays}
        self._v = {name: np.zeros_like(arr) for name, arr in self.arrays}

    def step(self, grads: dict, lr: float):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, arr in self.arrays:
            g = grads[name]
            m, v = self._m[name], self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)


def clip_global_norm(grads: dict, max_norm: float | None) -> float:
    """Scale the whole gradient dict in place; returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class TrainResult:
    model: StackedModel
    epoch_losses: list
    update_count: int


@dataclass(frozen=True)
class EnsembleModel:
    members: tuple

    def __post_init__(self):
        if not self.members:
            raise ConfigError("ensemble needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def config(self) -> ModelConfig:
        return self.members[0].config


def _contiguous_runs(samples):
    runs, run = [], [samples[0]]
    for prev, cur in zip(samples, samples[1:]):
        if cur.target_date - prev.target_date == _DAY:
            run.append(cur)
        else:
            runs.append(run)
            run = [cur]
    runs.append(run)
    return runs


def series_windows(samples, window_days):
    """Non-overlapping truncation windows; second element flags whether the
    window opens a fresh contiguous stretch (cold state)."""
    out = []
    for run in _contiguous_runs(list(samples)):
        for i in range(0, len(run), window_days):
            out.append((run[i:i + window_days], i == 0))
    return out


def _window_group_update(model, named, optimizer, entries, states, lr,
                         clip_norm, loss_config, epoch):
    """One forward/backward/update over the k-th window of each series."""
    tape = Tape()
    seeds = []
    loss_sum = 0.0
    pairs = 0
    for sid, (samples, fresh) in entries:
        if fresh:
            states[sid] = model_new_state(model)
        outputs, _ = model_unroll(model, states[sid], samples, tape)
        states[sid].detach()
        for sample, out in zip(samples, outputs):
            target = sample.target.values
            loss_sum += composite_loss(target, out.point.value,
                                       out.lower.value, out.upper.value,
                                       loss_config)
            pairs += 1
            seeds.append((out, composite_loss_grad(
                target, out.point.value, out.lower.value, out.upper.value,
                loss_config)))
    if not np.isfinite(loss_sum):
        raise TrainingDivergedError(
            f"non-finite training loss in epoch {epoch}")
    seed_list = []
    for out, (g_point, g_lower, g_upper) in seeds:
        seed_list.append((out.point, g_point / pairs))
        seed_list.append((out.lower, g_lower / pairs))
        seed_list.append((out.upper, g_upper / pairs))
    grads_view = tape.backward(seed_list)
    grads = {name: grads_view.of_array(arr) for name, arr in named}
    clip_global_norm(grads, clip_norm)
    optimizer.step(grads, lr)
    return loss_sum, pairs


def train(data: TrainingSet, config: ModelConfig, recipe: TrainRecipe,
          seed: int = 0, loss_config: LossConfig | None = None) -> TrainResult:
    """Train one model over the pooled series; deterministic given seed.

    The seed drives both initialization and epoch shuffles from a single
    generator, so a zero-epoch recipe returns exactly the initialized
    model.
    """
    if len(data) == 0:
        raise NoTrainableSamplesError("empty training set")
    if loss_config is None:
        loss_config = LossConfig()
    rng = np.random.default_rng(seed)
    model = model_build(config, rng)
    named = model.named_arrays()
    optimizer = Adam(named, recipe.beta1, recipe.beta2, recipe.epsilon)
    series_ids = data.series_ids
    windows = {sid: series_windows(data.by_series[sid], recipe.window_days)
               for sid in series_ids}
    epoch_losses = []
    for epoch in range(1, recipe.epochs + 1):
        lr = recipe.lr_at(epoch)
        batch_size = recipe.batch_at(epoch)
        order = [series_ids[i] for i in rng.permutation(len(series_ids))]
        loss_sum = 0.0
        pair_count = 0
        for start in range(0, len(order), batch_size):
            group = order[start:start + batch_size]
            states = {}
            slots = max(len(windows[sid]) for sid in group)
            for k in range(slots):
                entries = [(sid, windows[sid][k]) for sid in group
                           if k < len(windows[sid])]
                batch_loss, pairs = _window_group_update(
                    model, named, optimizer, entries, states, lr,
                    recipe.clip_norm, loss_config, epoch)
                loss_sum += batch_loss
                pair_count += pairs
        epoch_losses.append(loss_sum / pair_count)
    return TrainResult(model=model, epoch_losses=epoch_losses,
                       update_count=optimizer.step_count)


def train_ensemble(data: TrainingSet, config: ModelConfig,
                   recipe: TrainRecipe,
                   loss_config: LossConfig | None = None) -> EnsembleModel:
    """Independently trained members, one per recipe seed."""
    results = [train(data, config, recipe, seed=s, loss_config=loss_config)
               for s in recipe.seeds]
    return EnsembleModel(tuple(r.model for r in results))


# -- forecasting -----------------------------------------------------------


def _query_input(series: HourlySeries, day: dt.date):
    """Extended input plus the coding variables of the preceding week."""
    ext = build_extended_input(series, day)
    start = series.day_start_index(day)
    _, coding = standardize_week(
        series.window(start - HOURS_PER_WEEK, HOURS_PER_WEEK))
    return ext, coding


def _warmup_inputs(series: HourlySeries, day: dt.date, warmup_days: int):
    """Inputs for up to ``warmup_days`` days ending the day before ``day``,
    walking back until the first day whose window cannot be built."""
    inputs = []
    cursor = day - _DAY
    while len(inputs) < warmup_days:
        try:
            inputs.append(build_extended_input(series, cursor))
        except LoadcastError:
            break
        cursor -= _DAY
    inputs.reverse()
    return inputs


def _decoded_step(member, state, ext, coding):
    out = model_step(member, state, ext)
    return (decode_day(out.point.value, coding),
            decode_day(out.lower.value, coding),
            decode_day(out.upper.value, coding))


def _record_from_members(decoded, series_id, day, label):
    point = np.mean([d[0] for d in decoded], axis=0)
    lower = np.mean([d[1] for d in decoded], axis=0)
    upper = np.mean([d[2] for d in decoded], axis=0)
    return ForecastRecord(series_id, day, point, lower, upper, model=label)


def forecast(ensemble: EnsembleModel, series: HourlySeries,
             target_date: dt.date, *, warmup_days: int = WARMUP_DAYS,
             label: str | None = None) -> ForecastRecord:
    """Member-mean day-ahead forecast in MW.

    Each member is warmed by evaluation steps over up to ``warmup_days``
    preceding days (fewer when history runs out), then stepped on the
    target day and decoded with the preceding week's coding variables.
    """
    ext, coding = _query_input(series, target_date)
    warm = _warmup_inputs(series, target_date, warmup_days)
    if label is None:
        label = ensemble.config.cell_variant
    decoded = []
    for member in ensemble.members:
        state = model_new_state(member)
        for w in warm:
            model_step(member, state, w)
        decoded.append(_decoded_step(member, state, ext, coding))
    return _record_from_members(decoded, series.series_id, target_date, label)


def forecast_range(ensemble: EnsembleModel, series: HourlySeries,
                   first_date: dt.date, last_date: dt.date, *,
                   warmup_days: int = WARMUP_DAYS,
                   label: str | None = None) -> list:
    """Forecasts for every buildable day in the inclusive date range.

    Consecutive days share state: members are warmed once per contiguous
    stretch and then advance one evaluation step per day.  Days whose
    input cannot be built are skipped and reset the state.
    """
    if last_date < first_date:
        raise ValueError("empty date range")
    if label is None:
        label = ensemble.config.cell_variant
    records = []
    states = None
    previous = None
    day = first_date
    while day <= last_date:
        try:
            ext, coding = _query_input(series, day)
        except LoadcastError:
            states = None
            day += _DAY
            continue
        if states is None or previous != day - _DAY:
            states = [model_new_state(m) for m in ensemble.members]
            warm = _warmup_inputs(series, day, warmup_days)
            for member, state in zip(ensemble.members, states):
                for w in warm:
                    model_step(member, state, w)
        decoded = [_decoded_step(member, state, ext, coding)
                   for member, state in zip(ensemble.members, states)]
        records.append(_record_from_members(decoded, series.series_id, day,
                                            label))
        previous = day
        day += _DAY
    return records
