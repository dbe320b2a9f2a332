"""Stacked dilated recurrent forecaster.

Three recurrent layers of one cell kind, dilated 2, 4 and 7 days, with
identity shortcuts between consecutive layer outputs.  The per-day input
concatenates the standardized week, its log level, and a learned linear
embedding of the calendar one-hots.  A linear head maps the top layer output
to 72 numbers: 24 hourly point forecasts and 24 lower and upper interval
bounds, all in standardized space.  No ordering among point and bounds is
imposed; crossings are measured downstream, not prevented.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .cells import (
    CellKind,
    CellParams,
    Connection,
    cell_init,
    cell_step,
    new_state,
)
from .errors import ConfigError
from .preprocess import CALENDAR_SIZE, HOURS_PER_WEEK, ExtendedInput
from .tape import Tape, Var, concat, matvec, narrow

#: forecast horizon in hours; the head emits point, lower and upper per hour
HORIZON = 24
HEAD_SIZE = 3 * HORIZON
#: hierarchical dilations of the three layers, in days
DILATIONS = (2, 4, 7)

#: model-level cell vocabulary: plain cells come in a recent-state and a
#: delayed-state variant, dilated cells use both connections
CELL_VARIANTS: dict[str, tuple[CellKind, Connection]] = {
    "lstm1": (CellKind.LSTM, Connection.RECENT_ONLY),
    "lstm2": (CellKind.LSTM, Connection.DELAYED_ONLY),
    "gru1": (CellKind.GRU, Connection.RECENT_ONLY),
    "gru2": (CellKind.GRU, Connection.DELAYED_ONLY),
    "dlstm": (CellKind.DLSTM, Connection.BOTH),
    "drnn": (CellKind.DRNN, Connection.BOTH),
    "adrnn": (CellKind.ADRNN, Connection.BOTH),
}

#: one-hot block boundaries inside the 90-entry calendar vector
_CALENDAR_BLOCKS = ((0, 7), (7, 38), (38, 90))


@dataclass(frozen=True)
class ModelConfig:
    cell_variant: str = "adrnn"
    hidden_size: int = 125
    out_size: int | None = None  # defaults to hidden_size
    upper_hidden_size: int | None = None  # adrnn second stage, defaults to hidden
    embed_size: int = 16
    dilations: tuple[int, int, int] = DILATIONS

    def __post_init__(self):
        if self.cell_variant not in CELL_VARIANTS:
            raise ConfigError(
                f"unknown cell variant {self.cell_variant!r}; "
                f"choose from {sorted(CELL_VARIANTS)}")
        if self.hidden_size < 1 or self.embed_size < 1:
            raise ConfigError("sizes must be positive")
        if self.out_size is not None and self.out_size < 1:
            raise ConfigError("sizes must be positive")
        if self.upper_hidden_size is not None and self.upper_hidden_size < 1:
            raise ConfigError("sizes must be positive")
        if len(self.dilations) != 3 or any(d < 1 for d in self.dilations):
            raise ConfigError("need three positive dilations")
        kind, _ = CELL_VARIANTS[self.cell_variant]
        if kind in (CellKind.LSTM, CellKind.GRU):
            if self.out_size is not None and self.out_size != self.hidden_size:
                raise ConfigError(
                    f"{self.cell_variant} emits its hidden state; out_size "
                    "must match hidden_size")

    @property
    def effective_out_size(self) -> int:
        return self.hidden_size if self.out_size is None else self.out_size

    @property
    def layer1_input_size(self) -> int:
        return HOURS_PER_WEEK + 1 + self.embed_size


@dataclass
class StackedModel:
    config: ModelConfig
    embedding: np.ndarray  # (embed_size, 90)
    cells: list[CellParams]
    head_w: np.ndarray  # (72, out_size)
    head_b: np.ndarray  # (72,)

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = [("embed.W", self.embedding)]
        for i, cell in enumerate(self.cells, start=1):
            out += cell.named_arrays(f"layer{i}.")
        out.append(("head.W", self.head_w))
        out.append(("head.b", self.head_b))
        return out


@dataclass
class ModelState:
    layers: list

    def detach(self):
        for layer in self.layers:
            layer.detach()


@dataclass
class StepOutput:
    point: Var  # 24 standardized hourly values
    lower: Var
    upper: Var


def model_build(config: ModelConfig, seed=0) -> StackedModel:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kind, connection = CELL_VARIANTS[config.cell_variant]
    bound = 1.0 / np.sqrt(CALENDAR_SIZE)
    embedding = rng.uniform(-bound, bound, size=(config.embed_size, CALENDAR_SIZE))
    out_size = config.effective_out_size
    cells = []
    for layer, _ in enumerate(config.dilations):
        input_size = config.layer1_input_size if layer == 0 else out_size
        if kind in (CellKind.LSTM, CellKind.GRU):
            params, _ = cell_init(kind, input_size, config.hidden_size,
                                  connection=connection, seed=rng)
        else:
            params, _ = cell_init(kind, input_size, config.hidden_size,
                                  out_size=out_size,
                                  upper_hidden_size=config.upper_hidden_size,
                                  seed=rng)
        cells.append(params)
    bound = 1.0 / np.sqrt(out_size)
    head_w = rng.uniform(-bound, bound, size=(HEAD_SIZE, out_size))
    head_b = np.zeros(HEAD_SIZE)
    return StackedModel(config, embedding, cells, head_w, head_b)


def model_new_state(model: StackedModel) -> ModelState:
    return ModelState([new_state(cell, d)
                       for cell, d in zip(model.cells, model.config.dilations)])


def validate_calendar(one_hots: np.ndarray):
    one_hots = np.asarray(one_hots, dtype=np.float64)
    if one_hots.shape != (CALENDAR_SIZE,):
        raise ValueError(f"calendar vector must have {CALENDAR_SIZE} entries")
    if not np.all((one_hots == 0.0) | (one_hots == 1.0)):
        raise ValueError("calendar vector entries must be 0 or 1")
    for lo, hi in _CALENDAR_BLOCKS:
        if one_hots[lo:hi].sum() != 1.0:
            raise ValueError("each calendar block must contain exactly one 1")
    return one_hots


def embed_calendar(model: StackedModel, one_hots) -> np.ndarray:
    """Linear embedding of validated calendar one-hots."""
    return model.embedding @ validate_calendar(one_hots)


def model_step(model: StackedModel, states: ModelState,
               sample_input: ExtendedInput, tape: Tape | None = None) -> StepOutput:
    """One day forward: concat input, three dilated cells with shortcuts,
    linear head split into point and interval bounds.

    Without a tape this is an evaluation step: a throwaway tape is used and
    the states are left detached, so no gradient flows between such steps.
    """
    evaluation = tape is None
    if evaluation:
        tape = Tape()
        states.detach()
    u1 = concat([
        tape.constant(sample_input.week.values),
        tape.constant(np.array([sample_input.level])),
        matvec(model.embedding, tape.constant(sample_input.calendar_vector())),
    ])
    d1, d2, d3 = model.config.dilations
    y1 = cell_step(model.cells[0], states.layers[0], u1, d1)
    y2 = cell_step(model.cells[1], states.layers[1], y1, d2) + y1
    y3 = cell_step(model.cells[2], states.layers[2], y2, d3) + y2
    head = matvec(model.head_w, y3) + tape.leaf(model.head_b)
    if evaluation:
        states.detach()
    return StepOutput(
        point=narrow(head, 0, HORIZON),
        lower=narrow(head, HORIZON, HORIZON),
        upper=narrow(head, 2 * HORIZON, HORIZON),
    )


def model_unroll(model: StackedModel, states: ModelState, samples,
                 tape: Tape | None = None):
    """Forward over chronologically contiguous samples of one series.

    Returns the per-day outputs and the recorded tape; gradients for any
    loss of the outputs come from ``tape.backward``.
    """
    if tape is None:
        tape = Tape()
    samples = list(samples)
    for prev, cur in zip(samples, samples[1:]):
        if cur.series_id != prev.series_id:
            raise ValueError("unroll window spans more than one series")
        if cur.target_date - prev.target_date != timedelta(days=1):
            raise ValueError(
                f"samples not contiguous: {prev.target_date} then "
                f"{cur.target_date}")
    outputs = [model_step(model, states, s.input, tape) for s in samples]
    return outputs, tape
