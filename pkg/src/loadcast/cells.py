"""The five gated recurrent cells and their exact training gradients.

Each cell is a pure function of (parameters, state buffers, input) recorded on
a :class:`~loadcast.tape.Tape`, so reverse-mode gradients through any number
of steps come from the tape.  Cells with dilation read both the most recent
state and the state from ``d`` steps ago; plain LSTM/GRU run in one of two
connection variants, fed either by the recent state only or by the delayed
state only.

The split-output cells (dilated LSTM, the merged gate cell, and its attentive
two-stage version) divide the raw activation into a controlling hidden part,
which feeds the gates of later steps, and an output part that goes to the next
layer.  The attentive cell stacks two of the merged cells: the first emits a
per-component attention vector whose exponential rescales the input of the
second.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError
from .tape import Tape, Var, exp_clipped, matvec, narrow, sigmoid, tanh

#: attention pre-activations are clamped to this band before exponentiation
ATTENTION_CLAMP = 10.0


class CellKind(Enum):
    LSTM = "lstm"
    GRU = "gru"
    DLSTM = "dlstm"
    DRNN = "drnn"
    ADRNN = "adrnn"


class Connection(Enum):
    RECENT_ONLY = "recent_only"
    DELAYED_ONLY = "delayed_only"
    BOTH = "both"


#: gate layout per cell kind, in parameter/initialization order
GATE_NAMES = {
    CellKind.LSTM: ("forget", "input", "output", "candidate"),
    CellKind.GRU: ("reset", "update", "candidate"),
    CellKind.DLSTM: ("forget", "input", "output", "candidate"),
    CellKind.DRNN: ("fusion", "update", "output", "candidate"),
}


@dataclass
class GateBlock:
    """Weights of one gate: input, recent-state, delayed-state, bias."""

    W: np.ndarray
    V: np.ndarray
    U: np.ndarray | None
    b: np.ndarray


@dataclass
class CellParams:
    kind: CellKind
    connection: Connection
    input_size: int
    hidden_size: int  # controlling state fed back into the gates
    out_size: int  # what the cell passes to the next layer
    cell_size: int  # size of the c-state (0 when the cell has none)
    gates: dict[str, GateBlock] | None = None
    lower: "CellParams | None" = None  # attentive cell only
    upper: "CellParams | None" = None

    def named_arrays(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        """All learnable arrays in a fixed, deterministic order."""
        out = []
        if self.kind is CellKind.ADRNN:
            out += self.lower.named_arrays(prefix + "lower.")
            out += self.upper.named_arrays(prefix + "upper.")
            return out
        for name in GATE_NAMES[self.kind]:
            gate = self.gates[name]
            out.append((f"{prefix}{name}.W", gate.W))
            out.append((f"{prefix}{name}.V", gate.V))
            if gate.U is not None:
                out.append((f"{prefix}{name}.U", gate.U))
            out.append((f"{prefix}{name}.b", gate.b))
        return out


class CellState:
    """Ring buffers of recent h- and c-states.

    Entries may be raw arrays (detached, e.g. across truncation boundaries) or
    tape Vars during a recorded unroll.  Lags beyond recorded history read as
    cold-start zeros.
    """

    def __init__(self, capacity: int, track_c: bool = True):
        self.capacity = max(1, capacity)
        self.track_c = track_c
        self._h = deque(maxlen=self.capacity)
        self._c = deque(maxlen=self.capacity) if track_c else None

    def __len__(self) -> int:
        return len(self._h)

    def push(self, h, c=None):
        self._h.append(h)
        if self.track_c:
            self._c.append(c)

    def h_lag(self, k: int):
        """State stored ``k`` steps ago, or None before enough history."""
        if k < 1 or k > self.capacity:
            raise ValueError(f"lag {k} outside buffer capacity {self.capacity}")
        if k > len(self._h):
            return None
        return self._h[-k]

    def c_lag(self, k: int):
        if not self.track_c:
            raise ValueError("cell has no c-state")
        if k < 1 or k > self.capacity:
            raise ValueError(f"lag {k} outside buffer capacity {self.capacity}")
        if k > len(self._c):
            return None
        return self._c[-k]

    def detach(self):
        """Replace any recorded Vars by their values (truncation boundary)."""
        self._h = deque((_value_of(h) for h in self._h), maxlen=self.capacity)
        if self.track_c:
            self._c = deque((_value_of(c) for c in self._c), maxlen=self.capacity)


class AdCellState:
    """Paired states of the attentive cell's lower and upper stages."""

    def __init__(self, capacity: int):
        self.lower = CellState(capacity)
        self.upper = CellState(capacity)

    def __len__(self) -> int:
        return len(self.lower)

    def detach(self):
        self.lower.detach()
        self.upper.detach()


def _value_of(entry):
    return entry.value if isinstance(entry, Var) else entry


def new_state(params: CellParams, dilation: int):
    """Fresh zeroed state buffers sized for ``dilation``."""
    if params.kind is CellKind.ADRNN:
        return AdCellState(dilation)
    return CellState(dilation, track_c=params.kind is not CellKind.GRU)


def cell_init(
    kind: CellKind,
    input_size: int,
    hidden_size: int,
    out_size: int | None = None,
    upper_hidden_size: int | None = None,
    connection: Connection | None = None,
    dilation: int = 1,
    seed=0,
) -> tuple[CellParams, "CellState | AdCellState"]:
    """Build cell parameters (uniform +-1/sqrt(fan_in), zero biases) and state.

    Same seed, same sizes: bit-identical parameters.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if input_size < 1 or hidden_size < 1:
        raise ConfigError("sizes must be positive")
    if dilation < 1:
        raise ConfigError("dilation must be >= 1")

    if kind in (CellKind.LSTM, CellKind.GRU):
        if connection is None:
            connection = Connection.RECENT_ONLY
        if connection is Connection.BOTH:
            raise ConfigError(f"{kind.value} supports recent_only or delayed_only")
        if out_size is not None and out_size != hidden_size:
            raise ConfigError(f"{kind.value} output is its hidden state")
        cell_size = hidden_size if kind is CellKind.LSTM else 0
        params = CellParams(kind, connection, input_size, hidden_size,
                            hidden_size, cell_size)
        gate_size = hidden_size
        _init_gates(params, gate_size, with_delayed=False, rng=rng)
    elif kind in (CellKind.DLSTM, CellKind.DRNN):
        if connection not in (None, Connection.BOTH):
            raise ConfigError(f"{kind.value} uses both recent and delayed connections")
        if out_size is None or out_size < 1:
            raise ConfigError(f"{kind.value} needs an output size")
        cell_size = hidden_size + out_size
        params = CellParams(kind, Connection.BOTH, input_size, hidden_size,
                            out_size, cell_size)
        _init_gates(params, cell_size, with_delayed=True, rng=rng)
    elif kind is CellKind.ADRNN:
        if connection not in (None, Connection.BOTH):
            raise ConfigError("adrnn uses both recent and delayed connections")
        if out_size is None or out_size < 1:
            raise ConfigError("adrnn needs an output size")
        if upper_hidden_size is None:
            upper_hidden_size = hidden_size
        lower, _ = cell_init(CellKind.DRNN, input_size, hidden_size,
                             out_size=input_size, seed=rng)
        upper, _ = cell_init(CellKind.DRNN, input_size, upper_hidden_size,
                             out_size=out_size, seed=rng)
        params = CellParams(CellKind.ADRNN, Connection.BOTH, input_size,
                            hidden_size, out_size, upper.cell_size,
                            lower=lower, upper=upper)
    else:
        raise ConfigError(f"unknown cell kind {kind!r}")
    return params, new_state(params, dilation)


def _init_gates(params: CellParams, gate_size: int, with_delayed: bool, rng):
    def uniform(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    params.gates = {}
    for name in GATE_NAMES[params.kind]:
        params.gates[name] = GateBlock(
            W=uniform(gate_size, params.input_size),
            V=uniform(gate_size, params.hidden_size),
            U=uniform(gate_size, params.hidden_size) if with_delayed else None,
            b=np.zeros(gate_size),
        )


# -- forward equations -----------------------------------------------------


def _fetch(tape: Tape, entry, size: int) -> Var:
    if entry is None:
        return tape.zeros(size)
    return tape.lift(entry)


def _reference_lag(params: CellParams, dilation: int) -> int:
    if params.connection is Connection.RECENT_ONLY:
        return 1
    if params.connection is Connection.DELAYED_ONLY:
        return dilation
    raise ValueError("dilated cells use explicit recent+delayed terms")


def _pre(tape, gate: GateBlock, x: Var, h_recent: Var, h_delayed: Var | None) -> Var:
    acc = matvec(gate.W, x) + matvec(gate.V, h_recent)
    if h_delayed is not None:
        acc = acc + matvec(gate.U, h_delayed)
    return acc + tape.leaf(gate.b)


def _check_input(params: CellParams, x: Var):
    if len(x) != params.input_size:
        raise ValueError(f"input length {len(x)} != cell input size {params.input_size}")


def lstm_step(params: CellParams, state: CellState, x: Var, dilation: int = 1) -> Var:
    """Classic LSTM step; the connection variant picks which lag feeds it."""
    _check_input(params, x)
    t = x.tape
    lag = _reference_lag(params, dilation)
    h_ref = _fetch(t, state.h_lag(lag), params.hidden_size)
    c_ref = _fetch(t, state.c_lag(lag), params.cell_size)
    g = params.gates
    forget = sigmoid(_pre(t, g["forget"], x, h_ref, None))
    infl = sigmoid(_pre(t, g["input"], x, h_ref, None))
    out = sigmoid(_pre(t, g["output"], x, h_ref, None))
    cand = tanh(_pre(t, g["candidate"], x, h_ref, None))
    c = forget * c_ref + infl * cand
    h = out * tanh(c)
    state.push(h, c)
    return h


def gru_step(params: CellParams, state: CellState, x: Var, dilation: int = 1) -> Var:
    _check_input(params, x)
    t = x.tape
    lag = _reference_lag(params, dilation)
    h_ref = _fetch(t, state.h_lag(lag), params.hidden_size)
    g = params.gates
    reset = sigmoid(_pre(t, g["reset"], x, h_ref, None))
    update = sigmoid(_pre(t, g["update"], x, h_ref, None))
    cand_gate = g["candidate"]
    cand = tanh(matvec(cand_gate.W, x) + matvec(cand_gate.V, reset * h_ref)
                + t.leaf(cand_gate.b))
    h = (1.0 - update) * h_ref + update * cand
    state.push(h)
    return h


def _split_output(hp: Var, hidden_size: int, out_size: int) -> tuple[Var, Var]:
    return narrow(hp, 0, hidden_size), narrow(hp, hidden_size, out_size)


def dlstm_step(params: CellParams, state: CellState, x: Var, dilation: int) -> Var:
    """LSTM with an extra delayed-state term and a split output."""
    _check_input(params, x)
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    t = x.tape
    h1 = _fetch(t, state.h_lag(1), params.hidden_size)
    hd = _fetch(t, state.h_lag(dilation), params.hidden_size)
    c1 = _fetch(t, state.c_lag(1), params.cell_size)
    g = params.gates
    forget = sigmoid(_pre(t, g["forget"], x, h1, hd))
    infl = sigmoid(_pre(t, g["input"], x, h1, hd))
    out = sigmoid(_pre(t, g["output"], x, h1, hd))
    cand = tanh(_pre(t, g["candidate"], x, h1, hd))
    c = forget * c1 + infl * cand
    hp = out * tanh(c)
    h, y = _split_output(hp, params.hidden_size, params.out_size)
    state.push(h, c)
    return y


def drnn_step(params: CellParams, state: CellState, x: Var, dilation: int) -> Var:
    """Merged-gate cell: c is a gated fusion of recent and delayed c-states.

    The raw activation is ``output_gate * c`` with no tanh, then split.
    """
    _check_input(params, x)
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    t = x.tape
    h1 = _fetch(t, state.h_lag(1), params.hidden_size)
    hd = _fetch(t, state.h_lag(dilation), params.hidden_size)
    c1 = _fetch(t, state.c_lag(1), params.cell_size)
    cd = _fetch(t, state.c_lag(dilation), params.cell_size)
    g = params.gates
    fusion = sigmoid(_pre(t, g["fusion"], x, h1, hd))
    update = sigmoid(_pre(t, g["update"], x, h1, hd))
    out = sigmoid(_pre(t, g["output"], x, h1, hd))
    cand = tanh(_pre(t, g["candidate"], x, h1, hd))
    c = update * (fusion * c1 + (1.0 - fusion) * cd) + (1.0 - update) * cand
    hp = out * c
    h, y = _split_output(hp, params.hidden_size, params.out_size)
    state.push(h, c)
    return y


def adrnn_step(params: CellParams, state: AdCellState, x: Var, dilation: int) -> Var:
    """Attentive cell: lower stage emits exp-weights that rescale the input
    of the upper stage; both stages advance once per step."""
    _check_input(params, x)
    attention = drnn_step(params.lower, state.lower, x, dilation)
    weights = exp_clipped(attention, -ATTENTION_CLAMP, ATTENTION_CLAMP)
    reweighted = x * weights
    return drnn_step(params.upper, state.upper, reweighted, dilation)


_STEP_FN = {
    CellKind.LSTM: lstm_step,
    CellKind.GRU: gru_step,
    CellKind.DLSTM: dlstm_step,
    CellKind.DRNN: drnn_step,
    CellKind.ADRNN: adrnn_step,
}


def cell_step(params: CellParams, state, x: Var, dilation: int) -> Var:
    return _STEP_FN[params.kind](params, state, x, dilation)


def cell_gradient(
    params: CellParams,
    inputs: list[np.ndarray],
    dilation: int,
    upstream: list[np.ndarray],
):
    """Gradients of ``sum_t upstream[t] . y_t`` from a cold-start unroll.

    Returns ``(param_grads, input_grads)`` where ``param_grads`` maps the
    names from :meth:`CellParams.named_arrays` to arrays.
    """
    if len(inputs) != len(upstream):
        raise ValueError("need one upstream gradient per input step")
    tape = Tape()
    state = new_state(params, dilation)
    seeds = []
    in_vars = []
    for x_arr, g in zip(inputs, upstream):
        x = tape.leaf(np.asarray(x_arr, dtype=np.float64))
        in_vars.append(x)
        y = cell_step(params, state, x, dilation)
        seeds.append((y, g))
    grads = tape.backward(seeds)
    param_grads = {name: grads.of_array(arr) for name, arr in params.named_arrays()}
    input_grads = [grads.of(v) for v in in_vars]
    return param_grads, input_grads
