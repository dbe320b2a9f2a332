"""Minimal reverse-mode autodiff on a recorded operation tape.

Everything downstream (gated cells, the stacked network, training) builds its
forward pass out of the handful of vector operations defined here.  A
:class:`Tape` records each operation together with a vector-Jacobian closure;
:meth:`Tape.backward` replays the record once in reverse and accumulates exact
gradients for every leaf (parameter arrays, inputs).

Values are plain 1-D float64 numpy arrays; parameter matrices enter only
through :func:`matvec`.  Leaves are cached per tape by array identity, so the
same parameter array used at every unrolled step accumulates a single gradient.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import StaleTapeError

__all__ = [
    "Tape",
    "Var",
    "Gradients",
    "matvec",
    "sigmoid",
    "tanh",
    "exp_clipped",
    "concat",
    "narrow",
]


class Var:
    """Handle to one recorded value on a tape."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape._values[self.index]

    def __len__(self) -> int:
        return self.value.shape[0]

    def __add__(self, other: "Var") -> "Var":
        return _add(self, other)

    def __sub__(self, other: "Var") -> "Var":
        return _sub(self, other)

    def __mul__(self, other: "Var") -> "Var":
        return _mul(self, other)

    def __rsub__(self, scalar: float) -> "Var":
        # only used as ``1.0 - gate``
        return _scalar_minus(float(scalar), self)

    def __repr__(self) -> str:
        return f"Var(#{self.index}, {self.value!r})"


def _fingerprint(arr: np.ndarray) -> tuple:
    return (arr.shape, float(arr.sum()), float(np.abs(arr).sum()))


class Tape:
    """Wengert list of operations with per-node vjp closures."""

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._parents: list[tuple[int, ...]] = []
        self._vjps: list = []
        self._leaf_cache: dict[int, int] = {}
        self._leaf_prints: dict[int, tuple] = {}
        self._leaf_arrays: dict[int, np.ndarray] = {}

    # -- node construction -------------------------------------------------

    def _record(self, value: np.ndarray, parents: tuple[int, ...], vjp) -> Var:
        self._values.append(value)
        self._parents.append(parents)
        self._vjps.append(vjp)
        return Var(self, len(self._values) - 1)

    def leaf(self, arr: np.ndarray) -> Var:
        """Register ``arr`` as a gradient-tracked input, cached by identity."""
        key = id(arr)
        idx = self._leaf_cache.get(key)
        if idx is not None:
            return Var(self, idx)
        arr = np.asarray(arr, dtype=np.float64)
        var = self._record(arr, (), None)
        self._leaf_cache[key] = var.index
        self._leaf_prints[var.index] = _fingerprint(arr)
        self._leaf_arrays[var.index] = arr
        return var

    def constant(self, arr: np.ndarray) -> Var:
        """Record a value that never needs a gradient (e.g. cold-start zeros)."""
        return self._record(np.asarray(arr, dtype=np.float64), (), None)

    def zeros(self, n: int) -> Var:
        return self.constant(np.zeros(n))

    def lift(self, x) -> Var:
        """Pass a Var through; wrap a raw array as a constant."""
        if isinstance(x, Var):
            if x.tape is not self:
                raise ValueError("Var belongs to a different tape")
            return x
        return self.constant(x)

    def __len__(self) -> int:
        return len(self._values)

    # -- reverse sweep -----------------------------------------------------

    def backward(self, seeds) -> "Gradients":
        """Accumulate adjoints for ``seeds`` = iterable of (Var, gradient).

        Raises :class:`StaleTapeError` if any leaf array changed since it was
        recorded (e.g. an optimizer update ran before the backward pass).
        """
        for idx, print_ in self._leaf_prints.items():
            if _fingerprint(self._leaf_arrays[idx]) != print_:
                raise StaleTapeError("leaf array mutated since it was recorded")

        adj: dict[int, np.ndarray] = {}
        for var, g in seeds:
            if var.tape is not self:
                raise ValueError("seed Var belongs to a different tape")
            g = np.asarray(g, dtype=np.float64)
            if g.shape != var.value.shape:
                raise ValueError("seed gradient shape mismatch")
            if var.index in adj:
                adj[var.index] = adj[var.index] + g
            else:
                adj[var.index] = g

        for idx in range(len(self._values) - 1, -1, -1):
            g = adj.get(idx)
            if g is None:
                continue
            parents = self._parents[idx]
            if not parents:
                continue
            for pidx, pg in zip(parents, self._vjps[idx](g)):
                if pg is None:
                    continue
                acc = adj.get(pidx)
                adj[pidx] = pg if acc is None else acc + pg
        return Gradients(self, adj)


class Gradients:
    """Read-only view of the adjoints produced by one backward sweep."""

    def __init__(self, tape: Tape, adj: dict[int, np.ndarray]):
        self._tape = tape
        self._adj = adj

    def of(self, var: Var) -> np.ndarray:
        g = self._adj.get(var.index)
        if g is None:
            return np.zeros_like(var.value)
        return g

    def of_array(self, arr: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. a leaf registered via ``Tape.leaf(arr)``."""
        idx = self._tape._leaf_cache.get(id(arr))
        if idx is None:
            return np.zeros_like(np.asarray(arr, dtype=np.float64))
        g = self._adj.get(idx)
        if g is None:
            return np.zeros_like(np.asarray(arr, dtype=np.float64))
        return g


# -- elementwise and linear operations ------------------------------------


def _add(a: Var, b: Var) -> Var:
    t = a.tape
    return t._record(a.value + b.value, (a.index, b.index), lambda g: (g, g))


def _sub(a: Var, b: Var) -> Var:
    t = a.tape
    return t._record(a.value - b.value, (a.index, b.index), lambda g: (g, -g))


def _mul(a: Var, b: Var) -> Var:
    t = a.tape
    av, bv = a.value, b.value
    return t._record(av * bv, (a.index, b.index), lambda g: (g * bv, g * av))


def _scalar_minus(s: float, a: Var) -> Var:
    t = a.tape
    return t._record(s - a.value, (a.index,), lambda g: (-g,))


def matvec(w: np.ndarray, x: Var) -> Var:
    """``w @ x`` where ``w`` is a parameter matrix (auto-registered leaf)."""
    t = x.tape
    wv = t.leaf(w)
    wa, xv = wv.value, x.value
    return t._record(
        wa @ xv,
        (wv.index, x.index),
        lambda g: (np.outer(g, xv), wa.T @ g),
    )


def sigmoid(a: Var) -> Var:
    t = a.tape
    y = expit(a.value)
    return t._record(y, (a.index,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Var) -> Var:
    t = a.tape
    y = np.tanh(a.value)
    return t._record(y, (a.index,), lambda g: (g * (1.0 - y * y),))


def exp_clipped(a: Var, lo: float, hi: float) -> Var:
    """``exp(clip(a, lo, hi))``; gradient is zero on the clipped region."""
    t = a.tape
    av = a.value
    inside = (av >= lo) & (av <= hi)
    y = np.exp(np.clip(av, lo, hi))
    return t._record(y, (a.index,), lambda g: (g * y * inside,))


def concat(parts: list[Var]) -> Var:
    t = parts[0].tape
    sizes = [p.value.shape[0] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits))

    return t._record(
        np.concatenate([p.value for p in parts]),
        tuple(p.index for p in parts),
        vjp,
    )


def narrow(a: Var, start: int, size: int) -> Var:
    t = a.tape
    n = a.value.shape[0]
    if start < 0 or start + size > n:
        raise ValueError("narrow out of range")

    def vjp(g):
        out = np.zeros(n)
        out[start : start + size] = g
        return (out,)

    return t._record(a.value[start : start + size].copy(), (a.index,), vjp)
