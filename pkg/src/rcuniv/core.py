"""Core types for causal functionals on finite input windows.

A window holds the most recent T observations of an n-channel discrete-time
process, row k being the value k steps in the past.  Functionals of the
semi-infinite past are evaluated on such truncations; the targets module
registers the concrete evaluators.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "Window",
    "FunctionalSpec",
    "NilpotentShift",
    "register_evaluator",
    "evaluate_functional",
    "evaluate_functional_batch",
    "nilpotent_product",
    "truncated_conditional_error",
    "write_window_csv",
    "read_window_csv",
]


@dataclass(frozen=True)
class Window:
    """Truncated input history, shape (T, n); row k is the value at lag k.

    Row 0 is the most recent observation.  The array is copied on
    construction and marked read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"window data must be 2-d (T, n), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"window needs T >= 1 and n >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("window entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FunctionalSpec:
    """Description of a causal, time-invariant functional.

    kind selects a registered evaluator, n is the expected channel count,
    memory is the exact memory depth in lags (None for unbounded), and
    params hold the kind-specific real parameters.
    """

    kind: str
    n: int
    memory: int | None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("channel count n must be >= 1")
        if self.memory is not None and self.memory < 0:
            raise ValueError("memory must be >= 0 or None")


# kind -> evaluator acting on a batch of windows, shape (M, T, n) -> (M,)
_EVALUATORS: dict[str, Callable[[FunctionalSpec, np.ndarray], np.ndarray]] = {}


def register_evaluator(kind: str, fn: Callable[[FunctionalSpec, np.ndarray], np.ndarray]) -> None:
    """Register the batch evaluator for a functional kind."""
    _EVALUATORS[kind] = fn


def evaluate_functional_batch(spec: FunctionalSpec, data: np.ndarray) -> np.ndarray:
    """Evaluate spec on a stack of windows, shape (M, T, n) -> (M,)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"batch data must be 3-d (M, T, n), got shape {data.shape}")
    M, T, n = data.shape
    if n != spec.n:
        raise ValueError(f"spec expects {spec.n} channels, window has {n}")
    if spec.memory is not None and T < spec.memory + 1:
        raise ValueError(
            f"functional has memory {spec.memory}, window length {T} is too short"
        )
    try:
        fn = _EVALUATORS[spec.kind]
    except KeyError:
        raise ValueError(f"no evaluator registered for kind {spec.kind!r}") from None
    out = np.asarray(fn(spec, data), dtype=np.float64)
    if out.shape != (M,):
        raise RuntimeError(f"evaluator for {spec.kind!r} returned shape {out.shape}")
    return out


def evaluate_functional(spec: FunctionalSpec, w: Window) -> float:
    """Evaluate spec on a single window."""
    return float(evaluate_functional_batch(spec, w.data[None, :, :])[0])


# ---------------------------------------------------------------------------
# nilpotent shift algebra


@dataclass(frozen=True)
class NilpotentShift:
    """N x N matrix with a single unit entry at (j+1, j), 1-indexed."""

    N: int
    j: int

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not 1 <= self.j <= self.N - 1:
            raise ValueError(f"index j must lie in 1..{self.N - 1}, got {self.j}")

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.N, self.N))
        A[self.j, self.j - 1] = 1.0
        return A


def nilpotent_product(N: int, indices) -> np.ndarray:
    """Product of unit shift matrices, factors applied right to left.

    indices = (j_0, ..., j_L) denotes the product A_{j_L} ... A_{j_0} where
    A_j has its only unit entry at (j+1, j).  The product is nonzero exactly
    when the indices form a consecutive run j_i = j_0 + i, in which case it
    has a single unit entry at row j_L + 1, column j_0.  Computed without
    matrix multiplication.
    """
    indices = list(indices)
    if not indices:
        raise ValueError("need at least one factor")
    for j in indices:
        if not 1 <= j <= N - 1:
            raise ValueError(f"index {j} outside 1..{N - 1}")
    out = np.zeros((N, N))
    consecutive = all(indices[i] == indices[0] + i for i in range(len(indices)))
    if consecutive and indices[-1] + 1 <= N:
        out[indices[-1], indices[0] - 1] = 1.0
    return out


# ---------------------------------------------------------------------------
# truncated conditional expectation


def truncated_conditional_error(
    spec: FunctionalSpec,
    K: int,
    sampler,
    p: float,
    M: int,
    seed: int,
    window_length: int | None = None,
    inner_samples: int = 200,
):
    """Monte Carlo estimate of || H(Z) - E[H(Z) | lags 0..K] ||_p.

    The conditional expectation is estimated per path by holding lags 0..K
    fixed and redrawing the deeper past inner_samples times, which is valid
    only for samplers with independent innovations (the iid kinds).  Windows
    of window_length rows stand in for the full past; pick it so the
    truncation tail of the functional is negligible.

    Returns an LpEstimate.  Raises ValueError for dependent-innovation
    samplers, K < 0, or M < 2.
    """
    from . import metrics
    from .processes import path_rng

    if K < 0:
        raise ValueError("cutoff K must be >= 0")
    if M < 2:
        raise ValueError("need M >= 2 paths")
    if inner_samples < 1:
        raise ValueError("need inner_samples >= 1")
    if not sampler.iid:
        raise ValueError(
            f"sampler kind {sampler.kind!r} does not have independent innovations; "
            "the past-resampling estimator is invalid"
        )
    if window_length is None:
        if spec.memory is None:
            window_length = max(2 * (K + 1), 64)
        else:
            window_length = max(spec.memory + 1, K + 1)
    T = int(window_length)
    if T < K + 1:
        raise ValueError(f"window_length {T} must be at least K + 1 = {K + 1}")
    if spec.memory is not None and T < spec.memory + 1:
        raise ValueError("window_length shorter than the functional's memory")

    n = sampler.n
    R = inner_samples
    deep = T - (K + 1)  # rows to resample per inner draw
    diffs = np.empty(M)
    chunk = max(1, int(2_000_000 // max(1, R * T * n)))
    for start in range(0, M, chunk):
        stop = min(start + chunk, M)
        m = stop - start
        base = np.stack(
            [sampler.draw(path_rng(seed, i), (T, n)) for i in range(start, stop)]
        )
        h_base = evaluate_functional_batch(spec, base)
        if deep == 0:
            # H is measurable w.r.t. the kept lags; conditional error is zero
            diffs[start:stop] = 0.0
            continue
        rep = np.broadcast_to(base[:, None, :, :], (m, R, T, n)).copy()
        for i in range(m):
            rng = path_rng(seed, M + start + i)
            rep[i, :, K + 1 :, :] = sampler.draw(rng, (R, deep, n))
        cond = evaluate_functional_batch(spec, rep.reshape(m * R, T, n))
        cond = cond.reshape(m, R).mean(axis=1)
        diffs[start:stop] = h_base - cond
    return metrics.lp_norm_of_values(diffs, p=p, seed=seed)


# ---------------------------------------------------------------------------
# window CSV round trip


def write_window_csv(w: Window, path) -> None:
    """Write a window as CSV with header lag,ch0,...,ch{n-1}."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag"] + [f"ch{i}" for i in range(w.n)])
        for k in range(w.T):
            writer.writerow([k] + [repr(float(v)) for v in w.data[k]])


def read_window_csv(path) -> Window:
    """Read a window written by write_window_csv; bit-exact for binary64."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "lag":
            raise ValueError(f"{path}: expected header starting with 'lag'")
        n = len(header) - 1
        rows = []
        for line, row in enumerate(reader):
            if len(row) != n + 1:
                raise ValueError(f"{path}: row {line} has {len(row)} fields, want {n + 1}")
            if int(row[0]) != line:
                raise ValueError(f"{path}: lag column must be 0,1,... in order")
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Window(np.array(rows))
