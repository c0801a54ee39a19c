"""Reservoir systems: linear, trigonometric state-affine, and echo state networks.

All systems share the update x_t = F(x_{t-1}, z_t); windows are consumed
oldest row first so the final state sits at lag 0.  Certification of the
echo state property is by construction (exact nilpotency of the coupling
support) or by operator-norm contraction; empirical decay is never
accepted as a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Window
from .readouts import (
    LinearReadout,
    NetworkReadout,
    eval_readout,
    get_activation,
    readout_from_dict,
    readout_to_dict,
)

__all__ = [
    "StateOverflowError",
    "EspNotCertifiedError",
    "LinearReservoir",
    "TrigPolynomial",
    "TrigSAS",
    "EchoStateNetwork",
    "EspReport",
    "run_reservoir",
    "final_states",
    "certify_esp",
    "washout_decay",
    "fit_decay_rate",
    "build_shift_register",
    "build_nilpotent_trig_sas",
    "direct_sum_sas",
    "fit_identity_network",
    "identity_fit_error",
    "build_block_esn",
    "block_esn_functional",
    "random_esn",
    "random_trig_sas",
    "ReservoirModel",
    "system_to_dict",
    "system_from_dict",
]


class StateOverflowError(RuntimeError):
    """Raised when a state update produces a non-finite entry."""


class EspNotCertifiedError(RuntimeError):
    """Raised when an operation requires an ESP certificate and none holds."""


# ---------------------------------------------------------------------------
# system types


def _as_matrix(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LinearReservoir:
    """x_t = A x_{t-1} + c z_t with A (N, N) and c (N, n)."""

    A: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        c = _as_matrix(self.c, "c")
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if c.shape[0] != A.shape[0]:
            raise ValueError("c must have N rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.c.shape[1]


@dataclass(frozen=True)
class TrigPolynomial:
    """Matrix-valued trig polynomial R(z) = sum_k A_k cos(u_k.z) + B_k sin(v_k.z).

    Stored as stacked arrays: cos_mats/sin_mats have shape (r, rows, cols)
    and cos_freqs/sin_freqs shape (r, n).  A term may use only one of its
    two matrices (the other all zeros).
    """

    cos_mats: np.ndarray
    sin_mats: np.ndarray
    cos_freqs: np.ndarray
    sin_freqs: np.ndarray

    def __post_init__(self):
        cm = np.asarray(self.cos_mats, dtype=np.float64)
        sm = np.asarray(self.sin_mats, dtype=np.float64)
        cf = np.atleast_2d(np.asarray(self.cos_freqs, dtype=np.float64))
        sf = np.atleast_2d(np.asarray(self.sin_freqs, dtype=np.float64))
        if cm.ndim != 3 or sm.shape != cm.shape:
            raise ValueError("cos_mats and sin_mats must share shape (r, rows, cols)")
        r = cm.shape[0]
        if cf.shape[0] != r or sf.shape[0] != r or cf.shape[1] != sf.shape[1]:
            if r == 0:
                cf = cf.reshape(0, max(cf.shape[1] if cf.size else 1, 1))
                sf = sf.reshape(0, cf.shape[1])
            else:
                raise ValueError("frequency arrays must have shape (r, n)")
        for name, arr in (("cos_mats", cm), ("sin_mats", sm),
                          ("cos_freqs", cf), ("sin_freqs", sf)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    @property
    def r(self) -> int:
        return self.cos_mats.shape[0]

    @property
    def rows(self) -> int:
        return self.cos_mats.shape[1]

    @property
    def cols(self) -> int:
        return self.cos_mats.shape[2]

    @property
    def n(self) -> int:
        return self.cos_freqs.shape[1]

    def apply(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        """R(z_m) x_m per row for z (M, n) and x (M, cols) -> (M, rows)."""
        if self.r == 0:
            return np.zeros((z.shape[0], self.rows))
        c = np.cos(z @ self.cos_freqs.T)
        s = np.sin(z @ self.sin_freqs.T)
        out = np.einsum("mk,kij,mj->mi", c, self.cos_mats, x)
        out += np.einsum("mk,kij,mj->mi", s, self.sin_mats, x)
        return out

    def value_vector(self, z: np.ndarray) -> np.ndarray:
        """R(z_m) for single-column polynomials: z (M, n) -> (M, rows)."""
        if self.cols != 1:
            raise ValueError("value_vector needs a single-column polynomial")
        if self.r == 0:
            return np.zeros((z.shape[0], self.rows))
        c = np.cos(z @ self.cos_freqs.T)
        s = np.sin(z @ self.sin_freqs.T)
        return c @ self.cos_mats[:, :, 0] + s @ self.sin_mats[:, :, 0]

    def norm_bound(self) -> float:
        """sup_z ||R(z)||_2 <= sum_k ||A_k||_2 + ||B_k||_2."""
        total = 0.0
        for k in range(self.r):
            total += np.linalg.norm(self.cos_mats[k], 2)
            total += np.linalg.norm(self.sin_mats[k], 2)
        return float(total)

    def support(self) -> np.ndarray:
        """Boolean (rows, cols) union of coefficient supports."""
        sup = np.zeros((self.rows, self.cols), dtype=bool)
        for k in range(self.r):
            sup |= self.cos_mats[k] != 0.0
            sup |= self.sin_mats[k] != 0.0
        return sup


@dataclass(frozen=True)
class TrigSAS:
    """State-affine system x_t = P(z_t) x_{t-1} + Q(z_t), y_t = W . x_t."""

    P: TrigPolynomial
    Q: TrigPolynomial
    W: np.ndarray
    # certificate attached by constructors that guarantee ESP structurally
    esp_hint: "EspReport | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        W = np.atleast_1d(np.asarray(self.W, dtype=np.float64))
        if self.P.rows != self.P.cols:
            raise ValueError("P must be square")
        if self.Q.cols != 1 or self.Q.rows != self.P.rows:
            raise ValueError("Q must be a single-column polynomial with N rows")
        if W.shape != (self.P.rows,):
            raise ValueError("W must have N entries")
        if self.P.r and self.Q.r and self.P.n != self.Q.n:
            raise ValueError("P and Q must share the input channel count")
        object.__setattr__(self, "W", W)

    @property
    def N(self) -> int:
        return self.P.rows

    @property
    def n(self) -> int:
        return self.Q.n if self.Q.r else self.P.n


@dataclass(frozen=True)
class EchoStateNetwork:
    """x_t = sigma(A x_{t-1} + C z_t + bias), y_t = W . x_t."""

    A: np.ndarray
    C: np.ndarray
    bias: np.ndarray
    W: np.ndarray
    activation: str = "logistic"

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        C = _as_matrix(self.C, "C")
        bias = np.atleast_1d(np.asarray(self.bias, dtype=np.float64))
        W = np.atleast_1d(np.asarray(self.W, dtype=np.float64))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        N = A.shape[0]
        if C.shape[0] != N or bias.shape != (N,) or W.shape != (N,):
            raise ValueError("C, bias, W must match the state dimension")
        get_activation(self.activation)
        for name, arr in (("A", A), ("C", C), ("bias", bias), ("W", W)):
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[1]


# ---------------------------------------------------------------------------
# running


def _step(system, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    if isinstance(system, LinearReservoir):
        # overflow surfaces as a StateOverflowError from the finite check
        with np.errstate(over="ignore", invalid="ignore"):
            return x @ system.A.T + z @ system.c.T
    if isinstance(system, TrigSAS):
        return system.P.apply(z, x) + system.Q.value_vector(z)
    if isinstance(system, EchoStateNetwork):
        act = get_activation(system.activation)
        return act.fn(x @ system.A.T + z @ system.C.T + system.bias)
    raise TypeError(f"not a reservoir system: {type(system).__name__}")


def _check_input(system, n: int) -> None:
    if n != system.n:
        raise ValueError(f"system expects {system.n} channels, window has {n}")


def run_reservoir(system, w: Window, x_init: np.ndarray | None = None):
    """Drive the system over a window, oldest row first.

    Returns (states, y0) where states has shape (T, N) with row k the state
    at lag k (row 0 final), and y0 is W . x_0 for systems with a built-in
    linear readout, else None.  Raises StateOverflowError on non-finite
    states.
    """
    _check_input(system, w.n)
    N = system.N
    x = np.zeros((1, N)) if x_init is None else np.asarray(x_init, dtype=np.float64).reshape(1, N)
    states = np.empty((w.T, N))
    for k in range(w.T - 1, -1, -1):
        x = _step(system, x, w.data[k][None, :])
        if not np.all(np.isfinite(x)):
            raise StateOverflowError(f"non-finite state at lag {k}")
        states[k] = x[0]
    if isinstance(system, LinearReservoir):
        return states, None
    return states, float(states[0] @ system.W)


def final_states(system, data: np.ndarray, x_init: np.ndarray | None = None) -> np.ndarray:
    """Final states over a batch of windows, (M, T, n) -> (M, N)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"batch data must be (M, T, n), got shape {data.shape}")
    M, T, n = data.shape
    _check_input(system, n)
    if x_init is None:
        x = np.zeros((M, system.N))
    else:
        x = np.broadcast_to(np.asarray(x_init, dtype=np.float64), (M, system.N)).copy()
    for k in range(T - 1, -1, -1):
        x = _step(system, x, data[:, k, :])
        if not np.all(np.isfinite(x)):
            raise StateOverflowError(f"non-finite state at lag {k}")
    return x


# ---------------------------------------------------------------------------
# echo state property


@dataclass(frozen=True)
class EspReport:
    """Certificate for the echo state property.

    For geometric methods (spectral, lipschitz-spectral) bound is a
    per-step contraction factor and certification requires bound < 1.  For
    the nilpotent method bound is still a sound per-step growth factor
    (it may exceed 1) and state discrepancies vanish exactly after
    nilpotency_index steps.  empirical_decay_rate is informational only
    and never certifies.
    """

    certified: bool
    method: str  # spectral | nilpotent | lipschitz-spectral | empirical
    bound: float
    empirical_decay_rate: float | None = None
    nilpotency_index: int | None = None


def _support_nilpotency_index(support: np.ndarray) -> int | None:
    """Smallest m with support^m = 0 under boolean reachability, else None."""
    N = support.shape[0]
    power = support.copy()
    for m in range(1, N + 1):
        if not power.any():
            return m
        power = (power.astype(np.int64) @ support.astype(np.int64)) > 0
    return None


def certify_esp(system, window: Window | None = None, seed: int = 0) -> EspReport:
    """Sound ESP certificate; never certified from empirical decay alone.

    When no structural certificate holds and a window is supplied, the
    report carries a fitted empirical decay rate with certified=False and
    method 'empirical'.
    """
    if isinstance(system, LinearReservoir):
        sigma = float(np.linalg.norm(system.A, 2))
        idx = _support_nilpotency_index(system.A != 0.0)
        if idx is not None:
            return EspReport(True, "nilpotent", sigma, nilpotency_index=idx)
        if sigma < 1.0:
            return EspReport(True, "spectral", sigma)
        report = EspReport(False, "spectral", sigma)
    elif isinstance(system, TrigSAS):
        bound = system.P.norm_bound()
        idx = _support_nilpotency_index(system.P.support())
        if idx is not None:
            return EspReport(True, "nilpotent", bound, nilpotency_index=idx)
        if bound < 1.0:
            return EspReport(True, "spectral", bound)
        if system.esp_hint is not None:
            return system.esp_hint
        report = EspReport(False, "spectral", bound)
    elif isinstance(system, EchoStateNetwork):
        L = get_activation(system.activation).lipschitz
        factor = float(L * np.linalg.norm(system.A, 2))
        idx = _support_nilpotency_index(system.A != 0.0)
        if idx is not None:
            return EspReport(True, "nilpotent", factor, nilpotency_index=idx)
        if factor < 1.0:
            return EspReport(True, "lipschitz-spectral", factor)
        report = EspReport(False, "lipschitz-spectral", factor)
    else:
        raise TypeError(f"not a reservoir system: {type(system).__name__}")

    if window is not None:
        dists = washout_decay(system, window, seed=seed)
        return EspReport(False, "empirical", report.bound,
                         empirical_decay_rate=fit_decay_rate(dists))
    return report


def washout_decay(
    system,
    w: Window,
    x_init_a: np.ndarray | None = None,
    x_init_b: np.ndarray | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Distances ||x_t - x'_t||_2 for two initial states driven identically.

    Returns an array of length T + 1; entry 0 is the initial distance.
    Missing initial states are drawn standard normal from the seed.
    """
    _check_input(system, w.n)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(system.N) if x_init_a is None else np.asarray(x_init_a, float)
    b = rng.standard_normal(system.N) if x_init_b is None else np.asarray(x_init_b, float)
    xa, xb = a.reshape(1, -1), b.reshape(1, -1)
    dists = np.empty(w.T + 1)
    dists[0] = np.linalg.norm(xa - xb)
    for i, k in enumerate(range(w.T - 1, -1, -1)):
        z = w.data[k][None, :]
        xa, xb = _step(system, xa, z), _step(system, xb, z)
        if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(xb))):
            raise StateOverflowError(f"non-finite state at lag {k}")
        dists[i + 1] = np.linalg.norm(xa - xb)
    return dists


def fit_decay_rate(distances: np.ndarray) -> float:
    """Geometric rate fitted to the positive tail of a distance sequence."""
    d = np.asarray(distances, dtype=np.float64)
    steps = np.arange(d.shape[0])
    keep = d > 0
    if keep.sum() < 2:
        return 0.0
    slope = np.polyfit(steps[keep], np.log(d[keep]), 1)[0]
    return float(np.exp(slope))


# ---------------------------------------------------------------------------
# constructive builders


def build_shift_register(n: int, K: int) -> LinearReservoir:
    """Linear reservoir whose state stacks the last K + 1 inputs.

    N = n (K + 1); the state after consuming at least K + 1 inputs is
    exactly (z_0, z_-1, ..., z_-K) stacked lag-major.  The update moves
    entries by copies and additions with zeros only, so the identity is
    exact in floating point.
    """
    if n < 1 or K < 0:
        raise ValueError("need n >= 1 and K >= 0")
    N = n * (K + 1)
    A = np.zeros((N, N))
    idx = np.arange(n, N)
    A[idx, idx - n] = 1.0
    c = np.zeros((N, n))
    c[:n, :] = np.eye(n)
    return LinearReservoir(A, c)


def _unit_shift(N: int, j: int) -> np.ndarray:
    A = np.zeros((N, N))
    A[j, j - 1] = 1.0
    return A


def build_nilpotent_trig_sas(freqs, sine_lags=()) -> TrigSAS:
    """Nilpotent state-affine system realizing a product of sines/cosines.

    freqs has shape (K + 1, n); the system output after at least K + 1
    steps equals prod_k g_k(freqs[k] . z_-k) with g_k = sin for lags in
    sine_lags and cos otherwise.  N = K + 1; the state polynomial uses a
    chain of unit shift matrices so every product of more than K factors
    vanishes identically.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.ndim == 1:
        freqs = freqs[:, None]
    K = freqs.shape[0] - 1
    n = freqs.shape[1]
    sine_lags = set(int(k) for k in sine_lags)
    if any(k < 0 or k > K for k in sine_lags):
        raise ValueError(f"sine lags must lie in 0..{K}")
    N = K + 1

    cos_mats = np.zeros((K, N, N))
    sin_mats = np.zeros((K, N, N))
    cos_freqs = np.zeros((K, n))
    sin_freqs = np.zeros((K, n))
    for j in range(K):
        # term j carries the lag-j factor on the shift matrix with unit
        # entry at (K - j + 1, K - j), 1-indexed
        mat = _unit_shift(N, K - j)
        if j in sine_lags:
            sin_mats[j] = mat
            sin_freqs[j] = freqs[j]
        else:
            cos_mats[j] = mat
            cos_freqs[j] = freqs[j]
    P = TrigPolynomial(cos_mats, sin_mats, cos_freqs, sin_freqs)

    qc = np.zeros((1, N, 1))
    qs = np.zeros((1, N, 1))
    qcf = np.zeros((1, n))
    qsf = np.zeros((1, n))
    if K in sine_lags:
        qs[0, 0, 0] = 1.0
        qsf[0] = freqs[K]
    else:
        qc[0, 0, 0] = 1.0
        qcf[0] = freqs[K]
    Q = TrigPolynomial(qc, qs, qcf, qsf)

    W = np.zeros(N)
    W[N - 1] = 1.0
    return TrigSAS(P, Q, W)


def _embed_terms(poly: TrigPolynomial, rows: int, cols: int, r0: int, c0: int,
                 n: int) -> tuple[np.ndarray, ...]:
    cm = np.zeros((poly.r, rows, cols))
    sm = np.zeros((poly.r, rows, cols))
    cm[:, r0 : r0 + poly.rows, c0 : c0 + poly.cols] = poly.cos_mats
    sm[:, r0 : r0 + poly.rows, c0 : c0 + poly.cols] = poly.sin_mats
    cf = poly.cos_freqs if poly.r else np.zeros((0, n))
    sf = poly.sin_freqs if poly.r else np.zeros((0, n))
    return cm, sm, cf, sf


def direct_sum_sas(s1: TrigSAS, s2: TrigSAS, lam: float) -> TrigSAS:
    """Combine two certified systems so the output is H1 + lam * H2.

    The state polynomials act block-diagonally on the concatenated state;
    the drive terms stack; the readout concatenates W1 with lam * W2.
    Raises if either input lacks an ESP certificate.
    """
    r1, r2 = certify_esp(s1), certify_esp(s2)
    if not (r1.certified and r2.certified):
        raise ValueError("direct sum requires both systems ESP-certified")
    if s1.n != s2.n:
        raise ValueError("systems must share the input channel count")
    N1, N2, n = s1.N, s2.N, s1.n
    N = N1 + N2

    # P blocks: top-left and bottom-right
    pc1, ps1, pf1c, pf1s = _embed_terms(s1.P, N, N, 0, 0, n)
    pc2, ps2, pf2c, pf2s = _embed_terms(s2.P, N, N, N1, N1, n)
    P = TrigPolynomial(
        np.concatenate([pc1, pc2]), np.concatenate([ps1, ps2]),
        np.concatenate([pf1c, pf2c]), np.concatenate([pf1s, pf2s]),
    )
    # Q blocks: stacked column
    qc1, qs1, qf1c, qf1s = _embed_terms(s1.Q, N, 1, 0, 0, n)
    qc2, qs2, qf2c, qf2s = _embed_terms(s2.Q, N, 1, N1, 0, n)
    Q = TrigPolynomial(
        np.concatenate([qc1, qc2]), np.concatenate([qs1, qs2]),
        np.concatenate([qf1c, qf2c]), np.concatenate([qf1s, qf2s]),
    )
    W = np.concatenate([s1.W, lam * s2.W])

    hint = None
    if r1.method != "nilpotent" and r2.method != "nilpotent":
        # block-diagonal P: per-step factor is the worse of the two blocks
        combined = max(r1.bound, r2.bound)
        if combined < 1.0:
            hint = EspReport(True, "spectral", combined)
    return TrigSAS(P, Q, W, esp_hint=hint)


# ---------------------------------------------------------------------------
# identity-approximating networks and the block echo state construction


def fit_identity_network(
    n: int,
    half_width: float,
    hidden_units: int,
    activation: str = "logistic",
    seed: int = 0,
    grid_points: int = 9,
    random_points: int = 400,
    ridge: float = 1e-10,
) -> tuple[list[NetworkReadout], float]:
    """Per-channel networks approximating the identity on [-m, m]^n.

    Hidden layers are random features (Gaussian directions, thresholds
    spread over the projected range); output weights come from ridge least
    squares against the coordinate values on a grid plus random points.
    Returns the networks and the measured sup error over a dense check set,
    which is the epsilon entering downstream approximation bounds.
    """
    if hidden_units < 1:
        raise ValueError("hidden_units must be >= 1")
    m = float(half_width)
    if m <= 0:
        raise ValueError("half_width must be > 0")
    rng = np.random.default_rng(seed)
    if n <= 2:
        axes = [np.linspace(-m, m, grid_points)] * n
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    else:
        grid = rng.uniform(-m, m, size=(grid_points**2, n))
    X = np.vstack([grid, rng.uniform(-m, m, size=(random_points, n))])

    nets = []
    for i in range(n):
        alpha = rng.standard_normal((hidden_units, n)) / (m * np.sqrt(n))
        proj = X @ alpha.T
        theta = rng.uniform(proj.min(axis=0), proj.max(axis=0))
        feats = get_activation(activation).fn(proj - theta)
        lhs = np.vstack([feats, np.sqrt(ridge) * np.eye(hidden_units)])
        rhs = np.concatenate([X[:, i], np.zeros(hidden_units)])
        beta = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        nets.append(NetworkReadout(beta, alpha, theta, activation))

    eps = identity_fit_error(nets, m, rng.uniform(-m, m, size=(2000, n)))
    return nets, eps


def _identity_apply(nets: Sequence[NetworkReadout], x: np.ndarray) -> np.ndarray:
    """J(x) per row: x (M, n) -> (M, n) via the per-channel networks."""
    return np.stack([nets[i].hidden(x) @ nets[i].beta for i in range(len(nets))], axis=1)


def identity_fit_error(nets: Sequence[NetworkReadout], half_width: float,
                       points: np.ndarray | None = None) -> float:
    """Measured sup_x max_i |J(x)_i - x_i| over a check set in [-m, m]^n."""
    n = len(nets)
    if points is None:
        axes = [np.linspace(-half_width, half_width, 25)] * min(n, 2)
        if n <= 2:
            points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        else:
            points = np.random.default_rng(0).uniform(
                -half_width, half_width, size=(4000, n)
            )
    return float(np.max(np.abs(_identity_apply(nets, points) - points)))


def build_block_esn(
    inner: NetworkReadout,
    identity_nets: Sequence[NetworkReadout],
    n: int,
) -> EchoStateNetwork:
    """Echo state network realizing a shallow network of the last K + 1 inputs.

    inner maps the stacked window (z_0, z_-1, ..., z_-K) in R^{n(K+1)}
    through one hidden layer; identity_nets feed each input forward one
    step per block.  The coupling matrix is strictly block lower
    triangular, so the state forgets its initialization exactly after
    K + 1 steps, and the output reproduces the closed form of
    block_esn_functional once the window is at least K + 1 long.
    """
    if inner.alpha.shape[1] % n != 0:
        raise ValueError("inner network input dimension must be a multiple of n")
    K = inner.alpha.shape[1] // n - 1
    if K < 0:
        raise ValueError("inner network must read at least the current input")
    lag_blocks = [inner.alpha[:, j * n : (j + 1) * n] for j in range(K + 1)]
    zeta_bar = -inner.theta
    Nbar = inner.k

    if K == 0:
        return EchoStateNetwork(
            A=np.zeros((Nbar, Nbar)), C=lag_blocks[0], bias=zeta_bar,
            W=inner.beta, activation=inner.activation,
        )

    if len(identity_nets) != n:
        raise ValueError(f"need one identity network per channel, got {len(identity_nets)}")
    for net in identity_nets:
        if net.activation != inner.activation:
            raise ValueError("identity networks must share the inner activation")
        if net.alpha.shape[1] != n:
            raise ValueError("identity networks must map R^n")

    A_J = np.vstack([net.alpha for net in identity_nets])  # (N_J, n)
    zeta_J = -np.concatenate([net.theta for net in identity_nets])
    N_J = A_J.shape[0]
    W_J = np.zeros((n, N_J))  # block-diagonal rows of output weights
    off = 0
    for i, net in enumerate(identity_nets):
        W_J[i, off : off + net.k] = net.beta
        off += net.k

    N = K * N_J + Nbar
    A = np.zeros((N, N))
    AJWJ = A_J @ W_J
    for b in range(1, K):
        A[b * N_J : (b + 1) * N_J, (b - 1) * N_J : b * N_J] = AJWJ
    for b in range(K):
        A[K * N_J :, b * N_J : (b + 1) * N_J] = lag_blocks[b + 1] @ W_J
    C = np.zeros((N, n))
    C[:N_J] = A_J
    C[K * N_J :] = lag_blocks[0]
    bias = np.concatenate([np.tile(zeta_J, K), zeta_bar])
    W = np.zeros(N)
    W[K * N_J :] = inner.beta
    return EchoStateNetwork(A=A, C=C, bias=bias, W=W, activation=inner.activation)


def block_esn_functional(
    inner: NetworkReadout,
    identity_nets: Sequence[NetworkReadout],
    data: np.ndarray,
) -> np.ndarray:
    """Closed-form output of the block construction on windows (M, T, n).

    Equals W_bar . sigma(sum_j lag_block_j J^j(z_-j) + lag_block_0 z_0 +
    zeta_bar) where J^j is the j-fold identity-network composition.
    """
    data = np.asarray(data, dtype=np.float64)
    M, T, n = data.shape
    K = inner.alpha.shape[1] // n - 1
    if T < K + 1:
        raise ValueError(f"window length {T} shorter than memory {K}")
    lag_blocks = [inner.alpha[:, j * n : (j + 1) * n] for j in range(K + 1)]
    pre = data[:, 0, :] @ lag_blocks[0].T - inner.theta
    for j in range(1, K + 1):
        v = data[:, j, :]
        for _ in range(j):
            v = _identity_apply(identity_nets, v)
        pre = pre + v @ lag_blocks[j].T
    return get_activation(inner.activation).fn(pre) @ inner.beta


# ---------------------------------------------------------------------------
# random systems for trained experiments


def random_esn(
    N: int,
    n: int,
    seed: int,
    activation: str = "tanh",
    spectral: float = 0.95,
    input_scale: float = 0.1,
    bias_scale: float = 0.1,
) -> EchoStateNetwork:
    """Random network with orthogonal coupling scaled to sigma_max = spectral.

    An orthogonal coupling matrix puts every singular value at the
    certificate bound, so the reservoir keeps long memory while staying
    inside the sound contraction certificate (a dense Gaussian matrix
    rescaled to the same sigma_max has a much smaller spectral radius and
    forgets quickly).
    """
    if spectral <= 0.0:
        raise ValueError("spectral must be positive")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((N, N)))
    A = spectral * Q
    sigma = np.linalg.norm(A, 2)
    if spectral < 1.0 <= sigma:  # rounding guard; keep a subcritical request strict
        A *= (1.0 - 1e-12) / sigma
    C = input_scale * rng.standard_normal((N, n))
    bias = rng.uniform(-bias_scale, bias_scale, size=N)
    return EchoStateNetwork(A=A, C=C, bias=bias, W=np.zeros(N), activation=activation)


def random_trig_sas(
    N: int,
    n: int,
    terms: int,
    seed: int,
    contraction: float = 0.9,
    freq_scale: float = 1.0,
) -> TrigSAS:
    """Random state-affine system rescaled inside the contraction certificate."""
    rng = np.random.default_rng(seed)
    cm = rng.standard_normal((terms, N, N))
    sm = rng.standard_normal((terms, N, N))
    cf = freq_scale * rng.standard_normal((terms, n))
    sf = freq_scale * rng.standard_normal((terms, n))
    P = TrigPolynomial(cm, sm, cf, sf)
    scale = contraction / P.norm_bound()
    P = TrigPolynomial(cm * scale, sm * scale, cf, sf)
    qc = rng.standard_normal((1, N, 1))
    qc /= np.linalg.norm(qc[0], 2)
    Q = TrigPolynomial(qc, np.zeros((1, N, 1)), freq_scale * rng.standard_normal((1, n)),
                       np.zeros((1, n)))
    return TrigSAS(P, Q, np.zeros(N))


# ---------------------------------------------------------------------------
# system + readout as an evaluable functional


@dataclass(frozen=True)
class ReservoirModel:
    """A reservoir with the readout that turns final states into outputs.

    For TrigSAS and EchoStateNetwork the built-in W is used unless an
    explicit readout overrides it; LinearReservoir always needs a readout.
    train_seed records the seed used to fit the readout so evaluation
    seeds can be checked for disjointness.
    """

    system: object
    readout: object | None = None
    train_seed: int | None = None

    def __post_init__(self):
        if self.readout is None and isinstance(self.system, LinearReservoir):
            raise ValueError("LinearReservoir needs an explicit readout")

    def values(self, data: np.ndarray) -> np.ndarray:
        states = final_states(self.system, data)
        if self.readout is not None:
            return np.asarray(eval_readout(self.readout, states))
        return states @ self.system.W

    def value(self, w: Window) -> float:
        return float(self.values(w.data[None, :, :])[0])


# ---------------------------------------------------------------------------
# serialization


def _poly_to_dict(p: TrigPolynomial) -> dict:
    return {
        "shape": [p.r, p.rows, p.cols, p.n],
        "cos_mats": p.cos_mats.tolist(),
        "sin_mats": p.sin_mats.tolist(),
        "cos_freqs": p.cos_freqs.tolist(),
        "sin_freqs": p.sin_freqs.tolist(),
    }


def _poly_from_dict(doc: dict) -> TrigPolynomial:
    r, rows, cols, n = doc["shape"]
    return TrigPolynomial(
        np.array(doc["cos_mats"], dtype=np.float64).reshape(r, rows, cols),
        np.array(doc["sin_mats"], dtype=np.float64).reshape(r, rows, cols),
        np.array(doc["cos_freqs"], dtype=np.float64).reshape(r, n),
        np.array(doc["sin_freqs"], dtype=np.float64).reshape(r, n),
    )


def system_to_dict(system, readout=None, include_esp: bool = True) -> dict:
    """Variant-tagged JSON document; floats survive a round trip bit-exact."""
    if isinstance(system, LinearReservoir):
        doc = {"variant": "linear", "A": system.A.tolist(), "c": system.c.tolist()}
    elif isinstance(system, TrigSAS):
        doc = {
            "variant": "trig_sas",
            "P": _poly_to_dict(system.P),
            "Q": _poly_to_dict(system.Q),
            "W": system.W.tolist(),
        }
    elif isinstance(system, EchoStateNetwork):
        doc = {
            "variant": "esn",
            "A": system.A.tolist(),
            "C": system.C.tolist(),
            "bias": system.bias.tolist(),
            "W": system.W.tolist(),
            "activation": system.activation,
        }
    else:
        raise TypeError(f"not a reservoir system: {type(system).__name__}")
    if include_esp:
        rep = certify_esp(system)
        doc["esp"] = {
            "certified": rep.certified,
            "method": rep.method,
            "bound": rep.bound,
            "nilpotency_index": rep.nilpotency_index,
        }
    if readout is not None:
        doc["readout"] = readout_to_dict(readout)
    return doc


def system_from_dict(doc: dict):
    """Inverse of system_to_dict; returns (system, readout_or_None)."""
    variant = doc.get("variant")
    readout = readout_from_dict(doc["readout"]) if "readout" in doc else None
    if variant == "linear":
        system = LinearReservoir(np.array(doc["A"]), np.array(doc["c"]))
    elif variant == "trig_sas":
        system = TrigSAS(_poly_from_dict(doc["P"]), _poly_from_dict(doc["Q"]),
                         np.array(doc["W"]))
    elif variant == "esn":
        system = EchoStateNetwork(
            np.array(doc["A"]), np.array(doc["C"]), np.array(doc["bias"]),
            np.array(doc["W"]), doc["activation"],
        )
    else:
        raise ValueError(f"unknown system variant {variant!r}")
    return system, readout
