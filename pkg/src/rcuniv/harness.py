"""Experiment harness: validated configs, family runners, verify suites.

A config names an input process, a target functional, a system family,
and a capacity grid; run_experiment trains or constructs one system per
capacity point, certifies it, estimates the approximation error on fresh
evaluation paths, and writes a CSV results table plus one JSON artifact
per point.  Identical configs produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, processes, reservoirs, targets, training
from .core import Window, nilpotent_product, truncated_conditional_error
from .readouts import PolynomialReadout
from .reservoirs import (
    EspNotCertifiedError,
    ReservoirModel,
    build_block_esn,
    build_nilpotent_trig_sas,
    build_shift_register,
    block_esn_functional,
    certify_esp,
    direct_sum_sas,
    fit_identity_network,
    random_esn,
    random_trig_sas,
    run_reservoir,
    washout_decay,
)
from .training import TrainConfig

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "PropertyCheck",
    "verify_suite",
    "VERIFY_SUITES",
]

SCHEMA_VERSION = 1

FAMILIES = (
    "linear_poly",
    "linear_nn",
    "trig_sas",
    "esn",
    "constructed_shift",
    "constructed_nilpotent_sas",
    "constructed_block_esn",
)

_FAMILY_PARAM_KEYS = {
    "linear_poly": {"memory"},
    "linear_nn": {"memory", "activation"},
    "trig_sas": {"terms", "contraction", "freq_scale"},
    "esn": {"activation", "spectral", "input_scale", "bias_scale"},
    "constructed_shift": set(),
    "constructed_nilpotent_sas": set(),
    "constructed_block_esn": {"identity_units", "half_width", "activation"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _require_keys(doc: dict, required: set, optional: set, where: str) -> None:
    keys = set(doc)
    missing = required - keys
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see load_config for the JSON form."""

    family: str
    capacity: tuple[int, ...]
    sampler: processes.ProcessSampler
    target: targets.TargetCatalogEntry
    p: float
    T: int
    washout: int
    M_train: int
    M_eval: int
    ridge: float
    seed_train: int
    seed_eval: int
    family_params: dict = field(default_factory=dict)


def load_config(doc: dict) -> ExperimentConfig:
    """Validate a config document; unknown keys are rejected at every level."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(
        doc,
        required={"schema_version", "family", "capacity", "sampler", "target",
                  "p", "T", "washout", "M_train", "M_eval", "ridge", "seeds"},
        optional={"family_params"},
        where="config",
    )
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version {doc['schema_version']!r} unsupported; this build "
            f"reads version {SCHEMA_VERSION}"
        )
    family = doc["family"]
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choices {list(FAMILIES)}")

    cap = doc["capacity"]
    if (not isinstance(cap, list) or not cap
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in cap)):
        raise ConfigError("capacity must be a non-empty list of integers")
    if len(set(cap)) != len(cap):
        raise ConfigError("capacity entries must be unique")

    sdoc = doc["sampler"]
    _require_keys(sdoc, {"kind"}, {"n", "params"}, "sampler")
    try:
        sampler = processes.ProcessSampler(
            sdoc["kind"], int(sdoc.get("n", 1)), dict(sdoc.get("params", {}))
        )
    except ValueError as exc:
        raise ConfigError(f"sampler: {exc}") from exc

    tdoc = doc["target"]
    _require_keys(tdoc, {"name"}, {"params"}, "target")
    try:
        params = dict(tdoc.get("params", {}))
        if tdoc["name"] in ("finite_poly",):
            # JSON represents exponent tuples as lists of [exponents, coeff]
            raw = params.get("coefficients", {})
            if isinstance(raw, list):
                params["coefficients"] = {tuple(mi): c for mi, c in raw}
        entry = targets.entry_by_name(tdoc["name"], params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"target: {exc}") from exc

    seeds = doc["seeds"]
    _require_keys(seeds, {"train", "eval"}, set(), "seeds")
    for k in ("train", "eval"):
        if not isinstance(seeds[k], int) or isinstance(seeds[k], bool):
            raise ConfigError(f"seeds.{k} must be an integer")
    if seeds["train"] == seeds["eval"]:
        raise ConfigError("seeds.train and seeds.eval must differ")

    fp = doc.get("family_params", {})
    allowed = _FAMILY_PARAM_KEYS[family]
    unknown = set(fp) - allowed
    if unknown:
        raise ConfigError(
            f"family_params: unknown keys {sorted(unknown)} for family {family!r}"
        )

    p = doc["p"]
    if not isinstance(p, (int, float)) or isinstance(p, bool) or p < 1:
        raise ConfigError("p must be a number >= 1")
    for k, lo in (("T", 1), ("M_train", 5), ("M_eval", 2)):
        v = doc[k]
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            raise ConfigError(f"{k} must be an integer >= {lo}")
    washout = doc["washout"]
    if not isinstance(washout, int) or not 0 <= washout < doc["T"]:
        raise ConfigError("washout must be an integer in [0, T)")
    ridge = doc["ridge"]
    if not isinstance(ridge, (int, float)) or isinstance(ridge, bool) or ridge < 0:
        raise ConfigError("ridge must be a number >= 0")

    if sampler.n != entry.spec.n:
        raise ConfigError(
            f"sampler has {sampler.n} channels but target expects {entry.spec.n}"
        )
    if entry.spec.memory is not None and doc["T"] < entry.spec.memory + 1:
        raise ConfigError(
            f"T = {doc['T']} is shorter than the target memory {entry.spec.memory}"
        )
    if family in ("constructed_shift", "constructed_nilpotent_sas") and len(cap) != 1:
        raise ConfigError(f"family {family!r} takes a single capacity entry")
    if (family in ("linear_poly", "linear_nn") and entry.spec.memory is None
            and "memory" not in fp):
        raise ConfigError(
            "target has unbounded memory; set family_params.memory to the "
            "shift-register depth"
        )
    if family == "constructed_block_esn" and entry.spec.memory is None:
        raise ConfigError("constructed_block_esn requires a finite-memory target")

    return ExperimentConfig(
        family=family,
        capacity=tuple(cap),
        sampler=sampler,
        target=entry,
        p=float(p),
        T=doc["T"],
        washout=washout,
        M_train=doc["M_train"],
        M_eval=doc["M_eval"],
        ridge=float(ridge),
        seed_train=seeds["train"],
        seed_eval=seeds["eval"],
        family_params=dict(fp),
    )


# ---------------------------------------------------------------------------
# family builders


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        ridge=cfg.ridge, paths=cfg.M_train, window_length=cfg.T,
        washout=cfg.washout, seed=cfg.seed_train,
    )


def _memory_of(cfg: ExperimentConfig) -> int:
    K = cfg.family_params.get("memory", cfg.target.spec.memory)
    if K is None:
        raise ConfigError(
            "target has unbounded memory; set family_params.memory to the "
            "shift-register depth"
        )
    return int(K)


def _build_point(cfg: ExperimentConfig, capacity: int):
    """Build/train one capacity point -> (model, esp, training diag, extras)."""
    spec, sampler, n = cfg.target.spec, cfg.sampler, cfg.sampler.n
    tc = _train_config(cfg)
    extras: dict = {}

    if cfg.family == "linear_poly":
        system = build_shift_register(n, _memory_of(cfg))
        readout, diag = training.fit_polynomial_readout(system, capacity, spec, sampler, tc)
    elif cfg.family == "linear_nn":
        system = build_shift_register(n, _memory_of(cfg))
        readout, diag = training.fit_network_readout(
            system, capacity, spec, sampler, tc,
            activation=cfg.family_params.get("activation", "tanh"),
        )
    elif cfg.family == "trig_sas":
        system = random_trig_sas(
            capacity, n,
            terms=int(cfg.family_params.get("terms", 4)),
            seed=cfg.seed_train,
            contraction=float(cfg.family_params.get("contraction", 0.9)),
            freq_scale=float(cfg.family_params.get("freq_scale", 1.0)),
        )
        readout, diag = training.fit_linear_readout(system, spec, sampler, tc)
    elif cfg.family == "esn":
        system = random_esn(
            capacity, n, seed=cfg.seed_train,
            activation=cfg.family_params.get("activation", "tanh"),
            spectral=float(cfg.family_params.get("spectral", 0.9)),
            input_scale=float(cfg.family_params.get("input_scale", 0.1)),
            bias_scale=float(cfg.family_params.get("bias_scale", 0.1)),
        )
        readout, diag = training.fit_linear_readout(system, spec, sampler, tc)
    elif cfg.family == "constructed_shift":
        if spec.kind != "finite_poly":
            raise ConfigError("constructed_shift requires a finite_poly target")
        K = spec.memory
        system = build_shift_register(n, K)
        readout = PolynomialReadout(
            n_vars=n * (K + 1), degree=spec.params["degree"],
            coefficients=spec.params["coefficients"],
        )
        diag = None
    elif cfg.family == "constructed_nilpotent_sas":
        if spec.kind != "trig_product":
            raise ConfigError("constructed_nilpotent_sas requires a trig_product target")
        system = build_nilpotent_trig_sas(spec.params["freqs"], spec.params["sine_lags"])
        readout, diag = None, None
    elif cfg.family == "constructed_block_esn":
        if spec.memory is None:
            raise ConfigError("constructed_block_esn requires a finite-memory target")
        activation = cfg.family_params.get("activation", "logistic")
        sr = build_shift_register(n, spec.memory)
        inner, diag = training.fit_network_readout(
            sr, capacity, spec, sampler, tc, activation=activation,
        )
        id_nets, eps = fit_identity_network(
            n,
            half_width=float(cfg.family_params.get("half_width", 3.0)),
            hidden_units=int(cfg.family_params.get("identity_units", 24)),
            activation=activation,
            seed=cfg.seed_train + 1,
        )
        system = build_block_esn(inner, id_nets, n)
        readout = None
        extras["identity_sup_error"] = eps
    else:  # pragma: no cover - guarded by load_config
        raise ConfigError(f"unknown family {cfg.family!r}")

    esp = certify_esp(system)
    if not esp.certified:
        raise EspNotCertifiedError(
            f"{cfg.family} at capacity {capacity}: certificate failed "
            f"({esp.method}, bound {esp.bound:.4g})"
        )
    model = ReservoirModel(system, readout, train_seed=cfg.seed_train)
    return model, esp, diag, extras


def run_experiment(cfg: ExperimentConfig, out_dir) -> list[dict]:
    """Run every capacity point and write results.csv plus JSON artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for capacity in cfg.capacity:
        model, esp, diag, extras = _build_point(cfg, capacity)
        tail = targets.truncation_bound(cfg.target, cfg.T, cfg.p)
        est = metrics.approx_error(
            cfg.target.spec, model, cfg.sampler, cfg.p, cfg.T, cfg.M_eval,
            cfg.seed_eval,
        )
        row = {
            "family": cfg.family,
            "N": model.system.N,
            "target": cfg.target.name,
            "p": cfg.p,
            "value": est.value,
            "stderr": est.stderr,
            "M": est.M,
            "seed": est.seed,
        }
        rows.append(row)
        artifact = {
            "schema_version": SCHEMA_VERSION,
            "family": cfg.family,
            "capacity": capacity,
            "state_dimension": model.system.N,
            "esp": {
                "certified": esp.certified,
                "method": esp.method,
                "bound": esp.bound,
                "nilpotency_index": esp.nilpotency_index,
            },
            "training": diag,
            "truncation_bound": tail,
            "estimate": {"p": est.p, "value": est.value, "stderr": est.stderr,
                         "M": est.M, "seed": est.seed},
            **extras,
        }
        path = out / f"run_{cfg.family}_c{capacity}.json"
        path.write_text(json.dumps(artifact, indent=2, sort_keys=True) + "\n")
    _write_rows_csv(out / "results.csv", rows)
    return rows


def _write_rows_csv(path: Path, rows: list[dict]) -> None:
    cols = ["family", "N", "target", "p", "value", "stderr", "M", "seed"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([
                row["family"], row["N"], row["target"], repr(row["p"]),
                repr(row["value"]), repr(row["stderr"]), row["M"], row["seed"],
            ])


def write_sample_paths(sampler: processes.ProcessSampler, T: int, M: int,
                       seed: int, out_dir) -> list[Path]:
    """Emit one window CSV per path; used by the sample subcommand."""
    from .core import write_window_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = processes.sample_paths(sampler, T, M, seed)
    paths = []
    for i in range(M):
        p = out / f"path_{i:04d}.csv"
        write_window_csv(Window(data[i]), p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# verify suites


@dataclass(frozen=True)
class PropertyCheck:
    """One verified property with its measured margin (<= 1 passes)."""

    name: str
    passed: bool
    margin: float
    detail: str


def _check(name: str, margin: float, detail: str) -> PropertyCheck:
    return PropertyCheck(name, bool(margin <= 1.0), float(margin), detail)


def _verify_product_rule() -> list[PropertyCheck]:
    import itertools

    worst = 0.0
    count = 0
    for N in range(2, 5):
        shifts = [np.zeros((N, N)) for _ in range(N)]
        for j in range(1, N):
            shifts[j][j, j - 1] = 1.0
        for L in range(1, 6):
            for idx in itertools.product(range(1, N), repeat=L):
                dense = np.eye(N)
                for j in idx:
                    dense = shifts[j] @ dense
                fast = nilpotent_product(N, idx)
                worst = max(worst, float(np.max(np.abs(dense - fast))))
                count += 1
    return [_check("shift_product_rule", worst / 1e-12 if worst else 0.0,
                   f"{count} index sequences, max deviation {worst:.1e}")]


def _verify_conditional_truncation() -> list[PropertyCheck]:
    entry = targets.geometric_ma(0.5, step_bound=None, step_std=1.0)
    sampler = processes.iid_gaussian()
    lam = 0.5
    out = []
    worst = 0.0
    for K in (1, 3):
        est = truncated_conditional_error(
            entry.spec, K, sampler, p=2.0, M=4000, seed=11,
            window_length=40, inner_samples=100,
        )
        exact = lam ** (K + 1) / math.sqrt(1 - lam**2)
        worst = max(worst, abs(est.value - exact) / (3 * est.stderr))
    out.append(_check("conditional_truncation", worst,
                      f"max |estimate - closed form| over K in (1, 3): "
                      f"{worst:.2f} of 3 stderr"))
    return out


def _esp_fixtures():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((6, 6))
    A *= 0.7 / np.linalg.norm(A, 2)
    yield "linear_contractive", reservoirs.LinearReservoir(A, rng.standard_normal((6, 2))), 2
    yield "shift_register", build_shift_register(2, 2), 2
    yield "nilpotent_sas", build_nilpotent_trig_sas(rng.standard_normal((3, 2)), (1,)), 2
    yield "contractive_sas", random_trig_sas(4, 2, terms=3, seed=7, contraction=0.8), 2
    yield "esn_logistic", reservoirs.EchoStateNetwork(
        3.0 * A[:4, :4], rng.standard_normal((4, 2)), rng.uniform(-0.1, 0.1, 4),
        np.zeros(4), "logistic"), 2
    yield "esn_tanh", random_esn(5, 2, seed=9, activation="tanh", spectral=0.9), 2


def _verify_esp() -> list[PropertyCheck]:
    sampler = processes.iid_gaussian(n=2)
    out = []
    slack = 1.0 + 1e-9
    for name, system, n in _esp_fixtures():
        rep = certify_esp(system)
        if not rep.certified:
            out.append(_check(f"esp_{name}", math.inf, "certificate failed"))
            continue
        worst = 0.0
        for w in processes.sample_windows(sampler, 12, 10, seed=23):
            d = washout_decay(system, w, seed=31)
            if d[0] == 0:
                continue
            for t in range(1, d.shape[0]):
                if rep.nilpotency_index is not None and t >= rep.nilpotency_index:
                    worst = max(worst, math.inf if d[t] != 0.0 else 0.0)
                else:
                    bound = d[0] * rep.bound**t * slack
                    worst = max(worst, d[t] / bound if bound > 0 else math.inf)
        out.append(_check(f"esp_{name}", worst,
                          f"method {rep.method}, bound {rep.bound:.3f}"))
    return out


def _verify_direct_sum() -> list[PropertyCheck]:
    rng = np.random.default_rng(17)
    sampler = processes.iid_gaussian(n=2)
    worst = 0.0
    for trial in range(5):
        K1, K2 = rng.integers(0, 4), rng.integers(0, 4)
        s1 = build_nilpotent_trig_sas(
            rng.standard_normal((K1 + 1, 2)),
            [k for k in range(K1 + 1) if rng.uniform() < 0.5],
        )
        s2 = build_nilpotent_trig_sas(
            rng.standard_normal((K2 + 1, 2)),
            [k for k in range(K2 + 1) if rng.uniform() < 0.5],
        )
        for lam in (-1.0, 2.5):
            combined = direct_sum_sas(s1, s2, lam)
            for w in processes.sample_windows(sampler, max(K1, K2) + 2, 10,
                                              seed=trial * 10):
                _, y1 = run_reservoir(s1, w)
                _, y2 = run_reservoir(s2, w)
                _, y = run_reservoir(combined, w)
                worst = max(worst, abs(y - (y1 + lam * y2)))
    return [_check("direct_sum_linearity", worst / 1e-10,
                   f"max |H - (H1 + lam H2)| = {worst:.1e}")]


def _verify_block_esn() -> list[PropertyCheck]:
    rng = np.random.default_rng(29)
    sampler = processes.iid_gaussian(n=1)
    worst = 0.0
    for activation in ("logistic", "tanh"):
        for K in (1, 2):
            inner = _random_inner_net(rng, n=1, K=K, units=10, activation=activation)
            id_nets, _ = fit_identity_network(1, 2.5, 12, activation, seed=3)
            system = build_block_esn(inner, id_nets, n=1)
            data = processes.sample_paths(sampler, K + 2, 20, seed=41)
            direct = block_esn_functional(inner, id_nets, data)
            run = ReservoirModel(system).values(data)
            worst = max(worst, float(np.max(np.abs(run - direct)
                                            / np.maximum(1.0, np.abs(direct)))))
    return [_check("block_esn_equivalence", worst / 1e-8,
                   f"max relative deviation {worst:.1e}")]


def _random_inner_net(rng, n: int, K: int, units: int, activation: str):
    from .readouts import NetworkReadout

    return NetworkReadout(
        rng.standard_normal(units),
        rng.standard_normal((units, n * (K + 1))),
        rng.standard_normal(units),
        activation,
    )


def _verify_stationarity() -> list[PropertyCheck]:
    entry = targets.geometric_ma(0.5)
    sampler = processes.iid_gaussian()
    probes = processes.shift_invariance_probe(
        sampler, entry.spec, p=2.0, shifts=(0, -5), T=40, M=4000, seed=53,
    )
    (e1, e2) = probes.values()
    gap = abs(e1.value - e2.value) / (3 * math.hypot(e1.stderr, e2.stderr))
    return [_check("stationarity_shift_probe", gap,
                   f"shift gap {gap:.2f} of 3 combined stderr")]


VERIFY_SUITES = {
    "product_rule": _verify_product_rule,
    "conditional_truncation": _verify_conditional_truncation,
    "esp": _verify_esp,
    "direct_sum": _verify_direct_sum,
    "block_esn": _verify_block_esn,
    "stationarity": _verify_stationarity,
}


def verify_suite(name: str = "all") -> list[PropertyCheck]:
    """Run one named suite, or every suite for 'all'."""
    if name == "all":
        out = []
        for fn in VERIFY_SUITES.values():
            out.extend(fn())
        return out
    try:
        fn = VERIFY_SUITES[name]
    except KeyError:
        raise ValueError(
            f"unknown suite {name!r}; choices {sorted(VERIFY_SUITES)} or 'all'"
        ) from None
    return fn()
