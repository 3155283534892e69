"""Seeded, paired comparison experiments.

Every replicate draws one sample stream (an adaptive-Metropolis chain, or
exact draws for ``gaussian-mc``) and one reference set from the target; all
methods are evaluated on that same pair, so method differences are paired.
Replicates run in a thread pool and results are ordered by replicate index.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .kde import kde_weights
from .ksd import ksd_weights
from .med import MedConfig, med_weights
from .metrics import (
    WeightedSampleSet,
    energy_distance_simplified,
    reference_pair_term,
    weighted_moment_errors,
)
from .samplers import gibbs_mixed_chain, ram_chain, replicate_seed, self_normalized_is
from .simplex import QPConfig
from .targets import (
    DiscreteSpec,
    calibration_target,
    encode_discrete,
    gaussian_target,
    load_logistic_csv,
    logistic_target,
    mixture_target,
    random_mixture_centers,
    synthetic_logistic_data,
)

EXPERIMENTS = (
    "gaussian-n",
    "gaussian-tau",
    "gaussian-p",
    "gaussian-mc",
    "mixture-2d",
    "mixture-hd",
    "logistic",
    "calibration-discrete",
)
METHODS = ("med", "ksd", "kde", "baseline-mcmc", "baseline-mc")
WEIGHTING_METHODS = ("med", "ksd", "kde")
THREADS_ENV = "BBIS_THREADS"


def default_threads():
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentConfig:
    experiment: str = "gaussian-n"
    methods: list = field(default_factory=lambda: ["med", "baseline-mcmc"])
    n: object = 256
    p: object = 2
    tau: object = 0.0
    K: int = 20
    reps: int = 30
    seed: int = 0
    ref_size: int = 10_000
    full_energy: bool = False
    med: MedConfig = field(default_factory=MedConfig)
    qp: QPConfig = field(default_factory=QPConfig)
    dataset: Optional[str] = None
    n_data: int = 500
    prior_var: float = 0.1
    # calibration-discrete
    is_size: int = 40_000
    gibbs_iters: int = 2000
    level_chain_iters: int = 250
    threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = [m.strip() for m in self.methods.split(",") if m.strip()]
        self.methods = list(self.methods)
        if self.experiment not in EXPERIMENTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.reps < 1:
            raise InvalidInputError("reps must be at least 1")
        if not self.methods:
            raise InvalidInputError("at least one method is required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise InvalidInputError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
        if self.experiment == "gaussian-mc" and "baseline-mcmc" in self.methods:
            raise InvalidInputError("gaussian-mc draws exact samples; use baseline-mc instead of baseline-mcmc")
        if self.experiment != "gaussian-mc" and "baseline-mc" in self.methods:
            raise InvalidInputError("baseline-mc is only defined for the gaussian-mc experiment")
        if self.experiment == "calibration-discrete" and "ksd" in self.methods:
            raise InvalidInputError("ksd needs a score function, which the calibration target does not have")
        if self.ref_size < 2:
            raise InvalidInputError("ref_size must be at least 2")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidInputError(f"unknown config keys: {sorted(extra)}")
        if isinstance(d.get("qp"), dict):
            d["qp"] = QPConfig(**d["qp"])
        if isinstance(d.get("med"), dict):
            med = dict(d["med"])
            if isinstance(med.get("qp"), dict):
                med["qp"] = QPConfig(**med["qp"])
            d["med"] = MedConfig(**med)
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def grid(self):
        return list(product(_as_list(self.n), _as_list(self.p), _as_list(self.tau)))


@dataclass
class ResultRecord:
    experiment: str
    method: str
    replicate: int
    seed: int
    n: int
    p: int
    tau: float
    n_points: int
    energy_distance: float
    energy_distance_normalized: float
    energy_distance_full: Optional[float] = None
    mse_mean: Optional[float] = None
    mse_second: Optional[float] = None
    mse_sin: Optional[float] = None
    iterations: Optional[int] = None
    wall_clock_seconds: float = 0.0


@dataclass
class CalibrationRecord:
    experiment: str
    method: str
    replicate: int
    seed: int
    n_points: int
    prob_rho0: float
    prob_rho1: float
    prob_rho2: float
    prob_rho3: float
    wall_clock_seconds: float = 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: dict


# ---------------------------------------------------------------------------
# sample streams


def _centers_rng(cfg, p):
    return np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(p), 0x5EED]))


def build_target(cfg, p, tau):
    exp = cfg.experiment
    if exp.startswith("gaussian"):
        return gaussian_target(p, tau)
    if exp.startswith("mixture"):
        return mixture_target(random_mixture_centers(cfg.K, p, _centers_rng(cfg, p)))
    if exp == "logistic":
        if cfg.dataset:
            X, y = load_logistic_csv(cfg.dataset)
        else:
            X, y, _ = synthetic_logistic_data(cfg.n_data, p - 1, _centers_rng(cfg, p))
        return logistic_target(X, y, cfg.prior_var)
    raise InvalidInputError(f"experiment {exp!r} has no generic target")


def _logistic_reference(cfg, target):
    """Second half of a long adaptive chain started at the prior mean."""
    ss = np.random.SeedSequence([int(cfg.seed), 0xBEEF])
    chain = ram_chain(target, 2 * cfg.ref_size, int(ss.generate_state(1)[0]),
                      init=np.zeros(target.dim), initial_shape=math.sqrt(cfg.prior_var))
    return chain.accepted[cfg.ref_size:]


def _stream(cfg, target, n, seed):
    if cfg.experiment == "gaussian-mc":
        draws = target.sample(np.random.default_rng(seed), n)
        return draws, draws, target.log_gamma(draws)
    if cfg.experiment == "logistic":
        rng = np.random.default_rng(seed)
        sd = math.sqrt(cfg.prior_var)
        chain = ram_chain(target, n, seed, init=sd * rng.standard_normal(target.dim), initial_shape=sd)
    else:
        chain = ram_chain(target, n, seed)
    return chain.proposals, chain.accepted, chain.log_gamma_values


def compute_weights(method, points, log_gamma, target, cfg):
    """Weights for ``method`` on ``points`` and the solver iteration count."""
    if method == "med":
        res = med_weights(points, log_gamma, cfg.med)
        return res.weights, res.qp.iterations
    if method == "ksd":
        if target.score is None:
            raise InvalidInputError(f"target {target.name!r} has no score; ksd is unavailable")
        res = ksd_weights(points, target.score, cfg.qp)
        return res.weights, res.qp.iterations
    if method == "kde":
        return kde_weights(points, log_gamma), None
    raise InvalidInputError(f"{method!r} is not a weighting method")


def run_replicate(cfg, target, n, p, tau, rep, grid_index=0, reference=None):
    seed = replicate_seed(cfg.seed, rep) if grid_index == 0 else replicate_seed(cfg.seed, rep, grid_index)
    chain_ss, ref_ss, pair_ss = np.random.SeedSequence(seed).spawn(3)
    proposals, accepted, lg = _stream(cfg, target, n, int(chain_ss.generate_state(1)[0]))
    if reference is None:
        reference = target.sample(np.random.default_rng(ref_ss), cfg.ref_size)
    pair_term = None
    if cfg.full_energy:
        pair_term = reference_pair_term(reference, seed=int(pair_ss.generate_state(1)[0]))

    out = []
    for method in cfg.methods:
        iterations = None
        t0 = time.perf_counter()
        if method in ("baseline-mcmc", "baseline-mc"):
            ws = WeightedSampleSet.uniform(accepted)
            elapsed = 0.0
        else:
            w, iterations = compute_weights(method, proposals, lg, target, cfg)
            elapsed = time.perf_counter() - t0
            ws = WeightedSampleSet(proposals, w)
        ed = energy_distance_simplified(ws, reference)
        rec = ResultRecord(
            cfg.experiment, method, rep, seed, n, p, tau, ws.samples.shape[0],
            ed, ed / math.sqrt(p),
            None if pair_term is None else ed - pair_term,
            iterations=iterations, wall_clock_seconds=elapsed,
        )
        if target.moments is not None:
            rec.mse_mean, rec.mse_second, rec.mse_sin = weighted_moment_errors(ws, target.moments)
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# calibration with a discrete parameter


def level_chain_proposals(problem, iters, seed):
    """Pool the proposals of one adaptive chain per rho level (rho held fixed)."""
    blocks, lgs = [], []
    for j, rho in enumerate(problem.levels):
        s = replicate_seed(seed, j)
        rng = np.random.default_rng(s)
        chain = ram_chain(problem.conditional_target(rho), iters, s, init=rng.uniform(size=2), initial_shape=0.1)
        blocks.append(np.column_stack([chain.proposals, np.full(iters, float(rho))]))
        lgs.append(chain.log_gamma_values)
    return np.vstack(blocks), np.concatenate(lgs)


def rho_probabilities(values, weights, levels):
    return [float(np.sum(weights[values == lv])) for lv in levels]


def run_calibration_replicate(cfg, rep):
    seed = replicate_seed(cfg.seed, rep)
    is_seed, gibbs_seed, chain_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(3))
    problem = calibration_target(cfg.seed)
    levels = [float(lv) for lv in problem.levels]
    rows = []

    t0 = time.perf_counter()
    truth = self_normalized_is(problem, cfg.is_size, is_seed)
    rows.append(("is-truth", cfg.is_size, rho_probabilities(truth.samples[:, 2], truth.weights, levels),
                 time.perf_counter() - t0))

    if "baseline-mcmc" in cfg.methods:
        t0 = time.perf_counter()
        chain = gibbs_mixed_chain(problem, cfg.gibbs_iters, gibbs_seed)
        kept = chain.accepted[cfg.gibbs_iters // 2:]
        w = np.full(kept.shape[0], 1.0 / kept.shape[0])
        rows.append(("baseline-mcmc", kept.shape[0], rho_probabilities(kept[:, 2], w, levels),
                     time.perf_counter() - t0))

    pooled, lg = None, None
    for method in cfg.methods:
        if method not in WEIGHTING_METHODS:
            continue
        if pooled is None:
            pooled, lg = level_chain_proposals(problem, cfg.level_chain_iters, chain_seed)
        t0 = time.perf_counter()
        if method == "med":
            encoded = encode_discrete(pooled, [DiscreteSpec(2, "ordinal", problem.levels)])
            w = med_weights(encoded, lg, cfg.med).weights
        else:
            w = kde_weights(pooled, lg)
        rows.append((method, pooled.shape[0], rho_probabilities(pooled[:, 2], w, levels), time.perf_counter() - t0))

    return [CalibrationRecord(cfg.experiment, m, rep, seed, npts, *probs, wall_clock_seconds=el)
            for m, npts, probs, el in rows]


# ---------------------------------------------------------------------------
# driver


def _summarize(cfg, records):
    if cfg.experiment == "calibration-discrete":
        groups = {}
        for r in records:
            groups.setdefault(r.method, []).append([r.prob_rho0, r.prob_rho1, r.prob_rho2, r.prob_rho3])
        out = {m: {"mean_prob_rho": np.mean(v, axis=0).tolist()} for m, v in groups.items()}
        truth = np.array(groups["is-truth"])
        for m, v in groups.items():
            if m != "is-truth":
                out[m]["mean_abs_error_vs_truth"] = np.mean(np.abs(np.array(v) - truth), axis=0).tolist()
        return {"experiment": cfg.experiment, "methods": out}

    metric = "energy_distance_normalized" if cfg.experiment in ("gaussian-p", "mixture-hd") else "energy_distance"
    baseline = next((b for b in ("baseline-mcmc", "baseline-mc") if b in cfg.methods), None)
    summary = {"experiment": cfg.experiment, "metric": metric, "baseline": baseline, "groups": []}
    for n, p, tau in cfg.grid():
        sel = [r for r in records if (r.n, r.p, r.tau) == (n, p, tau)]
        base = {r.replicate: getattr(r, metric) for r in sel if r.method == baseline}
        for method in cfg.methods:
            rs = [r for r in sel if r.method == method]
            vals = np.array([getattr(r, metric) for r in rs])
            g = {
                "n": n, "p": p, "tau": tau, "method": method, "reps": len(rs),
                "mean": float(vals.mean()), "sd": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                "mean_wall_clock_seconds": float(np.mean([r.wall_clock_seconds for r in rs])),
            }
            if baseline and method != baseline and base:
                diff = np.array([getattr(r, metric) - base[r.replicate] for r in rs])
                g["paired_mean_difference"] = float(diff.mean())
                g["paired_sd_difference"] = float(diff.std(ddof=1)) if len(diff) > 1 else 0.0
                g["wins_vs_baseline"] = int(np.sum(diff < 0))
            summary["groups"].append(g)
    return summary


def run_experiment(cfg: ExperimentConfig, on_record=None) -> ExperimentResult:
    """Run every replicate of ``cfg`` and return ordered records plus a summary.

    ``on_record`` is called with each replicate's records in replicate order
    as soon as they (and all earlier replicates) are available.
    """
    if cfg.experiment == "calibration-discrete":
        tasks = [(run_calibration_replicate, (cfg, rep)) for rep in range(cfg.reps)]
    else:
        tasks = []
        for gi, (n, p, tau) in enumerate(cfg.grid()):
            target = build_target(cfg, p, tau)
            if "ksd" in cfg.methods and target.score is None:
                raise InvalidInputError(f"target {target.name!r} has no score; ksd is unavailable")
            reference = _logistic_reference(cfg, target) if cfg.experiment == "logistic" else None
            tasks += [(run_replicate, (cfg, target, n, p, tau, rep, gi, reference)) for rep in range(cfg.reps)]

    records = []
    threads = max(1, int(cfg.threads))
    if threads == 1:
        for fn, args in tasks:
            recs = fn(*args)
            records += recs
            if on_record:
                on_record(recs)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(fn, *args) for fn, args in tasks]
            for fut in futures:
                recs = fut.result()
                records += recs
                if on_record:
                    on_record(recs)
    return ExperimentResult(cfg, records, _summarize(cfg, records))


# ---------------------------------------------------------------------------
# output


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


class RecordWriter:
    """Streams records to a deterministic results CSV and a timings CSV."""

    def __init__(self, results_path, timings_path):
        self._results = open(results_path, "w", newline="")
        self._timings = open(timings_path, "w", newline="")
        self._rw = csv.writer(self._results, lineterminator="\n")
        self._tw = csv.writer(self._timings, lineterminator="\n")
        self._header = None

    def write(self, records):
        for r in records:
            d = asdict(r)
            wall = d.pop("wall_clock_seconds")
            if self._header is None:
                self._header = list(d)
                self._rw.writerow(self._header)
                self._tw.writerow(["experiment", "method", "replicate", "wall_clock_seconds"])
            self._rw.writerow([format_value(d[k]) for k in self._header])
            self._tw.writerow([d["experiment"], d["method"], d["replicate"], format_value(wall)])
        self._results.flush()
        self._timings.flush()

    def close(self):
        self._results.close()
        self._timings.close()


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.generic):
        return o.item()
    return o


def write_summary(path, result: ExperimentResult):
    with open(path, "w") as fh:
        json.dump(_jsonable({"config": result.config.to_dict(), "summary": result.summary}), fh, indent=2, sort_keys=True)
        fh.write("\n")
