"""Experiment harness: configuration, seeded multi-run execution, CSV output.

Randomness is split into named substreams so that every policy in one
experiment sees the identical channel and arrival sample paths (common random
numbers), and so that adding a policy or consuming more draws on one arm never
perturbs another.  The split is ``SeedSequence((base_seed, run_index,
purpose, arm))`` with purpose codes CHANNEL=0, ARRIVALS=1, TIEBREAK=2,
STATIC=3, OFFSET=4.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import environment as env
from . import metrics, oracle
from .engine import simulate_policy
from .learning import POLICY_CODES, PolicyKind

PURPOSE_CHANNEL = 0
PURPOSE_ARRIVALS = 1
PURPOSE_TIEBREAK = 2
PURPOSE_STATIC = 3
PURPOSE_OFFSET = 4


def substream(base_seed, run_index, purpose, arm=0):
    """Dedicated generator for one (run, purpose, arm) triple."""
    ss = np.random.SeedSequence(
        (int(base_seed), int(run_index), int(purpose), int(arm))
    )
    return np.random.Generator(np.random.PCG64(ss))


def run_seed(base_seed, run_index):
    """Single integer identifying a run's randomness, for the summary CSV."""
    ss = np.random.SeedSequence((int(base_seed), int(run_index)))
    return int(ss.generate_state(1, np.uint64)[0])


class TraceParseError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    K: int
    T: int
    W: int
    chi: tuple
    eta: float
    eps: float
    alpha: float
    action_set: dict
    channel: dict
    policies: tuple
    runs: int
    base_seed: int
    outputs: str = "out"
    log_stride: int | None = None
    random_tiebreak: bool = False

    def __post_init__(self):
        self.chi = tuple(float(x) for x in self.chi)
        self.policies = tuple(self.policies)
        if self.log_stride is None:
            self.log_stride = default_log_stride(self.T)

    def validate(self):
        if self.K < 1 or self.T < 1 or self.W < 1:
            raise ValueError("K, T, W must be positive")
        if self.T % self.W != 0:
            raise ValueError("T must be a multiple of W")
        if len(self.chi) != self.K:
            raise ValueError("chi needs one entry per arm")
        if any(not 0.0 < c <= 1.0 for c in self.chi):
            raise ValueError("chi entries must lie in (0, 1]")
        if not self.eps > 0:
            raise ValueError("eps must be strictly positive")
        if any(c + self.eps > 1.0 for c in self.chi):
            raise ValueError("chi_k + eps must not exceed 1 (arrival probability)")
        if not self.eta > 0 or not self.alpha > 0:
            raise ValueError("eta and alpha must be strictly positive")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        if not self.policies:
            raise ValueError("configure at least one policy")
        for tok in self.policies:
            if tok not in POLICY_CODES:
                raise ValueError(f"unknown policy {tok!r}")
        self.build_actions()
        return self

    def build_actions(self):
        spec = self.action_set
        kind = spec.get("kind")
        if kind == "one_of_k":
            acts = env.ActionSet.one_of_k(self.K)
        elif kind == "choose":
            acts = env.ActionSet.choose(self.K, int(spec["m"]))
        elif kind == "explicit":
            acts = env.ActionSet(spec["incidence"])
        else:
            raise ValueError(f"unknown action_set kind {kind!r}")
        if acts.n_arms != self.K:
            raise ValueError("action set arm count does not match K")
        return acts

    def build_channel(self):
        """Build the channel model; for traces this reads and binarizes the file."""
        spec = self.channel
        kind = spec.get("kind")
        if kind == "iid":
            model = env.IIDChannel(tuple(spec["rates"]))
        elif kind == "piecewise":
            model = env.PiecewiseChannel(
                tuple((s["start"], tuple(s["rates"])) for s in spec["segments"])
            )
        elif kind == "trace":
            if not spec.get("path"):
                raise ValueError(
                    "trace channel needs a file path (the trace3 preset ships "
                    "without one; set channel.path)"
                )
            model = load_trace(
                spec["path"],
                spec.get("schema", "binary"),
                thresholds=spec.get("thresholds"),
                offset=int(spec.get("offset", 0)),
            )
            if model.n_rows < self.T:
                raise ValueError(
                    f"trace has {model.n_rows} rows but the horizon is {self.T}"
                )
        else:
            raise ValueError(f"unknown channel kind {kind!r}")
        if model.n_arms != self.K:
            raise ValueError("channel arm count does not match K")
        return model

    def policy_kinds(self):
        return [PolicyKind(tok, eta=self.eta, alpha=self.alpha) for tok in self.policies]

    def to_dict(self):
        return {
            "K": self.K,
            "T": self.T,
            "W": self.W,
            "chi": list(self.chi),
            "eta": self.eta,
            "eps": self.eps,
            "alpha": self.alpha,
            "action_set": self.action_set,
            "channel": self.channel,
            "policies": list(self.policies),
            "runs": self.runs,
            "base_seed": self.base_seed,
            "outputs": self.outputs,
            "log_stride": self.log_stride,
            "random_tiebreak": self.random_tiebreak,
        }

    @classmethod
    def from_dict(cls, d):
        stride = d.get("log_stride")
        return cls(
            K=int(d["K"]),
            T=int(d["T"]),
            W=int(d["W"]),
            chi=tuple(d["chi"]),
            eta=float(d["eta"]),
            eps=float(d["eps"]),
            alpha=float(d["alpha"]),
            action_set=dict(d["action_set"]),
            channel=dict(d["channel"]),
            policies=tuple(d["policies"]),
            runs=int(d["runs"]),
            base_seed=int(d["base_seed"]),
            outputs=str(d.get("outputs", "out")),
            log_stride=None if stride is None else int(stride),
            random_tiebreak=bool(d.get("random_tiebreak", False)),
        )

    def to_json_file(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json_file(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_log_stride(T):
    return max(1, T // 2000)


def preset(name, T=None, runs=None, base_seed=None):
    """Named experiment configurations at desk scale."""
    if name == "abrupt2":
        T = 60_000 if T is None else T
        cfg = ExperimentConfig(
            K=2,
            T=T,
            W=100,
            chi=(0.8, 0.1),
            eta=100.0,
            eps=0.001,
            alpha=1.0,
            action_set={"kind": "one_of_k"},
            channel={
                "kind": "piecewise",
                "segments": [
                    {"start": 1, "rates": [0.9, 0.9]},
                    {"start": math.ceil(T / 6), "rates": [0.5, 0.9]},
                    {"start": math.ceil(2 * T / 3), "rates": [0.9, 0.9]},
                ],
            },
            policies=("age", "qlen", "tslr", "qlen_tslr"),
            runs=200 if runs is None else runs,
            base_seed=1234567 if base_seed is None else base_seed,
            log_stride=default_log_stride(T),
        )
    elif name == "iid6":
        # placeholder 6-arm instance: rates and requirements are NOT from any
        # published setup, only the tuning parameters are standard
        T = 60_000 if T is None else T
        cfg = ExperimentConfig(
            K=6,
            T=T,
            W=100,
            chi=(0.3, 0.25, 0.2, 0.15, 0.1, 0.05),
            eta=100.0,
            eps=0.001,
            alpha=1.0,
            action_set={"kind": "choose", "m": 2},
            channel={"kind": "iid", "rates": [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]},
            policies=("age", "qlen", "tslr", "qlen_tslr"),
            runs=200 if runs is None else runs,
            base_seed=1234567 if base_seed is None else base_seed,
            log_stride=default_log_stride(T),
        )
    elif name == "trace3":
        # scaffold: point "path" at a 3-channel trace and calibrate thresholds
        T = 30_000 if T is None else T
        cfg = ExperimentConfig(
            K=3,
            T=T,
            W=100,
            chi=(0.25, 0.3, 0.1),
            eta=100.0,
            eps=0.001,
            alpha=1.0,
            action_set={"kind": "one_of_k"},
            channel={
                "kind": "trace",
                "path": "",
                "schema": "snr",
                "thresholds": None,
                "offset": 0,
                "random_offset_max": 1000,
            },
            policies=("age", "qlen", "tslr", "qlen_tslr"),
            runs=100 if runs is None else runs,
            base_seed=1234567 if base_seed is None else base_seed,
            log_stride=default_log_stride(T),
        )
    else:
        raise ValueError(f"unknown preset {name!r}")
    return cfg


def load_trace(path, schema, thresholds=None, offset=0):
    """Parse a trace CSV into a binary success matrix.

    Schema "binary": columns t,ch1..chK with 0/1 entries.  Schema "snr":
    columns t,snr_db_1..snr_db_K with real values, binarized per channel as
    success iff snr_db >= threshold_db.  Rows must be consecutive timeslots
    starting at 1.  ``offset`` rotates rows with wraparound so that timeslot 1
    reads original row offset+1.
    """
    if schema not in ("binary", "snr"):
        raise ValueError(f"unknown trace schema {schema!r}")
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceParseError(f"{path}: empty trace file") from None
        width = len(header)
        if width < 2:
            raise TraceParseError(f"{path}: need a timeslot column plus channels")
        n_channels = width - 1
        if schema == "snr":
            if thresholds is None or len(thresholds) != n_channels:
                raise TraceParseError(
                    f"{path}: snr schema needs {n_channels} per-channel thresholds"
                )
            thresholds = [float(x) for x in thresholds]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise TraceParseError(
                    f"{path}:{lineno}: expected {width} columns, found {len(row)}"
                )
            try:
                t = int(row[0])
            except ValueError:
                raise TraceParseError(f"{path}:{lineno}: bad timeslot {row[0]!r}") from None
            if t != len(rows) + 1:
                raise TraceParseError(
                    f"{path}:{lineno}: timeslots must be consecutive from 1, got {t}"
                )
            if schema == "binary":
                vals = []
                for c, cell in enumerate(row[1:], start=1):
                    if cell not in ("0", "1"):
                        raise TraceParseError(
                            f"{path}:{lineno}: non-binary entry {cell!r} in column {c}"
                        )
                    vals.append(int(cell))
            else:
                try:
                    snrs = [float(cell) for cell in row[1:]]
                except ValueError:
                    raise TraceParseError(f"{path}:{lineno}: bad SNR value") from None
                vals = [1 if s >= thr else 0 for s, thr in zip(snrs, thresholds)]
            rows.append(vals)
    if not rows:
        raise TraceParseError(f"{path}: trace has no data rows")
    m = np.asarray(rows, dtype=np.int8)
    if offset:
        m = np.roll(m, -(offset % m.shape[0]), axis=0)
    return env.TraceChannel(m)


def channel_for_run(cfg, base_channel, run_index):
    """Apply the per-run random trace offset where configured."""
    spec = cfg.channel
    if spec.get("kind") == "trace" and spec.get("random_offset_max"):
        hi = int(spec["random_offset_max"])
        gen = substream(cfg.base_seed, run_index, PURPOSE_OFFSET)
        off = int(gen.integers(0, hi + 1))
        if off:
            return env.TraceChannel(np.roll(base_channel.matrix, -off, axis=0))
    return base_channel


@dataclass
class SegmentReport:
    start: int
    end: int          # inclusive
    report: oracle.OracleReport
    rate: float       # per-slot oracle reward rate used for regret accounting


def oracle_rates_for(cfg, channel):
    """Per-slot oracle reward rate plus per-segment oracle reports.

    Infeasible segments fall back to the unconstrained best action's rate so
    the diagnostic regret column stays defined.
    """
    actions = cfg.build_actions()
    if isinstance(channel, env.PiecewiseChannel):
        bounds = [s for s, _ in channel.segments] + [cfg.T + 1]
        segments = [
            (bounds[i], min(bounds[i + 1] - 1, cfg.T), np.asarray(r))
            for i, (_, r) in enumerate(channel.segments)
            if bounds[i] <= cfg.T
        ]
    else:
        rates = env.mean_rates(
            channel,
            (1, cfg.T if not isinstance(channel, env.TraceChannel) else channel.n_rows),
        )
        segments = [(1, cfg.T, np.asarray(rates))]
    rate_vec = np.empty(cfg.T)
    reports = []
    for lo, hi, rates in segments:
        rep = oracle.solve_optimal_static(rates, np.asarray(cfg.chi), actions)
        if rep.feasible:
            seg_rate = rep.objective_rate
        else:
            _, seg_rate = oracle.unconstrained_best(rates, actions)
        rate_vec[lo - 1 : hi] = seg_rate
        reports.append(SegmentReport(start=lo, end=hi, report=rep, rate=seg_rate))
    return rate_vec, reports


def logged_slots(T, stride):
    ts = np.arange(stride, T + 1, stride, dtype=np.int64)
    if len(ts) == 0 or ts[-1] != T:
        ts = np.append(ts, T)
    return ts


@dataclass
class RunResult:
    policy: str
    run_index: int
    seed: int
    log: metrics.RunLog
    regret_curve: np.ndarray       # cumulative pseudo-regret at logged slots
    throughput_curve: np.ndarray   # (n_logged, K), NaN where t < W
    final_reward: float
    final_regret: float
    max_qlen: int
    mean_hol_age: np.ndarray
    mean_tslr: np.ndarray


def sample_paths(cfg, channel, run_index):
    """Channel successes and request arrivals for one run (policy-independent)."""
    chan_rngs = [
        substream(cfg.base_seed, run_index, PURPOSE_CHANNEL, k) for k in range(cfg.K)
    ]
    X = env.success_matrix(channel, cfg.T, chan_rngs)
    B = np.empty((cfg.T, cfg.K), dtype=np.int8)
    for k in range(cfg.K):
        gen = substream(cfg.base_seed, run_index, PURPOSE_ARRIVALS, k)
        B[:, k] = gen.random(cfg.T) < (cfg.chi[k] + cfg.eps)
    return X, B


def run_once(cfg, policy, run_index, channel=None, oracle_rate=None):
    """Execute one seeded run of one policy and reduce it to a RunResult."""
    actions = cfg.build_actions()
    if channel is None:
        channel = cfg.build_channel()
    channel = channel_for_run(cfg, channel, run_index)
    if oracle_rate is None:
        oracle_rate, _ = oracle_rates_for(cfg, channel)
    X, B = sample_paths(cfg, channel, run_index)
    tie_u = None
    if cfg.random_tiebreak:
        tie_u = substream(cfg.base_seed, run_index, PURPOSE_TIEBREAK).random(cfg.T)
    out = simulate_policy(
        X, B, actions.incidence, policy.code, policy.eta, policy.alpha, tie_u
    )

    rewards = out["rewards"]
    cum_reward = np.cumsum(rewards.sum(axis=1, dtype=np.int64))
    rates_slot = env.rates_per_slot(channel, cfg.T)
    regret_full = metrics.cum_pseudo_regret_curve(
        out["actions"], actions.incidence, rates_slot, oracle_rate
    )
    ts = logged_slots(cfg.T, cfg.log_stride)
    thr = np.full((len(ts), cfg.K), np.nan)
    ok = ts >= cfg.W
    if ok.any():
        thr[ok] = metrics.windowed_throughput_curve(rewards, cfg.W, ts[ok])

    idx = ts - 1
    log = metrics.RunLog(
        slots=ts,
        actions=out["actions"][idx],
        rewards=rewards[idx],
        hol_ages=out["hol_ages"][idx],
        queue_lens=out["queue_lens"][idx],
        tslr=out["tslr"][idx],
        oracle_rate=oracle_rate[idx],
        cum_reward=cum_reward[idx],
    )
    return RunResult(
        policy=policy.kind,
        run_index=run_index,
        seed=run_seed(cfg.base_seed, run_index),
        log=log,
        regret_curve=regret_full[idx],
        throughput_curve=thr,
        final_reward=float(cum_reward[-1]),
        final_regret=float(regret_full[-1]),
        max_qlen=int(out["queue_lens"].max()),
        mean_hol_age=out["hol_ages"].mean(axis=0),
        mean_tslr=out["tslr"].mean(axis=0),
    )


def _run_task(args):
    cfg, token, run_index = args
    policy = PolicyKind(token, eta=cfg.eta, alpha=cfg.alpha)
    return run_once(cfg, policy, run_index)


def _mean_se(stack):
    """Column means and standard errors over runs (se=0 for a single run)."""
    mean = stack.mean(axis=0)
    if stack.shape[0] > 1:
        se = stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{x:.9g}"
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    results: dict                 # policy token -> list[RunResult]
    segment_reports: list = field(default_factory=list)
    output_dir: Path | None = None


def run_experiment(cfg, workers=1):
    """Run runs x policies simulations and write the aggregate CSV files."""
    cfg.validate()
    channel = cfg.build_channel()
    oracle_rate, seg_reports = oracle_rates_for(cfg, channel)
    for seg in seg_reports:
        if seg.report.feasible and seg.report.gamma_max > 0:
            if cfg.eps > seg.report.gamma_max / 2:
                warnings.warn(
                    f"eps={cfg.eps} exceeds gamma/2={seg.report.gamma_max / 2:.6g} "
                    f"for segment [{seg.start}, {seg.end}]; bound guarantees void",
                    stacklevel=2,
                )

    results = {}
    if workers > 1:
        tasks = [
            (cfg, token, r) for token in cfg.policies for r in range(cfg.runs)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_run_task, tasks))
        it = iter(flat)
        for token in cfg.policies:
            results[token] = [next(it) for _ in range(cfg.runs)]
    else:
        for token in cfg.policies:
            policy = PolicyKind(token, eta=cfg.eta, alpha=cfg.alpha)
            results[token] = [
                run_once(cfg, policy, r, channel=channel, oracle_rate=oracle_rate)
                for r in range(cfg.runs)
            ]

    out_dir = Path(cfg.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)
    ts = logged_slots(cfg.T, cfg.log_stride)

    regret_rows, thr_rows, tslr_rows, summary_rows = [], [], [], []
    for token in cfg.policies:
        runs = results[token]
        reg_mean, reg_se = _mean_se(np.stack([r.regret_curve for r in runs]))
        for j, t in enumerate(ts):
            regret_rows.append((token, int(t), reg_mean[j], reg_se[j]))
        thr_stack = np.stack([r.throughput_curve for r in runs])
        tslr_stack = np.stack([r.log.tslr for r in runs]).astype(float)
        for k in range(cfg.K):
            tm, tse = _mean_se(thr_stack[:, :, k])
            sm, sse = _mean_se(tslr_stack[:, :, k])
            for j, t in enumerate(ts):
                if t >= cfg.W:
                    thr_rows.append((token, k + 1, int(t), tm[j], tse[j]))
                tslr_rows.append((token, k + 1, int(t), sm[j], sse[j]))
        for r in runs:
            summary_rows.append(
                (token, r.run_index, r.seed, r.final_reward, r.final_regret, r.max_qlen)
                + tuple(r.mean_hol_age)
                + tuple(r.mean_tslr)
            )

    _write_csv(out_dir / "regret.csv", ["policy", "t", "mean", "se"], regret_rows)
    _write_csv(
        out_dir / "throughput.csv", ["policy", "arm", "t", "mean", "se"], thr_rows
    )
    _write_csv(out_dir / "tslr.csv", ["policy", "arm", "t", "mean", "se"], tslr_rows)
    summary_header = (
        ["policy", "run", "seed", "final_reward", "final_regret", "max_qlen"]
        + [f"mean_hol_age_arm{k + 1}" for k in range(cfg.K)]
        + [f"mean_tslr_arm{k + 1}" for k in range(cfg.K)]
    )
    _write_csv(out_dir / "summary.csv", summary_header, summary_rows)

    oracle_rows = []
    for seg in seg_reports:
        rep = seg.report
        for a in range(len(seg.report.sigma_gamma.probs)):
            oracle_rows.append(
                (
                    seg.start,
                    seg.end,
                    int(rep.feasible),
                    rep.objective_rate if rep.feasible else float("nan"),
                    rep.gamma_max,
                    a,
                    rep.sigma_star.probs[a] if rep.sigma_star is not None else float("nan"),
                    rep.sigma_gamma.probs[a],
                )
            )
    _write_csv(
        out_dir / "oracle_report.csv",
        [
            "segment_start",
            "segment_end",
            "feasible",
            "objective_rate",
            "gamma_max",
            "action",
            "sigma_star",
            "sigma_gamma",
        ],
        oracle_rows,
    )

    bound_rows = []
    actions = cfg.build_actions()
    for seg in seg_reports:
        if seg.report.feasible and seg.report.gamma_max > 0:
            rates = env.mean_rates(channel, (seg.start, seg.end))
            inputs = metrics.BoundInputs(
                chi=cfg.chi,
                rates=tuple(rates),
                eta=cfg.eta,
                eps=cfg.eps,
                gamma=seg.report.gamma_max,
                i_max=actions.i_max,
                horizon=cfg.T,
            )
            bound_rows.append((seg.start, "age_norm_bound", "", "", metrics.age_norm_bound(inputs)))
            bound_rows.append((seg.start, "zero_violation_window", "", "", metrics.zero_violation_window(inputs)))
            bound_rows.append(
                (seg.start, "regret_bound", "", "", metrics.regret_bound(inputs))
            )
            bound_rows.append((seg.start, "gamma_max", "", "", seg.report.gamma_max))
            bound_rows.append((seg.start, "slater_ok", "", "", float(inputs.slater_ok)))
    for token in cfg.policies:
        mean_age = np.stack([r.mean_hol_age for r in results[token]]).mean(axis=0)
        age_window = metrics.measured_age_window(np.asarray(cfg.chi), cfg.eps, mean_age)
        for k in range(cfg.K):
            bound_rows.append((1, "measured_age_window", token, k + 1, age_window[k]))
    _write_csv(
        out_dir / "bounds.csv",
        ["segment_start", "quantity", "policy", "arm", "value"],
        bound_rows,
    )

    return ExperimentResult(
        config=cfg, results=results, segment_reports=seg_reports, output_dir=out_dir
    )
