"""Monte Carlo experiment driver: configs, per-trial metrics, aggregation, output.

Every trial is fully determined by ``(seed, trial index)``: the channel,
bits and a unit-variance noise draw come from ``SeedSequence([seed, trial])``
and are reused at every SNR point and by every receiver mode, and the
receiver's own randomness comes from ``SeedSequence([seed, trial, 1])``.
Per-trial results are reduced in trial-index order, so the worker count and
completion order cannot change any reported number.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, ContractError, MajorityDivergenceError
from .receiver import MODES, ReceiverOptions, ReceiverOutput, run_receiver
from .txchain import (SystemConfig, TrialData, bits_to_user_id, dqpsk_demodulate,
                      dqpsk_llrs, generate_trial, viterbi_decode)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_HEADER = ["mode", "snr_db", "trials", "ber", "fer", "aer", "nmse_h_db",
              "lambda_rel_err", "n_hat_acc", "mean_iters", "diverged"]
NMSE_FLOOR_DB = -120.0
MATCH_THRESHOLD = 0.5
# decoded streams below this mean |LLR| carry no information and claim no user
MIN_STREAM_RELIABILITY = 1.0
RECEIVER_STREAM = 1

_ALGO_KEYS = {f.name for f in fields(ReceiverOptions)} | {"N_max"}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    M: int = 64
    K: int = 96
    U: int = 100
    L: int = 200
    n_active: int | None = 8
    activity_prob: float | None = None
    snr_db_list: list = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])
    modes: list = field(default_factory=lambda: ["blind-uacesd"])
    coding: bool = False
    trials: int = 10
    seed: int = 0
    paths_per_user: int = 10
    on_grid: bool = True
    workers: int = 1
    algo: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            self.system
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list is empty")
        if any(not isinstance(s, (int, float)) or math.isnan(s) for s in self.snr_db_list):
            raise ConfigError("snr_db_list entries must be numbers")
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            raise ConfigError(f"unknown modes {bad}; choose from {list(MODES)}")
        unknown = set(self.algo) - _ALGO_KEYS
        if unknown:
            raise ConfigError(f"unknown algo keys {sorted(unknown)}")
        try:
            self.receiver_options()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad algo settings: {exc}") from exc

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(M=self.M, K=self.K, U=self.U, L=self.L, n_active=self.n_active,
                            activity_prob=self.activity_prob, paths=self.paths_per_user,
                            coding=self.coding, on_grid=self.on_grid)

    def default_n_max(self) -> int:
        return max(3, min(math.ceil(0.3 * self.U), min(self.M, self.L) - 1))

    def receiver_options(self) -> ReceiverOptions:
        algo = dict(self.algo)
        n_max = int(algo.pop("N_max", algo.pop("n_max", self.default_n_max())))
        if n_max < 3:
            raise ConfigError("N_max must be at least 3")
        opts = ReceiverOptions(n_max=n_max, **algo)
        if opts.max_iters < 1 or not opts.tol > 0:
            raise ConfigError("max_iters must be >= 1 and tol > 0")
        return opts

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from its JSON form.

    Accepted forms: ``"mode"`` (string or list) or ``"modes"``;
    ``"activity": {"n_active": N}`` or ``{"prob": p}`` or the flat keys.
    """
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d = dict(d)
    version = d.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "mode" in d:
        mode = d.pop("mode")
        d["modes"] = [mode] if isinstance(mode, str) else list(mode)
    if "activity" in d:
        act = d.pop("activity")
        if not isinstance(act, dict) or len(act) != 1 or not set(act) <= {"n_active", "prob"}:
            raise ConfigError("activity must be {'n_active': N} or {'prob': p}")
        d["n_active"] = act.get("n_active")
        d["activity_prob"] = act.get("prob")
    elif "activity_prob" in d and "n_active" not in d:
        d["n_active"] = None
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "snr_db_list" in d:
        d["snr_db_list"] = [_parse_snr(s) for s in d["snr_db_list"]]
    try:
        return ExperimentConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_snr(s) -> float:
    if isinstance(s, str) and s.strip().lower() in ("inf", "+inf", "infinity"):
        return float("inf")
    try:
        return float(s)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad SNR value {s!r}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Matching and per-trial metrics
# ---------------------------------------------------------------------------

def normalized_correlation(A: np.ndarray, B: np.ndarray, axis: int) -> np.ndarray:
    """``|<a_i, b_j>| / (||a_i|| ||b_j||)`` between rows (axis=1) or columns (axis=0)."""
    if axis == 0:
        A, B = A.T, B.T
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    C = np.abs(A.conj() @ B.T)
    denom = np.outer(na, nb)
    return np.divide(C, denom, out=np.zeros_like(C), where=denom > 0)


def assign(score: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-total-score one-to-one assignment (rows: estimates, cols: truth)."""
    if score.size == 0:
        return []
    r, c = linear_sum_assignment(score, maximize=True)
    return sorted(zip(r.tolist(), c.tolist()), key=lambda p: p[1])


@dataclass
class TrialMetrics:
    trial: int
    active: int
    identified: int
    bit_errors: int
    bits: int
    frame_errors: int
    nmse: float
    lambda_rel_err: float
    n_hat_correct: bool
    iterations: int
    diverged: bool


def channel_nmse(H: np.ndarray, H_hat: np.ndarray) -> float:
    """Linear NMSE after column assignment and per-column phase alignment.

    True columns left without an estimate contribute their full energy.
    """
    total = float(np.vdot(H, H).real)
    if total == 0:
        raise ContractError("true channel is zero")
    if H_hat.size == 0 or not np.all(np.isfinite(H_hat)):
        return 1.0
    err = 0.0
    pairs = assign(normalized_correlation(H_hat, H, axis=0))
    matched = set()
    for m, n in pairs:
        h, hh = H[:, n], H_hat[:, m]
        ph = np.vdot(hh, h)
        rot = ph / abs(ph) if abs(ph) > 0 else 1.0
        d = hh * rot - h
        err += float(np.vdot(d, d).real)
        matched.add(n)
    for n in range(H.shape[1]):
        if n not in matched:
            err += float(np.vdot(H[:, n], H[:, n]).real)
    return err / total


def _uncoded_bits(data: TrialData, out: ReceiverOutput, id_bits: int):
    X = data.frame.X
    N = X.shape[0]
    X_hat = out.X_hat
    ok = np.all(np.isfinite(X_hat)) and X_hat.shape[0] > 0
    pairs = assign(normalized_correlation(X_hat, X, axis=1)) if ok else []
    corr = normalized_correlation(X_hat, X, axis=1) if ok else None
    identified, bit_err, bits, frame_err = 0, 0, 0, 0
    got = set()
    for m, n in pairs:
        if corr[m, n] < MATCH_THRESHOLD:
            continue
        got.add(n)
        identified += 1
        est = dqpsk_demodulate(X_hat[m])[id_bits:]
        true = data.frame.info_bits[n, id_bits:]
        e = int(np.sum(est != true))
        bit_err += e
        bits += true.size
        frame_err += e > 0
    frame_err += N - len(got)
    return identified, bit_err, bits, frame_err


def _coded_bits(data: TrialData, out: ReceiverOutput, id_bits: int):
    N = data.frame.X.shape[0]
    users = [int(u) for u in data.channel.active_users]
    decoded = {}
    beta = out.symbol_posteriors
    if beta is not None and np.all(np.isfinite(beta)):
        for m in range(beta.shape[0]):
            llr = dqpsk_llrs(beta[m])
            info = viterbi_decode(llr, soft=True)
            uid = bits_to_user_id(info[:id_bits])
            reliability = float(np.mean(np.abs(llr)))
            if reliability < MIN_STREAM_RELIABILITY:
                continue
            if uid in users and (uid not in decoded or reliability > decoded[uid][0]):
                decoded[uid] = (reliability, info)
    identified, bit_err, bits, frame_err = 0, 0, 0, 0
    for n, u in enumerate(users):
        if u not in decoded:
            frame_err += 1
            continue
        identified += 1
        est = decoded[u][1][id_bits:]
        true = data.frame.info_bits[n, id_bits:]
        e = int(np.sum(est != true))
        bit_err += e
        bits += true.size
        frame_err += e > 0
    return identified, bit_err, bits, frame_err


def compute_metrics(data: TrialData, out: ReceiverOutput, sigma2: float,
                    coding: bool, id_bits: int, trial: int = 0) -> TrialMetrics:
    """Per-trial counts and errors for one receiver output.

    Uncoded: estimated streams are assigned to transmitted streams by maximum
    total normalized correlation and a pair counts as identified when its
    correlation is at least 0.5. Coded: a user is identified when some
    decoded stream with mean ``|LLR| >= 1`` carries its ID (the most reliable
    such stream wins on duplicates). BER counts payload bits (after the ID) of
    identified users; a user-frame is in error when it is not identified or
    has any payload bit error.
    """
    N = data.channel.N
    fn = _coded_bits if coding else _uncoded_bits
    identified, bit_err, bits, frame_err = fn(data, out, id_bits)
    nmse = channel_nmse(data.channel.H, out.H_hat)
    if sigma2 > 0 and np.isfinite(out.lambda_hat) and out.lambda_hat > 0:
        lam_err = abs(1.0 / out.lambda_hat - sigma2) / sigma2
    else:
        lam_err = float("nan")
    return TrialMetrics(trial=trial, active=N, identified=identified, bit_errors=bit_err,
                        bits=bits, frame_errors=frame_err, nmse=nmse,
                        lambda_rel_err=lam_err, n_hat_correct=out.N_hat == N,
                        iterations=int(out.iterations), diverged=bool(out.diverged))


# ---------------------------------------------------------------------------
# Trials and aggregation
# ---------------------------------------------------------------------------

def receiver_seed(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(trial), RECEIVER_STREAM])


def run_trial(cfg: ExperimentConfig, trial: int, snr_db: float, modes=None,
              data: TrialData | None = None) -> dict[str, TrialMetrics]:
    """Run every requested mode on one trial at one SNR."""
    system = cfg.system
    data = data if data is not None else generate_trial(system, cfg.seed, trial)
    Y, noise = data.observe(snr_db)
    opts = cfg.receiver_options()
    genie = {"N": data.channel.N, "X": data.frame.X, "H": data.channel.H, "G": data.channel.G}
    result = {}
    for mode in (modes or cfg.modes):
        out = run_receiver(Y, mode, data.channel.F, genie=genie, opts=opts,
                           rng=receiver_seed(cfg.seed, trial))
        result[mode] = compute_metrics(data, out, noise.sigma2, system.coding,
                                       system.id_bits, trial)
    return result


def _trial_job(args):
    cfg_dict, trial, snr_db = args
    cfg = config_from_dict(cfg_dict)
    return trial, run_trial(cfg, trial, snr_db)


def _sig(x: float, digits: int = 9) -> float:
    """Round to ``digits`` significant digits (the CSV precision)."""
    if x is None or not np.isfinite(x):
        return float(x) if x is not None else float("nan")
    return float(f"{x:.{digits}g}")


@dataclass
class MetricsRecord:
    mode: str
    snr_db: float
    trials: int
    ber: float
    fer: float
    aer: float
    nmse_h_db: float
    lambda_rel_err: float
    n_hat_acc: float
    mean_iters: float
    diverged: int

    def row(self) -> list[str]:
        vals = asdict(self)
        return [_fmt(vals[k]) for k in CSV_HEADER]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def aggregate(mode: str, snr_db: float, metrics: list[TrialMetrics]) -> MetricsRecord:
    """Reduce per-trial metrics (sorted by trial index first)."""
    if not metrics:
        raise ContractError("nothing to aggregate")
    ms = sorted(metrics, key=lambda m: m.trial)
    active = sum(m.active for m in ms)
    bits = sum(m.bits for m in ms)
    ber = sum(m.bit_errors for m in ms) / bits if bits else float("nan")
    fer = sum(m.frame_errors for m in ms) / active
    aer = sum(m.active - m.identified for m in ms) / active
    nmse_lin = math.fsum(m.nmse for m in ms) / len(ms)
    nmse_db = max(NMSE_FLOOR_DB, 10 * math.log10(nmse_lin)) if nmse_lin > 0 else NMSE_FLOOR_DB
    lam = [m.lambda_rel_err for m in ms if np.isfinite(m.lambda_rel_err)]
    lam_med = float(np.median(lam)) if lam else float("nan")
    return MetricsRecord(
        mode=mode, snr_db=_sig(float(snr_db)), trials=len(ms), ber=_sig(ber), fer=_sig(fer),
        aer=_sig(aer), nmse_h_db=_sig(nmse_db), lambda_rel_err=_sig(lam_med),
        n_hat_acc=_sig(sum(m.n_hat_correct for m in ms) / len(ms)),
        mean_iters=_sig(sum(m.iterations for m in ms) / len(ms)),
        diverged=sum(m.diverged for m in ms))


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[MetricsRecord]:
    """Sweep SNR x mode, ``cfg.trials`` trials per point.

    Raises ``MajorityDivergenceError`` as soon as more than half of the
    trials of one SNR point diverge for some mode.
    """
    records = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for snr in cfg.snr_db_list:
            jobs = [(cfg.to_dict(), t, snr) for t in range(cfg.trials)]
            if pool is None:
                results = [_trial_job(j) for j in jobs]
            else:
                results = list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
            per_mode = {m: [r[m] for _, r in results] for m in cfg.modes}
            for mode in cfg.modes:
                rec = aggregate(mode, snr, per_mode[mode])
                if 2 * rec.diverged > rec.trials:
                    raise MajorityDivergenceError(snr, mode, rec.diverged, rec.trials)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

PLOT_METRICS = ["ber", "fer", "aer", "nmse_h_db", "lambda_rel_err", "n_hat_acc"]


def emit_results(records: list[MetricsRecord], out_dir) -> list[Path]:
    """Write ``results.csv`` and one ``plot_<metric>.json`` per metric.

    Plot files hold ``{"metric", "x_label", "series": [{"mode", "x", "y"}]}``.
    """
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "results.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow(r.row())
        written.append(path)
        modes = list(dict.fromkeys(r.mode for r in records))
        for metric in PLOT_METRICS:
            series = []
            for mode in modes:
                rs = sorted((r for r in records if r.mode == mode), key=lambda r: r.snr_db)
                series.append({"mode": mode, "x": [_json_num(r.snr_db) for r in rs],
                               "y": [_json_num(getattr(r, metric)) for r in rs]})
            p = out / f"plot_{metric}.json"
            with open(p, "w") as fh:
                json.dump({"metric": metric, "x_label": "SNR (dB)", "series": series}, fh,
                          indent=1, sort_keys=True)
                fh.write("\n")
            written.append(p)
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return written


def _json_num(v):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(f"{v:.9g}")


def read_results(path) -> list[MetricsRecord]:
    """Parse a CSV written by ``emit_results``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ContractError(f"{path} does not have the expected header")
    recs = []
    for row in rows[1:]:
        d = dict(zip(CSV_HEADER, row))
        recs.append(MetricsRecord(
            mode=d["mode"], snr_db=float(d["snr_db"]), trials=int(d["trials"]),
            ber=float(d["ber"]), fer=float(d["fer"]), aer=float(d["aer"]),
            nmse_h_db=float(d["nmse_h_db"]), lambda_rel_err=float(d["lambda_rel_err"]),
            n_hat_acc=float(d["n_hat_acc"]), mean_iters=float(d["mean_iters"]),
            diverged=int(d["diverged"])))
    return recs


def override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy of ``cfg`` with non-None keyword values replaced (and re-validated)."""
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw)
