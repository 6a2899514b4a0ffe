"""Experiment orchestration: configuration, the full two-phase pipeline,
persistence, and report emission.

A run is deterministic per (config, seed): the master seed derives fixed
sub-seeds for dataset generation, subsampling, network init, and posterior
sampling. Every stage writes its artifacts under the output directory; on
failure a partial summary naming the failed stage is still persisted.

Config files are flat key=value text with sections (configparser syntax);
see the README for the schema.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import calibration, datasets, ensemble, evidential, inference, priors, problems, training
from .net import init_mlp

CHECKPOINT_MAGIC = "EPINN1"


class CheckpointError(ValueError):
    """Bad checkpoint file: wrong magic/version, checksum, or structure."""


@dataclass
class ExperimentConfig:
    problem: str = "poisson1d"
    dataset: str = "generate"
    out_dir: str = "runs/experiment"
    seed: int = 0
    # generation
    n_train: int = 240
    n_test: int = 150
    subsample_train: int = 0
    noise_scale: float = 0.1
    noise_amp: float = 1.0
    mask: tuple = (-10.0, 10.0, 2.0, 8.0)
    # parameter grid
    grid_points: int = 51
    grid_bounds: list = None
    # training
    train: training.TrainConfig = field(default_factory=training.TrainConfig)
    interval_method: str = "student-t"
    gof_samples: int = 1000
    # ensemble
    n_members: int = 10
    lambda_res: float = 0.1
    # bergman
    bergman_csv: str = ""
    g_b: float = None
    i_b: float = None

    def __post_init__(self):
        if self.problem not in ("poisson1d", "fisher-kpp", "bergman"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.problem == "bergman":
            if not self.bergman_csv:
                raise ValueError("bergman experiments need bergman_csv")
        elif self.dataset != "generate" and not os.path.isdir(self.dataset):
            raise ValueError(f"dataset directory {self.dataset!r} does not exist")
        if self.bergman_csv and not os.path.isfile(self.bergman_csv):
            raise ValueError(f"bergman_csv {self.bergman_csv!r} does not exist")


def seeds_for(cfg):
    """Fixed sub-seed derivation from the master seed."""
    s = int(cfg.seed)
    return {"dataset": s, "subsample": s + 1, "net": s + 2, "gof": s + 3,
            "member_base": s + 100}


_TRAIN_KEYS = {f.name for f in training.TrainConfig.__dataclass_fields__.values()} - {"collocation"}


def load_config(path):
    """Parse a flat sectioned key=value config file into ExperimentConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path!r}")
    values = {}
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    for key in ("problem", "dataset", "out_dir", "bergman_csv", "interval_method"):
        if key in exp:
            values[key] = exp[key]
    for key in ("seed", "n_train", "n_test", "subsample_train", "grid_points",
                "gof_samples", "n_members"):
        if key in exp:
            values[key] = int(exp[key])
    for key in ("noise_scale", "noise_amp", "lambda_res", "g_b", "i_b"):
        if key in exp:
            values[key] = float(exp[key])
    if "mask" in exp:
        raw = exp["mask"].strip()
        values["mask"] = None if raw.lower() == "none" else tuple(float(v) for v in raw.split(","))
    if parser.has_section("grid"):
        g = parser["grid"]
        if "points_per_dim" in g:
            values["grid_points"] = int(g["points_per_dim"])
        bounds = []
        for i in range(8):
            key = f"bounds{i}"
            if key in g:
                lo, hi = (float(v) for v in g[key].split(","))
                bounds.append((lo, hi))
        if bounds:
            values["grid_bounds"] = bounds
    tkw = {}
    if parser.has_section("train"):
        t = parser["train"]
        for key in t:
            if key not in _TRAIN_KEYS and key != "collocation":
                raise ValueError(f"unknown [train] key {key!r}")
            if key in ("phase1_epochs", "phase2_epochs", "seed", "log_every", "convergence_window"):
                tkw[key] = int(t[key])
            elif key in ("phase1_lr", "phase2_lr", "convergence_tol"):
                tkw[key] = float(t[key])
            elif key == "collocation":
                tkw[key] = t[key]
    values["train"] = training.TrainConfig(**tkw)
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    problem: str
    layer_sizes: list
    weights_flat: list
    in_shift: list
    in_scale: list
    state_shift: list
    state_scale: list
    log_sigma2_R: float
    omega: list
    prior_mu: list
    prior_sigma2: list
    alpha_r: float
    beta_r: float
    seed: int
    epoch: int
    version: str = CHECKPOINT_MAGIC


def _float_list(arr):
    return [float(v) for v in np.asarray(arr, dtype=np.float64).ravel()]


def checkpoint_from_state(cfg, problem, state, prior, rw):
    mlp = state.mlp
    flat = np.concatenate([w.ravel() for pair in zip(mlp.weights, mlp.biases) for w in pair])
    return Checkpoint(problem=problem.name, layer_sizes=list(mlp.layer_sizes),
                      weights_flat=_float_list(flat),
                      in_shift=_float_list(mlp.in_shift), in_scale=_float_list(mlp.in_scale),
                      state_shift=_float_list(problem.state_shift),
                      state_scale=_float_list(problem.state_scale),
                      log_sigma2_R=float(state.log_sigma2_R), omega=_float_list(state.omega),
                      prior_mu=_float_list(prior.mu), prior_sigma2=_float_list(prior.sigma2),
                      alpha_r=float(rw.alpha_r), beta_r=float(rw.beta_r),
                      seed=int(cfg.seed), epoch=int(state.epoch))


def save_checkpoint(path, ckpt):
    """Versioned text format: magic line, sha256 line, canonical JSON payload."""
    payload = json.dumps(asdict(ckpt), sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(payload.encode()).hexdigest()
    with open(path, "w") as fh:
        fh.write(f"{CHECKPOINT_MAGIC}\n")
        fh.write(f"sha256:{digest}\n")
        fh.write(payload + "\n")
    return path


def load_checkpoint(path):
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: version tag {magic!r} does not match {CHECKPOINT_MAGIC!r}")
        checksum_line = fh.readline().strip()
        payload = fh.read().strip()
    if not checksum_line.startswith("sha256:"):
        raise CheckpointError(f"{path}: missing checksum line")
    digest = hashlib.sha256(payload.encode()).hexdigest()
    if digest != checksum_line[len("sha256:"):]:
        raise CheckpointError(f"{path}: checksum mismatch; file is corrupted")
    try:
        data = json.loads(payload)
        return Checkpoint(**data)
    except (json.JSONDecodeError, TypeError) as err:
        raise CheckpointError(f"{path}: malformed payload: {err}") from None


def mlp_from_checkpoint(ckpt):
    sizes = [int(s) for s in ckpt.layer_sizes]
    mlp = init_mlp(sizes, seed=0, in_shift=np.array(ckpt.in_shift), in_scale=np.array(ckpt.in_scale))
    flat = np.array(ckpt.weights_flat, dtype=np.float64)
    pos = 0
    weights, biases = [], []
    for w, b in zip(mlp.weights, mlp.biases):
        weights.append(flat[pos:pos + w.size].reshape(w.shape))
        pos += w.size
        biases.append(flat[pos:pos + b.size])
        pos += b.size
    return replace(mlp, weights=weights, biases=biases)


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------

def _generate_or_load_data(cfg):
    seeds = seeds_for(cfg)
    if cfg.problem == "bergman":
        inputs = datasets.ingest_bergman_csv(cfg.bergman_csv, g_b=cfg.g_b, i_b=cfg.i_b)
        X = inputs.times[:, None]
        data = {"X": X, "y": inputs.glucose, "truth": inputs.glucose,
                "noise_mag": np.zeros(len(X))}
        return data, None, {"bergman_inputs": inputs}
    if cfg.dataset == "generate":
        data_dir = os.path.join(cfg.out_dir, "data")
        if cfg.problem == "poisson1d":
            datasets.gen_poisson_dataset(data_dir, seed=seeds["dataset"], n_train=cfg.n_train,
                                         n_test=cfg.n_test, noise_scale=cfg.noise_scale)
        else:
            datasets.gen_fisher_dataset(data_dir, seed=seeds["dataset"], n_train=cfg.n_train,
                                        n_test=cfg.n_test, noise_amp=cfg.noise_amp, mask=cfg.mask)
    else:
        data_dir = cfg.dataset
    train = datasets.load_dataset(os.path.join(data_dir, "train.csv"))
    test = datasets.load_dataset(os.path.join(data_dir, "test.csv"))
    if cfg.subsample_train and cfg.subsample_train < len(train["y"]):
        rng = np.random.default_rng(seeds["subsample"])
        idx = np.sort(rng.choice(len(train["y"]), cfg.subsample_train, replace=False))
        train = {k: (v[idx] if isinstance(v, np.ndarray) else v) for k, v in train.items()}
    return train, test, {}


def _build_problem(cfg, train, extras):
    y = train["y"]
    shift, scale = float(np.mean(y)), float(np.ptp(y))
    if scale == 0.0:
        scale = 1.0
    if cfg.problem == "poisson1d":
        prob = problems.poisson_problem(state_shift=[shift], state_scale=[scale])
    elif cfg.problem == "fisher-kpp":
        prob = problems.fisher_problem(state_shift=[shift], state_scale=[scale])
    else:
        # X (remote insulin action) is latent, ~1e-2/min physiologically;
        # its channel scale keeps phase-1 X noise from swamping the residual.
        prob = problems.bergman_problem(extras["bergman_inputs"],
                                        state_shift=[shift, 0.0], state_scale=[scale, 0.05])
    if cfg.grid_bounds:
        if len(cfg.grid_bounds) != prob.n_params:
            raise ValueError(f"grid_bounds needs {prob.n_params} intervals")
        prob = replace(prob, param_bounds=[tuple(b) for b in cfg.grid_bounds])
    return prob


def _network_for(cfg, prob, train):
    X = train["X"]
    in_shift = (X.min(axis=0) + X.max(axis=0)) / 2.0
    in_scale = np.maximum((X.max(axis=0) - X.min(axis=0)) / 2.0, 1e-12)
    out_dim = 5 if cfg.problem == "bergman" else 4
    return init_mlp([prob.input_dim, 16, 16, out_dim], seeds_for(cfg)["net"],
                    in_shift=in_shift, in_scale=in_scale)


def _eval_points_for(cfg, prob, train):
    X = train["X"]
    if prob.input_dim == 1:
        lo, hi = float(X.min()), float(X.max())
        return np.linspace(lo, hi, 201)[:, None]
    gx, gt = np.meshgrid(np.linspace(X[:, 0].min(), X[:, 0].max(), 40),
                         np.linspace(X[:, 1].min(), X[:, 1].max(), 25))
    return np.column_stack([gx.ravel(), gt.ravel()])


def _write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row) + "\n")


def _write_training_log(path, phase1_hist, phase2_hist, param_names):
    header = ["phase", "epoch", "total", "data_nll", "residual_term", "sigma2_R"] + list(param_names)
    rows = []
    for r in phase1_hist:
        rows.append(["1", r["epoch"], r["data_nll"], r["data_nll"], 0.0, float("nan")]
                    + [float("nan")] * len(param_names))
    for r in phase2_hist:
        rows.append(["2", r["epoch"], r["total"], r["data_nll"], r["residual_term"], r["sigma2_R"]]
                    + [r[name] for name in param_names])
    _write_rows_csv(path, header, rows)


def _write_posterior_csv(path, table, param_names):
    header = list(param_names) + ["probability"]
    nodes = table.grid.flat_nodes()
    rows = [list(nodes[i]) + [table.prob[i]] for i in range(len(table.prob))]
    _write_rows_csv(path, header, rows)


def _write_predictions_csv(path, cfg, prob, mlp, pts):
    g, nu, alpha, beta = evidential.predict_heads(mlp, pts)
    shift, scale = prob.state_shift[0], prob.state_scale[0]
    gamma = shift + scale * g
    sigma_p = scale * np.sqrt(beta / (alpha - 1.0) * (1.0 + 1.0 / nu))
    cols = {}
    if prob.input_dim == 1:
        cols["x"] = pts[:, 0]
    else:
        cols["x"], cols["t"] = pts[:, 0], pts[:, 1]
    cols["gamma"] = gamma
    cols["sigma_p"] = sigma_p
    for level, tag in ((0.68, "68"), (0.95, "95")):
        lo, hi = evidential.interval_bounds(g, nu, alpha, beta, level, cfg.interval_method)
        cols[f"lo{tag}"] = shift + scale * lo
        cols[f"hi{tag}"] = shift + scale * hi
    _write_rows_csv(path, list(cols), zip(*cols.values()))


def _omega_summary(table, param_names):
    dens = inference.as_density(table)
    out = {}
    for i, name in enumerate(param_names):
        lo, hi = table.ci68[i]
        xs, marg = priors.marginal_1d(dens, i)
        h = table.grid.spacings[i]
        mean_i = float(np.sum(xs * marg) * h)
        std_i = float(np.sqrt(np.sum((xs - mean_i) ** 2 * marg) * h))
        out[name] = {"mean": float(table.mean[i]), "mode": float(table.mode[i]),
                     "std": std_i, "ci68_lo": float(lo), "ci68_hi": float(hi)}
    return out


def _dump_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# full experiments
# ---------------------------------------------------------------------------

def run_experiment(cfg, verbose=False):
    """Dataset -> phase 1 -> priors -> phase 2 -> posterior -> reports.

    Returns the summary dict (also written to out_dir/summary.json along
    with the checkpoint, training log, posterior and prediction CSVs).
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    stage = "load-data"
    timings = {}
    summary = {"problem": cfg.problem, "seed": int(cfg.seed)}
    try:
        t0 = time.time()
        train_set, test_set, extras = _generate_or_load_data(cfg)
        X, y = train_set["X"], train_set["y"]
        timings[stage] = time.time() - t0

        stage = "phase1"
        t0 = time.time()
        prob = _build_problem(cfg, train_set, extras)
        mlp0 = _network_for(cfg, prob, train_set)
        hist1 = []
        mlp1 = training.phase1_train(mlp0, (X, y), cfg.train,
                                     target_shift=prob.state_shift[0],
                                     target_scale=prob.state_scale[0],
                                     history=hist1, verbose=verbose)
        timings[stage] = time.time() - t0

        stage = "priors"
        t0 = time.time()
        grid = priors.OmegaGrid(prob.param_bounds, cfg.grid_points)
        colloc = training.resolve_collocation(cfg.train.collocation, X)
        prior, rw = priors.build_priors(mlp1, prob, grid, X, colloc)
        timings[stage] = time.time() - t0
        summary["priors"] = {"mu": _float_list(prior.mu), "sigma2": _float_list(prior.sigma2),
                             "alpha_r": float(rw.alpha_r), "beta_r": float(rw.beta_r),
                             "sigma2_ini": float(rw.sigma2_ini), "sigma2_asy": float(rw.sigma2_asy)}

        stage = "phase2"
        t0 = time.time()
        state = training.init_phase2_state(mlp1, prob, (prior, rw), cfg.train)
        training.phase2_train(state, (X, y), prob, (prior, rw), cfg.train, verbose=verbose)
        timings[stage] = time.time() - t0
        summary["sigma2_R_final"] = state.sigma2_R
        summary["omega_map"] = {n: float(v) for n, v in zip(prob.param_names, state.omega)}

        stage = "posterior"
        t0 = time.time()
        table = inference.posterior_over_grid(state.mlp, prob, grid, state.sigma2_R, prior, colloc)
        summary["omega_posterior"] = _omega_summary(table, prob.param_names)
        timings[stage] = time.time() - t0

        stage = "goodness-of-fit"
        t0 = time.time()
        eval_pts = _eval_points_for(cfg, prob, train_set)
        gof = inference.gof_pvalue(table, lambda P: prob.mean_field(state.mlp, P), prob,
                                   eval_pts, n_samples=cfg.gof_samples,
                                   seed=seeds_for(cfg)["gof"])
        summary["gof"] = {"p_value": gof.p_value, "model_deviation": gof.model_deviation,
                          "n_samples": gof.n_samples, "sample_deviations": gof.sample_deviations}
        timings[stage] = time.time() - t0

        stage = "calibration"
        t0 = time.time()
        interval_fn = calibration.evidential_interval_fn(
            state.mlp, prob.state_shift[0], prob.state_scale[0], cfg.interval_method)
        cal_data = (test_set["X"], test_set["y"]) if test_set is not None else (X, y)
        report = calibration.ecp_curve(interval_fn, cal_data)
        summary["calibration"] = report.as_dict()
        summary["calibration"]["against"] = "test" if test_set is not None else "train"
        noise_mag = train_set.get("noise_mag")
        if cfg.problem == "fisher-kpp" and noise_mag is not None and np.any(noise_mag > 0):
            g, nu, alpha, beta = evidential.predict_heads(state.mlp, X)
            sigma_p = prob.state_scale[0] * np.sqrt(beta / (alpha - 1.0) * (1.0 + 1.0 / nu))
            r_s, p_s = calibration.spearman(sigma_p, noise_mag)
            summary["noise_correlation"] = {"r_s": r_s, "p": p_s}
        if cfg.problem == "bergman":
            sg_si = _bergman_indices_summary(table)
            summary["bergman_indices"] = sg_si
        timings[stage] = time.time() - t0

        stage = "persist"
        ckpt = checkpoint_from_state(cfg, prob, state, prior, rw)
        save_checkpoint(os.path.join(cfg.out_dir, "checkpoint.ckpt"), ckpt)
        _write_training_log(os.path.join(cfg.out_dir, "training_log.csv"),
                            hist1, state.history, prob.param_names)
        _write_posterior_csv(os.path.join(cfg.out_dir, "posterior.csv"), table, prob.param_names)
        _write_predictions_csv(os.path.join(cfg.out_dir, "predictions.csv"),
                               cfg, prob, state.mlp, eval_pts)
        _write_rows_csv(os.path.join(cfg.out_dir, "calibration.csv"),
                        ["level", "ecp"], zip(report.levels, report.ecp))
        summary["runtime_sec"] = {k: round(v, 3) for k, v in timings.items()}
        summary["seeds"] = seeds_for(cfg)
        _dump_summary(os.path.join(cfg.out_dir, "summary.json"), summary)
        return summary
    except Exception as err:
        summary["failed_stage"] = stage
        summary["error"] = f"{type(err).__name__}: {err}"
        summary["runtime_sec"] = {k: round(v, 3) for k, v in timings.items()}
        try:
            _dump_summary(os.path.join(cfg.out_dir, "summary_partial.json"), summary)
        except OSError:
            pass
        raise


def _bergman_indices_summary(table):
    """Posterior summaries of S_G = p1 and S_I = p3/p2 from the grid."""
    nodes = table.grid.flat_nodes()
    w = table.prob * table.grid.cell_volume
    w = w / w.sum()
    s_g = nodes[:, 0]
    s_i = nodes[:, 2] / nodes[:, 1]
    out = {}
    for name, vals in (("S_G", s_g), ("S_I", s_i)):
        mean = float(np.sum(w * vals))
        order = np.argsort(vals)
        cdf = np.cumsum(w[order])
        lo = float(vals[order][np.searchsorted(cdf, 0.16)])
        hi = float(vals[order][np.searchsorted(cdf, 0.84)])
        out[name] = {"mean": mean, "ci68_lo": lo, "ci68_hi": hi}
    return out


def run_ensemble_experiment(cfg, verbose=False):
    """Deep Ensemble baseline with the same report schema as run_experiment."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    stage = "load-data"
    timings = {}
    summary = {"problem": cfg.problem, "seed": int(cfg.seed), "method": "deep-ensemble",
               "n_members": int(cfg.n_members), "lambda_res": float(cfg.lambda_res)}
    try:
        t0 = time.time()
        train_set, test_set, extras = _generate_or_load_data(cfg)
        X, y = train_set["X"], train_set["y"]
        timings[stage] = time.time() - t0

        stage = "train-members"
        t0 = time.time()
        prob = _build_problem(cfg, train_set, extras)
        eval_pts = test_set["X"] if test_set is not None else X
        base = seeds_for(cfg)["member_base"]
        result = ensemble.run_ensemble(prob, (X, y), cfg.n_members, cfg.train,
                                       lambda_res=cfg.lambda_res, eval_points=eval_pts,
                                       seeds=[base + i for i in range(cfg.n_members)])
        timings[stage] = time.time() - t0

        stage = "reports"
        t0 = time.time()
        omega = {}
        pct = np.percentile(result.member_omegas, [16, 84], axis=0)
        for i, name in enumerate(prob.param_names):
            omega[name] = {"mean": float(result.omega_mean[i]), "std": float(result.omega_std[i]),
                           "ci68_lo_std": float(result.omega_mean[i] - result.omega_std[i]),
                           "ci68_hi_std": float(result.omega_mean[i] + result.omega_std[i]),
                           "ci68_lo_pct": float(pct[0, i]), "ci68_hi_pct": float(pct[1, i])}
        summary["omega_ensemble"] = omega
        if test_set is not None:
            interval_fn = ensemble.gaussian_interval_fn(result, eval_pts)
            report = calibration.ecp_curve(interval_fn, (test_set["X"], test_set["y"]))
            summary["calibration"] = report.as_dict()
        noise_mag = train_set.get("noise_mag")
        if cfg.problem == "fisher-kpp" and noise_mag is not None and np.any(noise_mag > 0):
            train_curves = ensemble.member_curves_at(result, prob, X)
            r_s, p_s = calibration.spearman(train_curves.std(axis=0), noise_mag)
            summary["noise_correlation"] = {"r_s": r_s, "p": p_s}
        summary["failed_members"] = list(result.failed_seeds)
        summary["runtime_sec"] = {k: round(v, 3) for k, v in timings.items()}
        summary["seeds"] = {"members": list(result.seeds)}
        _dump_summary(os.path.join(cfg.out_dir, "summary.json"), summary)
        _write_rows_csv(os.path.join(cfg.out_dir, "ensemble_members.csv"),
                        list(prob.param_names),
                        [list(row) for row in result.member_omegas])
        return summary
    except Exception as err:
        summary["failed_stage"] = stage
        summary["error"] = f"{type(err).__name__}: {err}"
        try:
            _dump_summary(os.path.join(cfg.out_dir, "summary_partial.json"), summary)
        except OSError:
            pass
        raise


def lr_sweep(cfg, lrs, verbose=False):
    """Phase-1 learning-rate sweep on a half/half train-validation split."""
    train_set, _, extras = _generate_or_load_data(cfg)
    X, y = train_set["X"], train_set["y"]
    rng = np.random.default_rng(seeds_for(cfg)["subsample"])
    perm = rng.permutation(len(y))
    half = len(y) // 2
    fit_idx, val_idx = perm[:half], perm[half:]
    prob = _build_problem(cfg, train_set, extras)
    results = []
    for lr in lrs:
        tcfg = replace(cfg.train, phase1_lr=float(lr))
        mlp0 = _network_for(cfg, prob, train_set)
        mlp1 = training.phase1_train(mlp0, (X[fit_idx], y[fit_idx]), tcfg,
                                     target_shift=prob.state_shift[0],
                                     target_scale=prob.state_scale[0])
        y_n = (y[val_idx] - prob.state_shift[0]) / prob.state_scale[0]
        g, nu, alpha, beta = evidential.predict_heads(mlp1, X[val_idx])
        val_nll = float(np.mean(evidential.nll_terms(g, nu, alpha, beta, y_n)))
        results.append({"lr": float(lr), "val_nll": val_nll})
        if verbose:
            print(f"[lr-sweep] lr={lr:g}  val_nll={val_nll:.5f}")
    results.sort(key=lambda r: r["val_nll"])
    return {"results": results, "best_lr": results[0]["lr"]}
