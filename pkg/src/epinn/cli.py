"""Command-line harness.

Subcommands: gen-data, train, posterior, metrics, ensemble, bergman,
lr-sweep. Every command is driven by a config file (see README for the
format); --out and --seed override the config, and the EPINN_SEED
environment variable overrides the config seed (but not an explicit
--seed flag).

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import calibration, datasets, evidential, inference, training
from .experiment import (CheckpointError, load_checkpoint, load_config, lr_sweep,
                         mlp_from_checkpoint, run_ensemble_experiment, run_experiment,
                         seeds_for)
from .net import NumericalFailure
from .priors import DegenerateInputError, OmegaGrid, OmegaPrior, ResidualWeightPrior


def _apply_overrides(cfg, args):
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    seed = cfg.seed
    if "EPINN_SEED" in os.environ:
        seed = int(os.environ["EPINN_SEED"])
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    return replace(cfg, seed=seed)


def _load(args):
    return _apply_overrides(load_config(args.config), args)


def cmd_gen_data(args):
    cfg = _load(args)
    seeds = seeds_for(cfg)
    out = os.path.join(cfg.out_dir, "data")
    if cfg.problem == "poisson1d":
        info = datasets.gen_poisson_dataset(out, seed=seeds["dataset"], n_train=cfg.n_train,
                                            n_test=cfg.n_test, noise_scale=cfg.noise_scale)
    elif cfg.problem == "fisher-kpp":
        info = datasets.gen_fisher_dataset(out, seed=seeds["dataset"], n_train=cfg.n_train,
                                           n_test=cfg.n_test, noise_amp=cfg.noise_amp,
                                           mask=cfg.mask)
    else:
        info = datasets.gen_bergman_dataset(out, seed=seeds["dataset"])
    print(json.dumps({k: v for k, v in info.items() if k != "meta"}, indent=2))
    return 0


def cmd_train(args):
    cfg = _load(args)
    summary = run_experiment(cfg, verbose=not args.quiet)
    print(json.dumps({"out_dir": cfg.out_dir,
                      "omega_map": summary.get("omega_map"),
                      "sigma2_R_final": summary.get("sigma2_R_final")}, indent=2))
    return 0


def _reload_run(cfg, checkpoint_path):
    ckpt = load_checkpoint(checkpoint_path)
    if ckpt.problem != cfg.problem:
        raise ValueError(f"checkpoint is for problem {ckpt.problem!r}, config says {cfg.problem!r}")
    mlp = mlp_from_checkpoint(ckpt)
    from .experiment import _build_problem, _generate_or_load_data

    train_set, test_set, extras = _generate_or_load_data(cfg)
    prob = _build_problem(cfg, train_set, extras)
    prob = replace(prob, state_shift=np.array(ckpt.state_shift),
                   state_scale=np.array(ckpt.state_scale))
    prior = OmegaPrior(np.array(ckpt.prior_mu), np.array(ckpt.prior_sigma2))
    rw = ResidualWeightPrior(ckpt.alpha_r, ckpt.beta_r)
    return ckpt, mlp, prob, prior, rw, train_set, test_set


def cmd_posterior(args):
    cfg = _load(args)
    ckpt, mlp, prob, prior, rw, train_set, _ = _reload_run(cfg, args.checkpoint)
    grid = OmegaGrid(prob.param_bounds, cfg.grid_points)
    colloc = training.resolve_collocation(cfg.train.collocation, train_set["X"])
    table = inference.posterior_over_grid(mlp, prob, grid, float(np.exp(ckpt.log_sigma2_R)),
                                          prior, colloc)
    from .experiment import _omega_summary, _write_posterior_csv

    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "posterior.csv")
    _write_posterior_csv(path, table, prob.param_names)
    out = {"posterior_csv": path, "omega_posterior": _omega_summary(table, prob.param_names)}
    if cfg.problem == "bergman":
        from .experiment import _bergman_indices_summary

        out["bergman_indices"] = _bergman_indices_summary(table)
    print(json.dumps(out, indent=2))
    return 0


def cmd_metrics(args):
    cfg = _load(args)
    ckpt, mlp, prob, prior, rw, train_set, test_set = _reload_run(cfg, args.checkpoint)
    X = train_set["X"]
    interval_fn = calibration.evidential_interval_fn(mlp, prob.state_shift[0],
                                                     prob.state_scale[0], cfg.interval_method)
    cal_data = (test_set["X"], test_set["y"]) if test_set is not None else (X, train_set["y"])
    report = calibration.ecp_curve(interval_fn, cal_data)
    out = {"calibration": report.as_dict()}
    grid = OmegaGrid(prob.param_bounds, cfg.grid_points)
    colloc = training.resolve_collocation(cfg.train.collocation, X)
    table = inference.posterior_over_grid(mlp, prob, grid, float(np.exp(ckpt.log_sigma2_R)),
                                          prior, colloc)
    from .experiment import _eval_points_for

    gof = inference.gof_pvalue(table, lambda P: prob.mean_field(mlp, P), prob,
                               _eval_points_for(cfg, prob, train_set),
                               n_samples=cfg.gof_samples, seed=seeds_for(cfg)["gof"])
    out["gof"] = {"p_value": gof.p_value, "model_deviation": gof.model_deviation}
    noise_mag = train_set.get("noise_mag")
    if noise_mag is not None and np.any(noise_mag > 0) and prob.name == "fisher-kpp":
        g, nu, alpha, beta = evidential.predict_heads(mlp, X)
        sigma_p = prob.state_scale[0] * np.sqrt(beta / (alpha - 1.0) * (1.0 + 1.0 / nu))
        r_s, p_s = calibration.spearman(sigma_p, noise_mag)
        out["noise_correlation"] = {"r_s": r_s, "p": p_s}
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "metrics.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_ensemble(args):
    cfg = _load(args)
    summary = run_ensemble_experiment(cfg, verbose=not args.quiet)
    print(json.dumps({"out_dir": cfg.out_dir, "omega_ensemble": summary["omega_ensemble"],
                      "mce": summary.get("calibration", {}).get("mce")}, indent=2))
    return 0


def cmd_bergman(args):
    cfg = _load(args)
    if args.csv:
        cfg = replace(cfg, bergman_csv=args.csv, problem="bergman")
    summary = run_experiment(cfg, verbose=not args.quiet)
    print(json.dumps({"out_dir": cfg.out_dir,
                      "omega_posterior": summary["omega_posterior"],
                      "bergman_indices": summary.get("bergman_indices")}, indent=2))
    return 0


def cmd_lr_sweep(args):
    cfg = _load(args)
    lrs = [float(v) for v in args.lrs.split(",")]
    out = lr_sweep(cfg, lrs, verbose=not args.quiet)
    print(json.dumps(out, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="epinn",
                                     description="Evidential physics-informed inverse problems")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", help="override output directory")
        p.add_argument("--seed", type=int, help="override the experiment seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress lines")
        p.add_argument("--threads", type=int, help="cap BLAS worker threads")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    common(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="run the full two-phase pipeline and save a checkpoint")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("posterior", help="posterior table and summaries from a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_posterior)

    p = sub.add_parser("metrics", help="calibration / GOF / noise-correlation from a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("ensemble", help="deep-ensemble baseline experiment")
    common(p)
    p.set_defaults(fn=cmd_ensemble)

    p = sub.add_parser("bergman", help="full pipeline on a clinical-style IVGTT CSV")
    common(p)
    p.add_argument("--csv", help="override the IVGTT series file")
    p.set_defaults(fn=cmd_bergman)

    p = sub.add_parser("lr-sweep", help="phase-1 learning-rate sweep on a half/half split")
    common(p)
    p.add_argument("--lrs", required=True, help="comma-separated learning rates")
    p.set_defaults(fn=cmd_lr_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", None):
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return args.fn(args)
        return args.fn(args)
    except (NumericalFailure, DegenerateInputError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, configparser.Error, CheckpointError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
