"""Command-line front end: configuration, runs, metrics emission.

Subcommands
-----------
``train``
    Train one network (``unrectify``, ``adam`` or ``bcd``) on a dataset,
    optionally through a sensing problem, and write a checkpoint, a
    trace CSV and a JSON summary into a fresh run directory.
``recover``
    Reconstruct signals through a trained checkpoint and score them
    (MSE/PSNR, SSIM where samples are square images).  With ``--m-list``
    it sweeps freshly generated sensing problems and emits one CSV row
    per compression ratio.
``bench``
    Cross-product of methods x measurement counts; trains one net per
    cell (averaged over seeds) and writes a comparison table.  Cell
    failures are recorded in the table instead of aborting the run.
``gen-sensing``
    Generate a Gaussian sensing problem and save it.
``inspect-checkpoint``
    Print a JSON description of a checkpoint or sensing file.

Configuration is a flat JSON object (see ``CONFIG_SCHEMA``); unknown
keys are rejected and command-line flags override file values.  Every
run writes its artifacts under ``<out_dir>/<UTC timestamp>-<config
hash>/`` so reruns never collide and a run is reproducible from the
``config.json`` stored next to its outputs.

Exit codes: 0 success, 2 bad configuration, 3 missing or incompatible
data, 4 solver divergence.

The environment variable ``URNET_NUM_THREADS`` (read at first package
import) caps the BLAS thread pools for every subcommand.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from .auglag import CgtOptions, DivergenceError, PenaltyParams, cgt_train
from .baselines import AdamConfig, BcdConfig, adam_train, bcd_train
from .csrecovery import (build_training, gen_sensing, load_sensing, mse,
                         psnr, save_sensing, ssim)
from .csrecovery import recover as cs_recover
from .datasets import gen_sparse, load_mnist_idx
from .model import forward, init_gaussian, load_checkpoint, save_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

METHODS = ("unrectify", "adam", "bcd")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


class DataError(RuntimeError):
    """Missing, corrupt or dimensionally incompatible data (exit 3)."""


# ------------------------------------------------------------------ config

_UNSET = object()


def _int_list(text):
    return [int(tok) for tok in str(text).replace(",", " ").split()]


def _str_list(text):
    return [tok for tok in str(text).replace(",", " ").split() if tok]


def _opt_int(text):
    if str(text).lower() in ("none", "null", ""):
        return None
    return int(text)


def _bool(text):
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser for flag text, default, help).  The same key set is the
# schema for config files; JSON values must already have the right type.
CONFIG_SCHEMA = {
    "method": (str, "unrectify", "training method: unrectify|adam|bcd"),
    "layer_dims": (_int_list, None,
                   "network widths, e.g. 32,64,32 (first and last must "
                   "match the signal dimension)"),
    "init_sigma": (float, 0.01, "std-dev of the Gaussian weight init"),
    "init_seed": (int, 0, "seed for the weight init"),
    "rho1": (float, 1.0, "base penalty on v - d.u"),
    "rho2": (float, 1.0, "base penalty on u - (W v_prev + b)"),
    "rho3": (float, 100.0, "base penalty on d.u - s"),
    "rho4": (float, 100.0, "base penalty on (1-d).u + t"),
    "c1": (float, 1e-3, "weight-decay coefficient (all methods)"),
    "c2": (float, 1e-6, "activation-weight decay (unrectify)"),
    "tau": (float, 0.01, "penalty growth factor per infeasible step"),
    "omega_star": (float, 1e-4, "final inner (KKT) tolerance"),
    "eta_star": (float, 1e-4, "final constraint-norm tolerance"),
    "max_outer": (int, 200, "outer iteration cap (unrectify)"),
    "max_sweeps": (int, 500, "inner sweep cap per outer iteration"),
    "batch_size": (_opt_int, None,
                   "mini-batch size; omit or null for full batch"),
    "deterministic": (_bool, False,
                      "fixed-order reductions for bitwise reruns"),
    "epochs": (int, 100, "epochs for adam/bcd"),
    "lr": (float, 1e-3, "adam step size"),
    "gamma": (float, 1.0, "bcd splitting penalty"),
    "sweeps_per_epoch": (int, 1, "bcd sweeps per recorded epoch"),
    "shuffle_seed": (int, 0, "mini-batch shuffling seed"),
    "dataset": (str, "sparse", "dataset kind: sparse|idx"),
    "data_n": (int, 32, "signal dimension (sparse dataset)"),
    "data_k": (int, 4, "nonzeros per signal (sparse dataset)"),
    "data_count": (int, 100, "training sample count"),
    "data_seed": (int, 0, "dataset generation seed"),
    "images_path": (str, None, "IDX image file (idx dataset)"),
    "labels_path": (str, None, "optional IDX label file"),
    "sensing_m": (_opt_int, None,
                  "measurement count; omit to train without sensing"),
    "sensing_seed": (int, 0, "sensing matrix seed"),
    "out_dir": (str, "runs", "parent directory for run directories"),
    "methods": (_str_list, list(METHODS), "bench: methods to compare"),
    "m_list": (_int_list, [4, 8, 16, 24],
               "bench/recover sweep: measurement counts"),
    "seeds": (_int_list, [0], "bench: init/data seeds to average over"),
    "test_count": (int, 100, "bench: held-out sample count"),
    "test_seed": (int, 1000, "bench: held-out dataset seed"),
}


def default_config():
    return {key: entry[1] for key, entry in CONFIG_SCHEMA.items()}


def load_config_file(path):
    """Parse a flat JSON config, rejecting unknown keys."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_SCHEMA))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    return raw


def resolve_config(args):
    """defaults <- config file <- command-line flags, then validate."""
    cfg = default_config()
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config))
    for key in CONFIG_SCHEMA:
        val = getattr(args, key, _UNSET)
        if val is not _UNSET:
            cfg[key] = val
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, "
                          f"got {cfg['method']!r}")
    for m in cfg["methods"]:
        if m not in METHODS:
            raise ConfigError(f"unknown bench method {m!r}")
    if not cfg["methods"]:
        raise ConfigError("bench needs at least one method")
    if not cfg["m_list"]:
        raise ConfigError("m_list must not be empty")
    if cfg["dataset"] not in ("sparse", "idx"):
        raise ConfigError("dataset must be 'sparse' or 'idx', "
                          f"got {cfg['dataset']!r}")
    if cfg["layer_dims"] is not None:
        dims = cfg["layer_dims"]
        if len(dims) < 3 or any(d < 1 for d in dims):
            raise ConfigError(
                "layer_dims needs at least three positive widths "
                f"(two layers), got {dims}")
    if cfg["dataset"] == "sparse":
        n, k = cfg["data_n"], cfg["data_k"]
        if not 1 <= k <= n:
            raise ConfigError(f"need 1 <= data_k <= data_n, "
                              f"got k={k}, n={n}")
    if cfg["dataset"] == "idx" and not cfg["images_path"]:
        raise ConfigError("idx dataset needs images_path")
    for key in ("data_count", "test_count", "epochs", "max_outer",
                "max_sweeps", "sweeps_per_epoch"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {cfg[key]}")
    for key in ("init_sigma", "rho1", "rho2", "rho3", "rho4", "c1",
                "c2", "lr", "gamma", "omega_star", "eta_star"):
        if cfg[key] <= 0:
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")
    if not 0 < cfg["tau"] < 1:
        raise ConfigError(f"tau must lie in (0, 1), got {cfg['tau']}")
    if cfg["batch_size"] is not None and cfg["batch_size"] < 1:
        raise ConfigError("batch_size must be >= 1 or null")
    for m in list(cfg["m_list"]) + (
            [cfg["sensing_m"]] if cfg["sensing_m"] is not None else []):
        if m < 1:
            raise ConfigError(f"measurement counts must be >= 1, got {m}")


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:8]


def make_run_dir(cfg):
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = os.path.join(cfg["out_dir"], f"{stamp}-{config_hash(cfg)}")
    path, bump = base, 0
    while True:
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            bump += 1
            path = f"{base}-{bump}"


# ------------------------------------------------------------- data wiring

def _load_signals(cfg, count, seed):
    """Signal columns for the configured dataset kind (DataError on I/O)."""
    if cfg["dataset"] == "sparse":
        return gen_sparse(cfg["data_n"], cfg["data_k"], count,
                          seed=seed).samples
    try:
        ds = load_mnist_idx(cfg["images_path"], cfg["labels_path"])
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if count < ds.count:
        return ds.samples[:, :count]
    return ds.samples


def _check_dims(cfg, n):
    dims = cfg["layer_dims"]
    if dims is None:
        raise ConfigError("layer_dims is required to train")
    if dims[0] != n or dims[-1] != n:
        raise ConfigError(
            f"layer_dims {dims} must start and end at the signal "
            f"dimension {n}")
    if cfg["sensing_m"] is not None and not cfg["sensing_m"] < n:
        raise ConfigError(
            f"sensing_m ({cfg['sensing_m']}) must be < signal "
            f"dimension ({n})")


def _training_pairs(cfg):
    """(inputs, targets, sensing-or-None) for the configured task."""
    X = _load_signals(cfg, cfg["data_count"], cfg["data_seed"])
    _check_dims(cfg, X.shape[0])
    if cfg["sensing_m"] is None:
        return X, X, None
    sensing = gen_sensing(cfg["sensing_m"], X.shape[0],
                          cfg["sensing_seed"])
    inputs, targets = build_training(X, sensing)
    return inputs, targets, sensing


def _train_one(cfg, inputs, targets):
    """Dispatch one training run; returns (net, trace, extras dict)."""
    net = init_gaussian(cfg["layer_dims"], sigma=cfg["init_sigma"],
                        seed=cfg["init_seed"])
    if cfg["method"] == "unrectify":
        pen = PenaltyParams(rho1=cfg["rho1"], rho2=cfg["rho2"],
                            rho3=cfg["rho3"], rho4=cfg["rho4"],
                            c1=cfg["c1"], c2=cfg["c2"])
        opts = CgtOptions(omega_star=cfg["omega_star"],
                          eta_star=cfg["eta_star"],
                          max_outer=cfg["max_outer"],
                          tau=cfg["tau"],
                          max_sweeps=cfg["max_sweeps"],
                          minibatch=cfg["batch_size"],
                          shuffle_seed=cfg["shuffle_seed"],
                          deterministic=cfg["deterministic"])
        res = cgt_train(net, inputs, targets, pen=pen, opts=opts)
        extras = {"converged": bool(res.converged),
                  "outer_iters": int(res.outer_iters),
                  "constraint_norm": float(res.constraint_norm),
                  "kkt": float(res.kkt),
                  "rho_scale": float(res.rho_scale),
                  "epochs": None}
        return res.net, res.trace, extras
    if cfg["method"] == "adam":
        acfg = AdamConfig(lr=cfg["lr"], epochs=cfg["epochs"],
                          batch_size=cfg["batch_size"], c1=cfg["c1"],
                          shuffle_seed=cfg["shuffle_seed"])
        res = adam_train(net, inputs, targets, acfg)
    else:
        bcfg = BcdConfig(gamma=cfg["gamma"], epochs=cfg["epochs"],
                         sweeps_per_epoch=cfg["sweeps_per_epoch"],
                         c1=cfg["c1"])
        res = bcd_train(net, inputs, targets, bcfg)
    extras = {"converged": None, "outer_iters": None,
              "constraint_norm": None, "kkt": None, "rho_scale": None,
              "epochs": cfg["epochs"]}
    return res.net, res.trace, extras


def _fit_loss(net, inputs, targets):
    r = targets - forward(net, inputs)
    return 0.5 * float(np.sum(r * r))


# ------------------------------------------------------------- subcommands

def cmd_train(args):
    cfg = resolve_config(args)
    inputs, targets, sensing = _training_pairs(cfg)
    run_dir = make_run_dir(cfg)
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    t0 = time.perf_counter()
    net, trace, extras = _train_one(cfg, inputs, targets)
    wall = time.perf_counter() - t0
    save_checkpoint(net, os.path.join(run_dir, "model.urnw"))
    trace.to_csv(os.path.join(run_dir, "trace.csv"))
    if sensing is not None:
        save_sensing(sensing, os.path.join(run_dir, "sensing.ursm"))
    summary = {
        "method": cfg["method"],
        "run_dir": run_dir,
        "final_loss": _fit_loss(net, inputs, targets),
        "wall_time_s": wall,
        "checkpoint": "model.urnw",
        "trace": "trace.csv",
        "sensing": "sensing.ursm" if sensing is not None else None,
        **extras,
    }
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _load_net(path):
    try:
        return load_checkpoint(path)
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint not found: {path}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _sample_metrics(X, Xhat):
    """Per-column (mse, psnr, ssim-or-None); ssim for square images."""
    n = X.shape[0]
    side = int(round(np.sqrt(n)))
    as_image = side * side == n and side >= 11
    rows = []
    for i in range(X.shape[1]):
        x, xh = X[:, i], Xhat[:, i]
        s = (ssim(x.reshape(side, side), xh.reshape(side, side))
             if as_image else None)
        rows.append((mse(x, xh), psnr(x, xh), s))
    return rows


def _fmt(value):
    return "" if value is None else repr(float(value))


def cmd_recover(args):
    net = _load_net(args.checkpoint)
    cfg = resolve_config(args)
    X = _load_signals(cfg, cfg["data_count"], cfg["data_seed"])
    n = X.shape[0]
    if net.layer_dims[0] != n or net.layer_dims[-1] != n:
        raise DataError(
            f"checkpoint maps {net.layer_dims[0]} -> "
            f"{net.layer_dims[-1]} but signals have dimension {n}")
    run_dir = make_run_dir(cfg)

    sweep = getattr(args, "m_list", _UNSET)
    if sweep is not _UNSET:
        rows = []
        for m in sweep:
            if not 0 < m < n:
                raise ConfigError(f"sweep m={m} must lie in [1, {n})")
            sensing = gen_sensing(m, n, cfg["sensing_seed"])
            Xhat = cs_recover(net, sensing, sensing.A @ X)
            per = _sample_metrics(X, Xhat)
            mean_ssim = (None if per[0][2] is None
                         else float(np.mean([r[2] for r in per])))
            rows.append((m, m / n, float(np.mean([r[0] for r in per])),
                         float(np.mean([r[1] for r in per])), mean_ssim))
        out = os.path.join(run_dir, "sweep.csv")
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "ratio", "mse", "psnr", "ssim"])
            for m, ratio, e, p, s in rows:
                writer.writerow([m, repr(ratio), _fmt(e), _fmt(p),
                                 _fmt(s)])
        print(json.dumps({"run_dir": run_dir, "table": "sweep.csv",
                          "m_list": [r[0] for r in rows],
                          "mse": [r[2] for r in rows]}, sort_keys=True))
        return EXIT_OK

    if args.sensing is None:
        raise ConfigError("recover needs --sensing or --m-list")
    try:
        sensing = load_sensing(args.sensing)
    except FileNotFoundError as exc:
        raise DataError(f"sensing file not found: {args.sensing}") \
            from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if sensing.n != n:
        raise DataError(f"sensing is for dimension {sensing.n}, "
                        f"signals have dimension {n}")
    Xhat = cs_recover(net, sensing, sensing.A @ X)
    per = _sample_metrics(X, Xhat)
    np.save(os.path.join(run_dir, "recovered.npy"), Xhat)
    out = os.path.join(run_dir, "metrics.csv")
    has_ssim = per[0][2] is not None
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "mse", "psnr", "ssim"])
        for i, (e, p, s) in enumerate(per):
            writer.writerow([i, _fmt(e), _fmt(p), _fmt(s)])
        writer.writerow(
            ["mean", _fmt(np.mean([r[0] for r in per])),
             _fmt(np.mean([r[1] for r in per])),
             _fmt(np.mean([r[2] for r in per]) if has_ssim else None)])
    print(json.dumps({
        "run_dir": run_dir, "table": "metrics.csv",
        "recovered": "recovered.npy", "samples": len(per),
        "mean_mse": float(np.mean([r[0] for r in per])),
        "mean_ssim": (float(np.mean([r[2] for r in per]))
                      if has_ssim else None),
    }, sort_keys=True))
    return EXIT_OK


def cmd_bench(args):
    cfg = resolve_config(args)
    if cfg["dataset"] == "idx":
        # held-out columns start where the training slice ends
        both = _load_signals(cfg, cfg["data_count"] + cfg["test_count"],
                             cfg["data_seed"])
        X_test = both[:, cfg["data_count"]:]
        if X_test.shape[1] < 1:
            raise DataError("idx file has no columns left for testing")
    else:
        X_test = _load_signals(cfg, cfg["test_count"], cfg["test_seed"])
    n = X_test.shape[0]
    _check_dims(cfg, n)
    run_dir = make_run_dir(cfg)
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    t0 = time.perf_counter()
    table = []
    failures = 0
    for method in cfg["methods"]:
        for m in sorted(cfg["m_list"]):
            if not m < n:
                raise ConfigError(f"bench m={m} must be < {n}")
            cell_mse, cell_psnr, cell_ssim, status = [], [], [], ""
            for seed in cfg["seeds"]:
                cell = dict(cfg, method=method, sensing_m=m,
                            data_seed=cfg["data_seed"] + seed,
                            init_seed=cfg["init_seed"] + seed,
                            sensing_seed=cfg["sensing_seed"] + seed)
                try:
                    inputs, targets, sensing = _training_pairs(cell)
                    net, _, _ = _train_one(cell, inputs, targets)
                    Xhat = cs_recover(net, sensing, sensing.A @ X_test)
                    per = _sample_metrics(X_test, Xhat)
                    cell_mse.append(np.mean([r[0] for r in per]))
                    cell_psnr.append(np.mean([r[1] for r in per]))
                    if per[0][2] is not None:
                        cell_ssim.append(np.mean([r[2] for r in per]))
                except (DivergenceError, FloatingPointError,
                        np.linalg.LinAlgError, RuntimeError) as exc:
                    status = f"{type(exc).__name__}: {exc}"
                    failures += 1
                    break
            if status:
                table.append((method, m, m / n, None, None, None,
                              status))
            else:
                table.append(
                    (method, m, m / n, float(np.mean(cell_mse)),
                     float(np.mean(cell_psnr)),
                     float(np.mean(cell_ssim)) if cell_ssim else None,
                     ""))
    out = os.path.join(run_dir, "bench.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "m", "ratio", "mse", "psnr", "ssim", "status"])
        for method, m, ratio, e, p, s, status in table:
            writer.writerow([method, m, repr(ratio), _fmt(e), _fmt(p),
                             _fmt(s), status])
    summary = {"run_dir": run_dir, "table": "bench.csv",
               "cells": len(table), "failed_cells": failures,
               "wall_time_s": time.perf_counter() - t0}
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_gen_sensing(args):
    if not 0 < args.m < args.n:
        raise ConfigError(
            f"need 0 < m < n, got m={args.m}, n={args.n}")
    try:
        sensing = gen_sensing(args.m, args.n, args.seed)
    except RuntimeError as exc:
        raise DataError(str(exc)) from exc
    save_sensing(sensing, args.out)
    print(args.out)
    return EXIT_OK


def cmd_inspect(args):
    try:
        with open(args.path, "rb") as fh:
            magic = fh.read(4)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {args.path}") from exc
    if magic == b"URNW":
        net = _load_net(args.path)
        info = {
            "kind": "network",
            "layer_dims": list(net.layer_dims),
            "layers": net.depth,
            "parameters": int(sum(w.size for w in net.weights)
                              + sum(b.size for b in net.biases)),
            "weight_norms": [float(np.linalg.norm(w))
                             for w in net.weights],
        }
    elif magic == b"URSM":
        try:
            sensing = load_sensing(args.path)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        info = {
            "kind": "sensing",
            "m": sensing.m,
            "n": sensing.n,
            "ratio": sensing.ratio,
            "seed": sensing.seed,
            "right_inverse_error": float(
                np.linalg.norm(sensing.A @ sensing.A_pinv
                               - np.eye(sensing.m))),
        }
    else:
        raise DataError(f"{args.path}: unrecognized magic {magic!r}")
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


# ----------------------------------------------------------------- parser

def _add_config_flags(sub, keys):
    sub.add_argument("--config", metavar="FILE",
                     help="JSON config file (flat key set)")
    for key in keys:
        parse, _, help_text = CONFIG_SCHEMA[key]
        sub.add_argument("--" + key.replace("_", "-"), dest=key,
                         type=parse, default=_UNSET, metavar="V",
                         help=help_text)


_TRAIN_KEYS = [k for k in CONFIG_SCHEMA
               if k not in ("methods", "m_list", "seeds", "test_count",
                            "test_seed")]
_DATA_KEYS = ["dataset", "data_n", "data_k", "data_count", "data_seed",
              "images_path", "labels_path", "sensing_seed", "out_dir"]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="urnet",
        description="Train ReLU networks by augmented-Lagrangian block "
                    "minimization and run compressed-sensing recovery.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser(
        "train", help="train one network and write a run directory")
    _add_config_flags(p_train, _TRAIN_KEYS)
    p_train.set_defaults(func=cmd_train)

    p_rec = subs.add_parser(
        "recover", help="reconstruct signals through a checkpoint")
    p_rec.add_argument("--checkpoint", required=True, metavar="FILE")
    p_rec.add_argument("--sensing", metavar="FILE",
                       help="saved sensing problem to recover through")
    p_rec.add_argument("--m-list", type=_int_list, default=_UNSET,
                       metavar="LIST",
                       help="sweep mode: generate one sensing problem "
                            "per m and emit a CSV row per ratio")
    _add_config_flags(p_rec, _DATA_KEYS)
    p_rec.set_defaults(func=cmd_recover)

    p_bench = subs.add_parser(
        "bench", help="method x measurement-count comparison table")
    _add_config_flags(p_bench, _TRAIN_KEYS + ["methods", "m_list",
                                              "seeds", "test_count",
                                              "test_seed"])
    p_bench.set_defaults(func=cmd_bench)

    p_gen = subs.add_parser(
        "gen-sensing", help="generate and save a sensing problem")
    p_gen.add_argument("--m", type=int, required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, metavar="FILE")
    p_gen.set_defaults(func=cmd_gen_sensing)

    p_ins = subs.add_parser(
        "inspect-checkpoint",
        help="describe a checkpoint or sensing file as JSON")
    p_ins.add_argument("path")
    p_ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
