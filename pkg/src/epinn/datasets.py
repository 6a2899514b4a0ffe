"""Dataset generation, CSV schemas, and clinical-style ingestion.

Synthetic sets carry a noiseless-truth and a noise-magnitude column next to
the observed targets, so downstream metrics (ECP against truth, Spearman
against injected noise) never lose information. All files are deterministic
per seed: values are written with shortest-roundtrip float repr.

Schemas
-------
poisson1d:  ``x,y,truth,noise_mag``
fisher-kpp: ``x,t,y,truth,noise_mag``
bergman:    ``t_min,glucose_mg_dl,insulin_muU_ml``
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from . import problems


def _write_csv(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_meta(path, meta):
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path):
    """Read a generated dataset CSV back into arrays (X, y, truth, noise_mag)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    n_in = len(header) - 3
    return {"X": data[:, :n_in], "y": data[:, n_in],
            "truth": data[:, n_in + 1], "noise_mag": data[:, n_in + 2],
            "columns": header}


def gen_poisson_dataset(out_dir, seed=0, n_train=240, n_test=150,
                        noise_scale=0.1, true_omega=(1.0 / 3.0, 0.02), n_fine=2001):
    """Synthetic 1D Poisson data: noisy interior samples of the exact solution.

    The reference curve is a fine-grid finite-difference solve at the true
    parameters; training inputs include the two noiseless Dirichlet boundary
    points, everything else is uniform on (0,1) with additive
    lam_N * U(-0.5, 0.5) noise, lam_N = noise_scale * max(u).
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    x_fine = problems.poisson_nodes(n_fine)
    u_fine = problems.solve_poisson(true_omega, n_fine)
    lam = noise_scale * float(u_fine.max())

    x_train = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0.0, 1.0, n_train - 2)]))
    truth_train = np.interp(x_train, x_fine, u_fine)
    noise_train = lam * rng.uniform(-0.5, 0.5, n_train)
    boundary = (x_train == 0.0) | (x_train == 1.0)
    noise_train[boundary] = 0.0

    x_test = np.sort(rng.uniform(0.0, 1.0, n_test))
    truth_test = np.interp(x_test, x_fine, u_fine)
    noise_test = lam * rng.uniform(-0.5, 0.5, n_test)

    train_path = os.path.join(out_dir, "train.csv")
    test_path = os.path.join(out_dir, "test.csv")
    _write_csv(train_path, ["x", "y", "truth", "noise_mag"],
               [x_train, truth_train + noise_train, truth_train, np.abs(noise_train)])
    _write_csv(test_path, ["x", "y", "truth", "noise_mag"],
               [x_test, truth_test + noise_test, truth_test, np.abs(noise_test)])
    meta = {"problem": "poisson1d", "seed": int(seed), "true_omega": list(true_omega),
            "noise_scale": float(noise_scale), "noise_amplitude": float(lam),
            "n_train": int(n_train), "n_test": int(n_test)}
    _write_meta(os.path.join(out_dir, "meta.json"), meta)
    return {"train": train_path, "test": test_path, "meta": meta}


def gen_fisher_dataset(out_dir, seed=0, n_train=5000, n_test=4000, noise_amp=1.0,
                       mask=(-10.0, 10.0, 2.0, 8.0), true_omega=(1.6, 6.2),
                       domain=((-20.0, 20.0), (0.0, 10.0))):
    """Traveling-wave data with U(-0.5,0.5) noise confined to a rectangle.

    `mask` is (x_lo, x_hi, t_lo, t_hi); points outside it carry zero noise.
    The mask is stored in meta.json for the uncertainty-noise correlation
    protocol.
    """
    (x_lo, x_hi), (t_lo, t_hi) = domain
    if mask is not None:
        mx0, mx1, mt0, mt1 = mask
        if not (x_lo <= mx0 < mx1 <= x_hi and t_lo <= mt0 < mt1 <= t_hi):
            raise ValueError(f"noise mask {mask} must sit inside the domain {domain}")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)

    def sample(n):
        x = rng.uniform(x_lo, x_hi, n)
        t = rng.uniform(t_lo, t_hi, n)
        truth = problems.fisher_travelling_wave(x, t, *true_omega)
        noise = noise_amp * rng.uniform(-0.5, 0.5, n)
        if mask is None:
            noise[:] = 0.0
        else:
            inside = (x >= mx0) & (x <= mx1) & (t >= mt0) & (t <= mt1)
            noise[~inside] = 0.0
        return x, t, truth, noise

    xtr, ttr, utr, ntr = sample(n_train)
    xte, tte, ute, nte = sample(n_test)
    train_path = os.path.join(out_dir, "train.csv")
    test_path = os.path.join(out_dir, "test.csv")
    _write_csv(train_path, ["x", "t", "y", "truth", "noise_mag"],
               [xtr, ttr, utr + ntr, utr, np.abs(ntr)])
    _write_csv(test_path, ["x", "t", "y", "truth", "noise_mag"],
               [xte, tte, ute + nte, ute, np.abs(nte)])
    meta = {"problem": "fisher-kpp", "seed": int(seed), "true_omega": list(true_omega),
            "noise_amp": float(noise_amp), "mask": None if mask is None else list(mask),
            "domain": [list(domain[0]), list(domain[1])],
            "n_train": int(n_train), "n_test": int(n_test)}
    _write_meta(os.path.join(out_dir, "meta.json"), meta)
    return {"train": train_path, "test": test_path, "meta": meta}


BERGMAN_HEADER = ["t_min", "glucose_mg_dl", "insulin_muU_ml"]

# A classic IVGTT sampling schedule (minutes after the glucose bolus).
IVGTT_SCHEDULE = [0, 2, 4, 6, 8, 10, 12, 14, 16, 19, 22, 27, 32, 42, 52, 62,
                  72, 82, 92, 102, 122, 142, 162, 182]


def gen_bergman_dataset(out_dir, seed=0, params=(0.03, 0.02, 1.0e-5),
                        g0=280.0, g_b=85.0, i_b=8.0, insulin_peak=90.0,
                        insulin_tau=12.0, noise_mg_dl=3.0, label="synthetic"):
    """Synthetic IVGTT-like series integrated from the minimal model.

    This stands in for clinical data (same CSV schema) and is clearly
    labeled synthetic in meta.json; it is NOT a reproduction of any
    published measurement.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    t = np.array(IVGTT_SCHEDULE, dtype=np.float64)
    insulin = i_b + insulin_peak * (t / insulin_tau) * np.exp(1.0 - t / insulin_tau)
    scaffold_glucose = np.full_like(t, g_b)
    scaffold_glucose[0] = g0
    scaffold = problems.BergmanInputs(times=t, glucose=scaffold_glucose,
                                      insulin=insulin, G_b=g_b, I_b=i_b)
    glucose, _ = problems.solve_bergman(params, scaffold, t)
    glucose = glucose + noise_mg_dl * rng.standard_normal(len(t))
    path = os.path.join(out_dir, f"bergman_{label}.csv")
    _write_csv(path, BERGMAN_HEADER, [t, glucose, insulin])
    meta = {"problem": "bergman", "seed": int(seed), "label": label,
            "synthetic": True, "true_params": list(params),
            "g0": float(g0), "g_b": float(g_b), "i_b": float(i_b),
            "noise_mg_dl": float(noise_mg_dl)}
    _write_meta(os.path.join(out_dir, f"bergman_{label}_meta.json"), meta)
    return {"csv": path, "meta": meta}


def ingest_bergman_csv(path, g_b=None, i_b=None):
    """Parse and validate a clinical-style IVGTT CSV into BergmanInputs.

    Basal levels default to the mean of the final two samples of each
    series; pass g_b / i_b to override.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        missing = [c for c in BERGMAN_HEADER if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing} (header was {header})")
        idx = [header.index(c) for c in BERGMAN_HEADER]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError):
                raise ValueError(f"{path}: row {lineno}: cannot parse {row!r}") from None
    if len(rows) < 4:
        raise ValueError(f"{path}: need at least 4 data rows, got {len(rows)}")
    data = np.array(rows)
    times, glucose, insulin = data[:, 0], data[:, 1], data[:, 2]
    bad = np.flatnonzero(np.diff(times) <= 0)
    if bad.size:
        raise ValueError(f"{path}: row {int(bad[0]) + 3}: times are not strictly increasing")
    nonpos = np.flatnonzero((glucose <= 0) | (insulin <= 0))
    if nonpos.size:
        raise ValueError(f"{path}: row {int(nonpos[0]) + 2}: non-positive concentration")
    gb_est, ib_est = problems.estimate_basals(glucose, insulin)
    return problems.BergmanInputs(times=times, glucose=glucose, insulin=insulin,
                                  G_b=gb_est if g_b is None else float(g_b),
                                  I_b=ib_est if i_b is None else float(i_b))
