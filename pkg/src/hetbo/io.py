"""Dataset and result file handling.

Dataset CSVs carry a header: real features as ``x0..x{d-1}``, count/bit
features as ``f0..f{m-1}``, string inputs in a ``smiles`` column, targets
in ``y``, and optional ``noise_std`` and ``task`` columns. Lightcurves use
``mjd,value,error``. Models serialise to JSON documents holding the kernel
tag and hyperparameters, the standardisation stats and a reference to the
training data, never the factorisation.
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .exceptions import InvalidInputError
from .gp import GPRegressor
from .hetgp import MostLikelyHeteroscedasticGP
from .kernels import kernel_from_dict
from .timeseries import Lightcurve

__all__ = [
    "Dataset",
    "load_dataset",
    "save_dataset",
    "load_lightcurve",
    "save_lightcurve",
    "save_structure_function",
    "save_spectra",
    "save_model",
    "load_model",
    "write_traces",
    "summarise_traces",
]


@dataclass
class Dataset:
    X: object  # ndarray, list[str], or (base, tasks) for multitask
    y: np.ndarray
    kind: str  # "real" | "count" | "string"
    noise_std: Optional[np.ndarray] = None
    tasks: Optional[np.ndarray] = None
    path: Optional[str] = None

    @property
    def inputs(self):
        """Inputs in the form the kernels expect (task pair when multitask)."""
        if self.tasks is not None:
            return (self.X, self.tasks)
        return self.X


def _indexed_columns(columns, prefix):
    pat = re.compile(rf"^{prefix}(\d+)$")
    found = sorted(
        (int(m.group(1)), c) for c in columns if (m := pat.match(c))
    )
    return [c for _, c in found]


def load_dataset(path, require_target=True):
    """Read a dataset CSV; exactly one input representation must appear."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, FileNotFoundError, OSError) as exc:
        raise InvalidInputError(f"cannot read dataset {path}: {exc}") from exc
    if "y" not in frame.columns:
        if require_target:
            raise InvalidInputError(f"{path} has no target column 'y'")
        frame = frame.copy()
        frame["y"] = np.nan

    x_cols = _indexed_columns(frame.columns, "x")
    f_cols = _indexed_columns(frame.columns, "f")
    has_smiles = "smiles" in frame.columns
    kinds = [bool(x_cols), bool(f_cols), has_smiles]
    if sum(kinds) != 1:
        raise InvalidInputError(
            f"{path} must carry exactly one input kind "
            "(x0.., f0.., or a smiles column)"
        )

    tasks = None
    if "task" in frame.columns:
        if require_target:
            # multitask: rows with missing labels are skipped
            frame = frame[frame["y"].notna()].reset_index(drop=True)
        tasks = frame["task"].to_numpy()
        if np.any(pd.isna(tasks)):
            raise InvalidInputError(f"{path} has missing task indices")
        tasks = tasks.astype(int)
    elif require_target and frame["y"].isna().any():
        bad = (frame.index[frame["y"].isna()] + 2).tolist()  # header is line 1
        raise InvalidInputError(f"{path}: missing target on lines {bad}")

    y = frame["y"].to_numpy(dtype=float)
    noise_std = (
        frame["noise_std"].to_numpy(dtype=float) if "noise_std" in frame.columns else None
    )
    if x_cols:
        X, kind = frame[x_cols].to_numpy(dtype=float), "real"
    elif f_cols:
        X, kind = frame[f_cols].to_numpy(dtype=float), "count"
    else:
        X, kind = frame["smiles"].astype(str).tolist(), "string"
    if (isinstance(X, np.ndarray) and not np.all(np.isfinite(X))):
        bad = (np.flatnonzero(~np.isfinite(np.asarray(X)).all(axis=1)) + 2).tolist()
        raise InvalidInputError(f"{path}: non-finite features on lines {bad}")
    return Dataset(X=X, y=y, kind=kind, noise_std=noise_std, tasks=tasks, path=str(path))


def save_dataset(path, X, y, noise_std=None, tasks=None, kind="real"):
    X = np.asarray(X) if not isinstance(X, list) else X
    cols = {}
    if kind == "real":
        for k in range(X.shape[1]):
            cols[f"x{k}"] = X[:, k]
    elif kind == "count":
        for k in range(X.shape[1]):
            cols[f"f{k}"] = X[:, k]
    elif kind == "string":
        cols["smiles"] = list(X)
    else:
        raise InvalidInputError(f"unknown dataset kind {kind!r}")
    cols["y"] = np.asarray(y, dtype=float)
    if noise_std is not None:
        cols["noise_std"] = np.asarray(noise_std, dtype=float)
    if tasks is not None:
        cols["task"] = np.asarray(tasks, dtype=int)
    pd.DataFrame(cols).to_csv(path, index=False)


def load_lightcurve(path):
    frame = pd.read_csv(path)
    for col in ("mjd", "value"):
        if col not in frame.columns:
            raise InvalidInputError(f"{path} has no column {col!r}")
    errors = frame["error"].to_numpy(dtype=float) if "error" in frame.columns else None
    return Lightcurve(
        times=frame["mjd"].to_numpy(dtype=float),
        values=frame["value"].to_numpy(dtype=float),
        errors=errors,
    )


def save_lightcurve(path, lc):
    cols = {"mjd": lc.times, "value": lc.values}
    if lc.errors is not None:
        cols["error"] = lc.errors
    pd.DataFrame(cols).to_csv(path, index=False)


def save_structure_function(path, sf):
    pd.DataFrame(
        {"tau": sf.tau, "sf": sf.sf, "count": sf.counts, "stderr": sf.stderr}
    ).to_csv(path, index=False)


def save_spectra(path, spectra):
    pd.DataFrame(
        {
            "freq": spectra["freq"],
            "coherence": spectra["coherence"],
            "coh_err": spectra["coh_err"],
            "lag_days": spectra["lag_days"],
            "lag_err": spectra["lag_err"],
        }
    ).to_csv(path, index=False)


# ------------------------------------------------------------- model JSON


def save_model(model, path, data_ref=None):
    """Write a fitted model document; the factorisation is rebuilt on load."""
    if isinstance(model, MostLikelyHeteroscedasticGP):
        doc = {
            "type": "mlhgp",
            "latent": {
                "kernel": model.g_latent_.kernel_.to_dict(),
                "jitter": model.g_latent_.jitter,
            },
            "noise": {
                "kernel": model.g_noise_.kernel_.to_dict() if model.g_noise_ else None,
                "noise_variance": model.g_noise_.noise_variance_ if model.g_noise_ else None,
                "z": model.g_noise_.y_train_.tolist() if model.g_noise_ else None,
            },
            "stats": {"mean": model.y_mean_, "std": model.y_std_},
            "iterations_run": model.iterations_run_,
            "sample_size": model.sample_size,
            "seed": model.random_state,
            "degenerate": model.degenerate_,
            "data": data_ref,
        }
    else:
        doc = {
            "type": "gp",
            "kernel": model.kernel_.to_dict(),
            "noise_variance": model.noise_variance_,
            "stats": {"mean": model.y_mean_, "std": model.y_std_},
            "jitter": model.jitter,
            "data": data_ref,
        }
    Path(path).write_text(json.dumps(doc, indent=2))


def _rebuild_gp(kernel_doc, noise_variance, jitter, X, y, standardize,
                per_point_noise_var=None):
    gp = GPRegressor(
        kernel=kernel_from_dict(kernel_doc),
        noise_variance=noise_variance,
        fix_noise=True,
        optimizer=None,
        jitter=jitter,
        standardize=standardize,
    )
    return gp.fit(X, y, per_point_noise_var=per_point_noise_var)


def load_model(path, data=None):
    """Rebuild a model from its JSON document plus the training data.

    ``data`` may be a Dataset or a CSV path; when omitted, the document's
    own training-data reference is used (resolved relative to the JSON).
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    if data is None:
        ref = doc.get("data")
        if ref is None:
            raise InvalidInputError(f"{path} carries no training-data reference")
        ref = Path(ref)
        data = ref if ref.is_absolute() else path.parent / ref
    if not isinstance(data, Dataset):
        data = load_dataset(data)

    if doc["type"] == "gp":
        gp = _rebuild_gp(
            doc["kernel"], doc["noise_variance"], doc["jitter"],
            data.inputs, data.y, standardize=True,
        )
        return gp
    if doc["type"] != "mlhgp":
        raise InvalidInputError(f"unknown model type {doc['type']!r}")

    stats = doc["stats"]
    model = MostLikelyHeteroscedasticGP(sample_size=doc["sample_size"],
                                        random_state=doc["seed"])
    model.y_mean_, model.y_std_ = stats["mean"], stats["std"]
    model.iterations_run_ = doc["iterations_run"]
    model.degenerate_ = doc["degenerate"]
    model.sample_size = doc["sample_size"]
    y_s = (data.y - stats["mean"]) / stats["std"]
    jitter = doc["latent"]["jitter"]
    if doc["noise"]["kernel"] is None:
        model.g_noise_ = None
        model.g_latent_ = _rebuild_gp(
            doc["latent"]["kernel"], 1.0, jitter, data.inputs, y_s, standardize=False
        )
    else:
        z = np.asarray(doc["noise"]["z"], dtype=float)
        model.g_noise_ = _rebuild_gp(
            doc["noise"]["kernel"], doc["noise"]["noise_variance"], jitter,
            data.inputs, z, standardize=bool(np.std(z) > 0),
        )
        r = np.exp(model.g_noise_.predict(data.inputs))
        model.g_latent_ = _rebuild_gp(
            doc["latent"]["kernel"], 0.0, jitter, data.inputs, y_s,
            standardize=False, per_point_noise_var=r,
        )
    model.X_train_, model.y_train_ = data.inputs, data.y
    return model


# ----------------------------------------------------------- BO run files


def write_traces(path, traces):
    """Concatenate per-seed traces into one CSV with fixed column order."""
    frame = pd.concat([t.to_frame() for t in traces], ignore_index=True)
    frame.to_csv(path, index=False)
    return frame


def summarise_traces(traces):
    """Mean and standard error of the running bests per iteration, across seeds."""
    best_h = np.vstack([t.best_h for t in traces])
    lowest_g = np.vstack([t.lowest_g for t in traces])
    n = best_h.shape[0]
    se = lambda a: (a.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(a.shape[1]))
    return {
        "n_seeds": n,
        "iterations": list(range(best_h.shape[1])),
        "best_h_mean": best_h.mean(axis=0).tolist(),
        "best_h_stderr": se(best_h).tolist(),
        "lowest_g_mean": lowest_g.mean(axis=0).tolist(),
        "lowest_g_stderr": se(lowest_g).tolist(),
    }
