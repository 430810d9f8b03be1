"""Command-line surface: one subcommand per experiment family.

Every command takes ``--seed`` and replays deterministically; ``--config``
loads defaults from a JSON file mirroring the flag names. Exit codes:
0 success, 2 invalid input, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .acquisition import ACQUISITION_KINDS, AcquisitionSpec
from .bo import BOConfig, run_bo_seeds
from .benchmark import run_regression_benchmark
from .exceptions import InvalidInputError, NumericalError
from .gp import GPRegressor
from .hetgp import MostLikelyHeteroscedasticGP
from .kernels import (
    ICM,
    KERNEL_TAGS,
    RationalQuadratic,
    StringNGram,
)
from .objectives import OBJECTIVE_NAMES, make_objective, smoothed_noise_oracle
from .timeseries import (
    apply_gaps,
    coherence_lag,
    fit_broken_power_law,
    simulate_lightcurve,
    structure_function,
)

logger = logging.getLogger("hetbo")


def _build_kernel(tag, dataset=None, ngram_order=5, rq_alpha=1.0):
    """Kernel from a CLI tag, e.g. ``sqe`` or ``icm:tanimoto``."""
    base_tag = tag
    icm = False
    if tag.startswith("icm:"):
        icm, base_tag = True, tag.split(":", 1)[1]
    elif tag == "icm":
        raise InvalidInputError("icm needs a base kernel, e.g. --kernel icm:tanimoto")
    if base_tag not in KERNEL_TAGS or base_tag == "icm":
        known = sorted(k for k in KERNEL_TAGS if k != "icm")
        raise InvalidInputError(f"unknown kernel {tag!r}; choose from {known} or icm:<base>")
    if base_tag == "string_ngram":
        kernel = StringNGram(n=ngram_order)
    elif base_tag == "rq":
        kernel = RationalQuadratic(alpha=rq_alpha)
    else:
        kernel = KERNEL_TAGS[base_tag]()
    if icm:
        if dataset is None or dataset.tasks is None:
            raise InvalidInputError("icm kernel needs a dataset with a task column")
        kernel = ICM(kernel, n_tasks=int(dataset.tasks.max()) + 1)
    return kernel


def _cmd_fit(args):
    data = io.load_dataset(args.data)
    kernel = _build_kernel(args.kernel, data, args.ngram_order, args.rq_alpha)
    if args.surrogate == "mlhgp":
        model = MostLikelyHeteroscedasticGP(
            kernel=kernel,
            max_iter=args.mlhgp_iters,
            sample_size=args.sample_size,
            n_restarts=args.restarts,
            jitter=args.jitter,
            ard=not args.no_ard,
            random_state=args.seed,
        ).fit(data.inputs, data.y)
    else:
        fixed = args.fixed_noise is not None
        model = GPRegressor(
            kernel=kernel,
            noise_variance=args.fixed_noise if fixed else 1.0,
            fix_noise=fixed,
            n_restarts=args.restarts,
            jitter=args.jitter,
            ard=not args.no_ard,
            random_state=args.seed,
        ).fit(data.inputs, data.y)
        logger.info("fitted NLML: %.6f", model.nlml())
    io.save_model(model, args.out, data_ref=str(Path(args.data).resolve()))
    print(args.out)


def _cmd_predict(args):
    model = io.load_model(args.model, data=args.train_data)
    test = io.load_dataset(args.data, require_target=False)
    mean, std = model.predict(
        test.inputs, return_std=True, include_noise=args.include_noise
    )
    import pandas as pd

    pd.DataFrame({"mean": mean, "std": std}).to_csv(args.out, index=False)
    print(args.out)


def _cmd_regress_bench(args):
    data = io.load_dataset(args.data)
    kernel = _build_kernel(args.kernel, data, args.ngram_order, args.rq_alpha)
    report = run_regression_benchmark(
        data, kernel,
        n_splits=args.splits, split_ratio=args.ratio, seed=args.seed,
        n_restarts=args.restarts, jitter=args.jitter,
    )
    Path(args.out).write_text(json.dumps(report, indent=2))
    print(args.out)


def _acq_spec(args):
    extras = {}
    if args.acq == "haei":
        extras["gamma"] = args.gamma
    elif args.acq == "anpei":
        extras["beta"] = args.beta
    elif args.acq == "aei":
        extras["fixed_noise"] = args.fixed_noise if args.fixed_noise is not None else 0.0
    return AcquisitionSpec(kind=args.acq, **extras)


def _cmd_bo(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.objective.startswith("csv:"):
        path = args.objective[4:]
        spec = {"kind": "tabular", "path": path, "direction": args.direction}
        ds = io.load_dataset(path)
        bounds, candidates = None, None
        if args.domain == "continuous":
            X = np.asarray(ds.X, dtype=float)
            bounds = np.column_stack([X.min(axis=0), X.max(axis=0)])
        else:
            candidates = np.asarray(ds.X, dtype=float)
    else:
        if args.objective not in OBJECTIVE_NAMES:
            raise InvalidInputError(
                f"unknown objective {args.objective!r}; choose from "
                f"{sorted(OBJECTIVE_NAMES)} or csv:<path>"
            )
        spec = {"kind": "synthetic", "name": args.objective, "noise": args.noise}
        obj = make_objective(args.objective, noise=args.noise)
        if args.grid:
            d = obj.dim
            side = int(round(args.grid ** (1.0 / d)))
            axes = [np.linspace(lo, hi, side) for lo, hi in obj.bounds]
            mesh = np.meshgrid(*axes, indexing="ij")
            candidates = np.column_stack([m.ravel() for m in mesh])
            bounds = None
        else:
            bounds, candidates = obj.bounds, None

    config = BOConfig(
        acquisition=_acq_spec(args),
        surrogate=args.surrogate,
        init_size=args.init,
        iterations=args.iters,
        bounds=bounds,
        candidates=candidates,
        alpha=args.alpha,
        n_restarts=args.restarts,
        mlhgp_iters=args.mlhgp_iters,
        mlhgp_tol=args.mlhgp_tol,
        sample_size=args.sample_size,
        jitter=args.jitter,
    )
    seeds = np.random.SeedSequence(args.seed).generate_state(args.seeds).tolist()
    traces = run_bo_seeds(spec, config, seeds, max_workers=args.workers)
    io.write_traces(out / "trace.csv", traces)
    summary = io.summarise_traces(traces)
    summary["objective"] = args.objective
    summary["acquisition"] = args.acq
    summary["surrogate"] = args.surrogate
    summary["master_seed"] = args.seed
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(out / "summary.json")


def _cmd_simulate_lc(args):
    lc = simulate_lightcurve(args.psd_index, args.n, dt=args.dt, seed=args.seed)
    if args.truth_out:
        io.save_lightcurve(args.truth_out, lc)
    if args.keep_times:
        keep = io.load_lightcurve(args.keep_times).times
        lc = apply_gaps(lc, keep)
    elif args.keep_n:
        rng = np.random.default_rng(args.seed)
        keep = np.sort(rng.choice(lc.times, size=args.keep_n, replace=False))
        lc = apply_gaps(lc, keep)
    io.save_lightcurve(args.out, lc)
    print(args.out)


def _cmd_structfunc(args):
    lc = io.load_lightcurve(args.lc)
    sf = structure_function(
        lc, delta=args.delta,
        normalise=not args.no_normalise,
        subtract_noise=args.subtract_noise,
    )
    io.save_structure_function(args.out, sf)
    if args.fit_out:
        weights = None
        with np.errstate(divide="ignore"):
            inv = 1.0 / sf.stderr
        if np.all(np.isfinite(inv)):
            weights = inv
        fit = fit_broken_power_law(sf, weights=weights,
                                   allow_single=args.fit != "broken")
        Path(args.fit_out).write_text(json.dumps(fit, indent=2))
    print(args.out)


def _cmd_lagspec(args):
    if args.pairs:
        import pandas as pd

        manifest = pd.read_csv(args.pairs)
        pairs = [
            (io.load_lightcurve(row.a), io.load_lightcurve(row.b))
            for row in manifest.itertuples()
        ]
    else:
        if not (args.model_a and args.model_b):
            raise InvalidInputError("lagspec needs --pairs or both --model-a/--model-b")
        from .timeseries import Lightcurve

        model_a = io.load_model(args.model_a)
        model_b = io.load_model(args.model_b)
        grid = np.linspace(args.grid_start, args.grid_stop, args.grid_n)
        Xg = grid.reshape(-1, 1)
        ss = np.random.SeedSequence(args.seed).spawn(2)
        sa = model_a.sample_y(Xg, n_samples=args.samples, random_state=ss[0])
        sb = model_b.sample_y(Xg, n_samples=args.samples, random_state=ss[1])
        pairs = [
            (Lightcurve(grid, sa[i]), Lightcurve(grid, sb[i]))
            for i in range(args.samples)
        ]
    spectra = coherence_lag(pairs, n_bins=args.bins)
    io.save_spectra(args.out, spectra)
    print(args.out)


def _cmd_noise_oracle(args):
    data = io.load_dataset(args.data)
    var = smoothed_noise_oracle(
        data.X, data.y, args.bandwidth,
        n_restarts=args.restarts, random_state=args.seed,
    )
    import pandas as pd

    frame = pd.read_csv(args.data)
    frame["noise_var"] = var
    frame.to_csv(args.out, index=False)
    print(args.out)


def _cmd_pca_reduce(args):
    from sklearn.decomposition import PCA

    data = io.load_dataset(args.data)
    X = np.asarray(data.X, dtype=float)
    k = min(args.components, X.shape[1], X.shape[0])
    reduced = PCA(n_components=k, random_state=args.seed).fit_transform(X)
    io.save_dataset(args.out, reduced, data.y, noise_std=data.noise_std,
                    tasks=data.tasks, kind="real")
    print(args.out)


def _add_common(p):
    # every command takes --seed, even the deterministic ones, so configs
    # can be shared across commands unchanged
    p.add_argument("--config", help="JSON file of default flag values")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="hetbo")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a GP or MLHGP model to a dataset CSV")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", default="sqe")
    p.add_argument("--out", required=True)
    p.add_argument("--surrogate", choices=["homoscedastic", "mlhgp"],
                   default="homoscedastic")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--fixed-noise", type=float, default=None,
                   help="hold the noise variance at this value (standardised units^2)")
    p.add_argument("--jitter", type=float, default=1e-6)
    p.add_argument("--no-ard", action="store_true")
    p.add_argument("--ngram-order", type=int, default=5)
    p.add_argument("--rq-alpha", type=float, default=1.0)
    p.add_argument("--mlhgp-iters", type=int, default=10)
    p.add_argument("--sample-size", type=int, default=100)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="predict with a saved model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-data", default=None)
    p.add_argument("--include-noise", action="store_true")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("regress-bench", help="repeated train/test benchmark")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", default="sqe")
    p.add_argument("--out", required=True)
    p.add_argument("--splits", type=int, default=20)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--jitter", type=float, default=1e-6)
    p.add_argument("--ngram-order", type=int, default=5)
    p.add_argument("--rq-alpha", type=float, default=1.0)
    p.set_defaults(func=_cmd_regress_bench)

    p = sub.add_parser("bo", help="sequential optimisation runs across seeds")
    _add_common(p)
    p.add_argument("--objective", required=True,
                   help=f"{'|'.join(OBJECTIVE_NAMES)} or csv:<path>")
    p.add_argument("--noise", default="het", help="off | homo:<sigma> | het")
    p.add_argument("--acq", choices=list(ACQUISITION_KINDS), default="ei")
    p.add_argument("--surrogate", choices=["homoscedastic", "mlhgp"],
                   default="homoscedastic")
    p.add_argument("--init", type=int, default=25)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--fixed-noise", type=float, default=None)
    p.add_argument("--grid", type=int, default=0,
                   help="candidate-grid size for synthetic objectives (0 = continuous)")
    p.add_argument("--domain", choices=["candidates", "continuous"],
                   default="candidates", help="domain mode for csv objectives")
    p.add_argument("--direction", choices=["minimise", "maximise"],
                   default="minimise")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--mlhgp-iters", type=int, default=10)
    p.add_argument("--mlhgp-tol", type=float, default=None)
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--jitter", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_bo)

    p = sub.add_parser("simulate-lc", help="simulate a power-law lightcurve")
    _add_common(p)
    p.add_argument("--psd-index", type=float, default=2.0)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--keep-n", type=int, default=0,
                   help="subsample to this many unevenly spaced points")
    p.add_argument("--keep-times", default=None,
                   help="lightcurve CSV whose mjd column gives the kept times")
    p.add_argument("--truth-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate_lc)

    p = sub.add_parser("structfunc", help="binned structure function of a lightcurve")
    _add_common(p)
    p.add_argument("--lc", required=True)
    p.add_argument("--delta", type=float, default=5.3)
    p.add_argument("--no-normalise", action="store_true")
    p.add_argument("--subtract-noise", action="store_true")
    p.add_argument("--fit", choices=["auto", "broken"], default="auto")
    p.add_argument("--fit-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_structfunc)

    p = sub.add_parser("lagspec", help="coherence and lag spectra from sample pairs")
    _add_common(p)
    p.add_argument("--pairs", default=None,
                   help="CSV manifest with columns a,b of lightcurve paths")
    p.add_argument("--model-a", default=None)
    p.add_argument("--model-b", default=None)
    p.add_argument("--grid-start", type=float, default=0.0)
    p.add_argument("--grid-stop", type=float, default=512.0)
    p.add_argument("--grid-n", type=int, default=512)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_lagspec)

    p = sub.add_parser("noise-oracle", help="kernel-smoothed pseudo noise variances")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_noise_oracle)

    p = sub.add_parser("pca-reduce", help="project features to principal components")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--components", type=int, default=14)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pca_reduce)

    return parser


def _apply_config_file(parser, argv):
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv[1:] if argv and argv[0] in _subnames(parser) else argv)
    if known.config:
        values = json.loads(Path(known.config).read_text())
        for sub_action in parser._subparsers._group_actions:
            for sp in sub_action.choices.values():
                sp.set_defaults(**{k: v for k, v in values.items()})
    return argv


def _subnames(parser):
    for action in parser._subparsers._group_actions:
        return set(action.choices)
    return set()


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
