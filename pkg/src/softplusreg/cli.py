"""Command-line interface: ``softplusreg <command> ...``.

Exit codes: 0 success, 2 data or argument error, 3 numerical failure,
4 model-file version mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data, diagnostics, geometry, gibbs, io
from .benchmark import REFERENCE_ERRORS, run_benchmark
from .errors import DataError, DimensionError, SoftplusError
from .model import (
    VARIANTS,
    FusedModel,
    HyperParams,
    classify,
    positive_prob,
    predict_prob,
)

EXIT_OK, EXIT_DATA, EXIT_NUMERICAL, EXIT_VERSION = 0, 2, 3, 4

log = logging.getLogger("softplusreg")


def _out(msg=""):
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# data flags


def _add_data_flags(p, for_training: bool):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="feature file (dense text) or sparse 'label idx:val' file")
    g.add_argument("--labels", help="label file for dense features (else a label column is used)")
    g.add_argument("--format", choices=("auto", "dense", "sparse"), default="auto")
    g.add_argument("--label-col", choices=("last", "first"), default="last",
                   help="label column of a dense file without --labels")
    g.add_argument("--n-features", type=int, help="sparse files: override the inferred dimension")
    g.add_argument("--partitions", help="file of 1-based training indices, one split per line")
    g.add_argument("--test-partitions", help="matching file of 1-based test indices")
    g.add_argument("--benchmark", help="benchmark name looked up in the data directory")
    g.add_argument("--split", type=int, default=1, help="1-based split for --partitions/--benchmark")
    g.add_argument("--data-dir", help=f"benchmark directory (default ${data.DATA_DIR_ENV})")
    if for_training:
        g.add_argument("--no-standardize", action="store_true",
                       help="use raw features instead of z-scores fitted on the training rows")
    else:
        g.add_argument("--rows", choices=("test", "train", "all"), default="test",
                       help="which rows of a partitioned dataset to use")


def _sniff_sparse(path) -> bool:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                return ":" in line
    return False


def _load_table(args):
    """Returns ``(RawTable, PartitionSpec or None)``."""
    if args.benchmark:
        return data.load_benchmark(args.benchmark, args.split, args.data_dir)
    if not args.data:
        raise DataError("no input: pass --data or --benchmark")
    fmt = args.format
    if fmt == "auto":
        fmt = "sparse" if _sniff_sparse(args.data) else "dense"
    if fmt == "sparse":
        table = data.parse_sparse(args.data, args.n_features)
    else:
        table = data.parse_dense(args.data, args.labels, args.label_col)
    spec = None
    if args.partitions:
        parts = data.read_partitions(args.partitions, table.n, args.test_partitions)
        if not 1 <= args.split <= len(parts):
            raise DataError(f"--split {args.split} outside 1..{len(parts)}")
        spec = parts[args.split - 1]
    return table, spec


def _rows_for(args, table, spec):
    if spec is None or args.rows == "all":
        return np.arange(table.n)
    return spec.train_idx if args.rows == "train" else spec.test_idx


def _covariates(model, features):
    std = model.standardization
    expected = model.dim - 1
    if features.shape[1] != expected:
        raise DimensionError(f"data has {features.shape[1]} features, the model expects V={expected}")
    if std is not None:
        features = std.apply(features)
    return np.hstack([np.ones((features.shape[0], 1)), features])


def _chunked(fn, x, workers: int):
    if workers <= 1 or x.shape[0] < 2 * workers:
        return fn(x)
    chunks = np.array_split(x, workers)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return np.concatenate(list(ex.map(fn, chunks)))


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    table = data.generate_synthetic(args.kind, args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        data.write_dense(table, out / "features.csv", out / "labels.csv")
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc.strerror}") from None
    _out(f"wrote {table.n} rows to {out / 'features.csv'} and {out / 'labels.csv'}")
    return EXIT_OK


def _hyperparams(args) -> HyperParams:
    kw = dict(K_max=args.Kmax, T=args.T, n_iter=args.iters, seed=args.seed, a0=args.a0,
              b0=args.b0, e0=args.e0, f0=args.f0, burn_frac=args.burn_frac,
              pg_truncation=args.pg_truncation)
    return HyperParams.for_variant(args.variant, **kw)


def cmd_train(args) -> int:
    table, spec = _load_table(args)
    if spec is None:
        spec = data.PartitionSpec(np.arange(table.n), np.array([], dtype=np.int64))
    train, _ = data.load_partition(table, spec, standardize_features=not args.no_standardize)
    hp = _hyperparams(args)
    echo = ", ".join(f"{k}={v}" for k, v in hp.to_dict().items() if k != "prune_iters")
    _out(f"variant={args.variant} {echo}")

    orients = {"asis": [0], "flipped": [1], "both": [0, 1]}[args.orientation]
    trace_base = Path(args.trace) if args.trace else Path(str(args.out) + ".trace.csv")
    models = []
    for o in orients:
        d = train if o == 0 else data.flip_labels(train)
        tpath = trace_base if len(orients) == 1 else trace_base.with_name(
            f"{trace_base.stem}.{'asis' if o == 0 else 'flipped'}{trace_base.suffix}")
        try:
            res = gibbs.run(d, hp, args.variant)
        except gibbs.ChainDiverged as exc:
            tpath.write_text(exc.trace.to_text())
            _out(f"chain diverged: {exc}; trace written to {tpath}")
            raise
        if args.trace or len(orients) > 1 or args.write_trace:
            tpath.write_text(res.trace.to_text())
        name = "asis" if o == 0 else "flipped"
        _out(f"[{name}] log-lik={res.model.log_lik:.6g} active experts={res.model.K} "
             f"wall time={res.wall_time:.1f}s")
        models.append(res.model)

    model = FusedModel(*models) if len(models) == 2 else models[0]
    io.save_model(model, args.out, trace_path=str(trace_base) if args.trace else None)
    _out(f"model written to {args.out}")
    return EXIT_OK


def _probabilities(model, x, workers):
    return _chunked(lambda rows: positive_prob(rows, model), x, workers)


def cmd_predict(args) -> int:
    model = io.load_model(args.model)
    table, spec = _load_table(args)
    rows = _rows_for(args, table, spec)
    x = _covariates(model.model_pos if isinstance(model, FusedModel) else model,
                    table.features[rows])
    prob = _probabilities(model, x, args.workers)
    lines = ["prob,label" if args.hard else "prob"]
    labels = classify(prob, args.p0)
    for p, lab in zip(prob.tolist(), labels.tolist()):
        lines.append(f"{p!r},{lab}" if args.hard else repr(p))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _out(f"wrote {len(prob)} probabilities to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def evaluate(prob, y, p0=0.5, eps=1e-12) -> dict:
    pred = classify(prob, p0)
    tp = int(np.sum((pred == 1) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    clipped = np.clip(prob, eps, 1 - eps)
    ll = float(np.mean(np.where(y == 1, np.log(clipped), np.log1p(-clipped))))
    return {"error": 100.0 * (fp + fn) / max(len(y), 1), "tp": tp, "tn": tn, "fp": fp,
            "fn": fn, "mean_log_lik": ll, "n": int(len(y))}


def cmd_eval(args) -> int:
    model = io.load_model(args.model)
    table, spec = _load_table(args)
    rows = _rows_for(args, table, spec)
    base = model.model_pos if isinstance(model, FusedModel) else model
    x = _covariates(base, table.features[rows])
    prob = _probabilities(model, x, args.workers)
    m = evaluate(prob, table.labels[rows], args.p0)
    _out(f"rows={m['n']} error={m['error']:.2f}%")
    _out(f"confusion: tp={m['tp']} fp={m['fp']} tn={m['tn']} fn={m['fn']}")
    _out(f"mean predictive log-lik={m['mean_log_lik']:.6f}")
    return EXIT_OK


def cmd_grid(args) -> int:
    model = io.load_model(args.model)
    comp = model
    if isinstance(model, FusedModel):
        comp = model.model_pos if args.component == "asis" else model.model_neg
    if comp.dim != 3:
        raise DimensionError(f"grid export needs a 2-feature model, this one has V={comp.dim - 1}")
    x1lo, x1hi, x2lo, x2hi = args.bounds
    n = args.resolution
    g1, g2 = np.meshgrid(np.linspace(x1lo, x1hi, n), np.linspace(x2lo, x2hi, n), indexing="ij")
    raw = np.column_stack([g1.ravel(), g2.ravel()])
    x = _covariates(comp, raw)
    prob = _chunked(lambda rows: predict_prob(rows, comp), x, args.workers)
    report = geometry.geometry_counts(x, comp, args.p0, args.kind)
    p_pos = _probabilities(model, x, args.workers)
    lines = ["x1,x2,prob,geometry_count,p_positive"]
    for (a, b), p, c, pp in zip(raw.tolist(), prob.tolist(), report.counts.tolist(), p_pos.tolist()):
        lines.append(f"{a!r},{b!r},{p!r},{c},{pp!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    _out(f"wrote {len(lines) - 1} grid rows ({report.kind}) to {args.out}")
    return EXIT_OK


def cmd_diag(args) -> int:
    names = diagnostics.SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in names:
        kw = {"seed": args.seed}
        if args.draws:
            kw["n_draws"] = args.draws
        rep = diagnostics.run_suite(name, **kw)
        sys.stdout.write(rep.text())
        ok &= rep.passed
    return EXIT_OK if ok else 1


def cmd_bench(args) -> int:
    res = run_benchmark(args.name, args.variant, args.T, args.splits, args.iters, args.Kmax,
                        args.seed, args.data_dir, log=_out)
    ref = REFERENCE_ERRORS.get((args.variant, args.T, args.name))
    msg = f"{args.name} {args.variant} T={args.T}: mean test error {res.mean_error:.2f}%"
    if ref:
        msg += f" (reference {ref[0]:.2f} +/- {ref[1]:.2f})"
    _out(msg)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softplusreg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic 2-D dataset")
    s.add_argument("kind", choices=data.SYNTHETIC_KINDS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="fit a model with the Gibbs sampler")
    _add_data_flags(t, for_training=True)
    t.add_argument("--variant", choices=VARIANTS, default="ss")
    t.add_argument("--Kmax", type=int, default=20)
    t.add_argument("--T", type=int, default=1)
    t.add_argument("--iters", type=int, default=5000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--a0", type=float, default=0.01)
    t.add_argument("--b0", type=float, default=0.01)
    t.add_argument("--e0", type=float, default=1.0)
    t.add_argument("--f0", type=float, default=1.0)
    t.add_argument("--burn-frac", type=float, default=0.5)
    t.add_argument("--pg-truncation", type=int, default=6)
    t.add_argument("--orientation", choices=("asis", "flipped", "both"), default="asis")
    t.add_argument("--trace", help="write the per-iteration trace here")
    t.add_argument("--write-trace", action="store_true",
                   help="write the trace next to the model file")
    t.add_argument("--workers", type=int, default=1,
                   help="accepted for symmetry; the chain itself runs on one stream")
    t.add_argument("--out", required=True, help="model file to write")
    t.set_defaults(func=cmd_train)

    for name, func, hlp in (("predict", cmd_predict, "write predictive probabilities"),
                            ("eval", cmd_eval, "report error and log-likelihood")):
        q = sub.add_parser(name, help=hlp)
        q.add_argument("model")
        _add_data_flags(q, for_training=False)
        q.add_argument("--p0", type=float, default=0.5)
        q.add_argument("--workers", type=int, default=1)
        if name == "predict":
            q.add_argument("--out", help="output file (default stdout)")
            q.add_argument("--hard", action="store_true", help="also write 0/1 labels")
        q.set_defaults(func=func)

    g = sub.add_parser("grid", help="export probabilities and geometry counts on a 2-D grid")
    g.add_argument("model")
    g.add_argument("--bounds", type=float, nargs=4, default=(-4.0, 4.0, -4.0, 4.0),
                   metavar=("X1MIN", "X1MAX", "X2MIN", "X2MAX"))
    g.add_argument("--resolution", type=int, default=100)
    g.add_argument("--p0", type=float, default=0.5)
    g.add_argument("--kind", choices=geometry.KINDS,
                   help="override the diagnostic picked from the model's T")
    g.add_argument("--component", choices=("asis", "flipped"), default="asis",
                   help="which half of a fused model drives prob and geometry_count")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_grid)

    d = sub.add_parser("diag", help="sampler self-tests")
    d.add_argument("suite", choices=(*diagnostics.SUITES, "all"))
    d.add_argument("--draws", type=int, help="override the number of draws")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_diag)

    b = sub.add_parser("bench", help="train/test over predefined benchmark splits")
    b.add_argument("name")
    b.add_argument("--variant", choices=VARIANTS, default="ss")
    b.add_argument("--T", type=int, default=5)
    b.add_argument("--Kmax", type=int, default=20)
    b.add_argument("--iters", type=int, default=5000)
    b.add_argument("--splits", type=int, nargs="+", default=[1, 2, 3])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--data-dir")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SoftplusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
