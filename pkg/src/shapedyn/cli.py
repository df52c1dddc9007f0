"""Command-line front end.

Every command writes into a run directory (``--out``) and finishes by
writing ``manifest.json`` listing the input and output files with their
SHA-256 digests. Errors are reported as one JSON object on stderr with a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import garch_model as gm
from . import io
from . import motility_features as mf
from . import pipeline as pl
from . import shape_dynamics as sd
from . import shape_space as ss
from . import simulator as sim
from . import var_model as vm
from .curve_geometry import center_and_scale, from_srvf, resample_uniform
from .errors import ShapeDynError


class Run:
    """Run directory bookkeeping: inputs, outputs and derived RNG streams."""

    def __init__(self, out, command, config):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.inputs = {}
        self.outputs = []
        self.streams = []

    def add_input(self, path):
        self.inputs[str(path)] = io.sha256(path)

    def path(self, rel) -> Path:
        p = self.dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(rel)
        return p

    def stream(self, name, *key):
        """Seed sequence for a named stochastic step, derived from the root seed."""
        entropy = [int(self.config.seed)] + [int(k) for k in key]
        self.streams.append({"name": name, "key": entropy})
        return entropy

    def finish(self, summary=None):
        outputs = {rel: io.sha256(self.dir / rel) for rel in sorted(set(self.outputs))}
        manifest = {"command": self.command, "version": __version__,
                    "config": dataclasses.asdict(self.config),
                    "inputs": self.inputs, "outputs": outputs, "streams": self.streams}
        if summary is not None:
            manifest["summary"] = summary
        io.write_json(self.dir / "manifest.json", manifest)
        return manifest


# -- argument handling ------------------------------------------------------

def _lag_range(text):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _weights(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("weights must be 'w1,w2'")
    return tuple(parts)


def _common(parser):
    g = parser.add_argument_group("pipeline options")
    g.add_argument("--config", help="JSON file with pipeline settings (flags override it)")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-points", type=int, dest="n_points")
    g.add_argument("--pca-dim", type=int, dest="d")
    g.add_argument("--lag", type=int)
    g.add_argument("--p-max", type=int, dest="p_max")
    g.add_argument("--lag-mode", choices=pl.LAG_MODES, dest="lag_mode")
    g.add_argument("--criterion", choices=("aic", "bic", "hq"))
    g.add_argument("--folds", type=int)
    g.add_argument("--weights", type=_weights)
    g.add_argument("--features", choices=pl.FEATURE_KINDS)
    g.add_argument("--classifier", choices=("svm", "knn", "centroid"))
    g.add_argument("--out", help="run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapedyn",
                                     description="Shape-sequence modeling with TSRVF-PCA and VAR.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        return p

    p = add("ingest", "validate and normalize contour sequence files")
    p.add_argument("inputs", nargs="+")

    p = add("geodesic", "geodesic path between two shapes")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--frame-a", type=int, default=0)
    p.add_argument("--frame-b", type=int, default=0)
    p.add_argument("--steps", type=int, default=7)

    p = add("embed", "TSRVF-PCA series and basis")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--fit-ids", help="comma-separated ids the basis is fitted on (default all)")
    p.add_argument("--recon-errors", action="store_true",
                   help="also write per-frame reconstruction errors")

    p = add("fit", "fit VAR or DCC-GARCH models to series")
    p.add_argument("inputs", nargs="+", help="series CSV files or contour sequences")
    p.add_argument("--model", choices=("var", "dcc"), default="var")

    p = add("select-lag", "information criteria against lag")
    p.add_argument("inputs", nargs="+")

    p = add("synth", "synthesize a new sequence from a fitted VAR")
    p.add_argument("input", help="contour sequence to learn from")
    p.add_argument("--length", type=int, default=None)

    p = add("predict", "forecast errors per lag on a train/test split")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--train-frac", type=float, default=0.75)
    p.add_argument("--lags", type=_lag_range, default=[1, 2, 3, 4])
    p.add_argument("--horizon", type=int, default=1)

    p = add("compare-models", "VAR against DCC-GARCH forecast errors")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--train-frac", type=float, default=0.75)
    p.add_argument("--horizon", type=int, default=1)

    p = add("features", "distance features against a training set")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--fit-ids", help="comma-separated training ids (default all)")

    p = add("classify", "cross-validated classification")
    p.add_argument("inputs", nargs="+")

    p = add("simulate", "generate a labeled synthetic dataset")
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--length", type=int, default=sim.DEFAULT_LENGTH)
    p.add_argument("--harmonics", type=int, default=sim.DEFAULT_HARMONICS)
    return parser


def load_config(args) -> pl.PipelineConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(io.read_json(args.config))
    fields = {f.name for f in dataclasses.fields(pl.PipelineConfig)}
    unknown = set(values) - fields - {"out"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    out = values.pop("out", None)
    for name in fields:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if "weights" in values:
        values["weights"] = tuple(values["weights"])
    cfg = pl.PipelineConfig(**values).validate()
    if getattr(args, "out", None) is None:
        args.out = out or str(Path("runs") / args.command)
    return cfg


# -- helpers ----------------------------------------------------------------

@contextlib.contextmanager
def _item(item_id):
    """Attach ``item_id`` to module errors that do not name their input."""
    try:
        yield
    except ShapeDynError as exc:
        if exc.item_id is None:
            exc.item_id = item_id
        raise

def _read_all(run, inputs):
    seqs = []
    for path in io.find_sequences(inputs):
        run.add_input(path)
        seqs.append(io.read_sequence(path))
    ids = [s.id for s in seqs]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ShapeDynError(f"duplicate sequence ids {sorted(dup)}", module="cli",
                            operation="read", item_id=sorted(dup)[0])
    return sorted(seqs, key=lambda s: s.id)


def _series_from_inputs(run, inputs, cfg):
    """Series CSVs are read as is; contour sequences are embedded on their own basis."""
    out = []
    for path in io.find_sequences(inputs) if inputs else []:
        run.add_input(path)
        if path.suffix == ".csv" and _is_series_csv(path):
            _, vals = io.read_matrix(path)
            out.append(sd.EuclideanSeries(vals, path.stem))
        else:
            seq = io.read_sequence(path)
            prep = pl.prepare([seq], cfg)
            basis = pl.fit_basis(prep, cfg.d)
            out.append(pl.embed(prep, basis)[0])
    return sorted(out, key=lambda s: s.source_id)


def _is_series_csv(path):
    with Path(path).open() as fh:
        head = fh.readline().strip().split(",")
    return "frame" not in head


def _contour(q):
    pts, _ = from_srvf(q)
    return center_and_scale(pts)


def _write_series(run, rel, series):
    vals = np.asarray(series.values)
    return io.write_matrix(run.path(rel), vals, [f"x{i + 1}" for i in range(vals.shape[1])])


# -- commands ---------------------------------------------------------------

def cmd_ingest(args, cfg, run):
    rows = []
    for seq in _read_all(run, args.inputs):
        frames = [center_and_scale(resample_uniform(f, cfg.n_points)) for f in seq.frames]
        io.write_sequence(run.path(f"normalized/{seq.id}.json"), seq.id, frames, seq.label)
        rows.append([seq.id, seq.label or "", len(seq.frames)])
    io.write_table(run.path("sequences.csv"), ["id", "label", "frames"], rows)
    return {"sequences": len(rows)}


def cmd_geodesic(args, cfg, run):
    shapes = []
    for path, frame in ((args.first, args.frame_a), (args.second, args.frame_b)):
        run.add_input(path)
        seq = io.read_sequence(path)
        shapes.append(sd.preshape(seq.frames[frame], cfg.n_points))
    dist = ss.shape_distance(*shapes)
    path = ss.geodesic_path(shapes[0], shapes[1], args.steps)
    rows = []
    for k, q in enumerate(path):
        for i, (x, y) in enumerate(_contour(q)):
            rows.append([k, i, float(x), float(y)])
    io.write_table(run.path("geodesic.csv"), ["step", "point", "x", "y"], rows)
    return {"distance": dist}


def _fit_ids(text, ids):
    if not text:
        return list(ids)
    wanted = [t for t in text.split(",") if t]
    missing = [w for w in wanted if w not in ids]
    if missing:
        raise ShapeDynError(f"unknown fit ids {missing}", module="cli", operation="fit-ids",
                            item_id=missing[0])
    return sorted(wanted)


def cmd_embed(args, cfg, run):
    seqs = _read_all(run, args.inputs)
    prepared = pl.prepare(seqs, cfg)
    by_id = {p.id: p for p in prepared}
    fit = [by_id[i] for i in _fit_ids(args.fit_ids, by_id)]
    basis = pl.fit_basis(fit, cfg.d)
    io.write_json(run.path("basis.json"), basis.to_dict())
    io.write_table(run.path("eigenvalues.csv"), ["component", "eigenvalue"],
                   [[i + 1, float(v)] for i, v in enumerate(basis.eigenvalues)])
    series = pl.embed(prepared, basis)
    for x in series:
        _write_series(run, f"series/{x.source_id}.csv", x)
    if args.recon_errors:
        rows = []
        for p, x in zip(prepared, series):
            rebuilt = _rebuild(p, x, basis)
            errs = sd.reconstruction_errors(p.sequence, rebuilt)
            rows.extend([p.id, t, float(e)] for t, e in enumerate(errs))
        io.write_table(run.path("reconstruction_error.csv"), ["id", "frame", "error"], rows)
    return {"fit_ids": [p.id for p in fit], "d": cfg.d}


def _rebuild(prep, series, basis):
    """Lift a series and integrate it from the sequence's own (aligned) first frame."""
    alignment, _ = ss.align_reparam(basis.base, prep.tsrvf.base)
    moved = ss.apply_alignment(prep.tsrvf.base, alignment)
    start = moved / ss.norm(moved)
    fields = sd.from_reference(sd.lift(series, basis), start)
    return sd.reconstruct_sequence(start, fields, prep.id)


def cmd_fit(args, cfg, run):
    out = {}
    for x in _series_from_inputs(run, args.inputs, cfg):
        with _item(x.source_id):
            doc = _fit_one(x, args.model, cfg)
        io.write_json(run.path(f"models/{x.source_id}.{args.model}.json"), doc)
        out[x.source_id] = doc.get("p", args.model)
    return {"models": out}


def _fit_one(x, kind, cfg):
    if kind == "dcc":
        return gm.fit_dcc_garch(x).to_dict()
    p = cfg.lag if cfg.lag_mode == "fixed" else vm.select_lag(x, cfg.p_max, cfg.criterion)
    model = vm.fit_var(x, p)
    doc = model.to_dict()
    doc["spectral_radius"] = model.spectral_radius()
    return doc


def cmd_select_lag(args, cfg, run):
    rows, chosen = [], {}
    for x in _series_from_inputs(run, args.inputs, cfg):
        with _item(x.source_id):
            crit = vm.information_criteria(x, cfg.p_max)
        for p in range(cfg.p_max):
            rows.append([x.source_id, p + 1, float(crit["aic"][p]), float(crit["bic"][p]),
                         float(crit["hq"][p])])
        chosen[x.source_id] = int(np.argmin(crit[cfg.criterion])) + 1
    io.write_table(run.path("criteria_vs_lag.csv"), ["id", "p", "aic", "bic", "hq"], rows)
    io.write_table(run.path("selected_lags.csv"), ["id", "p"], sorted(chosen.items()))
    return {"selected": chosen}


def cmd_synth(args, cfg, run):
    run.add_input(args.input)
    seq = io.read_sequence(args.input)
    prep = pl.prepare([seq], cfg)
    basis = pl.fit_basis(prep, cfg.d)
    x = pl.embed(prep, basis)[0]
    p = cfg.lag if cfg.lag_mode == "fixed" else vm.select_lag(x, cfg.p_max, cfg.criterion)
    model = vm.fit_var(x, p)
    length = args.length or len(x)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        new = vm.synthesize(model, x.values[:p], length, seed=run.stream("synth", 0))
    synth = sd.EuclideanSeries(new, f"{seq.id}_synth")
    rebuilt = sd.reconstruct_sequence(basis.base, sd.lift(synth, basis), synth.source_id)
    contours = [_contour(q) for q in rebuilt.frames]
    io.write_sequence(run.path(f"{synth.source_id}.json"), synth.source_id, contours, seq.label)
    _write_series(run, "synth_series.csv", synth)
    io.write_json(run.path("var_model.json"), model.to_dict())
    return {"lag": p, "frames": len(contours), "warnings": [str(w.message) for w in caught]}


def _split(x, frac):
    split = int(round(frac * len(x)))
    if not 0 < split < len(x):
        raise ShapeDynError("train fraction leaves no train or test rows", module="cli",
                            operation="predict", item_id=x.source_id)
    return split


def cmd_predict(args, cfg, run):
    rows, best = [], {}
    for x in _series_from_inputs(run, args.inputs, cfg):
        split = _split(x, args.train_frac)
        with _item(x.source_id):
            errs = [vm.rolling_prediction_error(x, p, split, args.horizon) for p in args.lags]
        rows.extend([x.source_id, p, float(e)] for p, e in zip(args.lags, errs))
        best[x.source_id] = args.lags[int(np.argmin(errs))]
    io.write_table(run.path("prediction_error_vs_lag.csv"), ["id", "p", "error"], rows)
    return {"best_lag": best}


def cmd_compare(args, cfg, run):
    rows = []
    for x in _series_from_inputs(run, args.inputs, cfg):
        split = _split(x, args.train_frac)
        with _item(x.source_id):
            var_err = vm.rolling_prediction_error(x, cfg.lag or 1, split, args.horizon)
            dcc = gm.fit_dcc_garch(x.values[:split])
            dcc_err = garch_rolling_error(dcc, x.values, split, args.horizon)
        rows.append([x.source_id, float(var_err), float(dcc_err)])
    io.write_table(run.path("model_comparison.csv"), ["id", "var_error", "dcc_garch_error"], rows)
    wins = sum(r[1] < r[2] for r in rows)
    return {"var_better": wins, "series": len(rows)}


def garch_rolling_error(model, values, split, h=1):
    """Rolling-origin error of the constant-mean DCC-GARCH point forecast."""
    errs = [vm.prediction_error(gm.forecast_dcc(model, values[:t0], h).mean,
                                values[t0:t0 + h])
            for t0 in range(split, len(values) - h + 1)]
    return float(np.mean(errs))


def _features_tables(run, model, queries, x, cfg, prefix):
    io.write_matrix(run.path(f"{prefix}distances.csv"), x, model.train_ids,
                    [q.id for q in queries])


def cmd_features(args, cfg, run):
    seqs = _read_all(run, args.inputs)
    prepared = pl.prepare(seqs, cfg, kinematics=cfg.features != "shape")
    by_id = {p.id: p for p in prepared}
    train = [by_id[i] for i in _fit_ids(args.fit_ids, by_id)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", mf.ZeroBlockWarning)
        model = pl.fit_fold(train, cfg)
        x = pl.distance_features(model, prepared, cfg)
    io.write_json(run.path("basis.json"), model.basis.to_dict())
    _features_tables(run, model, prepared, x, cfg, "")
    io.write_table(run.path("rows.csv"), ["id", "label"],
                   [[p.id, p.label or ""] for p in prepared])
    return {"train": model.train_ids, "kind": cfg.features}


def cmd_classify(args, cfg, run):
    seqs = _read_all(run, args.inputs)
    missing = [s.id for s in seqs if not s.label]
    if missing:
        raise ShapeDynError("every sequence needs a label", module="cli", operation="classify",
                            item_id=missing[0])
    prepared = pl.prepare(seqs, cfg, kinematics=cfg.features != "shape")
    folds = []

    def on_fold(model, tr, te, x_tr, x_te):
        k = len(folds)
        basis = io.write_json(run.path(f"folds/{k}/basis.json"), model.basis.to_dict())
        io.write_matrix(run.path(f"folds/{k}/train_features.csv"), x_tr, model.train_ids,
                        model.train_ids)
        io.write_matrix(run.path(f"folds/{k}/test_features.csv"), x_te, model.train_ids,
                        [prepared[i].id for i in te])
        folds.append({"train": model.train_ids, "test": [prepared[i].id for i in te],
                      "reference": model.reference_id, "basis_sha256": io.sha256(basis)})

    run.stream("folds", 0)
    report = pl.classify(prepared, cfg, on_fold)
    doc = report.to_dict()
    doc["folds"] = folds
    io.write_json(run.path("report.json"), doc)
    run.path("report.txt").write_text(report.table() + "\n")
    return {"accuracy": report.accuracy}


def cmd_simulate(args, cfg, run):
    specs = sim.default_class_specs()
    rows = []
    for k, spec in enumerate(specs):
        key = sim.class_seed(cfg.seed, k)
        run.stream(f"class:{spec.name}", key)
        seed_frames = sim.seed_sequence(spec, args.length, cfg.n_points, seed=key)
        for s in sim.simulate_class(seed_frames, m=args.harmonics, T_out=args.length,
                                    n_sequences=args.n_per_class, seed=key, label=spec.name):
            rel = f"sequences/{s.id}.json"
            io.write_sequence(run.path(rel), s.id, s.contours, s.label)
            rows.append([s.id, s.label, rel])
    io.write_table(run.path("manifest.csv"), ["id", "class", "path"], rows)
    return {"sequences": len(rows), "classes": [s.name for s in specs]}


COMMANDS = {
    "ingest": cmd_ingest, "geodesic": cmd_geodesic, "embed": cmd_embed, "fit": cmd_fit,
    "select-lag": cmd_select_lag, "synth": cmd_synth, "predict": cmd_predict,
    "compare-models": cmd_compare, "features": cmd_features, "classify": cmd_classify,
    "simulate": cmd_simulate,
}


def _report_error(exc, command):
    if isinstance(exc, ShapeDynError):
        info = exc.describe()
    else:
        info = {"error": type(exc).__name__, "message": str(exc), "module": "cli",
                "operation": command, "input_id": None}
    print(json.dumps(info), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        run = Run(args.out, args.command, cfg)
        summary = COMMANDS[args.command](args, cfg, run)
        run.finish(summary)
    except (ShapeDynError, ValueError, OSError, KeyError) as exc:
        _report_error(exc, args.command)
        return 2
    print(json.dumps({"command": args.command, "out": str(run.dir), "summary": summary},
                     default=io._jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
