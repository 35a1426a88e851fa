"""Experiment runner.

Subcommands: benchmark, curves, weightrank, histogram, select-shape.  Each
mode reads a JSON config file and/or flags (flags win), executes its
replicates through a worker pool, and writes header-first CSVs plus a
manifest JSON listing every file.  Identical (config, seed) reruns produce
byte-identical CSVs; the manifest additionally records wall time.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from ._backend import BACKEND_NAME
from .data import (
    SYNTHETIC_KINDS,
    Dataset,
    SyntheticTask,
    gen_synthetic,
    inject_label_noise,
    load_csv,
    stratified_split,
    synthetic_manifest,
)
from .emphasis import BetaParams
from .ensembles import ENSEMBLE_KINDS, TrainConfig, TRAINERS
from .errors import DataError, DomainError, InternalError, VoteBoostError
from .evaluation import (
    DEFAULT_SHAPE_VALUES,
    ShapeGrid,
    cv_select_shape,
    learning_curve,
    paired_t_test,
    test_error,
    vote_histogram,
    weight_rank_experiment,
)
from .rng import RandomSource
from .trees import LEARNER_KINDS, LearnerSpec

MODES = ("benchmark", "curves", "weightrank", "histogram", "select-shape")

_METHOD_ALIASES = {
    "vb": "vote_boost",
    "bag": "bagging",
    "ada": "adaboost",
    "rf": "random_forest",
}

# per-method base learners used when --base is not given
_PROTOCOL_BASE = {
    "vote_boost": "random_tree",
    "bagging": "cart_unpruned",
    "adaboost": "cart_pruned",
    "random_forest": "random_tree",
}

_MODE_DEFAULT_T = {"weightrank": 100, "histogram": 100}
_MODE_DEFAULT_REPLICATES = {
    "benchmark": 10,
    "curves": 10,
    "weightrank": 1,
    "histogram": 1,
    "select-shape": 1,
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    dataset: str
    output_dir: str
    methods: tuple = ("vote_boost",)
    T: int = 501
    cv_T: int | None = None
    grid: tuple = DEFAULT_SHAPE_VALUES
    folds: int = 10
    replicates: int = 1
    noise_rate: float = 0.0
    seed: int = 0
    train_fraction: float = 2.0 / 3.0
    train_size: int = 300
    test_size: int = 2000
    dimension: int = 20
    label_column: str | None = None
    positive_label: str | None = None
    base: str | None = None
    min_split: int = 2
    k_features: int | None = None
    shape: float | None = None
    shapes: tuple = (1.0, 2.0, 30.0)
    checkpoints: tuple | None = None
    bins: int = 20
    jobs: int = 1

    def __post_init__(self):
        try:
            for name in ("T", "folds", "replicates", "seed", "train_size",
                         "test_size", "dimension", "min_split", "bins", "jobs"):
                object.__setattr__(self, name, int(getattr(self, name)))
            for name in ("cv_T", "k_features"):
                if getattr(self, name) is not None:
                    object.__setattr__(self, name, int(getattr(self, name)))
            for name in ("noise_rate", "train_fraction"):
                object.__setattr__(self, name, float(getattr(self, name)))
            if self.shape is not None:
                object.__setattr__(self, "shape", float(self.shape))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config value: {exc}") from exc
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        if not self.dataset:
            raise UsageError("--dataset is required")
        if not self.methods:
            raise UsageError("--methods must name at least one method")
        for m in self.methods:
            if m not in ENSEMBLE_KINDS:
                raise UsageError(f"unknown method {m!r}")
        if self.T < 1:
            raise UsageError("T must be >= 1")
        if self.cv_T is not None and self.cv_T < 1:
            raise UsageError("cv-T must be >= 1")
        if self.replicates < 1:
            raise UsageError("replicates must be >= 1")
        if not (0.0 <= self.noise_rate < 1.0):
            raise UsageError("noise-rate must lie in [0,1)")
        if self.base is not None and self.base not in LEARNER_KINDS:
            raise UsageError(f"unknown base learner {self.base!r}")
        if not (0.0 < self.train_fraction < 1.0):
            raise UsageError("train-fraction must lie in (0,1)")
        if self.folds < 2:
            raise UsageError("folds must be >= 2")
        if self.bins < 2:
            raise UsageError("bins must be >= 2")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")
        try:
            ShapeGrid(self.grid)
        except DomainError as exc:
            raise UsageError(f"bad grid: {exc}") from exc


def _fmt(v) -> str:
    """Locale-independent cell formatting, 6 significant digits for floats."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".6g")
    return str(v)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _default_checkpoints(T: int) -> tuple:
    pts = np.unique(np.rint(np.geomspace(1, T, 20)).astype(np.int64))
    return tuple(int(p) for p in pts)


def _parse_methods(text: str) -> tuple:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(_METHOD_ALIASES.get(tok, tok))
    return tuple(out)


def _parse_floats(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers: {text!r}") from exc


def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers: {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="voteboost",
        description="Vote-boosting ensemble experiments",
    )
    top.add_argument("--version", action="version", version=f"voteboost {__version__}")
    sub = top.add_subparsers(dest="mode", metavar="MODE")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--dataset", help="synthetic kind (twonorm|threenorm|ringnorm) or CSV path")
    common.add_argument("--methods", help="comma list: vote_boost|bagging|adaboost|random_forest (aliases vb,bag,ada,rf)")
    common.add_argument("--T", type=int, help="ensemble size")
    common.add_argument("--cv-T", dest="cv_T", type=int, help="ensemble size during shape selection (default: T)")
    common.add_argument("--grid", help="comma list of candidate shape values")
    common.add_argument("--folds", type=int, help="CV folds for shape selection")
    common.add_argument("--replicates", type=int)
    common.add_argument("--noise-rate", dest="noise_rate", type=float, help="training label flip fraction")
    common.add_argument("--seed", type=int)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--train-fraction", dest="train_fraction", type=float)
    common.add_argument("--train-size", dest="train_size", type=int)
    common.add_argument("--test-size", dest="test_size", type=int)
    common.add_argument("--dimension", type=int, help="synthetic feature count")
    common.add_argument("--label-column", dest="label_column")
    common.add_argument("--positive-label", dest="positive_label")
    common.add_argument("--base", help="base learner kind overriding the per-method default")
    common.add_argument("--min-split", dest="min_split", type=int)
    common.add_argument("--k-features", dest="k_features", type=int)
    common.add_argument("--shape", type=float, help="fixed a=b (skips CV selection)")
    common.add_argument("--shapes", help="comma list of shapes for weightrank mode")
    common.add_argument("--checkpoints", help="comma list of prefix sizes")
    common.add_argument("--bins", type=int, help="histogram bin count")
    common.add_argument("--jobs", type=int, help="replicate worker processes")
    for mode in MODES:
        sub.add_parser(mode, parents=[common])
    return top


_TUPLE_FLOAT_KEYS = {"grid", "shapes"}
_TUPLE_INT_KEYS = {"checkpoints"}


def parse_config(argv) -> ExperimentConfig:
    """Merge defaults, then the JSON config file, then flags (highest wins)."""
    ns = _build_parser().parse_args(argv)
    if ns.mode is None:
        raise UsageError("a mode subcommand is required: " + ", ".join(MODES))
    field_names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    merged: dict = {"mode": ns.mode}
    if ns.config is not None:
        try:
            with open(ns.config, "r", encoding="utf-8") as fh:
                blob = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(blob, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in blob.items():
            if key not in field_names:
                raise UsageError(f"unknown config key {key!r}")
            if key == "mode" and val != ns.mode:
                raise UsageError(
                    f"config file mode {val!r} conflicts with subcommand {ns.mode!r}"
                )
            merged[key] = val
    for key in field_names:
        flag_val = getattr(ns, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    if "methods" in merged and isinstance(merged["methods"], str):
        merged["methods"] = _parse_methods(merged["methods"])
    for key in _TUPLE_FLOAT_KEYS:
        if key in merged and isinstance(merged[key], str):
            merged[key] = _parse_floats(merged[key])
        elif key in merged and merged[key] is not None:
            merged[key] = tuple(float(v) for v in merged[key])
    for key in _TUPLE_INT_KEYS:
        if key in merged and isinstance(merged[key], str):
            merged[key] = _parse_ints(merged[key])
        elif key in merged and merged[key] is not None:
            merged[key] = tuple(int(v) for v in merged[key])
    if isinstance(merged.get("methods"), list):
        merged["methods"] = tuple(
            _METHOD_ALIASES.get(str(m), str(m)) for m in merged["methods"]
        )
    merged.setdefault("T", _MODE_DEFAULT_T.get(ns.mode, 501))
    merged.setdefault("replicates", _MODE_DEFAULT_REPLICATES[ns.mode])
    if ns.mode == "weightrank":
        merged.setdefault("base", "stump")
    if merged.get("dataset") is None:
        raise UsageError("--dataset is required")
    merged.setdefault("output_dir", f"voteboost-{ns.mode}")
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


def _base_spec(cfg: ExperimentConfig, method: str) -> LearnerSpec:
    kind = cfg.base if cfg.base is not None else _PROTOCOL_BASE[method]
    return LearnerSpec(kind=kind, min_split=cfg.min_split, k_features=cfg.k_features)


def _label_column(cfg: ExperimentConfig):
    if cfg.label_column is None:
        return None
    try:
        return int(cfg.label_column)
    except ValueError:
        return cfg.label_column


def _replicate_data(cfg: ExperimentConfig, root: RandomSource, r: int):
    """Fresh train/test pair for replicate r: synthetic tasks redraw both
    sets, file datasets re-split. Returns (train, test, flipped_indices)."""
    if cfg.dataset in SYNTHETIC_KINDS:
        task = SyntheticTask(kind=cfg.dataset, dimension=cfg.dimension)
        train = gen_synthetic(task, cfg.train_size, root.derive("data", r, 0))
        test = gen_synthetic(task, cfg.test_size, root.derive("data", r, 1))
    else:
        full = load_csv(cfg.dataset, label_column=_label_column(cfg),
                        positive_label=cfg.positive_label)
        train, test = stratified_split(full, cfg.train_fraction, root.derive("split", r))
    flipped = np.empty(0, dtype=np.int64)
    if cfg.noise_rate > 0.0:
        train, flipped = inject_label_noise(train, cfg.noise_rate, root.derive("noise", r))
    return train, test, flipped


def _train_one(cfg: ExperimentConfig, method: str, train: Dataset,
               root: RandomSource, r: int):
    """Train `method` for replicate r; returns (ensemble, shape or None)."""
    spec = _base_spec(cfg, method)
    shape = None
    emphasis = None
    if method == "vote_boost":
        if cfg.shape is not None:
            shape = float(cfg.shape)
        else:
            sel_cfg = TrainConfig(
                T=cfg.cv_T if cfg.cv_T is not None else cfg.T,
                base_spec=spec,
                rng=root.derive("cvsel", r),
            )
            shape = cv_select_shape(train, ShapeGrid(cfg.grid), cfg.folds, sel_cfg).a
        emphasis = BetaParams(shape, shape)
    train_cfg = TrainConfig(T=cfg.T, base_spec=spec, rng=root.derive("train", r),
                            emphasis=emphasis)
    return TRAINERS[method](train, train_cfg), shape


def _run_replicate(cfg: ExperimentConfig, r: int):
    """Worker entry point: compute one replicate's payload for cfg.mode."""
    root = RandomSource(cfg.seed)
    train, test, flipped = _replicate_data(cfg, root, r)
    if cfg.mode == "benchmark":
        out = []
        for method in cfg.methods:
            ens, shape = _train_one(cfg, method, train, root, r)
            out.append((method, test_error(ens, test), shape))
        return out
    if cfg.mode == "curves":
        cps = cfg.checkpoints if cfg.checkpoints is not None else _default_checkpoints(cfg.T)
        out = []
        for method in cfg.methods:
            spec = _base_spec(cfg, method)
            emphasis = None
            if method == "vote_boost":
                shape = cfg.shape if cfg.shape is not None else 2.0
                emphasis = BetaParams(shape, shape)
            train_cfg = TrainConfig(T=cfg.T, base_spec=spec,
                                    rng=root.derive("train", r), emphasis=emphasis)
            rows = learning_curve(method, train_cfg, train, test, cps)
            out.append((method, rows))
        return out
    if cfg.mode == "weightrank":
        return weight_rank_experiment(
            train,
            cfg.shapes,
            cfg.T,
            root.derive("train", r),
            flipped=flipped,
            base_spec=LearnerSpec(kind=cfg.base or "stump", min_split=cfg.min_split,
                                  k_features=cfg.k_features),
        )
    if cfg.mode == "histogram":
        method = cfg.methods[0]
        if method == "adaboost":
            raise DomainError("histogram mode needs raw vote fractions; adaboost has none")
        ens, shape = _train_one(cfg, method, train, root, r)
        cps = cfg.checkpoints if cfg.checkpoints is not None else _default_checkpoints(cfg.T)
        return method, shape, vote_histogram(ens, test, cps, cfg.bins)
    if cfg.mode == "select-shape":
        spec = _base_spec(cfg, "vote_boost")
        sel_cfg = TrainConfig(
            T=cfg.cv_T if cfg.cv_T is not None else cfg.T,
            base_spec=spec,
            rng=root.derive("cvsel", r),
        )
        params = cv_select_shape(train, ShapeGrid(cfg.grid), cfg.folds, sel_cfg)
        return params.a
    raise InternalError(f"unhandled mode {cfg.mode!r}")


def _collect(cfg: ExperimentConfig):
    """Run all replicates (worker pool when jobs > 1), in replicate order."""
    if cfg.jobs == 1 or cfg.replicates == 1:
        return [_run_replicate(cfg, r) for r in range(cfg.replicates)]
    with ProcessPoolExecutor(max_workers=min(cfg.jobs, cfg.replicates)) as pool:
        futures = [pool.submit(_run_replicate, cfg, r) for r in range(cfg.replicates)]
        return [f.result() for f in futures]


def _shape_tag(value: float) -> str:
    return format(float(value), "g").replace(".", "p").replace("-", "m")


def _assemble(cfg: ExperimentConfig, payloads) -> dict:
    """Turn per-replicate payloads into {filename: text}."""
    files: dict = {}
    if cfg.mode == "benchmark":
        rows = []
        shape_rows = []
        per_method: dict = {m: [] for m in cfg.methods}
        shapes: dict = {m: [] for m in cfg.methods}
        for r, payload in enumerate(payloads):
            for method, err, shape in payload:
                rows.append((r, method, cfg.dataset, err))
                per_method[method].append(err)
                if shape is not None:
                    shapes[method].append(shape)
                    shape_rows.append((r, method, shape))
        files["errors.csv"] = _csv_text(
            ("replicate", "method", "dataset", "error"), rows)
        if shape_rows:
            files["shapes.csv"] = _csv_text(("replicate", "method", "shape"), shape_rows)
        summary = []
        for method in cfg.methods:
            errs = np.asarray(per_method[method])
            sd = float(errs.std(ddof=1)) if errs.shape[0] > 1 else 0.0
            med = float(np.median(shapes[method])) if shapes[method] else ""
            summary.append((method, cfg.dataset, errs.shape[0], float(errs.mean()), sd, med))
        files["summary.csv"] = _csv_text(
            ("method", "dataset", "replicates", "mean_error", "sd_error", "median_shape"),
            summary)
        if len(cfg.methods) >= 2 and cfg.replicates >= 2:
            pair_rows = []
            for i, ma in enumerate(cfg.methods):
                for mb in cfg.methods[i + 1:]:
                    res = paired_t_test(per_method[ma], per_method[mb])
                    pair_rows.append((ma, mb, res.t_stat, res.p_value, res.significant))
            files["pairwise.csv"] = _csv_text(
                ("method_a", "method_b", "t_stat", "p_value", "significant"), pair_rows)
    elif cfg.mode == "curves":
        rows = []
        for r, payload in enumerate(payloads):
            for method, curve in payload:
                for size, tr_err, te_err in curve:
                    rows.append((r, method, size, "train", tr_err))
                    rows.append((r, method, size, "test", te_err))
        files["curves.csv"] = _csv_text(
            ("replicate", "method", "size", "split", "error"), rows)
    elif cfg.mode == "weightrank":
        rho_rows = []
        for r, result in enumerate(payloads):
            for shape in result.shapes:
                rho_rows.append((r, shape, result.rho[shape]))
                name = f"ranks_r{r:03d}_shape{_shape_tag(shape)}.csv"
                files[name] = _csv_text(
                    ("instance", "vb_rank", "ada_rank", "flipped"),
                    result.tables[shape])
        files["rho.csv"] = _csv_text(("replicate", "shape", "rho"), rho_rows)
    elif cfg.mode == "histogram":
        rows = []
        shape_rows = []
        for r, (method, shape, hist) in enumerate(payloads):
            if shape is not None:
                shape_rows.append((r, method, shape))
            for cp, lo, hi, n_corr, n_inc in hist:
                rows.append((r, cp, lo, hi, n_corr, n_inc))
        files["histogram.csv"] = _csv_text(
            ("replicate", "checkpoint", "bin_low", "bin_high", "correct_count",
             "incorrect_count"), rows)
        if shape_rows:
            files["shapes.csv"] = _csv_text(("replicate", "method", "shape"), shape_rows)
    elif cfg.mode == "select-shape":
        rows = [(r, cfg.dataset, shape) for r, shape in enumerate(payloads)]
        files["shapes.csv"] = _csv_text(("replicate", "dataset", "shape"), rows)
    return files


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute cfg end-to-end and write outputs; nothing is written until the
    whole run has succeeded, so failures leave no partial files."""
    start = time.monotonic()
    payloads = _collect(cfg)
    files = _assemble(cfg, payloads)
    manifest = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config": dataclasses.asdict(cfg),
        "package_version": __version__,
        "backend": BACKEND_NAME,
        "files": sorted(files),
        "wall_time_s": round(time.monotonic() - start, 3),
    }
    if cfg.dataset in SYNTHETIC_KINDS:
        manifest["generator"] = synthetic_manifest(
            SyntheticTask(kind=cfg.dataset, dimension=cfg.dimension), cfg.seed)
    os.makedirs(cfg.output_dir, exist_ok=True)
    written = []
    try:
        for name in sorted(files):
            path = os.path.join(cfg.output_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(files[name])
            written.append(path)
        path = os.path.join(cfg.output_dir, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    except BaseException:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        return run_experiment(cfg)
    except SystemExit as exc:  # argparse --help/--version/usage failures
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except VoteBoostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
