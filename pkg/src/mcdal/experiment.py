"""Multi-stage active-learning experiments.

One run = (seed, strategy): starting from an initial labeled pool, each
stage re-initializes the model, trains it, evaluates on the held-out test
set, scores the unlabeled pool, and transfers the per-stage budget of
samples to the labeled side. Stages continue until the labeled fraction
reaches the configured final fraction; the last stage trains and evaluates
but transfers nothing.

Fairness plumbing: the dataset is generated once per experiment; the
initial pool split depends only on the run seed, and the per-stage model
init and training streams depend only on (seed, stage). Strategies
therefore share pools and initializations exactly until their selections
diverge.
"""

import json
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import acquisition
from .data import (
    Oracle,
    PoolError,
    initial_split,
    load_csv,
    make_blobs,
    make_moons,
    make_rings,
)
from .losses import L1, DistanceKind, parse_distance
from .model import MlpSpec, init_model, predict
from .numeric import LrSchedule, Rng
from .trainer import TrainConfig, train

METRIC_COLUMNS = (
    "seed",
    "strategy",
    "stage",
    "labeled_fraction",
    "test_accuracy",
    "labeled_mean_discrepancy",
    "hdh_gap",
    "unlabeled_disagreement_rate",
    "wall_time_ms",
)

STRATEGY_VARIANTS = ("mcdal", "random", "entropy", "margin")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class ExperimentError(RuntimeError):
    """A stage failed; message carries (seed, strategy, stage) context."""


@dataclass(frozen=True)
class StrategyArm:
    """One experiment arm: a scoring strategy plus its ablation switches."""

    label: str
    variant: str
    distance: DistanceKind = L1
    terms: str = "all"
    use_discrepancy_loss: bool = True
    num_aux_heads: int = 2
    raw_score: bool = False


def parse_strategy(token, default_distance=L1):
    """Parse an arm token like "mcdal", "mcdal+l2", "mcdal+pair+nodis".

    Modifiers: l1 / l2 / kl (distance), nodis (train without the
    discrepancy loss), pair (score with aux-aux distances only), raw
    (score by D(x) directly), headsK (K auxiliary heads).
    """
    parts = token.strip().split("+")
    variant = parts[0]
    if variant not in STRATEGY_VARIANTS:
        raise ConfigError(f"unknown strategy {variant!r}; expected one of {STRATEGY_VARIANTS}")
    arm = StrategyArm(label=token.strip(), variant=variant, distance=default_distance)
    for mod in parts[1:]:
        if mod in ("l1", "l2", "kl"):
            arm = replace(arm, distance=parse_distance(mod))
        elif mod == "nodis":
            arm = replace(arm, use_discrepancy_loss=False)
        elif mod == "pair":
            arm = replace(arm, terms="aux")
        elif mod == "raw":
            arm = replace(arm, raw_score=True)
        elif mod.startswith("heads"):
            try:
                k = int(mod[len("heads") :])
            except ValueError:
                raise ConfigError(f"bad head count modifier {mod!r}") from None
            if k < 2:
                raise ConfigError(f"need at least 2 auxiliary heads, got {k}")
            arm = replace(arm, num_aux_heads=k)
        else:
            raise ConfigError(f"unknown strategy modifier {mod!r} in {token!r}")
    return arm


@dataclass(frozen=True)
class DataConfig:
    kind: str = "moons"  # moons | rings | blobs | csv
    n: int = 2000
    classes: int = 4  # blobs only
    noise: float = 0.25  # moons/rings only
    spread: float = 1.0  # blobs only
    seed: int = 7
    csv_path: str = None
    label_column: str = "label"
    standardize: bool = True

    def __post_init__(self):
        if self.kind not in ("moons", "rings", "blobs", "csv"):
            raise ConfigError(f"unknown data kind {self.kind!r}")
        if self.kind == "csv" and not self.csv_path:
            raise ConfigError("data.kind=csv requires data.csv")


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    hidden_dims: tuple = (32, 32)
    max_epochs: int = 100
    batch_size: int = 64
    base_rate: float = 0.1
    milestones: tuple = (0.3, 0.6, 0.8)
    decay: float = 0.2
    distance: DistanceKind = L1
    strategies: tuple = ("mcdal", "random", "entropy", "margin")
    initial_fraction: float = 0.10
    stage_increment: float = 0.05
    final_fraction: float = 0.40
    test_fraction: float = 0.25
    seeds: tuple = (1, 2, 3, 4, 5)
    record_timing: bool = True
    stratified_split: bool = True
    out: str = "metrics.csv"
    format: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(self, "milestones", tuple(float(m) for m in self.milestones))
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.strategies:
            raise ConfigError("need at least one strategy")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        for frac, name in (
            (self.initial_fraction, "initial_fraction"),
            (self.stage_increment, "stage_increment"),
            (self.final_fraction, "final_fraction"),
        ):
            if not 0.0 < frac <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {frac}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        steps = (self.final_fraction - self.initial_fraction) / self.stage_increment
        if steps < 1.0 - 1e-9 or abs(steps - round(steps)) > 1e-9:
            raise ConfigError(
                "final_fraction must equal initial_fraction + k * stage_increment "
                f"for integer k >= 1 (got k = {steps:.6f})"
            )
        # validates the tokens early so bad configs fail before any training
        for token in self.strategies:
            parse_strategy(token, self.distance)

    @property
    def num_stages(self):
        return int(round((self.final_fraction - self.initial_fraction) / self.stage_increment)) + 1

    def arms(self):
        return [parse_strategy(t, self.distance) for t in self.strategies]

    def lr_schedule(self):
        return LrSchedule(self.base_rate, self.milestones, self.decay)


@dataclass(frozen=True)
class StageRecord:
    seed: int
    strategy: str
    stage: int
    labeled_fraction: float
    test_accuracy: float
    labeled_mean_discrepancy: float
    hdh_gap: float
    unlabeled_disagreement_rate: float
    selected: tuple = ()
    wall_time_ms: float = 0.0


def build_dataset(data_cfg):
    """Materialize the configured dataset (generators seeded by data.seed)."""
    rng = Rng(data_cfg.seed).split("dataset")
    if data_cfg.kind == "moons":
        return make_moons(data_cfg.n, data_cfg.noise, rng)
    if data_cfg.kind == "rings":
        return make_rings(data_cfg.n, data_cfg.noise, rng)
    if data_cfg.kind == "blobs":
        per_class = data_cfg.n // data_cfg.classes
        return make_blobs(per_class, data_cfg.classes, rng, spread=data_cfg.spread)
    return load_csv(data_cfg.csv_path, data_cfg.label_column, standardize=False)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def stage_budgets(cfg, n_train):
    """Per-stage transfer sizes; the last transfer absorbs rounding residue
    so the final labeled size is exactly round(final_fraction * n_train).
    The terminal stage trains/evaluates only (budget 0)."""
    k = cfg.num_stages
    per = _round_half_up(cfg.stage_increment * n_train)
    target = _round_half_up(cfg.final_fraction * n_train)
    initial = _round_half_up(cfg.initial_fraction * n_train)
    budgets = [per] * (k - 1)
    if budgets:
        budgets[-1] = target - (initial + per * (k - 2))
    budgets.append(0)
    if any(b < 1 for b in budgets[:-1]):
        raise ConfigError(f"degenerate stage budgets {budgets} for n_train={n_train}")
    return budgets


def run_stage(pool, test_ds, arm, cfg, seed, stage, budget, oracle):
    """Train a fresh model, evaluate, score, transfer `budget` samples."""
    t0 = time.perf_counter()
    base = Rng(seed)
    spec = MlpSpec(
        input_dim=pool.dataset.input_dim,
        hidden_dims=cfg.hidden_dims,
        num_classes=pool.dataset.num_classes,
    )
    model = init_model(spec, base.split("model", stage), num_aux_heads=arm.num_aux_heads)
    tcfg = TrainConfig(
        max_epochs=cfg.max_epochs,
        batch_size=cfg.batch_size,
        lr_schedule=cfg.lr_schedule(),
        distance=arm.distance,
        use_discrepancy_loss=arm.use_discrepancy_loss,
        seed=seed,
    )
    labeled_fraction = pool.labeled_count / pool.dataset.n
    x_l, y_l = pool.labeled_features(), pool.labeled_labels()
    x_u = pool.unlabeled_features()
    train(model, x_l, y_l, x_u, tcfg, base.split("train", stage))

    test_accuracy = float(np.mean(predict(model, test_ds.features) == test_ds.labels))
    labeled_mean = acquisition.labeled_mean_discrepancy(model, x_l, arm.distance, arm.terms)
    if pool.unlabeled_count > 0:
        hdh_gap = acquisition.empirical_hdh_gap(model, x_l, x_u)
        disagreement = acquisition.unlabeled_disagreement_rate(model, x_u)
    else:
        hdh_gap = 0.0
        disagreement = 0.0

    selected = ()
    if budget > 0:
        if budget > pool.unlabeled_count:
            raise PoolError(f"budget {budget} exceeds unlabeled pool of {pool.unlabeled_count}")
        if arm.variant == "mcdal":
            scores = acquisition.mcdal_scores(
                model, x_u, labeled_mean, arm.distance, arm.terms, arm.raw_score
            )
        else:
            scores = acquisition.baseline_scores(
                model, x_u, acquisition.Strategy(arm.variant), rng=base.split("select", stage)
            )
        positions = acquisition.select_top(scores, budget)
        selected = tuple(int(i) for i in pool.unlabeled_indices[positions])
        acquisition.transfer(pool, np.asarray(selected, dtype=np.int64), oracle)

    wall = (time.perf_counter() - t0) * 1000.0 if cfg.record_timing else 0.0
    return StageRecord(
        seed=seed,
        strategy=arm.label,
        stage=stage,
        labeled_fraction=labeled_fraction,
        test_accuracy=test_accuracy,
        labeled_mean_discrepancy=labeled_mean,
        hdh_gap=hdh_gap,
        unlabeled_disagreement_rate=disagreement,
        selected=selected,
        wall_time_ms=wall,
    )


def run_experiment(cfg, write_files=True):
    """Full seeds x strategies x stages grid; returns the StageRecords.

    When write_files is set, metrics go to cfg.out (cfg.format) and the
    per-(strategy, stage) accuracy summary to a .summary.csv sibling.
    """
    dataset = build_dataset(cfg.data)
    arms = cfg.arms()
    records = []
    for seed in cfg.seeds:
        split_rng = Rng(seed).split("split")
        initial_pool, test_ds = initial_split(
            dataset,
            cfg.initial_fraction,
            cfg.test_fraction,
            split_rng,
            stratified=cfg.stratified_split,
            standardize=cfg.data.standardize,
        )
        oracle = Oracle(initial_pool.dataset)
        budgets = stage_budgets(cfg, initial_pool.dataset.n)
        for arm in arms:
            pool = initial_pool.copy()
            for stage, budget in enumerate(budgets):
                try:
                    records.append(
                        run_stage(pool, test_ds, arm, cfg, seed, stage, budget, oracle)
                    )
                except Exception as exc:
                    raise ExperimentError(
                        f"stage failed (seed={seed}, strategy={arm.label}, stage={stage}): {exc}"
                    ) from exc
    if write_files:
        emit_metrics(records, cfg.out, cfg.format)
        write_summary(records, summary_path(cfg.out))
    return records


# --- metrics emission --------------------------------------------------------


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_metrics(records, path, fmt="csv"):
    """Persist records; floats at 17 significant digits, schema fixed."""
    if not records:
        raise ValueError("no records to emit")
    if fmt == "csv":
        lines = [",".join(METRIC_COLUMNS)]
        for r in records:
            lines.append(",".join(_fmt(getattr(r, col)) for col in METRIC_COLUMNS))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        rows = []
        for r in records:
            parts = []
            for col in METRIC_COLUMNS:
                v = getattr(r, col)
                encoded = json.dumps(v) if isinstance(v, str) else _fmt(v)
                parts.append(f'"{col}": {encoded}')
            rows.append("  {" + ", ".join(parts) + "}")
        text = "[\n" + ",\n".join(rows) + "\n]\n"
    else:
        raise ValueError(f"unknown metrics format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return path


def load_metrics(path):
    """Read a metrics file (either format) back into StageRecords."""
    with open(path) as fh:
        text = fh.read()
    rows = []
    if text.lstrip().startswith("["):
        rows = json.loads(text)
    else:
        lines = [ln for ln in text.splitlines() if ln]
        header = lines[0].split(",")
        if tuple(header) != METRIC_COLUMNS:
            raise ValueError(f"unexpected metrics header {header}")
        for ln in lines[1:]:
            cells = ln.split(",")
            rows.append(dict(zip(header, cells)))
    records = []
    for row in rows:
        records.append(
            StageRecord(
                seed=int(row["seed"]),
                strategy=str(row["strategy"]),
                stage=int(row["stage"]),
                labeled_fraction=float(row["labeled_fraction"]),
                test_accuracy=float(row["test_accuracy"]),
                labeled_mean_discrepancy=float(row["labeled_mean_discrepancy"]),
                hdh_gap=float(row["hdh_gap"]),
                unlabeled_disagreement_rate=float(row["unlabeled_disagreement_rate"]),
                wall_time_ms=float(row["wall_time_ms"]),
            )
        )
    return records


def summarize(records):
    """Per-(strategy, stage) mean and population stddev of test accuracy."""
    groups = {}
    order = []
    for r in records:
        key = (r.strategy, r.stage)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    rows = []
    for strategy, stage in order:
        rs = groups[(strategy, stage)]
        accs = np.array([r.test_accuracy for r in rs])
        rows.append(
            {
                "strategy": strategy,
                "stage": stage,
                "labeled_fraction": float(np.mean([r.labeled_fraction for r in rs])),
                "mean_test_accuracy": float(accs.mean()),
                "std_test_accuracy": float(accs.std()),
            }
        )
    return rows


def summary_path(metrics_path):
    root, _ = os.path.splitext(metrics_path)
    return root + ".summary.csv"


def write_summary(records, path):
    rows = summarize(records)
    cols = ("strategy", "stage", "labeled_fraction", "mean_test_accuracy", "std_test_accuracy")
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


# --- flat key-value config files ----------------------------------------------


CONFIG_KEYS = {
    "data.kind": ("data", "kind", str),
    "data.n": ("data", "n", int),
    "data.classes": ("data", "classes", int),
    "data.noise": ("data", "noise", float),
    "data.spread": ("data", "spread", float),
    "data.seed": ("data", "seed", int),
    "data.csv": ("data", "csv_path", str),
    "data.label_column": ("data", "label_column", str),
    "data.standardize": ("data", "standardize", "bool"),
    "model.hidden": (None, "hidden_dims", "int_list"),
    "train.epochs": (None, "max_epochs", int),
    "train.batch": (None, "batch_size", int),
    "train.lr": (None, "base_rate", float),
    "train.milestones": (None, "milestones", "float_list"),
    "train.decay": (None, "decay", float),
    "distance": (None, "distance", "distance"),
    "strategies": (None, "strategies", "str_list"),
    "initial_fraction": (None, "initial_fraction", float),
    "stage_increment": (None, "stage_increment", float),
    "final_fraction": (None, "final_fraction", float),
    "test_fraction": (None, "test_fraction", float),
    "seeds": (None, "seeds", "int_list"),
    "record_timing": (None, "record_timing", "bool"),
    "stratified_split": (None, "stratified_split", "bool"),
    "out": (None, "out", str),
    "format": (None, "format", str),
}


def _parse_bool(raw, key):
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _convert(raw, kind, key):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == "bool":
            return _parse_bool(raw, key)
        if kind == "int_list":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "float_list":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "str_list":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if kind == "distance":
            return parse_distance(raw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    raise AssertionError(f"unhandled kind {kind}")


def parse_config_text(text, source="<config>"):
    """Parse `key = value` lines ('#' comments) into an ExperimentConfig."""
    data_kwargs, top_kwargs = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        section, attr, kind = CONFIG_KEYS[key]
        value = _convert(raw, kind, key)
        (data_kwargs if section == "data" else top_kwargs)[attr] = value
    return ExperimentConfig(data=DataConfig(**data_kwargs), **top_kwargs)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=path)
