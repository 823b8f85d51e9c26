"""
Photometric optimisation of a radiance field against a posed image set, evaluation on held-out views,
checkpointing and the time-to-quality benchmark.
"""
import json
import logging
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field as dataclass_field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .autodiff import AdamState, Tape, Tensor, adam_step, backward, columns, mse_loss
from .dataset import PosedImages
from .exceptions import ContractError, ManifestError, NonFiniteLoss
from .fields import BaseField, init_field, read_blob, write_blob
from .metrics import build_report
from .renderer import RenderConfig, generate_rays, render_image, render_rays, stratified_samples
from .settings import get_float_dtype, get_worker_count


__all__ = (
    "TrainConfig",
    "RayBatch",
    "Checkpoint",
    "EvalRecord",
    "BenchRow",
    "Trainer",
    "split_holdout",
    "sample_ray_batch",
    "train_step",
    "has_plateaued",
    "evaluate",
    "train_loop",
    "load_checkpoint",
    "bench",
    "speedup",
    "format_bench_table",
)

logger = logging.getLogger(__name__)

# initial and final learning rates per field kind
LEARNING_RATES = {
    "vanilla": (5e-4, 5e-4),
    "deformed": (5e-4, 5e-4),
    "dnerf": (5e-4, 5e-4),
    "instant": (1e-2, 1e-3),
}

RUNNING_LOSS_MOMENTUM = 0.99


@dataclass(frozen=True)
class TrainConfig:
    max_steps: int = 15000
    rays_per_batch: int = 4096
    learning_rate: float = 5e-4
    lr_decay: float = 1.0
    eval_every: int = 500
    holdout_fraction: float = 0.1
    holdout: Optional[Tuple[int, ...]] = None
    seed: int = 0
    background_rgb: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    samples_per_ray: int = 64
    stratified_jitter: bool = True
    plateau_threshold: float = 0.1
    plateau_patience: int = 3

    def __post_init__(self):
        problems = []
        if self.max_steps < 0:
            problems.append("max_steps must be >= 0")
        if self.rays_per_batch < 1:
            problems.append("rays_per_batch must be > 0")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be positive")
        if not 0 < self.lr_decay <= 1:
            problems.append("lr_decay must lie in (0, 1]")
        if self.eval_every < 1:
            problems.append("eval_every must be > 0")
        if not 0 <= self.holdout_fraction < 1:
            problems.append("holdout_fraction must lie in [0, 1)")
        if self.samples_per_ray < 2:
            problems.append("samples_per_ray must be >= 2")
        if problems:
            raise ContractError("; ".join(problems))
        object.__setattr__(self, "background_rgb", tuple(float(c) for c in self.background_rgb))
        if self.holdout is not None:
            object.__setattr__(self, "holdout", tuple(int(i) for i in self.holdout))

    @classmethod
    def for_kind(cls, kind, **overrides):
        """
        Defaults for a field kind; the instant field decays its rate from 1e-2 to 1e-3 over ``max_steps``.
        """
        start, end = LEARNING_RATES.get(kind, LEARNING_RATES["vanilla"])
        options = {"learning_rate": start}
        steps = overrides.get("max_steps", cls.max_steps)
        if end != start and steps > 0:
            options["lr_decay"] = (end / start) ** (1.0 / steps)
        options.update(overrides)
        return cls(**options)

    def learning_rate_at(self, step):
        return self.learning_rate * self.lr_decay**step

    def render_config(self, jitter=None):
        return RenderConfig(
            samples_per_ray=self.samples_per_ray,
            background_rgb=self.background_rgb,
            stratified_jitter=self.stratified_jitter if jitter is None else jitter,
            rng_seed=self.seed,
        )

    def as_dict(self):
        data = asdict(self)
        data["background_rgb"] = list(self.background_rgb)
        data["holdout"] = None if self.holdout is None else list(self.holdout)
        return data


class RayBatch(NamedTuple):
    origins: np.ndarray
    directions: np.ndarray
    near: np.ndarray
    far: np.ndarray
    target: np.ndarray
    times: Optional[np.ndarray]
    frames: np.ndarray
    pixels: np.ndarray

    def __len__(self):
        return self.origins.shape[0]


class EvalRecord(NamedTuple):
    step: int
    psnr: float
    ssim: float
    seconds: float


@dataclass
class Checkpoint:
    field: BaseField
    config: TrainConfig
    step: int = 0
    running_loss: float = math.nan
    seconds: float = 0.0
    losses: List[float] = dataclass_field(default_factory=list)
    path: Optional[str] = None


class BenchRow(NamedTuple):
    kind: str
    device: str
    seconds: float
    reached: bool
    psnr: float
    steps: int


def split_holdout(n_frames, fraction=0.0, holdout=None):
    """
    Returns ``(train_indices, holdout_indices)``. An explicit ``holdout`` list wins over ``fraction``, which
    holds out ``round(n_frames * fraction)`` evenly spaced frames.
    """
    if holdout is not None:
        held = sorted(set(int(i) for i in holdout))
        if any(i < 0 or i >= n_frames for i in held):
            raise ContractError("Holdout indices %s outside [0, %d)" % (held, n_frames))
    else:
        count = int(round(n_frames * fraction))
        held = sorted(set(np.round(np.linspace(0, n_frames - 1, count)).astype(int).tolist())) if count else []
    train = [i for i in range(n_frames) if i not in set(held)]
    if not train:
        raise ContractError("Holdout leaves no training frames out of %d" % n_frames)
    return train, held


def composite_target(rgba, background):
    rgba = np.asarray(rgba, dtype=np.float64)
    alpha = rgba[..., 3:]
    return rgba[..., :3] * alpha + np.asarray(background, dtype=np.float64) * (1.0 - alpha)


def sample_ray_batch(data: PosedImages, n, rng, train_indices=None, background=(0.0, 0.0, 0.0)):
    """
    Draws ``n`` pixels uniformly over (training frame, pixel) pairs and returns their rays, targets composited
    over ``background`` and, for time-stamped datasets, the frame times.
    """
    if n < 1:
        raise ContractError("Batch size must be > 0, got %r" % n)
    train_indices = np.arange(len(data)) if train_indices is None else np.asarray(train_indices, dtype=np.int64)
    height, width = data.height, data.width
    frames = train_indices[rng.integers(0, len(train_indices), size=n)]
    flat = rng.integers(0, height * width, size=n)
    pixels = np.stack([flat % width, flat // width], axis=1)

    origins = np.empty((n, 3))
    directions = np.empty((n, 3))
    near, far = np.empty(n), np.empty(n)
    intr = data.intrinsics()
    for frame in np.unique(frames):
        rows = np.nonzero(frames == frame)[0]
        o, d, lo, hi = generate_rays(intr, data.manifest.unit_pose(int(frame)), pixels[rows])
        origins[rows], directions[rows], near[rows], far[rows] = o, d, lo, hi

    target = composite_target(data.images[frames, pixels[:, 1], pixels[:, 0]], background)
    times = data.manifest.times()[frames] if data.manifest.has_times else None
    return RayBatch(origins, directions, near, far, target, times, frames, pixels)


def _max_sigma(field, batch: RayBatch, cfg: RenderConfig, times):
    t, _ = stratified_samples(batch.near, batch.far, cfg.samples_per_ray)
    points = np.clip(batch.origins[:, None, :] + t[:, :, None] * batch.directions[:, None, :], 0, 1).reshape(-1, 3)
    view = np.repeat(batch.directions, cfg.samples_per_ray, axis=0)
    sample_times = None if times is None else np.repeat(times, cfg.samples_per_ray)
    with np.errstate(all="ignore"):
        sigma = field.forward(points, view, sample_times)[0].values
    return float(np.nanmax(sigma)) if np.isfinite(sigma).any() else math.nan


def train_step(field: BaseField, batch: RayBatch, adam: AdamState, cfg: RenderConfig, step=0):
    """
    Renders the batch, takes the MSE against its targets and applies one Adam update to ``field.params``.
    Returns ``(field, loss)``.
    """
    dtype = get_float_dtype()
    uniforms = None
    if cfg.stratified_jitter:
        uniforms = np.random.default_rng([cfg.rng_seed, step]).random((len(batch), cfg.samples_per_ray))
    times = batch.times if field.requires_time else None
    with Tape() as tape:
        leaves = {name: tape.watch(value) for name, value in field.params.items()}
        out = render_rays(
            field,
            batch.origins,
            batch.directions,
            batch.near,
            batch.far,
            cfg,
            times=times,
            uniforms=uniforms,
            params=leaves,
        )
        loss = mse_loss(columns(out, 0, 3), Tensor._wrap(batch.target.astype(dtype)))
    value = float(loss.item())
    if not math.isfinite(value):
        raise NonFiniteLoss(step, adam.learning_rate, _max_sigma(field, batch, cfg, times))
    grads = backward(tape, loss)
    field.params, adam = adam_step(field.params, {name: grads[leaf.node_id] for name, leaf in leaves.items()}, adam)
    logger.debug("step %d loss %.6g", step, value)
    return field, value


def has_plateaued(history, threshold=0.1, patience=3):
    """
    True once each of the last ``patience`` evaluations improved PSNR by less than ``threshold`` dB.
    """
    values = [record.psnr if isinstance(record, EvalRecord) else float(record) for record in history]
    if len(values) < patience + 1:
        return False
    gains = np.diff(values[-(patience + 1) :])
    return bool((gains < threshold).all())


def evaluate(field: BaseField, data: PosedImages, indices, cfg: RenderConfig):
    """
    Renders each listed frame and compares it with its ground truth composited over the same background.
    Returns a ``MetricReport`` keyed by frame file path.
    """
    indices = list(indices)
    if not indices:
        raise ContractError("Nothing to evaluate: no frames selected")
    intr = data.intrinsics()
    times = data.manifest.times() if field.requires_time else None
    pairs = []
    for index in indices:
        time_value = None if times is None else float(times[index])
        rendered = render_image(intr, data.manifest.unit_pose(index), field, cfg, time=time_value)[..., :3]
        pairs.append((rendered, composite_target(data.images[index], cfg.background_rgb)))
    view_ids = [data.manifest.frames[index].file_path for index in indices]
    return build_report(pairs, max_value=1.0, view_ids=view_ids)


class Trainer:
    """
    Single thread of control around one field: owns the optimiser state, the sampling stream and the step count.
    """

    def __init__(self, field: BaseField, data: PosedImages, config: TrainConfig):
        if field.requires_time and not data.manifest.has_times:
            raise ManifestError(
                "Field kind %r needs per-frame times but the dataset frames have no 'time'" % field.kind, field="time"
            )
        if len(data) < 1:
            raise ContractError("Dataset has no frames")
        self.field = field
        self.data = data
        self.config = config
        self.train_indices, self.holdout_indices = split_holdout(len(data), config.holdout_fraction, config.holdout)
        self.eval_indices = self.holdout_indices or self.train_indices
        self.render_cfg = config.render_config()
        self.eval_cfg = config.render_config(jitter=False)
        self.adam = AdamState.for_params(field.params, config.learning_rate)
        self.rng = np.random.default_rng(config.seed)
        self.step = 0
        self.losses: List[float] = []
        self.running_loss = math.nan
        self.history: List[EvalRecord] = []
        self.seconds = 0.0

    def train_step(self):
        batch = sample_ray_batch(
            self.data, self.config.rays_per_batch, self.rng, self.train_indices, self.config.background_rgb
        )
        self.adam.learning_rate = self.config.learning_rate_at(self.step)
        _, loss = train_step(self.field, batch, self.adam, self.render_cfg, step=self.step)
        self.step += 1
        self.losses.append(loss)
        if math.isnan(self.running_loss):
            self.running_loss = loss
        else:
            self.running_loss = RUNNING_LOSS_MOMENTUM * self.running_loss + (1 - RUNNING_LOSS_MOMENTUM) * loss
        return loss

    def evaluate(self):
        report = evaluate(self.field, self.data, self.eval_indices, self.eval_cfg)
        record = EvalRecord(self.step, report.mean_psnr, report.mean_ssim, self.seconds)
        self.history.append(record)
        logger.info(
            "eval step=%d psnr=%.3f ssim=%.4f seconds=%.1f", record.step, record.psnr, record.ssim, record.seconds
        )
        return record

    def checkpoint(self, path=None):
        return Checkpoint(
            field=self.field,
            config=self.config,
            step=self.step,
            running_loss=self.running_loss,
            seconds=self.seconds,
            losses=list(self.losses),
            path=path,
        )

    def save(self, path, record_seconds=False):
        # seconds stay out of the header unless asked for, so identical runs write identical checkpoints
        running = None if math.isnan(self.running_loss) else self.running_loss
        extra = {"seconds": self.seconds} if record_seconds else {}
        write_blob(path, self.field, step=self.step, train=self.config.as_dict(), running_loss=running, **extra)
        return path


def _build_field(kind_or_field, seed, field_options):
    if isinstance(kind_or_field, BaseField):
        return kind_or_field
    return init_field(kind_or_field, seed=seed, **(field_options or {}))


def write_history(history, path):
    with open(path, "w", encoding="utf-8") as stream:
        for record in history:
            stream.write(json.dumps(record._asdict()) + "\n")
    return path


def train_loop(
    kind_or_field, data: PosedImages, config: TrainConfig, field_options=None, checkpoint_dir=None, record_seconds=False
):
    """
    Trains for ``config.max_steps`` steps or until held-out PSNR plateaus, evaluating every ``eval_every`` steps.
    With ``checkpoint_dir``, writes ``step_<n>.ckpt`` at each evaluation, ``final.ckpt`` at the end and the
    evaluation history as ``history.jsonl``; ``record_seconds`` also stores elapsed seconds in each checkpoint header.
    Returns ``(Checkpoint, history)``.
    """
    field = _build_field(kind_or_field, config.seed, field_options)
    trainer = Trainer(field, data, config)
    if checkpoint_dir:
        os.makedirs(checkpoint_dir, exist_ok=True)
    logger.info(
        "Training %s field: %d train / %d held-out frames, %d steps",
        field.kind,
        len(trainer.train_indices),
        len(trainer.holdout_indices),
        config.max_steps,
    )
    started = time.perf_counter()
    while trainer.step < config.max_steps:
        trainer.train_step()
        trainer.seconds = time.perf_counter() - started
        if trainer.step % config.eval_every == 0 or trainer.step == config.max_steps:
            trainer.evaluate()
            if checkpoint_dir:
                trainer.save(os.path.join(checkpoint_dir, "step_%06d.ckpt" % trainer.step), record_seconds)
            if has_plateaued(trainer.history, config.plateau_threshold, config.plateau_patience):
                logger.info("Held-out PSNR plateaued at step %d, stopping", trainer.step)
                break
    trainer.seconds = time.perf_counter() - started
    path = None
    if checkpoint_dir:
        path = trainer.save(os.path.join(checkpoint_dir, "final.ckpt"), record_seconds)
        write_history(trainer.history, os.path.join(checkpoint_dir, "history.jsonl"))
    return trainer.checkpoint(path), trainer.history


def load_checkpoint(path):
    field, header = read_blob(path)
    train = header.get("train")
    config = TrainConfig(**train) if train else TrainConfig()
    running = header.get("running_loss")
    return Checkpoint(
        field=field,
        config=config,
        step=header.get("step", 0),
        running_loss=math.nan if running is None else running,
        seconds=header.get("seconds", 0.0),
        path=path,
    )


def device_description():
    return "%s CPU, %d threads" % (platform.machine() or "unknown", get_worker_count())


def bench(kinds, data: PosedImages, target_db, config=None, timeout=600.0, initial_fields=None, field_options=None):
    """
    Wall-clock seconds each field kind needs to first reach ``target_db`` mean held-out PSNR. A kind that
    runs out of ``timeout`` seconds or ``max_steps`` is reported as not reached.

    ``config`` is a ``TrainConfig`` shared by all kinds, a mapping of kind to ``TrainConfig``, or ``None`` for
    per-kind defaults. ``initial_fields`` maps kind to an already trained field to start from.
    """
    kinds = list(kinds)
    if not kinds:
        raise ContractError("bench needs at least one field kind")
    initial_fields = initial_fields or {}
    field_options = field_options or {}
    rows = []
    for kind in kinds:
        if isinstance(config, dict):
            cfg = config[kind]
        else:
            cfg = config or TrainConfig.for_kind(kind)
        field = initial_fields.get(kind) or init_field(kind, seed=cfg.seed, **field_options.get(kind, {}))
        kind_data = data
        if field.requires_time and not data.manifest.has_times:
            logger.warning("bench %s: dataset frames have no time stamps, using t=0 for every frame", kind)
            kind_data = PosedImages(data.manifest.at_time(0.0), data.images, data.root)
        trainer = Trainer(field, kind_data, cfg)
        started = time.perf_counter()
        record = trainer.evaluate()
        reached = record.psnr >= target_db
        elapsed = time.perf_counter() - started
        while not reached and trainer.step < cfg.max_steps and elapsed < timeout:
            trainer.train_step()
            elapsed = time.perf_counter() - started
            if trainer.step % cfg.eval_every == 0 or trainer.step == cfg.max_steps:
                trainer.seconds = elapsed
                record = trainer.evaluate()
                reached = record.psnr >= target_db
                elapsed = time.perf_counter() - started
        seconds = trainer.seconds if reached else elapsed
        if reached and trainer.step == 0:
            seconds = 0.0
        logger.info("bench %s: reached=%s after %.1f s (%d steps)", kind, reached, seconds, trainer.step)
        rows.append(BenchRow(kind, device_description(), seconds, reached, record.psnr, trainer.step))
    return rows


def speedup(rows, slow="vanilla", fast="instant"):
    """
    ``seconds(slow) / seconds(fast)`` when both kinds reached the target, else ``None``.
    """
    by_kind = {row.kind: row for row in rows}
    if slow not in by_kind or fast not in by_kind:
        return None
    slow_row, fast_row = by_kind[slow], by_kind[fast]
    if not (slow_row.reached and fast_row.reached):
        return None
    if fast_row.seconds == 0:
        return math.inf
    return slow_row.seconds / fast_row.seconds


def format_bench_table(rows):
    header = ("kind", "device", "seconds", "reached", "psnr_db", "steps")
    body = [
        (row.kind, row.device, "%.2f" % row.seconds, "yes" if row.reached else "no", "%.3f" % row.psnr, str(row.steps))
        for row in rows
    ]
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in [header] + body]
    return "\n".join(lines) + "\n"
