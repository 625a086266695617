"""Desk-scale trainer with periodic soft-to-hard quantization callbacks.

The schedule: every ``quant_every`` optimizer steps the callback projects
each mapped kernel softly onto its centroids at the current annealed
temperature; at ``hard_at`` the kernels are hard-compressed.  The codebook
captured at that moment is kept, the kernel is frozen for the remaining
steps (biases keep training), and any later callback projects onto the
stored codebook, which makes repeated hard callbacks exact no-ops.

Runs are fully deterministic functions of (seed, config).
"""

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .centroids import AnnealSchedule, anneal_alpha
from .errors import TrainingDiverged
from .models import ToyModel, backprop, evaluate, make_model
from .quantize import hard_quantize, quantize_tensor
from .tasks import make_task


@dataclass(frozen=True)
class TrainConfig:
    task: str = "two-gaussians"
    seed: int = 0
    steps: int = 2000
    learning_rate: float = 0.1
    batch_size: int = 32
    quant_every: int = 1000
    bit_map: "dict[str, int]" = field(default_factory=dict)
    schedule: AnnealSchedule = AnnealSchedule(10.0, 400.0, 0, 1800)
    mu_policy: "float | str" = "refit"
    mu_mode: str = "standard"
    hard_at: "int | None" = None          # default: 90% of steps
    optimizer: str = "sgd"                # "sgd" | "adam"
    log_every: int = 10
    eval_every: int = 100

    def __post_init__(self):
        if self.quant_every < 1:
            raise ValueError("quant_every must be >= 1")
        if self.resolved_hard_at > self.steps:
            raise ValueError("hard_at must not exceed steps")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @property
    def resolved_hard_at(self) -> int:
        if self.hard_at is not None:
            return self.hard_at
        return max(1, int(round(0.9 * self.steps)))


@dataclass
class TrainReport:
    task: str
    topology: str
    seed: int
    steps: int
    loss_curve: "list[tuple[int, float]]"
    eval_curve: "list[tuple[int, float]]"
    callback_log: "list[dict]"
    final_distinct: "dict[str, int]"
    final_loss: float
    final_metric: float
    metric_pre_hard: "float | None"
    metric_post_hard: "float | None"
    wall_clock_s: "float | None" = None

    def to_json_dict(self) -> dict:
        """Canonical serialized form.  Deliberately excludes wall_clock_s so
        identical runs produce identical bytes; timing goes to stderr."""
        return {
            "task": self.task,
            "topology": self.topology,
            "seed": self.seed,
            "steps": self.steps,
            "loss_curve": [[s, v] for s, v in self.loss_curve],
            "eval_curve": [[s, v] for s, v in self.eval_curve],
            "callback_log": self.callback_log,
            "final_distinct": self.final_distinct,
            "final_loss": self.final_loss,
            "final_metric": self.final_metric,
            "metric_pre_hard": self.metric_pre_hard,
            "metric_post_hard": self.metric_post_hard,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainReport":
        return cls(
            task=d["task"],
            topology=d["topology"],
            seed=d["seed"],
            steps=d["steps"],
            loss_curve=[(int(s), float(v)) for s, v in d["loss_curve"]],
            eval_curve=[(int(s), float(v)) for s, v in d["eval_curve"]],
            callback_log=d["callback_log"],
            final_distinct={k: int(v) for k, v in d["final_distinct"].items()},
            final_loss=d["final_loss"],
            final_metric=d["final_metric"],
            metric_pre_hard=d["metric_pre_hard"],
            metric_post_hard=d["metric_post_hard"],
        )

    def curves_csv(self) -> str:
        lines = ["series,step,value"]
        for s, v in self.loss_curve:
            lines.append(f"loss,{s},{v!r}")
        for s, v in self.eval_curve:
            lines.append(f"eval,{s},{v!r}")
        return "\n".join(lines) + "\n"


def default_bit_map(model: ToyModel, bits: int) -> "dict[str, int]":
    """Quantize every kernel at the same depth; biases stay exempt."""
    return {name: bits for name in model.kernel_names()}


def _apply_callback(model: ToyModel, cfg: TrainConfig, step: int) -> dict:
    alpha = anneal_alpha(cfg.schedule, step)
    hard = step >= cfg.resolved_hard_at
    entry = {"step": step, "alpha": alpha, "hard": hard, "quant_error": {}}
    for layer in model.layers:
        tname = f"{layer.name}.kernel"
        if tname not in cfg.bit_map:
            continue
        before = layer.kernel
        if hard and tname in model.hard_codebooks:
            cb = model.hard_codebooks[tname]
            if cb.scale == 0.0:
                new = before
            else:
                vals, _ = hard_quantize(before.ravel(), cb.dequantized)
                new = vals.reshape(before.shape)
        else:
            new, cb = quantize_tensor(
                before,
                cfg.bit_map[tname],
                alpha,
                mu_policy=cfg.mu_policy,
                hard=hard,
                mode=cfg.mu_mode,
            )
            if hard:
                model.hard_codebooks[tname] = cb
        layer.kernel = new
        entry["quant_error"][tname] = float(np.linalg.norm(new - before))
    return entry


def gq_callback(model: ToyModel, cfg: TrainConfig, step: int) -> ToyModel:
    """Apply the quantization projection for one training step in place."""
    _apply_callback(model, cfg, step)
    return model


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def update(self, model, grads, frozen):
        for name, layer, attr in _named_params(model):
            if name in frozen:
                continue
            setattr(layer, attr, getattr(layer, attr) - self.lr * grads[name])


class _Adam:
    """Adam with the defaults used for the full-scale training runs
    (beta1=0.9, beta2=0.98, eps=1e-9)."""

    def __init__(self, lr, beta1=0.9, beta2=0.98, eps=1e-9):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.state = {}

    def update(self, model, grads, frozen):
        self.t += 1
        for name, layer, attr in _named_params(model):
            if name in frozen:
                continue
            g = grads[name]
            m, v = self.state.get(name, (np.zeros_like(g), np.zeros_like(g)))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.state[name] = (m, v)
            mhat = m / (1 - self.beta1 ** self.t)
            vhat = v / (1 - self.beta2 ** self.t)
            setattr(
                layer, attr,
                getattr(layer, attr) - self.lr * mhat / (np.sqrt(vhat) + self.eps),
            )


def _named_params(model: ToyModel):
    out = []
    for layer in model.layers:
        out.append((f"{layer.name}.kernel", layer, "kernel"))
        if layer.bias is not None:
            out.append((f"{layer.name}.bias", layer, "bias"))
    return out


def train(model: ToyModel, cfg: TrainConfig) -> TrainReport:
    """Mini-batch gradient descent with periodic quantization callbacks.

    The model is updated in place.  Raises TrainingDiverged if the loss
    goes NaN.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    (train_x, train_y), (eval_x, eval_y) = make_task(cfg.task, cfg.seed)
    opt = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)
    hard_at = cfg.resolved_hard_at

    loss_curve = []
    eval_curve = []
    callback_log = []
    metric_pre_hard = None
    metric_post_hard = None

    n = len(train_x)
    order = rng.permutation(n)
    pos = 0
    for step in range(1, cfg.steps + 1):
        if pos + cfg.batch_size > n:
            order = rng.permutation(n)
            pos = 0
        batch = order[pos : pos + cfg.batch_size]
        pos += cfg.batch_size

        loss, grads = backprop(model, train_x[batch], train_y[batch], cfg.task)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss is not finite at step {step}")
        opt.update(model, grads, frozen=set(model.hard_codebooks))

        if step % cfg.log_every == 0 or step == cfg.steps:
            loss_curve.append((step, loss))

        if step % cfg.quant_every == 0 or step == hard_at:
            if step == hard_at:
                _, metric_pre_hard = evaluate(model, eval_x, eval_y, cfg.task)
            callback_log.append(_apply_callback(model, cfg, step))
            if step == hard_at:
                _, metric_post_hard = evaluate(model, eval_x, eval_y, cfg.task)

        if step % cfg.eval_every == 0 or step == cfg.steps:
            _, metric = evaluate(model, eval_x, eval_y, cfg.task)
            eval_curve.append((step, metric))

    final_loss, final_metric = evaluate(model, eval_x, eval_y, cfg.task)
    final_distinct = {
        f"{layer.name}.kernel": int(np.unique(layer.kernel).size)
        for layer in model.layers
        if f"{layer.name}.kernel" in cfg.bit_map
    }
    return TrainReport(
        task=cfg.task,
        topology=model.topology,
        seed=cfg.seed,
        steps=cfg.steps,
        loss_curve=loss_curve,
        eval_curve=eval_curve,
        callback_log=callback_log,
        final_distinct=final_distinct,
        final_loss=final_loss,
        final_metric=final_metric,
        metric_pre_hard=metric_pre_hard,
        metric_post_hard=metric_post_hard,
        wall_clock_s=time.perf_counter() - t0,
    )


def frequency_ablation(cfg_template: TrainConfig, frequencies) -> "list[tuple[int, TrainReport]]":
    """One full run per callback frequency, shared seed and model init."""
    frequencies = list(frequencies)
    if len(frequencies) < 2:
        raise ValueError("need at least 2 frequencies to compare")
    rows = []
    for freq in frequencies:
        cfg = replace(cfg_template, quant_every=int(freq))
        model = make_model(cfg.task, cfg.seed)
        rows.append((int(freq), train(model, cfg)))
    return rows


def ablation_csv(rows: "list[tuple[int, TrainReport]]") -> str:
    lines = ["frequency,final_metric,final_loss,metric_pre_hard,metric_post_hard"]
    for freq, report in rows:
        lines.append(
            f"{freq},{report.final_metric!r},{report.final_loss!r},"
            f"{report.metric_pre_hard!r},{report.metric_post_hard!r}"
        )
    return "\n".join(lines) + "\n"
