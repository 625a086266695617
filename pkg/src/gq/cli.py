"""Command-line entry point.

Subcommands: quantize, pack, unpack, analyze, footprint, train-demo, ablate.
Options may also come from a JSON config file (--config); explicit flags win.
Failures print a single-line JSON {code, message} envelope on stderr and
exit 1; usage errors exit 2.  GQ_THREADS caps per-tensor parallelism.
"""

import functools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import analysis, footprint as footprint_mod
from .centroids import AnnealSchedule
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from .errors import GQError, IoError
from .models import make_model
from .packing import (
    PackedModel,
    dequantize_packed,
    pack_quantized_tensor,
    read_packed_model,
    write_packed_model,
)
from .quantize import CentroidCodebook, quantize_tensor
from .training import (
    TrainConfig,
    TrainReport,
    ablation_csv,
    default_bit_map,
    frequency_ablation,
    train,
)

DEFAULT_BITS = 5
DEFAULT_ALPHA = 400.0
DEFAULT_MU = 8.0


def _thread_count() -> int:
    raw = os.environ.get("GQ_THREADS", "").strip()
    if raw:
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


def _map_tensors(fn, items):
    """Order-preserving map, threaded across tensors when allowed."""
    items = list(items)
    workers = min(_thread_count(), len(items)) or 1
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fail(code: str, message: str, status: int = 1):
    click.echo(json.dumps({"code": code, "message": message}), err=True)
    sys.exit(status)


def gq_command(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except GQError as exc:
            _fail(exc.code, str(exc))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            _fail(type(exc).__name__, str(exc))
    return wrapper


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc


def _pick(flag_value, config: dict, key: str, default):
    """Flag beats config beats default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _parse_bit_map(raw) -> "dict[str, int]":
    if raw is None:
        return {}
    if isinstance(raw, dict):
        return {str(k): int(v) for k, v in raw.items()}
    return {str(k): int(v) for k, v in json.loads(raw).items()}


def _write_text(path, text: str):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _codebooks_path(output_path: str) -> str:
    return output_path + ".codebooks.json"


def _write_codebooks(path, params: dict, books: "dict[str, CentroidCodebook]"):
    doc = {
        "version": 1,
        **params,
        "tensors": {name: cb.to_dict() for name, cb in books.items()},
    }
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_codebooks(path) -> "dict[str, CentroidCodebook]":
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read codebooks {path}: {exc}") from exc
    return {name: CentroidCodebook.from_dict(d) for name, d in doc["tensors"].items()}


@click.group()
def main():
    """Soft-to-hard weight quantization toolkit."""


@main.command()
@click.option("--input", "input_path", required=True, help="Source GQCK checkpoint.")
@click.option("--output", "output_path", required=True, help="Quantized GQCK to write.")
@click.option("--bits", type=int, default=None, help=f"Default bit depth (default {DEFAULT_BITS}).")
@click.option("--bit-map", default=None, help="JSON object of per-tensor bit overrides.")
@click.option("--alpha", type=float, default=None, help=f"Softmax temperature (default {DEFAULT_ALPHA}).")
@click.option("--passes", type=int, default=None,
              help="Multi-pass mode: soft passes on a ramp from --alpha-start "
                   "to --alpha, then a final hard pass (default 1 = hard only).")
@click.option("--alpha-start", type=float, default=None,
              help="Ramp start for multi-pass quantization (default 10).")
@click.option("--mu-policy", type=click.Choice(["refit", "fixed"]), default=None)
@click.option("--mu", type=float, default=None, help=f"Mu for --mu-policy fixed (default {DEFAULT_MU}).")
@click.option("--mode", type=click.Choice(["standard", "paper-verbatim"]), default=None)
@click.option("--include-biases", is_flag=True, help="Also quantize tensors named *.bias.")
@click.option("--config", "config_path", default=None, help="JSON config file; flags win.")
@gq_command
def quantize(input_path, output_path, bits, bit_map, alpha, passes, alpha_start,
             mu_policy, mu, mode, include_biases, config_path):
    """Hard-quantize a checkpoint; writes the result plus a codebook sidecar."""
    cfg = _load_config(config_path)
    bits = int(_pick(bits, cfg, "bits", DEFAULT_BITS))
    alpha = float(_pick(alpha, cfg, "alpha", DEFAULT_ALPHA))
    passes = int(_pick(passes, cfg, "passes", 1))
    alpha_start = float(_pick(alpha_start, cfg, "alpha_start", 10.0))
    mu_policy = _pick(mu_policy, cfg, "mu_policy", "refit")
    mu = float(_pick(mu, cfg, "mu", DEFAULT_MU))
    mode = _pick(mode, cfg, "mode", "standard")
    overrides = _parse_bit_map(_pick(bit_map, cfg, "bit_map", None))
    if os.path.abspath(input_path) == os.path.abspath(output_path):
        raise ValueError("input and output paths must differ")
    if passes < 1:
        raise ValueError("passes must be >= 1")

    policy = "refit" if mu_policy == "refit" else mu
    if passes == 1:
        ramp = [alpha]
    else:
        ramp = list(np.linspace(alpha_start, alpha, passes))
    ckpt = read_checkpoint(input_path)
    # Biases stay exempt unless asked for, or explicitly listed in the map.
    names = [
        n for n in ckpt.names()
        if include_biases or n in overrides or not n.endswith(".bias")
    ]

    def job(name):
        b = overrides.get(name, bits)
        values = ckpt.tensors[name]
        for a in ramp[:-1]:
            values, _ = quantize_tensor(values, b, float(a), mu_policy=policy, hard=False, mode=mode)
        values, cb = quantize_tensor(values, b, ramp[-1], mu_policy=policy, hard=True, mode=mode)
        return name, values, cb

    out = Checkpoint(metadata=dict(ckpt.metadata))
    books = {}
    results = {name: (values, cb) for name, values, cb in _map_tensors(job, names)}
    for name in ckpt.names():  # preserve original tensor order
        if name in results:
            values, cb = results[name]
            out.add(name, values)
            books[name] = cb
        else:
            out.add(name, ckpt.tensors[name])
    write_checkpoint(output_path, out)
    sidecar = _codebooks_path(output_path)
    _write_codebooks(sidecar, {"alpha": alpha, "mode": mode}, books)
    click.echo(f"quantized {len(books)} tensor(s) -> {output_path} (+ {sidecar})")


@main.command()
@click.option("--input", "input_path", required=True, help="Quantized GQCK checkpoint.")
@click.option("--codebooks", "codebooks_path", default=None,
              help="Codebook sidecar (default: <input>.codebooks.json).")
@click.option("--output", "output_path", required=True, help="GQPK file to write.")
@click.option("--skip-missing", is_flag=True,
              help="Silently skip tensors without a codebook instead of failing.")
@gq_command
def pack(input_path, codebooks_path, output_path, skip_missing):
    """Bit-pack a hard-quantized checkpoint into a GQPK model."""
    codebooks_path = codebooks_path or _codebooks_path(input_path)
    ckpt = read_checkpoint(input_path)
    books = _read_codebooks(codebooks_path)
    names = []
    for name in ckpt.names():
        if name in books:
            names.append(name)
        elif not skip_missing:
            raise ValueError(f"tensor {name!r} has no codebook (use --skip-missing to drop it)")

    packed = _map_tensors(
        lambda name: pack_quantized_tensor(name, ckpt.tensors[name], books[name]), names
    )
    write_packed_model(output_path, PackedModel(tensors=packed))
    click.echo(f"packed {len(packed)} tensor(s) -> {output_path}")


@main.command()
@click.option("--input", "input_path", required=True, help="GQPK file.")
@click.option("--output", "output_path", required=True, help="Dequantized GQCK to write.")
@gq_command
def unpack(input_path, output_path):
    """Expand a GQPK model back into a float32 checkpoint."""
    model = read_packed_model(input_path)
    ckpt = Checkpoint()
    for arr, pt in zip(_map_tensors(dequantize_packed, model.tensors), model.tensors):
        ckpt.add(pt.name, arr)
    write_checkpoint(output_path, ckpt)
    click.echo(f"unpacked {len(model.tensors)} tensor(s) -> {output_path}")


@main.command()
@click.option("--original", "original_path", required=True, help="Pre-quantization GQCK.")
@click.option("--quantized", "quantized_path", required=True, help="Quantized GQCK.")
@click.option("--codebooks", "codebooks_path", default=None,
              help="Codebook sidecar (default: <quantized>.codebooks.json).")
@click.option("--csv", "csv_path", default=None, help="Per-kernel stats CSV.")
@click.option("--json", "json_path", default=None, help="Per-kernel stats JSON.")
@click.option("--alloc-csv", "alloc_path", default=None, help="Grouped allocation summary CSV.")
@gq_command
def analyze(original_path, quantized_path, codebooks_path, csv_path, json_path, alloc_path):
    """Per-kernel distinct-value counts, boundaries, l2 error and SQNR."""
    codebooks_path = codebooks_path or _codebooks_path(quantized_path)
    original = read_checkpoint(original_path)
    quantized = read_checkpoint(quantized_path)
    books = _read_codebooks(codebooks_path)
    names = [n for n in quantized.names() if n in books]

    def job(name):
        if name not in original.tensors:
            raise ValueError(f"tensor {name!r} missing from the original checkpoint")
        return analysis.kernel_stats(
            original.tensors[name], quantized.tensors[name], books[name], name=name
        )

    stats = _map_tensors(job, names)
    if csv_path:
        _write_text(csv_path, analysis.stats_to_csv(stats))
    if json_path:
        _write_text(json_path, analysis.stats_to_json(stats))
    if alloc_path:
        _write_text(alloc_path, analysis.allocation_to_csv(analysis.allocation_report(stats)))
    if not (csv_path or json_path or alloc_path):
        click.echo(analysis.stats_to_csv(stats), nl=False)
    else:
        click.echo(f"analyzed {len(stats)} tensor(s)")


@main.command()
@click.option("--topology", "topology_path", required=True, help="Topology JSON file.")
@click.option("--bits", type=int, default=None, help=f"Uniform bit depth (default {DEFAULT_BITS}).")
@click.option("--bit-map", default=None, help="JSON object of per-kernel bit overrides.")
@click.option("--json", "json_path", default=None, help="Write the full report as JSON.")
@click.option("--csv", "csv_path", default=None, help="Write the per-tensor table as CSV.")
@click.option("--config", "config_path", default=None)
@gq_command
def footprint(topology_path, bits, bit_map, json_path, csv_path, config_path):
    """Parameter counts and packed-size ratios for a topology file."""
    cfg = _load_config(config_path)
    bits = int(_pick(bits, cfg, "bits", DEFAULT_BITS))
    overrides = _parse_bit_map(_pick(bit_map, cfg, "bit_map", None))
    shapes = footprint_mod.load_topology(topology_path)
    report = footprint_mod.footprint_report(shapes, overrides, default_bits=bits)
    if json_path:
        _write_text(json_path, json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
    if csv_path:
        _write_text(csv_path, report.to_csv())
    for group, params in report.group_params().items():
        click.echo(f"{group}: {params} params ({params / 1e6:.2f} M)")
    click.echo(f"total: {report.total_params} params ({report.total_params / 1e6:.2f} M)")
    click.echo(f"reduction vs 32-bit: {report.reduction_ratio:.1f}x "
               f"(codebook overhead {report.total_overhead_bytes} bytes, reported separately)")


def _train_options(fn):
    for deco in reversed([
        click.option("--task", default=None,
                     type=click.Choice(["two-gaussians", "sine-regression", "parity-sequence"])),
        click.option("--seed", type=int, default=None),
        click.option("--steps", type=int, default=None),
        click.option("--learning-rate", type=float, default=None),
        click.option("--batch-size", type=int, default=None),
        click.option("--bits", type=int, default=None, help="Uniform kernel bit depth."),
        click.option("--bit-map", default=None, help="JSON per-kernel overrides."),
        click.option("--quant-every", type=int, default=None),
        click.option("--hard-at", type=int, default=None),
        click.option("--alpha-start", type=float, default=None),
        click.option("--alpha-end", type=float, default=None),
        click.option("--mu-policy", type=click.Choice(["refit", "fixed"]), default=None),
        click.option("--mu", type=float, default=None),
        click.option("--optimizer", type=click.Choice(["sgd", "adam"]), default=None),
        click.option("--config", "config_path", default=None),
    ]):
        fn = deco(fn)
    return fn


def _build_train_config(cfg: dict, **kw) -> "tuple[TrainConfig, int]":
    task = _pick(kw.get("task"), cfg, "task", "two-gaussians")
    seed = int(_pick(kw.get("seed"), cfg, "seed", 0))
    steps = int(_pick(kw.get("steps"), cfg, "steps", 2000))
    hard_at = kw.get("hard_at")
    if hard_at is None:
        hard_at = cfg.get("hard_at")
    hard_at = int(hard_at) if hard_at is not None else max(1, int(round(0.9 * steps)))
    bits = int(_pick(kw.get("bits"), cfg, "bits", DEFAULT_BITS))
    model = make_model(task, seed)
    bit_map = default_bit_map(model, bits)
    bit_map.update(_parse_bit_map(_pick(kw.get("bit_map"), cfg, "bit_map", None)))
    mu_policy = _pick(kw.get("mu_policy"), cfg, "mu_policy", "refit")
    policy = "refit" if mu_policy == "refit" else float(_pick(kw.get("mu"), cfg, "mu", DEFAULT_MU))
    schedule = AnnealSchedule(
        alpha_start=float(_pick(kw.get("alpha_start"), cfg, "alpha_start", 10.0)),
        alpha_end=float(_pick(kw.get("alpha_end"), cfg, "alpha_end", DEFAULT_ALPHA)),
        s_start=0,
        s_end=hard_at,
    )
    train_cfg = TrainConfig(
        task=task,
        seed=seed,
        steps=steps,
        learning_rate=float(_pick(kw.get("learning_rate"), cfg, "learning_rate", 0.1)),
        batch_size=int(_pick(kw.get("batch_size"), cfg, "batch_size", 32)),
        quant_every=int(_pick(kw.get("quant_every"), cfg, "quant_every", 1000)),
        bit_map=bit_map,
        schedule=schedule,
        mu_policy=policy,
        hard_at=hard_at,
        optimizer=_pick(kw.get("optimizer"), cfg, "optimizer", "sgd"),
    )
    return train_cfg, seed


@main.command("train-demo")
@_train_options
@click.option("--report", "report_path", default=None, help="TrainReport JSON output.")
@click.option("--curves", "curves_path", default=None, help="Loss/eval curves CSV output.")
@click.option("--save-checkpoint", "ckpt_path", default=None, help="Final model as GQCK.")
@gq_command
def train_demo(report_path, curves_path, ckpt_path, config_path, **kw):
    """Train a toy model with the quantization callback schedule."""
    cfg = _load_config(config_path)
    train_cfg, seed = _build_train_config(cfg, **kw)
    model = make_model(train_cfg.task, seed)
    report = train(model, train_cfg)
    if report_path:
        _write_text(report_path, report.to_json())
    if curves_path:
        _write_text(curves_path, report.curves_csv())
    if ckpt_path:
        write_checkpoint(ckpt_path, model.to_checkpoint(
            metadata={"task": train_cfg.task, "seed": str(seed), "steps": str(train_cfg.steps)}
        ))
        books = {name: cb for name, cb in model.hard_codebooks.items()}
        if books:
            _write_codebooks(_codebooks_path(ckpt_path), {"alpha": train_cfg.schedule.alpha_end}, books)
    click.echo(
        f"task={train_cfg.task} seed={seed} final_metric={report.final_metric:.4f} "
        f"pre_hard={report.metric_pre_hard} post_hard={report.metric_post_hard}"
    )
    click.echo(f"wall_clock_s={report.wall_clock_s:.3f}", err=False)


@main.command()
@_train_options
@click.option("--frequencies", default=None,
              help="Comma-separated callback periods (default 50,500,5000).")
@click.option("--csv", "csv_path", default=None, help="Comparison table CSV.")
@click.option("--report-dir", default=None, help="Directory for per-run TrainReport JSON files.")
@gq_command
def ablate(frequencies, csv_path, report_dir, config_path, **kw):
    """Run the quantization-frequency ablation and emit the comparison table."""
    cfg = _load_config(config_path)
    train_cfg, _ = _build_train_config(cfg, **kw)
    raw = _pick(frequencies, cfg, "frequencies", "50,500,5000")
    if isinstance(raw, str):
        freqs = [int(tok) for tok in raw.split(",")]
    else:
        freqs = [int(tok) for tok in raw]
    rows = frequency_ablation(train_cfg, freqs)
    table = ablation_csv(rows)
    if csv_path:
        _write_text(csv_path, table)
    if report_dir:
        os.makedirs(report_dir, exist_ok=True)
        for freq, report in rows:
            _write_text(os.path.join(report_dir, f"report_f{freq}.json"), report.to_json())
    click.echo(table, nl=False)
    best = max(rows, key=lambda fr: fr[1].final_metric)
    worst = min(rows, key=lambda fr: fr[1].final_metric)
    click.echo(f"# best frequency {best[0]} (metric {best[1].final_metric:.4f}); "
               f"worst {worst[0]} ({worst[1].final_metric:.4f})")


if __name__ == "__main__":
    main()
