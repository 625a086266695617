"""Acceptance suite: one test per shipping criterion, each printing a
PASS/FAIL line with its runtime (run with -s to see them as they happen).

Numeric tolerances are pinned here, not configurable.
"""

import importlib.resources
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from click.testing import CliRunner

from gq import kernels
from gq.centroids import (
    AnnealSchedule,
    CentroidVector,
    MuLawConfig,
    build_linear_centroids,
    mulaw_expand,
    snap_to_int8_grid,
)
from gq.checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from gq.cli import main as cli_main
from gq.footprint import footprint_report, load_topology
from gq.models import backprop, finite_difference_grads, make_model
from gq.packing import pack_indices, unpack_indices
from gq.quantize import (
    MuSearchConfig,
    _snapped_centroids,
    fit_mu,
    hard_quantize,
    quantize_tensor,
    soft_quantize,
    soft_quantize_jacobian,
)
from gq.tasks import make_task
from gq.training import TrainConfig, default_bit_map, frequency_ablation, train

FIXTURE = str(importlib.resources.files("gq.fixtures") / "conformer_table1.json")
MILLION = 1e6


def _report(num, name, ok, elapsed, limit, detail=""):
    status = "PASS" if ok and elapsed < limit else "FAIL"
    suffix = f" [{detail}]" if detail else ""
    print(f"ACCEPTANCE {num:02d} {name}: {status} ({elapsed:.2f}s / {limit:.0f}s){suffix}")
    assert ok, f"criterion {num} ({name}) failed{suffix}"
    assert elapsed < limit, f"criterion {num} ({name}) took {elapsed:.2f}s, limit {limit}s"


def test_01_table1_parameter_accounting():
    t0 = time.perf_counter()
    shapes = load_topology(FIXTURE)
    groups = footprint_report(shapes, {}, default_bits=5).group_params()
    expected = {
        "subsampling": 1.72,
        "conformer_blocks": 21.87,
        "encoder_proj": 0.26,
        "decoder": 2.62,
        "joint": 1.28,
    }
    ok = all(abs(groups[g] / MILLION - v) <= 0.01 for g, v in expected.items())
    detail = ", ".join(f"{g}={groups[g] / MILLION:.2f}M" for g in expected)
    _report(1, "table1 parameter accounting", ok, time.perf_counter() - t0, 1.0, detail)


def test_02_table3_size_ratios():
    t0 = time.perf_counter()
    shapes = load_topology(FIXTURE)
    r5 = footprint_report(shapes, {}, default_bits=5)
    r6 = footprint_report(shapes, {}, default_bits=6)
    ok = (
        round(r5.reduction_ratio, 1) == 6.4
        and round(r6.reduction_ratio, 1) == 5.3
        and r5.total_overhead_bytes > 0  # accounted, but outside the ratio
        and r5.reduction_ratio == 32.0 * r5.total_params / r5.total_packed_bits
    )
    detail = f"5-bit={r5.reduction_ratio:.2f}x, 6-bit={r6.reduction_ratio:.2f}x"
    _report(2, "table3 size ratios", ok, time.perf_counter() - t0, 1.0, detail)


def test_03_distinct_value_bound():
    t0 = time.perf_counter()
    depths = (1, 4, 5, 6, 8)
    ok = True
    checked = 0
    for task in ("two-gaussians", "sine-regression", "parity-sequence"):
        model = make_model(task, seed=0)
        for layer in model.layers:
            for b in depths:
                out, _ = quantize_tensor(layer.kernel, b, 400.0, mu_policy=8.0, hard=True)
                ok &= np.unique(out).size <= (1 << b)
                checked += 1
    rng = np.random.default_rng(123)
    for i in range(100):
        shape = tuple(rng.integers(1, 40, size=rng.integers(1, 4)))
        scale = float(rng.uniform(0.01, 3.0))
        t = rng.normal(0.0, scale, shape) if i % 2 else rng.uniform(-scale, scale, shape)
        for b in depths:
            out, _ = quantize_tensor(t, b, 400.0, mu_policy=8.0, hard=True)
            ok &= np.unique(out).size <= (1 << b)
            checked += 1
    _report(3, "distinct-value bound", ok, time.perf_counter() - t0, 10.0,
            f"{checked} tensor/depth pairs")


def test_04_annealing_convergence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    total = 0
    for _ in range(50):
        z = np.sort(rng.uniform(-1.0, 1.0, 16))
        w = rng.uniform(-1.2, 1.2, 240)
        d = np.sort(np.abs(w[:, None] - z[None, :]), axis=1)
        gap = d[:, 1] - d[:, 0]
        alpha = np.minimum(50.0 / np.maximum(gap, 1e-12), 1e6)
        keep = alpha * gap > 40
        w, alpha = w[keep], alpha[keep]
        hard, _ = kernels.hard_quantize(w, z)
        for wi, ai, hi in zip(w, alpha, hard):
            soft = kernels.soft_quantize(np.array([wi]), z, float(ai))[0]
            worst = max(worst, abs(soft - hi))
        total += len(w)
    ok = total >= 10_000 and worst < 1e-10
    _report(4, "annealing convergence", ok, time.perf_counter() - t0, 5.0,
            f"{total} samples, max|soft-hard|={worst:.2e}")


def test_05_mulaw_mode_checks():
    t0 = time.perf_counter()
    grid = CentroidVector(np.linspace(-1.0, 1.0, 1001), 1)
    near_identity = mulaw_expand(grid, MuLawConfig(mu=1e-6)).values
    standard = mulaw_expand(grid, MuLawConfig(mu=8.0)).values
    fixed = mulaw_expand(CentroidVector([-1.0, 0.0, 1.0], 1), MuLawConfig(mu=8.0)).values
    verbatim = mulaw_expand(
        CentroidVector([0.5], 1), MuLawConfig(mu=8.0, mode="paper-verbatim")
    ).values
    ok = (
        np.max(np.abs(near_identity - grid.values)) < 1e-5
        and np.allclose(fixed, [-1.0, 0.0, 1.0], atol=1e-14)
        and np.max(np.abs(standard + standard[::-1])) < 1e-12
        and np.all(np.diff(standard) > 0)
        and abs(verbatim[0] - 2.0 / 9.0) < 1e-14
    )
    _report(5, "mu-law mode checks", ok, time.perf_counter() - t0, 1.0)


def test_06_mu_fit_oracle():
    t0 = time.perf_counter()
    search = MuSearchConfig()
    oracle_grid = np.linspace(math.log(search.mu_min), math.log(search.mu_max), 10_000)
    worst = -np.inf
    for i in range(20):
        rng = np.random.default_rng(500 + i)
        kind = i % 3
        if kind == 0:
            w = rng.normal(0.0, 0.1, 256)
        elif kind == 1:
            w = rng.laplace(0.0, 0.05, 256)
        else:
            w = rng.uniform(-0.5, 0.5, 256)
        alpha, b = 200.0, 5
        wn = w / np.abs(w).max()

        def objective(mu):
            _, snapped = _snapped_centroids(b, float(mu), "standard")
            diff = kernels.soft_quantize(wn, snapped.values, alpha) - wn
            return float(np.sqrt(diff @ diff))

        mu_star = fit_mu(w, b, alpha, search=search)
        exhaustive = min(objective(math.exp(g)) for g in oracle_grid)
        worst = max(worst, objective(mu_star) - exhaustive)
    ok = worst <= 1e-6
    _report(6, "mu-fit vs exhaustive oracle", ok, time.perf_counter() - t0, 60.0,
            f"worst objective gap {worst:.2e}")


def test_07_gradient_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    z = np.sort(rng.uniform(-1.0, 1.0, 8))
    ok = True
    checked = 0
    while checked < 100:
        w = float(rng.uniform(-1.0, 1.0))
        if np.min(np.abs(w - z)) < 1e-4:
            continue
        alpha = float(rng.uniform(1.0, 80.0))
        jac = soft_quantize_jacobian(w, z, alpha)
        h = 1e-6
        fd = (soft_quantize([w + h], z, alpha)[0] - soft_quantize([w - h], z, alpha)[0]) / (2 * h)
        # 1e-9 absolute floor: the FD oracle's own round-off noise
        # (eps/h ~ 1e-10) dominates wherever the true derivative underflows
        ok &= abs(jac - fd) <= 1e-5 * abs(fd) + 1e-9
        checked += 1

    worst_rel = 0.0
    for task in ("two-gaussians", "sine-regression", "parity-sequence"):
        model = make_model(task, seed=2, hidden=6)
        (tx, ty), _ = make_task(task, 3)
        x, y = tx[:16], ty[:16]
        _, grads = backprop(model, x, y, task)
        fd = finite_difference_grads(model, x, y, task)
        for name in grads:
            rel = np.linalg.norm(grads[name] - fd[name]) / max(np.linalg.norm(fd[name]), 1e-12)
            worst_rel = max(worst_rel, rel)
    ok &= worst_rel < 1e-4
    _report(7, "gradient oracles", ok, time.perf_counter() - t0, 30.0,
            f"100 jacobian points; worst backprop rel err {worst_rel:.2e}")


def test_08_packing():
    t0 = time.perf_counter()
    ok = pack_indices([1, 0, 1, 1, 0, 1, 0, 0], 1) == bytes([0xB4])
    ok &= pack_indices([31, 0, 17], 5) == bytes([0xF8, 0x22])
    ok &= unpack_indices(bytes([0xB4]), 8, 1).tolist() == [1, 0, 1, 1, 0, 1, 0, 0]
    ok &= unpack_indices(bytes([0xF8, 0x22]), 3, 5).tolist() == [31, 0, 17]
    rng = np.random.default_rng(99)
    for case in range(1000):
        b = int(rng.integers(1, 9))
        n = int(rng.integers(0, 200))
        idx = rng.integers(0, 1 << b, size=n)
        back = unpack_indices(pack_indices(idx, b), n, b, strict=True)
        ok &= np.array_equal(back, idx)
    _report(8, "bit packing", ok, time.perf_counter() - t0, 5.0, "1000 roundtrips + hand layouts")


def _qat_config(seed, bit_map, steps=2000, quant_every=100):
    hard_at = int(round(0.9 * steps))
    return TrainConfig(
        task="two-gaussians",
        seed=seed,
        steps=steps,
        learning_rate=0.1,
        batch_size=32,
        quant_every=quant_every,
        bit_map=bit_map,
        schedule=AnnealSchedule(10.0, 400.0, 0, hard_at),
        mu_policy="refit",
        hard_at=hard_at,
        eval_every=200,
    )


def test_09_end_to_end_qat():
    t0 = time.perf_counter()
    base_accs, gq_accs, drops = [], [], []
    for seed in (0, 1, 2):
        baseline = train(make_model("two-gaussians", seed), _qat_config(seed, {}))
        model = make_model("two-gaussians", seed)
        cfg = _qat_config(seed, default_bit_map(model, 5))
        report = train(model, cfg)
        base_accs.append(baseline.final_metric)
        gq_accs.append(report.final_metric)
        drops.append(report.metric_pre_hard - report.metric_post_hard)
    gap = abs(np.mean(base_accs) - np.mean(gq_accs))
    drop = np.mean(drops)
    ok = gap <= 0.02 and drop < 0.01
    detail = (f"baseline={np.mean(base_accs):.4f}, 5-bit={np.mean(gq_accs):.4f}, "
              f"gap={gap:.4f}, hard drop={drop:.4f}")
    _report(9, "end-to-end QAT accuracy", ok, time.perf_counter() - t0, 120.0, detail)


def test_10_frequency_ablation_harness(tmp_path):
    t0 = time.perf_counter()
    steps, hard_at = 6000, 5400
    model = make_model("two-gaussians", 0)
    template = replace(
        _qat_config(0, default_bit_map(model, 5), steps=steps),
        hard_at=hard_at,
        schedule=AnnealSchedule(10.0, 400.0, 0, hard_at),
        eval_every=500,
    )
    rows = frequency_ablation(template, [50, 500, 5000])
    from gq.training import ablation_csv

    csv_text = ablation_csv(rows)
    (tmp_path / "ablation.csv").write_text(csv_text)
    baseline = train(make_model("two-gaussians", 0), replace(template, bit_map={}))
    slowest = dict(rows)[5000]
    gap = abs(slowest.final_metric - baseline.final_metric)
    ok = len(rows) == 3 and csv_text.count("\n") == 4 and gap <= 0.02
    by_freq = {f: r.final_metric for f, r in rows}
    direction = "reported: " + ", ".join(f"f={f} acc={m:.4f}" for f, m in by_freq.items())
    _report(10, "frequency-ablation harness", ok, time.perf_counter() - t0, 300.0,
            f"5000-arm gap {gap:.4f} vs baseline; {direction}")


def test_11_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    runner = CliRunner()
    rng = np.random.default_rng(5)
    src = tmp_path / "model.gqck"
    ckpt = Checkpoint(metadata={"origin": "acceptance"})
    for i in range(3):
        ckpt.add(f"dense{i}.kernel", rng.normal(0, 0.4, (16, 8)).astype(np.float32))
    write_checkpoint(src, ckpt)

    def one_pass(tag):
        quant = tmp_path / f"{tag}.q.gqck"
        packed = tmp_path / f"{tag}.gqpk"
        fp = tmp_path / f"{tag}.fp.json"
        report = tmp_path / f"{tag}.report.json"
        for args in (
            ["quantize", "--input", str(src), "--output", str(quant), "--bits", "5"],
            ["pack", "--input", str(quant), "--output", str(packed)],
            ["footprint", "--topology", FIXTURE, "--bits", "5", "--json", str(fp)],
            ["train-demo", "--steps", "300", "--quant-every", "100", "--hard-at", "270",
             "--seed", "4", "--report", str(report)],
        ):
            result = runner.invoke(cli_main, args, catch_exceptions=False)
            assert result.exit_code == 0, result.output
        return [
            quant.read_bytes(),
            (tmp_path / f"{tag}.q.gqck.codebooks.json").read_bytes(),
            packed.read_bytes(),
            fp.read_bytes(),
            report.read_bytes(),
        ]

    ok = one_pass("run1") == one_pass("run2")
    _report(11, "CLI determinism", ok, time.perf_counter() - t0, 120.0,
            "quantize/pack/footprint/train-demo byte-identical")
