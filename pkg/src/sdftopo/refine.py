"""Two-stage mask refinement on a single image.

Stage 1 fits a free per-pixel field to the signed distance field of a
(possibly broken) mask by gradient descent on the squared error. Stage 2
turns the field into a likelihood map through a two-parameter adapter,
``0.5 * (tanh(scale * (field - bias)) + 1)``, and descends jointly on the
field and the adapter parameters under the combined Dice + topology loss
against the ground-truth mask.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .distance import sdf
from .grid import as_mask, binarize
from .metrics import betti_numbers, dice
from .topo_loss import LossConfig, combined_loss

MIN_SCALE = 1e-3
MAX_ITERS = 100_000
WARM_STARTS = ("sdf", "cold")
# tanh saturates in float64; keep the adapter output strictly inside (0, 1)
_LO, _HI = np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)


class DivergenceError(RuntimeError):
    pass


@dataclass
class AdapterParams:
    scale: float = 1.0
    bias: float = 0.0


@dataclass
class RefineConfig:
    learning_rate: float = 0.1
    stage1_iters: int = 200
    stage2_iters: int = 100
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    warm_start: str = "sdf"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for n in (self.stage1_iters, self.stage2_iters):
            if not 0 <= n <= MAX_ITERS:
                raise ValueError(f"iteration counts must lie in [0, {MAX_ITERS}]")
        if self.warm_start not in WARM_STARTS:
            raise ValueError(f"warm_start must be one of {WARM_STARTS}")


@dataclass
class IterationRecord:
    stage: int
    iteration: int
    loss: float
    dice: float
    betti0_err: int
    betti1_err: int


@dataclass
class RefineTrace:
    records: list = field(default_factory=list)
    likelihood: np.ndarray | None = None
    field: np.ndarray | None = None
    params: AdapterParams | None = None
    masks: list | None = None  # binarized prediction per record, when requested

    def __len__(self):
        return len(self.records)

    def stage(self, k: int) -> list:
        return [r for r in self.records if r.stage == k]

    def iterations_to_zero_betti(self, stage: int = 2):
        """First stage iteration whose binarized prediction has zero Betti error."""
        for r in self.stage(stage):
            if r.betti0_err == 0 and r.betti1_err == 0:
                return r.iteration
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "loss", "dice", "betti0_err", "betti1_err"])
        for k, r in enumerate(self.records):
            writer.writerow([k, f"{r.loss:.9g}", f"{r.dice:.9g}", r.betti0_err, r.betti1_err])
        return buf.getvalue()


def adapter_forward(field, params: AdapterParams) -> np.ndarray:
    if not params.scale > 0:
        raise ValueError("adapter scale must be positive")
    field = np.asarray(field, dtype=np.float64)
    out = 0.5 * (np.tanh(params.scale * (field - params.bias)) + 1.0)
    return np.clip(out, _LO, _HI)


def adapter_backward(field, params: AdapterParams, upstream: np.ndarray):
    """Chain ``upstream = dL/d(likelihood)`` through the adapter.

    Returns ``(dL/dfield, dL/dscale, dL/dbias)``.
    """
    field = np.asarray(field, dtype=np.float64)
    shifted = field - params.bias
    sech2 = 1.0 - np.tanh(params.scale * shifted) ** 2
    local = 0.5 * sech2 * upstream
    return (params.scale * local,
            float(np.sum(local * shifted)),
            float(-params.scale * np.sum(local)))


def _snapshot(likelihood: np.ndarray, gt: np.ndarray, gt_betti, trace: RefineTrace):
    hard = binarize(likelihood, 0.5)
    if trace.masks is not None:
        trace.masks.append(hard)
    b = betti_numbers(hard)
    return dice(hard, gt), abs(b[0] - gt_betti[0]), abs(b[1] - gt_betti[1])


def stage1_pretrain(init_field, target, cfg: RefineConfig, trace: RefineTrace | None = None,
                    gt=None) -> np.ndarray:
    """Gradient descent of a free field onto ``target``.

    Each pixel is its own parameter; the update is ``f -= lr * (f - target)``,
    the gradient of ``0.5 * ||f - target||^2``. The recorded loss is the mean
    squared error before each update.
    """
    f = np.array(init_field, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if f.shape != target.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {target.shape}")
    gt_betti = betti_numbers(gt) if gt is not None else None
    for k in range(cfg.stage1_iters):
        resid = f - target
        if trace is not None:
            rec = (0.0, 0, 0)
            if gt is not None:
                rec = _snapshot(adapter_forward(f, AdapterParams()), gt, gt_betti, trace)
            trace.records.append(IterationRecord(1, k, float(np.mean(resid ** 2)), *rec))
        f -= cfg.learning_rate * resid
    return f


def stage2_finetune(field, params: AdapterParams, gt, cfg: RefineConfig,
                    keep_masks: bool = False) -> RefineTrace:
    """Joint descent on the field and adapter parameters under the combined loss."""
    gt = as_mask(gt)
    f = np.array(field, dtype=np.float64)
    if f.shape != gt.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {gt.shape}")
    params = replace(params)
    gt_betti = betti_numbers(gt)
    trace = RefineTrace(masks=[] if keep_masks else None)
    initial = None
    for k in range(cfg.stage2_iters):
        like = adapter_forward(f, params)
        lg = combined_loss(like, gt, cfg.loss)
        if initial is None:
            initial = lg.value
        elif lg.value > 10.0 * max(initial, 1e-12):
            raise DivergenceError(
                f"loss {lg.value:.6g} exceeds 10x its initial value {initial:.6g} at iteration {k}")
        trace.records.append(IterationRecord(2, k, lg.value, *_snapshot(like, gt, gt_betti, trace)))
        g_field, g_scale, g_bias = adapter_backward(f, params, lg.grad)
        f -= cfg.learning_rate * g_field
        params.scale = max(MIN_SCALE, params.scale - cfg.learning_rate * g_scale)
        params.bias -= cfg.learning_rate * g_bias
    trace.field = f
    trace.params = params
    trace.likelihood = adapter_forward(f, params)
    return trace


def two_stage_run(noisy_mask, gt, cfg: RefineConfig, params: AdapterParams | None = None,
                  keep_masks: bool = False) -> RefineTrace:
    """Stage 1 on ``sdf(noisy_mask)`` (or a zero field when cold), then stage 2 against ``gt``."""
    noisy = as_mask(noisy_mask)
    gt = as_mask(gt)
    if noisy.shape != gt.shape:
        raise ValueError(f"shape mismatch: {noisy.shape} vs {gt.shape}")
    trace = RefineTrace(masks=[] if keep_masks else None)
    f = np.zeros(noisy.shape)
    if cfg.warm_start == "sdf":
        f = stage1_pretrain(f, sdf(noisy), cfg, trace, gt)
    second = stage2_finetune(f, params or AdapterParams(), gt, cfg, keep_masks)
    trace.records += second.records
    if keep_masks:
        trace.masks += second.masks
    trace.field, trace.params, trace.likelihood = second.field, second.params, second.likelihood
    return trace


def summarize(trace: RefineTrace, gt) -> dict:
    hard = binarize(trace.likelihood, 0.5)
    gb, pb = betti_numbers(gt), betti_numbers(hard)
    return {
        "iterations": len(trace),
        "iterations_to_zero_betti": trace.iterations_to_zero_betti(2),
        "final_dice": dice(hard, gt),
        "final_betti_error": [abs(pb[0] - gb[0]), abs(pb[1] - gb[1])],
        "final_loss": trace.stage(2)[-1].loss if trace.stage(2) else None,
        "scale": trace.params.scale,
        "bias": trace.params.bias,
    }


def compare_warm_cold(noisy_mask, gt, cfg: RefineConfig, params: AdapterParams | None = None,
                      keep_masks: bool = False):
    """Run the SDF warm start and the cold start on the same instance.

    Returns ``(report, traces)`` keyed by warm-start mode.
    """
    report = {}
    traces = {}
    for mode in WARM_STARTS:
        trace = two_stage_run(noisy_mask, gt, replace(cfg, warm_start=mode), params, keep_masks)
        traces[mode] = trace
        report[mode] = summarize(trace, gt)
    return report, traces
