# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Command-line interface for segfuse.

Exit codes:
    0  success
    1  validation error (bad arguments, shapes, class ids, usage errors)
    2  I/O error (missing or malformed files)

Results go to stdout, diagnostics and progress to stderr.
"""

from __future__ import annotations

import functools
import os
import sys
import time
from enum import Enum
from pathlib import Path
from typing import Annotated, Iterator, List, Optional, Sequence, Tuple, TypeVar

import click
import numpy as np
import typer

from .argument_validator import ArgumentValidator, require
from .async_file_io import write_many
from .augment import AugmentConfig, augment, augment_with_draws
from .checkpoints import average_parameters, read_parameter_set, write_parameter_set
from .class_weights import ClassWeights, PixelCounts, compute_weights, frame_counts
from .cli_helpers import RunState, frame_group, pair_directories, version_callback
from .dataset import (
    DatasetManifest,
    LabelRemap,
    ManifestRecord,
    filter_by_coverage,
    load_remap,
    read_manifest,
    remap_labels,
    write_manifest,
)
from .error_writer import write_stderr_error
from .errors import (
    EXIT_IO,
    EXIT_OK,
    EXIT_VALIDATION,
    EmptyDataset,
    EmptyMatrix,
    IoFailure,
    SegfuseError,
    ShapeMismatch,
    ValidationError,
)
from .fusion import (
    AggregationSpec,
    TtaSpec,
    aggregate,
    fuse_tta,
    gamma_search_frames,
    score_threshold_report,
)
from .logging_setup import setup_run_logger
from .losses import LOSSES, LossBatch, gradient_check
from .metrics import ConfusionMatrix, coverage, frame_confusion, mean_of_groups, miou, pixel_accuracy
from .reporter import coverage_csv, curve_csv, group_table, iou_csv, iou_table, summary_table, weights_csv, weights_table
from .tensor_io import (
    DType,
    TensorFile,
    atomic_write_bytes,
    load_image,
    load_label_map,
    load_prediction_labels,
    load_soft_prediction,
    read_tensor,
    write_array,
)
from .tensors import IGNORE_LABEL
from .utils import fmt_float
from .worker_pool import WorkerPool

T = TypeVar("T")

WRITE_BATCH = 32


class LossName(str, Enum):
    weighted_ce = "weighted-ce"
    pixel_distribution = "pixel-distribution"
    confusion_focal = "confusion-focal"


class TtaPreset(str, Enum):
    swin = "swin"
    volo = "volo"


app = typer.Typer(
    name="segfuse",
    help="Segmentation fusion and evaluation toolkit: metrics, losses, augmentation, TTA and model aggregation.",
    add_completion=False,
    no_args_is_help=True,
    context_settings={"help_option_names": ["-h", "--help"]},
    pretty_exceptions_enable=False,
)

ThreadsOpt = Annotated[Optional[int], typer.Option(
    "--threads", help="Worker threads (default: $SEGFUSE_THREADS, else all cores)")]


@app.callback()
def main_callback(
    ctx: typer.Context,
    version: Annotated[Optional[bool], typer.Option("--version", "-v", callback=version_callback, is_eager=True,
                                                    help="Show version and exit")] = None,
    log_path: Annotated[Optional[Path], typer.Option("--log-path",
                                                     help="JSONL run log (default: $SEGFUSE_LOG_FILE_PATH, else none)")] = None,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="Suppress progress lines on stderr")] = False,
) -> None:
    """Segmentation fusion and evaluation toolkit."""
    state = ctx.ensure_object(RunState)
    state.quiet = quiet
    state.command = ctx.invoked_subcommand or ""
    try:
        state.log = setup_run_logger(log_path)
    except OSError as e:
        raise IoFailure(f"cannot open run log ({e.strerror})", str(log_path)) from e
    state.log.event("run_start", command=state.command, pid=os.getpid())


def _state(ctx: typer.Context) -> RunState:
    return ctx.ensure_object(RunState)


def _chunks(items: Sequence[T], size: int) -> Iterator[Tuple[int, Sequence[T]]]:
    for start in range(0, len(items), size):
        yield start, items[start:start + size]


def _write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# -----------------------------------------------------------------------------
# Metrics
# -----------------------------------------------------------------------------

@app.command("eval", help="Evaluate predictions against ground truth (mIoU, pixel accuracy).")
def eval_command(
    ctx: typer.Context,
    gt: Annotated[Path, typer.Option("--gt", help="Ground-truth directory (.segt or .png label maps)")],
    pred: Annotated[Path, typer.Option("--pred", help="Prediction directory (label maps or f32 soft predictions)")],
    num_classes: Annotated[Optional[int], typer.Option("--num-classes", help="Class count K (default: inferred from the largest id seen)")] = None,
    per_video: Annotated[bool, typer.Option("--per-video", help="Also report mIoU per sub-directory and their mean")] = False,
    per_class: Annotated[bool, typer.Option("--per-class", help="Print the per-class IoU table")] = False,
    csv: Annotated[Optional[Path], typer.Option("--csv", help="Write per-class IoU CSV (class_id,iou)")] = None,
    save_confusion: Annotated[Optional[Path], typer.Option("--save-confusion", help="Write the K x K confusion matrix as an f32 tensor (counts above 2^24 lose precision)")] = None,
    threads: ThreadsOpt = None,
) -> None:
    state = _state(ctx)
    require(
        ArgumentValidator.validate_num_classes(num_classes),
        ArgumentValidator.validate_threads(threads),
        ArgumentValidator.validate_outputs([csv, save_confusion]),
    )
    require(ArgumentValidator.validate_inputs([gt, pred], "directory"), error=IoFailure)
    pairs = pair_directories(gt, pred)
    slots = num_classes or IGNORE_LABEL

    def _frame(pair: Tuple[str, Tuple[Path, ...]]) -> Tuple[str, ConfusionMatrix]:
        key, (gt_path, pred_path) = pair
        return key, frame_confusion(load_label_map(gt_path), load_prediction_labels(pred_path), slots)

    def _merge(acc: Tuple[ConfusionMatrix, dict], item: Tuple[str, ConfusionMatrix]) -> Tuple[ConfusionMatrix, dict]:
        total, groups = acc
        key, cm = item
        group = frame_group(key)
        groups[group] = groups[group] + cm if group in groups else cm
        return total + cm, groups

    pool = WorkerPool(threads, on_done=state.progress([key for key, _ in pairs]))
    total, groups = pool.map_reduce(_frame, pairs, _merge, (ConfusionMatrix.zeros(slots), {}))
    if num_classes is None:
        inferred = total.largest_class() + 1
        if inferred == 0:
            raise EmptyMatrix("no annotated pixels in any frame")
        total = total.trimmed(inferred)
        groups = {name: cm.trimmed(inferred) for name, cm in groups.items()}

    result = miou(total)
    accuracy = pixel_accuracy(total)
    typer.echo(f"mIoU {fmt_float(result.mean_iou)}")
    typer.echo(f"pixel accuracy {fmt_float(accuracy)}")
    if per_class:
        typer.echo(iou_table(result))
    grouped = None
    if per_video:
        grouped = mean_of_groups(groups)
        typer.echo(group_table(grouped))
        typer.echo(f"mean per-video mIoU {fmt_float(grouped.mean_iou)}")
    if csv is not None:
        _write_text(csv, iou_csv(result))
    if save_confusion is not None:
        write_array(total.counts.astype(np.float32), save_confusion)
    state.log.event("result", frames=len(pairs), num_classes=total.num_classes, miou=result.mean_iou,
                    pixel_accuracy=accuracy, per_video_miou=grouped.mean_iou if grouped else None)


@app.command("class-weights", help="Count pixels per class over a manifest and derive class weights.")
def class_weights_command(
    ctx: typer.Context,
    manifest: Annotated[Path, typer.Option("--manifest", help="Dataset manifest; its label column is read")],
    num_classes: Annotated[int, typer.Option("--num-classes", help="Class count K")],
    output: Annotated[Path, typer.Option("--output", "-o", help="Weights as a 1-D f32 tensor")],
    csv: Annotated[Optional[Path], typer.Option("--csv", help="Write class_id,count,weight CSV")] = None,
    threads: ThreadsOpt = None,
) -> None:
    state = _state(ctx)
    require(
        ArgumentValidator.validate_num_classes(num_classes),
        ArgumentValidator.validate_threads(threads),
        ArgumentValidator.validate_outputs([output, csv], [manifest]),
    )
    require(ArgumentValidator.validate_inputs([manifest]), error=IoFailure)
    ds = read_manifest(manifest)
    if not ds.records:
        raise EmptyDataset(f"manifest lists no records: {manifest}")

    def _count(record: ManifestRecord) -> PixelCounts:
        return frame_counts(load_label_map(ds.resolve(record.label_path)), num_classes)

    pool = WorkerPool(threads, on_done=state.progress([r.label_path for r in ds.records]))
    counts = pool.map_reduce(_count, ds.records, PixelCounts.__add__, PixelCounts((0,) * num_classes))
    weights = compute_weights(counts)
    write_array(weights.as_array().astype(np.float32), output)
    if csv is not None:
        _write_text(csv, weights_csv(counts, weights))

    typer.echo(weights_table(counts, weights))
    absent = counts.absent_classes()
    typer.echo(summary_table([
        ("labelled pixels", counts.total),
        ("mean pixels per class", fmt_float(counts.mean)),
        ("absent classes", ", ".join(map(str, absent)) if absent else "none"),
    ]))
    state.log.event("result", records=len(ds.records), total_pixels=counts.total, mean=counts.mean,
                    absent_classes=list(absent))


# -----------------------------------------------------------------------------
# Losses
# -----------------------------------------------------------------------------

def _read_f32(path: Path, rank: int, what: str) -> np.ndarray:
    tensor = read_tensor(path)
    if tensor.dtype is not DType.F32 or tensor.rank != rank:
        raise ShapeMismatch(f"{what} must be an f32 rank-{rank} tensor, got {tensor.dtype.name} dims {tensor.dims}: {path}")
    return tensor.to_array()


def _read_confusion(path: Path) -> ConfusionMatrix:
    tensor = read_tensor(path)
    if tensor.rank != 2:
        raise ShapeMismatch(f"confusion matrix must be rank 2, got dims {tensor.dims}: {path}")
    counts = tensor.to_array().astype(np.float64)
    if not np.all(np.isfinite(counts)) or np.any(counts < 0):
        raise ValidationError(f"confusion counts must be finite and non-negative: {path}")
    return ConfusionMatrix(np.rint(counts).astype(np.uint64))


@app.command("loss-check", help="Evaluate a loss on logits and verify its gradient by finite differences.")
def loss_check_command(
    ctx: typer.Context,
    logits: Annotated[Path, typer.Option("--logits", help="Pre-softmax scores, f32 K x H x W")],
    gt: Annotated[Path, typer.Option("--gt", help="Ground-truth label map")],
    loss: Annotated[LossName, typer.Option("--loss", help="Loss function")] = LossName.weighted_ce,
    weights: Annotated[Optional[Path], typer.Option("--weights", help="Class weights, f32 1-D tensor")] = None,
    confusion: Annotated[Optional[Path], typer.Option("--confusion", help="Validation confusion matrix, K x K tensor")] = None,
    eps: Annotated[float, typer.Option("--eps", help="Finite-difference step on the logits")] = 1e-3,
    grad_out: Annotated[Optional[Path], typer.Option("--grad-out", help="Write the analytic gradient as f32 K x H x W")] = None,
    skip_grad_check: Annotated[bool, typer.Option("--skip-grad-check", help="Only evaluate the loss")] = False,
    grad_samples: Annotated[Optional[int], typer.Option("--grad-samples", help="Check this many seeded random logit entries instead of all")] = None,
) -> None:
    state = _state(ctx)
    require(ArgumentValidator.validate_outputs([grad_out], [logits]))
    require(ArgumentValidator.validate_inputs([p for p in (logits, gt, weights, confusion) if p is not None]),
            error=IoFailure)
    if not (eps > 0 and np.isfinite(eps)):
        raise ValidationError(f"--eps must be positive, got {eps}")
    if grad_samples is not None and grad_samples < 1:
        raise ValidationError(f"--grad-samples must be at least 1, got {grad_samples}")
    batch = LossBatch(
        _read_f32(logits, 3, "logits"),
        load_label_map(gt),
        ClassWeights(tuple(_read_f32(weights, 1, "class weights").tolist())) if weights else None,
        _read_confusion(confusion) if confusion else None,
    )
    loss_fn = LOSSES[loss.value]
    result = loss_fn(batch)
    typer.echo(f"loss {fmt_float(result.value, 9)}")
    typer.echo(f"counted pixels {result.counted_pixels}")
    check = None
    if not skip_grad_check:
        check = gradient_check(loss_fn, batch, eps, samples=grad_samples)
        typer.echo(f"max relative gradient error {fmt_float(check.max_rel_error, 9)}")
        typer.echo(f"entries checked {check.checked}, skipped near ties {check.skipped}")
    if grad_out is not None:
        write_array(result.grad_f32, grad_out)
    state.log.event("result", loss=loss.value, value=result.value, counted_pixels=result.counted_pixels,
                    max_rel_error=check.max_rel_error if check else None)


# -----------------------------------------------------------------------------
# Augmentation
# -----------------------------------------------------------------------------

@app.command("augment", help="Apply the seeded augmentation pipeline to every manifest record.")
def augment_command(
    ctx: typer.Context,
    manifest: Annotated[Path, typer.Option("--manifest", help="Dataset manifest")],
    out_dir: Annotated[Path, typer.Option("--out-dir", help="Output directory for images/, labels/ and augmented.manifest")],
    seed: Annotated[int, typer.Option("--seed", help="64-bit seed; record i always gets the same draws")] = 0,
    crop_h: Annotated[int, typer.Option("--crop-h", help="Crop height")] = 480,
    crop_w: Annotated[int, typer.Option("--crop-w", help="Crop width")] = 853,
    dump_draws: Annotated[bool, typer.Option("--dump-draws", help="Print every random draw as CSV on stdout")] = False,
    threads: ThreadsOpt = None,
) -> None:
    state = _state(ctx)
    require(ArgumentValidator.validate_threads(threads))
    require(ArgumentValidator.validate_inputs([manifest]), error=IoFailure)
    ds = read_manifest(manifest)
    cfg = AugmentConfig(crop_h=crop_h, crop_w=crop_w, seed=seed)
    indexed = list(enumerate(ds.records))
    report = state.progress([r.image_path for r in ds.records])

    def _one(item: Tuple[int, ManifestRecord]):
        index, record = item
        img = load_image(ds.resolve(record.image_path))
        lbl = load_label_map(ds.resolve(record.label_path))
        if dump_draws:
            return augment_with_draws(img, lbl, cfg, index)
        out_img, out_lbl = augment(img, lbl, cfg, index)
        return out_img, out_lbl, []

    if dump_draws:
        typer.echo("image_index,draw,kind,value")
    out_records: List[ManifestRecord] = []
    for start, chunk in _chunks(indexed, WRITE_BATCH):
        pool = WorkerPool(threads, on_done=lambda done, _total, s=start: report(s + done, len(indexed)))
        files = []
        for (index, record), (img, lbl, draws) in zip(chunk, pool.run(_one, chunk)):
            stem = f"{index:06d}_{Path(record.image_path).stem}"
            files.append((out_dir / "images" / f"{stem}.segt", TensorFile.from_array(img.data).to_bytes()))
            files.append((out_dir / "labels" / f"{stem}.segt", TensorFile.from_array(lbl.data).to_bytes()))
            out_records.append(ManifestRecord(f"images/{stem}.segt", f"labels/{stem}.segt", record.tag))
            for n, (kind, value) in enumerate(draws):
                typer.echo(f"{index},{n},{kind},{value:.9f}")
        write_many(files, concurrency=pool.num_workers)
    write_manifest(DatasetManifest(tuple(out_records), out_dir), out_dir / "augmented.manifest")
    state.log.event("result", records=len(out_records), seed=seed, crop=[crop_h, crop_w])


# -----------------------------------------------------------------------------
# Fusion
# -----------------------------------------------------------------------------

@app.command("fuse-tta", help="Fuse test-time-augmentation outputs given as PATH:SCALE[:flip].")
def fuse_tta_command(
    ctx: typer.Context,
    inputs: Annotated[List[str], typer.Argument(help="Soft predictions as PATH:SCALE or PATH:SCALE:flip")],
    output: Annotated[Path, typer.Option("--output", "-o", help="Fused soft prediction")],
    height: Annotated[Optional[int], typer.Option("--height", help="Base height (default: the scale-1.0 input)")] = None,
    width: Annotated[Optional[int], typer.Option("--width", help="Base width (default: the scale-1.0 input)")] = None,
    preset: Annotated[Optional[TtaPreset], typer.Option("--preset", help="Require exactly the transforms of a preset")] = None,
) -> None:
    state = _state(ctx)
    parsed = [ArgumentValidator.parse_tta_input(spec) for spec in inputs]
    require(ArgumentValidator.validate_outputs([output], [p for p, _, _ in parsed]))
    require(ArgumentValidator.validate_inputs([p for p, _, _ in parsed]), error=IoFailure)
    if preset is not None:
        expected = sorted(TtaSpec.preset(preset.value).transforms())
        given = sorted((scale, flipped) for _, scale, flipped in parsed)
        if given != expected:
            raise ValidationError(f"preset {preset.value} expects transforms {expected}, got {given}")
    preds = [(load_soft_prediction(path), scale, flipped) for path, scale, flipped in parsed]
    if height is None or width is None:
        base = next((p for p, scale, _ in preds if scale == 1.0), None)
        if base is None:
            raise ValidationError("--height/--width are required when no input has scale 1.0")
        height = base.height if height is None else height
        width = base.width if width is None else width
    fused = fuse_tta(preds, height, width)
    write_array(fused.data, output)
    typer.echo(f"fused {len(preds)} predictions into {fused.num_classes} x {fused.height} x {fused.width}")
    state.log.event("result", inputs=len(preds), shape=list(fused.shape))


@app.command("aggregate", help="Combine two models' soft predictions: gamma * PS + (1 - gamma) * PV.")
def aggregate_command(
    ctx: typer.Context,
    ps_path: Annotated[Path, typer.Argument(metavar="PS", help="Soft prediction of the first model")],
    pv_path: Annotated[Path, typer.Argument(metavar="PV", help="Soft prediction of the second model")],
    gamma: Annotated[float, typer.Option("--gamma", help="Weight of PS, in [0, 1]")],
    output: Annotated[Path, typer.Option("--output", "-o", help="Aggregated soft prediction")],
    confidence_out: Annotated[Optional[Path], typer.Option("--confidence-out", help="Per-pixel max probability, f32 H x W")] = None,
) -> None:
    state = _state(ctx)
    require(
        ArgumentValidator.validate_gamma(gamma),
        ArgumentValidator.validate_outputs([output, confidence_out], [ps_path, pv_path]),
    )
    require(ArgumentValidator.validate_inputs([ps_path, pv_path]), error=IoFailure)
    combined = aggregate(load_soft_prediction(ps_path), load_soft_prediction(pv_path), AggregationSpec(gamma))
    write_array(combined.data, output)
    if confidence_out is not None:
        write_array(score_threshold_report(combined), confidence_out)
    typer.echo(f"aggregated with gamma {fmt_float(gamma)}")
    state.log.event("result", gamma=gamma, shape=list(combined.shape))


def _load_frame(ps_path: Path, pv_path: Path, gt_path: Path):
    return load_soft_prediction(ps_path), load_soft_prediction(pv_path), load_label_map(gt_path)


@app.command("gamma-search", help="Grid-search the aggregation weight gamma on a validation set.")
def gamma_search_command(
    ctx: typer.Context,
    swin: Annotated[Path, typer.Option("--swin", help="Directory of PS soft predictions")],
    volo: Annotated[Path, typer.Option("--volo", help="Directory of PV soft predictions")],
    gt: Annotated[Path, typer.Option("--gt", help="Directory of ground-truth label maps")],
    step: Annotated[float, typer.Option("--step", help="Grid step in (0, 0.5]")] = 0.01,
    curve_csv_path: Annotated[Optional[Path], typer.Option("--curve-csv", help="Write the gamma,miou curve")] = None,
    threads: ThreadsOpt = None,
) -> None:
    state = _state(ctx)
    require(
        ArgumentValidator.validate_step(step),
        ArgumentValidator.validate_threads(threads),
        ArgumentValidator.validate_outputs([curve_csv_path]),
    )
    require(ArgumentValidator.validate_inputs([swin, volo, gt], "directory"), error=IoFailure)
    pairs = pair_directories(gt, swin, volo)
    loaders = [functools.partial(_load_frame, ps, pv, g) for _, (g, ps, pv) in pairs]
    result = gamma_search_frames(loaders, step, threads, on_done=state.progress([key for key, _ in pairs]))
    typer.echo(f"gamma {fmt_float(result.gamma)}")
    typer.echo(f"mIoU {fmt_float(result.miou)}")
    if curve_csv_path is not None:
        _write_text(curve_csv_path, curve_csv(result.curve))
    state.log.event("result", frames=len(pairs), gamma=result.gamma, miou=result.miou, grid=len(result.curve))


@app.command("avg-weights", help="Average the parameters of several checkpoints element-wise.")
def avg_weights_command(
    ctx: typer.Context,
    inputs: Annotated[List[Path], typer.Argument(help="Parameter-set files to average")],
    output: Annotated[Path, typer.Option("--output", "-o", help="Averaged parameter set")],
) -> None:
    state = _state(ctx)
    require(ArgumentValidator.validate_outputs([output], inputs))
    require(ArgumentValidator.validate_inputs(inputs), error=IoFailure)
    averaged = average_parameters([read_parameter_set(p) for p in inputs])
    write_parameter_set(averaged, output)
    typer.echo(f"averaged {len(inputs)} parameter sets ({len(averaged)} tensors)")
    state.log.event("result", inputs=len(inputs), tensors=len(averaged))


# -----------------------------------------------------------------------------
# Dataset harmonisation
# -----------------------------------------------------------------------------

@app.command("remap", help="Remap label ids of every manifest record and write a new manifest.")
def remap_command(
    ctx: typer.Context,
    manifest: Annotated[Path, typer.Option("--manifest", help="Dataset manifest")],
    remap: Annotated[Path, typer.Option("--remap", help="CSV of source_id,target_id")],
    out_dir: Annotated[Path, typer.Option("--out-dir", help="Output directory for labels/ and remapped.manifest")],
    report: Annotated[Optional[Path], typer.Option("--report", help="Coverage report CSV")] = None,
    threads: ThreadsOpt = None,
) -> None:
    state = _state(ctx)
    require(ArgumentValidator.validate_threads(threads), ArgumentValidator.validate_outputs([report], [manifest, remap]))
    require(ArgumentValidator.validate_inputs([manifest, remap]), error=IoFailure)
    ds = read_manifest(manifest)
    table = load_remap(remap)
    indexed = list(enumerate(ds.records))
    progress = state.progress([r.label_path for r in ds.records])

    def _one(item: Tuple[int, ManifestRecord]):
        return remap_labels(load_label_map(ds.resolve(item[1].label_path)), table)

    out_records: List[ManifestRecord] = []
    rows = []
    for start, chunk in _chunks(indexed, WRITE_BATCH):
        pool = WorkerPool(threads, on_done=lambda done, _total, s=start: progress(s + done, len(indexed)))
        files = []
        for (index, record), lbl in zip(chunk, pool.run(_one, chunk)):
            name = f"labels/{index:06d}_{Path(record.label_path).stem}.segt"
            files.append((out_dir / name, TensorFile.from_array(lbl.data).to_bytes()))
            image = os.path.relpath(ds.resolve(record.image_path), out_dir)
            out_records.append(ManifestRecord(Path(image).as_posix(), name, record.tag))
            rows.append((record.image_path, name, record.tag, coverage(lbl), "remapped"))
        write_many(files, concurrency=pool.num_workers)
    write_manifest(DatasetManifest(tuple(out_records), out_dir), out_dir / "remapped.manifest")
    if report is not None:
        _write_text(report, coverage_csv(rows))
    typer.echo(f"remapped {len(out_records)} labels ({len(table)} source ids mapped)")
    state.log.event("result", records=len(out_records), mapped_ids=len(table))


@app.command("filter", help="Split a manifest by annotation coverage of the remapped labels.")
def filter_command(
    ctx: typer.Context,
    manifest: Annotated[Path, typer.Option("--manifest", help="Dataset manifest")],
    kept: Annotated[Path, typer.Option("--kept", help="Manifest of records with coverage >= threshold")],
    dropped: Annotated[Path, typer.Option("--dropped", help="Manifest of records below the threshold")],
    remap: Annotated[Optional[Path], typer.Option("--remap", help="CSV of source_id,target_id (default: identity)")] = None,
    threshold: Annotated[float, typer.Option("--threshold", help="Minimum annotated fraction")] = 0.8,
    report: Annotated[Optional[Path], typer.Option("--report", help="Coverage report CSV")] = None,
    threads: ThreadsOpt = None,
) -> None:
    state = _state(ctx)
    require(
        ArgumentValidator.validate_threshold(threshold),
        ArgumentValidator.validate_threads(threads),
        ArgumentValidator.validate_outputs([kept, dropped, report], [manifest]),
    )
    require(ArgumentValidator.validate_inputs([p for p in (manifest, remap) if p is not None]), error=IoFailure)
    ds = read_manifest(manifest)
    table = load_remap(remap) if remap is not None else LabelRemap.identity(range(IGNORE_LABEL))
    result = filter_by_coverage(ds, table, threshold, threads,
                                on_done=state.progress([r.label_path for r in ds.records]))
    write_manifest(result.kept, kept)
    write_manifest(result.dropped, dropped)
    for record, message in result.errors:
        write_stderr_error("UnreadableLabel", message)
    if report is not None:
        rows = []
        for record, value in result.coverage:
            status = "error" if value is None else ("kept" if value >= threshold else "dropped")
            rows.append((record.image_path, record.label_path, record.tag, value, status))
        _write_text(report, coverage_csv(rows))
    typer.echo(summary_table([("kept", len(result.kept)), ("dropped", len(result.dropped)),
                              ("errors", len(result.errors))]))
    state.log.event("result", kept=len(result.kept), dropped=len(result.dropped), errors=len(result.errors),
                    threshold=threshold)


# -----------------------------------------------------------------------------
# Entry points
# -----------------------------------------------------------------------------

def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    args = list(sys.argv[1:] if argv is None else argv)
    state = RunState()
    started = time.monotonic()
    try:
        rv = app(args=args, prog_name="segfuse", standalone_mode=False, obj=state)
        code = rv if isinstance(rv, int) else EXIT_OK
    except SegfuseError as e:
        write_stderr_error(type(e).__name__, str(e))
        state.log.event("error", type=type(e).__name__, message=str(e))
        code = e.exit_code
    except OSError as e:
        write_stderr_error(type(e).__name__, str(e))
        state.log.event("error", type=type(e).__name__, message=str(e))
        code = EXIT_IO
    except click.ClickException as e:
        e.show()
        code = EXIT_VALIDATION
    except click.exceptions.Abort:
        code = EXIT_VALIDATION
    state.log.event("run_end", exit_code=code, duration_ms=int((time.monotonic() - started) * 1000))
    state.log.close()
    return code


def main() -> None:
    """Entry point for the console script."""
    sys.exit(run())


if __name__ == "__main__":
    main()
