"""Ablation grid: retrain with toggled flags at an equal budget and compare.

The ladder mirrors the usual presentation order: everything off, then the
cross-block strategy alone, then each dynamic scalar added on top of it,
then the full model.  Flags outside the requested set keep their base
values and duplicate settings collapse.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

from .evaluate import evaluate_model
from .model import NetConfig, UnrolledModel
from .training import TrainConfig, train

ALL_FLAGS = ("dus_rho", "dus_sigma", "cbs")
LADDER = (
    (),
    ("cbs",),
    ("cbs", "dus_rho"),
    ("cbs", "dus_sigma"),
    ("cbs", "dus_rho", "dus_sigma"),
)


@dataclass
class AblationRow:
    label: str
    dus_rho: bool
    dus_sigma: bool
    cbs: bool
    per_ratio_psnr: dict
    mean_psnr: float
    mean_artifact: float
    final_loss: float


def ablation_settings(flags, base: NetConfig) -> list:
    """Flag assignments to train, derived from the ladder."""
    flags = list(flags)
    for f in flags:
        if f not in ALL_FLAGS:
            raise ValueError(f"unknown ablation flag {f!r}, expected subset of {ALL_FLAGS}")
    settings = []
    seen = set()
    for rung in LADDER:
        assignment = {
            f: (f in rung) if f in flags else getattr(base, f)
            for f in ALL_FLAGS
        }
        key = tuple(sorted(assignment.items()))
        if key not in seen:
            seen.add(key)
            settings.append(assignment)
    return settings


def run_ablation(base: NetConfig, train_cfg: TrainConfig, train_patches,
                 test_images, flags, workdir) -> list:
    """Train one model per setting (same seed and budget) and evaluate."""
    workdir = Path(workdir)
    rows = []
    for i, assignment in enumerate(ablation_settings(flags, base)):
        label = chr(ord("a") + i)
        config = replace(base, **assignment)
        model = UnrolledModel.initialize(config)
        cfg = replace(train_cfg, checkpoint_dir=str(workdir / f"setting_{label}"))
        result = train(model, cfg, dataset=train_patches)
        report = evaluate_model(model, test_images, config.ratios)
        rows.append(AblationRow(
            label=label,
            dus_rho=assignment["dus_rho"],
            dus_sigma=assignment["dus_sigma"],
            cbs=assignment["cbs"],
            per_ratio_psnr={s.ratio: s.mean_psnr for s in report.summaries},
            mean_psnr=report.overall["istanetpp"],
            mean_artifact=sum(s.mean_artifact for s in report.summaries) / len(report.summaries),
            final_loss=result.losses[-1],
        ))
    return rows


def _mark(flag: bool) -> str:
    return "on " if flag else "off"


def format_ablation(rows) -> str:
    ratios = sorted(rows[0].per_ratio_psnr) if rows else []
    ratio_cols = "  ".join(f"{r:>7.2f}" for r in ratios)
    header = (f"{'set':<4} {'dus_rho':<8} {'dus_sigma':<10} {'cbs':<4}  "
              f"{ratio_cols}  {'mean':>7}  {'artifact':>9}  {'loss':>10}")
    lines = [header, "-" * len(header)]
    for row in rows:
        psnrs = "  ".join(f"{row.per_ratio_psnr[r]:>7.3f}" for r in ratios)
        lines.append(
            f"({row.label}) {_mark(row.dus_rho):<8} {_mark(row.dus_sigma):<10} "
            f"{_mark(row.cbs):<4}  {psnrs}  {row.mean_psnr:>7.3f}  "
            f"{row.mean_artifact:>9.5f}  {row.final_loss:>10.5f}"
        )
    return "\n".join(lines)


def write_ablation_csv(rows, path) -> None:
    ratios = sorted(rows[0].per_ratio_psnr) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "dus_rho", "dus_sigma", "cbs"]
                        + [f"psnr_{r}" for r in ratios]
                        + ["mean_psnr", "mean_artifact", "final_loss"])
        for row in rows:
            writer.writerow([row.label, int(row.dus_rho), int(row.dus_sigma), int(row.cbs)]
                            + [repr(row.per_ratio_psnr[r]) for r in ratios]
                            + [repr(row.mean_psnr), repr(row.mean_artifact), repr(row.final_loss)])
