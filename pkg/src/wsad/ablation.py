"""Top-down ablation: train each loss/label variant and compare frame AUC."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

from .evaluator import evaluate_model
from .feature_store import DatasetIndex, load_bags
from .trainer import VARIANTS, TrainConfig, train


@dataclass(frozen=True)
class AblationRow:
    variant: str
    seed: int
    auc: float


def run_ablation(train_index: DatasetIndex, base_cfg: TrainConfig, seeds, test_index: DatasetIndex, truth_dir) -> list[AblationRow]:
    bags = load_bags(train_index)
    rows = []
    for seed in seeds:
        for (use_pseudo, use_lc), name in VARIANTS.items():
            cfg = replace(base_cfg, seed=int(seed), use_pseudo=use_pseudo, use_lc=use_lc)
            report = train(bags, cfg)
            auc, _ = evaluate_model(report.checkpoint.params, test_index, truth_dir)
            rows.append(AblationRow(name, int(seed), auc))
    return rows


def write_ablation_csv(rows: list[AblationRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "seed", "auc"])
        for r in rows:
            w.writerow([r.variant, r.seed, repr(r.auc)])


def summarize(rows: list[AblationRow]) -> dict[str, float]:
    """Mean AUC per variant."""
    out: dict[str, list[float]] = {}
    for r in rows:
        out.setdefault(r.variant, []).append(r.auc)
    return {k: sum(v) / len(v) for k, v in out.items()}
