"""Training loop: binary cross-entropy between per-event probability
readouts and the simulator's ground-truth contour labels."""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import torch

from .data import WindowRecord, load_windows
from .model import ContourNet

__all__ = ["TrainConfig", "train", "train_records", "save_weights", "load_weights", "readout"]


class TrainConfig:
    def __init__(
        self,
        epochs: int = 30,
        lr: float = 1e-3,
        seed: int = 0,
        window_events: int = 10_000,
        t_bins: int = 10,
        base_channels: int = 16,
        batch_size: int = 4,
        max_windows: int = 200,
        val_fraction: float = 0.2,
    ):
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.window_events = window_events
        self.t_bins = t_bins
        self.base_channels = base_channels
        self.batch_size = batch_size
        self.max_windows = max_windows
        self.val_fraction = val_fraction

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def readout(logits: torch.Tensor, bins) -> torch.Tensor:
    """Per-event logits from a (t_bins, H, W) map at each event's bin."""
    tb, yb, xb = bins
    return logits[torch.as_tensor(tb), torch.as_tensor(yb), torch.as_tensor(xb)]


def train_records(
    records: list[WindowRecord],
    sensor: tuple[int, int],
    cfg: TrainConfig,
    log=print,
) -> tuple[ContourNet, list[dict]]:
    """Train on pre-built windows; returns the model and per-epoch metrics."""
    if not records:
        raise ValueError("no training windows")
    _seed_everything(cfg.seed)
    model = ContourNet(cfg.t_bins, cfg.base_channels)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    bce = torch.nn.BCEWithLogitsLoss()

    n_val = int(round(cfg.val_fraction * len(records)))
    val = records[:n_val]
    trn = records[n_val:] or records

    history = []
    for epoch in range(cfg.epochs):
        model.train()
        order = np.random.permutation(len(trn))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [trn[i] for i in order[start: start + cfg.batch_size]]
            optimizer.zero_grad()
            loss = 0.0
            for rec in batch:
                vol = torch.from_numpy(rec.volume).float()[None]
                logits = model(vol)[0]
                ev_logits = readout(logits, rec.bins)
                target = torch.from_numpy(rec.labels.astype(np.float32))
                loss = loss + bce(ev_logits, target)
            loss = loss / len(batch)
            loss.backward()
            optimizer.step()
            total += float(loss) * len(batch)
        train_loss = total / len(trn)
        metrics = {"epoch": epoch, "train_bce": train_loss}
        if val:
            metrics.update(evaluate(model, val))
        history.append(metrics)
        log(
            f"epoch {epoch}: bce {train_loss:.4f}"
            + (f"  val_bce {metrics['val_bce']:.4f} p {metrics['precision']:.3f} r {metrics['recall']:.3f}"
               if val else "")
        )
    return model, history


@torch.no_grad()
def evaluate(model: ContourNet, records: list[WindowRecord], threshold: float = 0.5) -> dict:
    model.eval()
    bce = torch.nn.BCEWithLogitsLoss()
    losses = []
    tp = fp = fn = tn = 0
    for rec in records:
        logits = model(torch.from_numpy(rec.volume).float()[None])[0]
        ev_logits = readout(logits, rec.bins)
        target = torch.from_numpy(rec.labels.astype(np.float32))
        losses.append(float(bce(ev_logits, target)))
        pred = torch.sigmoid(ev_logits) >= threshold
        truth = target >= 0.5
        tp += int((pred & truth).sum())
        fp += int((pred & ~truth).sum())
        fn += int((~pred & truth).sum())
        tn += int((~pred & ~truth).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (tp + tn) / max(tp + tn + fp + fn, 1)
    tpr = tp / (tp + fn) if tp + fn else 0.0
    tnr = tn / (tn + fp) if tn + fp else 0.0
    return {
        "val_bce": float(np.mean(losses)),
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "accuracy": accuracy,
        "balanced_accuracy": 0.5 * (tpr + tnr),
    }


def train(dataset_dirs, out_path, cfg: TrainConfig | None = None, log=print) -> list[dict]:
    """Train from dataset directories and write the weights archive."""
    cfg = cfg or TrainConfig()
    records: list[WindowRecord] = []
    sensor = None
    for d in ([dataset_dirs] if isinstance(dataset_dirs, (str, Path)) else dataset_dirs):
        recs, sensor = load_windows(d, cfg.window_events, cfg.t_bins, cfg.max_windows - len(records))
        records.extend(recs)
        if len(records) >= cfg.max_windows:
            break
    model, history = train_records(records, sensor, cfg, log=log)
    save_weights(out_path, model, sensor, cfg, history)
    return history


def save_weights(path, model: ContourNet, sensor, cfg: TrainConfig, history) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "sensor": list(sensor),
            "config": cfg.to_dict(),
            "history": history,
        },
        path,
    )


def load_weights(path) -> tuple[ContourNet, tuple[int, int], dict]:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg = blob["config"]
    model = ContourNet(cfg["t_bins"], cfg["base_channels"])
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, tuple(blob["sensor"]), cfg
