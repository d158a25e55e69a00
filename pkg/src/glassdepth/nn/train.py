"""Sequential training: point cloud completion first, then depth completion."""

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..data.mesh import sample_surface
from ..errors import ContractError, NumericError, TrainingError, UndefinedLossError
from ..geometry import PointCloud, deproject
from ..gridding import GridBounds
from ..losses import depth_completion_loss
from . import config as train_config
from .dc import DcNetwork
from .optim import Adam, multistep_lr
from .pcc import PccNetwork, gt_grid

LOSS_COLUMNS = ("epoch", "split", "loss", "lr")


@dataclass
class PccSample:
    record_id: str
    object_id: int
    cloud: PointCloud
    bounds: GridBounds
    gt_points: np.ndarray
    gt: ad.Tensor  # gridded ground truth in ``bounds``


@dataclass
class TrainResult:
    network: object
    history: list = field(default_factory=list)  # (epoch, split, loss, lr)
    epochs_run: int = 0
    stopped_early: bool = False
    best_epoch: int = 0

    def losses(self, split="train"):
        return [row[2] for row in self.history if row[1] == split]

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LOSS_COLUMNS)
        for epoch, split, loss, lr in self.history:
            writer.writerow([epoch, split, repr(float(loss)), repr(float(lr))])
        return buf.getvalue()


def _dtype(cfg):
    return np.float64 if cfg.precision == "float64" else np.float32


def pcc_samples(records, cfg, seed=None, dtype=None):
    """One sample per visible instance with a non-empty raw cloud.

    The ground-truth cloud is an area-uniform sample of the posed mesh surface
    (occluded parts included), drawn once with a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    dtype = _dtype(cfg) if dtype is None else dtype
    samples = []
    for record in records:
        for k in (int(i) for i in np.unique(record.mask) if i != 0):
            cloud = deproject(record.raw_depth, record.intrinsics, record.mask == k)
            if cloud.empty:
                continue
            if k not in record.meshes:
                raise TrainingError(f"record {record.record_id}: no mesh for object {k}")
            surface = record.poses[k].apply(sample_surface(record.meshes[k], cfg.gt_points, rng))
            bounds = GridBounds.around(cloud.points, cfg.half_extent)
            samples.append(PccSample(record.record_id, k, cloud, bounds, surface,
                                     gt_grid(surface, bounds, cfg.n_g, dtype)))
    return samples


def _guard(epoch, fn):
    try:
        return fn()
    except NumericError as exc:
        raise TrainingError(f"aborted in epoch {epoch}: {exc}") from exc


def _fit(net, cfg, train_items, loss_of, val_items=(), log=None):
    """Generic seeded loop: Adam, multi-step lr, optional patience-based early stopping.

    Without validation items the epoch's training loss drives early stopping.
    When early stopping is enabled the best weights are restored at the end.
    """
    if not train_items:
        raise ContractError("training set is empty")
    opt = Adam(net.parameters(), cfg.lr, (cfg.beta1, cfg.beta2), cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(net)
    best, best_state, stale = np.inf, None, 0
    for epoch in range(1, cfg.epochs + 1):
        lr = multistep_lr(cfg.lr, epoch, cfg.milestones, cfg.gamma)
        opt.lr = lr
        order = rng.permutation(len(train_items))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_items[i] for i in order[start:start + cfg.batch_size]]

            def step():
                opt.zero_grad()
                loss = None
                for item in batch:
                    term = loss_of(item)
                    loss = term if loss is None else loss + term
                loss = loss * (1.0 / len(batch))
                ad.backward(loss)
                opt.step()
                return float(loss.data) * len(batch)

            total += _guard(epoch, step)
        train_loss = total / len(train_items)
        result.history.append((epoch, "train", train_loss, lr))
        monitored = train_loss
        if val_items:
            monitored = _guard(epoch, lambda: float(np.mean(
                [float(loss_of(item).data) for item in val_items])))
            result.history.append((epoch, "val", monitored, lr))
        if log is not None:
            log(epoch, train_loss, monitored, lr)
        result.epochs_run = epoch
        if cfg.patience:
            if monitored < best:
                best, best_state, stale = monitored, net.state_dict(), 0
                result.best_epoch = epoch
            else:
                stale += 1
                if stale >= cfg.patience:
                    result.stopped_early = True
                    break
    if cfg.patience and best_state is not None:
        net.load_state_dict(best_state)
    return result


def train_pcc(records, cfg, val_records=(), log=None):
    """Train the completion network with the two-term gridding loss."""
    net = PccNetwork(cfg.pcc_config()).astype(_dtype(cfg))
    train_items = pcc_samples(records, cfg)
    val_items = pcc_samples(val_records, cfg, seed=cfg.seed + 1) if val_records else []

    def loss_of(sample):
        out = net.forward(sample.cloud, bounds=sample.bounds)
        return net.loss(out, gt=sample.gt)[0]

    return _fit(net, cfg, train_items, loss_of, val_items, log)


def pcc_grid_loss(net, samples):
    """Mean decoder-grid gridding loss over samples (no gradient use)."""
    values = []
    for s in samples:
        out = net.forward(s.cloud, bounds=s.bounds)
        values.append(float(net.loss(out, gt=s.gt)[1].data))
    return float(np.mean(values))


@dataclass
class DcSample:
    record_id: str
    rgb: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    gt: np.ndarray


def dc_samples(records, pcc_net=None):
    """Depth-completion inputs: PCC-merged depth with a frozen ``pcc_net``, raw depth without."""
    from ..pipeline import merge_pcc

    samples = []
    for r in records:
        depth = r.raw_depth
        if pcc_net is not None:
            depth = merge_pcc(r.raw_depth, r.mask, r.intrinsics, pcc_net)[0]
        samples.append(DcSample(r.record_id, r.rgb, depth, (r.mask > 0).astype(np.uint8),
                                r.gt_depth))
    return samples


def train_dc(records, cfg, pcc_net=None, val_records=(), log=None):
    """Train depth completion on (optionally PCC-augmented) inputs; PCC stays frozen."""
    net = DcNetwork(cfg.dc_config()).astype(_dtype(cfg))
    train_items = dc_samples(records, pcc_net)
    val_items = dc_samples(val_records, pcc_net) if val_records else []
    rng = np.random.default_rng([cfg.seed, 1])

    def loss_of(s):
        pred = net.predict(s.rgb, s.depth, s.mask)
        try:
            return depth_completion_loss(pred, s.gt[None], cfg.budget, cfg.log_l1_weight, rng)
        except UndefinedLossError as exc:
            raise TrainingError(f"record {s.record_id}: {exc}") from exc

    return _fit(net, cfg, train_items, loss_of, val_items, log)


def save_outputs(out_dir, name, result, cfg):
    """Write ``<name>.ckpt``, its ``<name>.cfg`` sidecar and ``<name>_loss.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, f"{name}.ckpt")
    result.network.save(ckpt)
    train_config.save(os.path.join(out_dir, f"{name}.cfg"), cfg)
    with open(os.path.join(out_dir, f"{name}_loss.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(result.csv_text())
    return ckpt
