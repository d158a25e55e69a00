"""
A small end-to-end run: train both stages, then compare the three variants.

Uses a reduced network so the whole script finishes in about a minute on a
laptop CPU. Numbers from such a short run only show the mechanics; they are
no guide to what a full-size model reaches.

Run from the repository root:  python3 demos/02_train_and_compare_variants.py
"""

# %%
import time

import numpy as np

from glassdepth.data.synth import DistortionConfig, generate_scene
from glassdepth.geometry import CameraIntrinsics
from glassdepth.metrics import depth_metrics
from glassdepth.nn import train as training
from glassdepth.nn.config import TrainConfig
from glassdepth.pipeline import Networks, PipelineConfig, infer

intr = CameraIntrinsics.from_fov(64, 48)
records = [generate_scene(2000 + i, 1 + i % 3, intr, DistortionConfig(seed=i))
           .record(f"d{i}", "train" if i < 6 else "test") for i in range(8)]
train, test = records[:6], records[6:]

# %% [markdown]
# Stage 1 trains the point-cloud completion network on gridded object clouds.

# %%
pcc_cfg = TrainConfig.defaults("pcc").replace(
    epochs=60, n_g=16, half_extent=0.12, num_points=512, gt_points=2048,
    pcc_channels=(8, 16, 16, 32, 32))
t = time.perf_counter()
pcc = training.train_pcc(train, pcc_cfg)
losses = pcc.losses()
print(f"PCC: loss {losses[0]:.4f} -> {losses[-1]:.4f} in {time.perf_counter() - t:.0f} s")

# %% [markdown]
# Stage 2 freezes that network and trains depth completion on its merged
# output; the baseline trains the same network on raw depth.

# %%
dc_cfg = TrainConfig.defaults("dc").replace(epochs=40, dc_channels=(8, 8, 16, 16, 24))
joint = training.train_dc(train, dc_cfg, pcc_net=pcc.network)
only = training.train_dc(train, dc_cfg.replace(stage="dc-only"))
print("DC epochs: joint", joint.epochs_run, "dc-only", only.epochs_run)

# %%
nets = Networks(pcc=pcc.network, dc=joint.network)
variants = {
    "pcc-only": (PipelineConfig("pcc-only", seed=0), Networks(pcc=pcc.network)),
    "dc-only": (PipelineConfig("dc-only"), Networks(dc=only.network)),
    "joint": (PipelineConfig("joint", seed=0), nets),
}
for split, recs in (("train", train), ("test", test)):
    raw = np.mean([depth_metrics(r.raw_depth, r.gt_depth, r.mask > 0, "all").rmse for r in recs])
    print(f"{split}: raw RMSE {raw:.4f} m")
    for name, (cfg, n) in variants.items():
        rmse = np.mean([depth_metrics(infer(r, cfg, n).depth, r.gt_depth, r.mask > 0,
                                      "all").rmse for r in recs])
        print(f"  {name:8s} RMSE {rmse:.4f} m")
