"""Training configuration and its plain-text ``key = value`` file format."""

import dataclasses
from dataclasses import dataclass

from ..errors import ContractError, FormatError
from .dc import DcConfig
from .pcc import PccConfig

STAGES = ("pcc", "dc", "dc-only")


@dataclass(frozen=True)
class TrainConfig:
    stage: str = "pcc"
    epochs: int = 300
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    milestones: tuple = (50,)
    gamma: float = 0.5
    patience: int = 0  # 0 disables early stopping
    batch_size: int = 1
    seed: int = 0
    precision: str = "float32"
    # point cloud completion
    n_g: int = 32
    half_extent: float = 0.15
    num_points: int = 2048
    pcc_channels: tuple = (16, 32, 32, 64, 64)
    mlp_hidden: int = 32
    gt_points: int = 4096
    # depth completion
    dc_channels: tuple = (16, 16, 32, 32, 48)
    spade_hidden: int = 16
    max_depth: float = 3.0
    init_depth: float = 0.6
    pair_budget: str = "exact"
    log_l1_weight: float = 1.0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ContractError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if not self.lr > 0:
            raise ContractError("lr must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ContractError("Adam betas must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ContractError("epochs and batch_size must be >= 1, patience >= 0")
        if self.precision not in ("float32", "float64"):
            raise ContractError("precision must be float32 or float64")
        if self.pair_budget != "exact" and not str(self.pair_budget).isdigit():
            raise ContractError("pair_budget must be 'exact' or a positive integer")

    @classmethod
    def defaults(cls, stage):
        """Stage defaults: PCC 300 epochs halving lr after 50; DC 100 epochs, patience 10."""
        if stage == "pcc":
            return cls(stage=stage)
        return cls(stage=stage, epochs=100, milestones=(), patience=10)

    @property
    def budget(self):
        return "exact" if self.pair_budget == "exact" else int(self.pair_budget)

    def pcc_config(self):
        return PccConfig(n_g=self.n_g, half_extent=self.half_extent, num_points=self.num_points,
                         channels=tuple(self.pcc_channels), mlp_hidden=self.mlp_hidden,
                         seed=self.seed)

    def dc_config(self):
        return DcConfig(channels=tuple(self.dc_channels), spade_hidden=self.spade_hidden,
                        max_depth=self.max_depth, init_depth=self.init_depth, seed=self.seed)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _format(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def to_text(cfg):
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n"
                   for f in dataclasses.fields(cfg))


def _convert(name, kind, text):
    if kind == "tuple":
        return tuple(int(v) for v in text.split(",") if v.strip())
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def parse_text(text, stage=None, path=None):
    """Parse ``key = value`` lines (``#`` starts a comment) over the stage defaults.

    A ``stage`` line in the text selects the defaults unless ``stage`` is given.
    """
    kinds = {f.name: f.type if isinstance(f.type, str) else f.type.__name__
             for f in dataclasses.fields(TrainConfig)}
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {raw!r}", offset=number, path=path)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise FormatError(f"unknown config key {key!r}", offset=number, path=path)
        try:
            values[key] = _convert(key, kinds[key], value)
        except ValueError:
            raise FormatError(f"bad value for {key}: {value!r}", offset=number, path=path) from None
    stage = stage or values.get("stage", "pcc")
    values["stage"] = stage
    return TrainConfig.defaults(stage).replace(**values)


def load(path, stage=None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"missing file: {path}") from None
    return parse_text(text, stage, path)


def save(path, cfg):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_text(cfg))
