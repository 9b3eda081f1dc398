"""Model hyperparameter containers."""

from __future__ import annotations

from dataclasses import dataclass, asdict, field

from ..errors import InvalidConfig


@dataclass(frozen=True)
class LoraConfig:
    """Low-rank adapter settings. Adapters target the attention query and/or
    value projections; B starts at zero so a fresh adapter is a no-op."""

    rank: int
    alpha: float
    targets: tuple[str, ...] = ("q", "v")

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidConfig(f"lora rank must be >= 1, got {self.rank}")
        bad = set(self.targets) - {"q", "v"}
        if bad or not self.targets:
            raise InvalidConfig(f"lora targets must be a nonempty subset of {{'q','v'}}, got {self.targets}")

    @property
    def scale(self) -> float:
        return self.alpha / self.rank


@dataclass(frozen=True)
class ModelConfig:
    n_classes: int
    patch_len: int = 128
    stride: int = 8
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 3
    ffn_mult: int = 4
    window_len: int = 2048
    seed: int = 0
    lora: LoraConfig | None = None
    quantize_base: bool = False
    pooling: str = "mean"
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.n_classes < 2:
            raise InvalidConfig(f"need at least 2 classes, got {self.n_classes}")
        if self.d_model % self.n_heads != 0:
            raise InvalidConfig(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.d_model % 2 != 0:
            raise InvalidConfig(f"d_model must be even, got {self.d_model}")
        if self.patch_len > self.window_len:
            raise InvalidConfig(
                f"patch_len {self.patch_len} exceeds window_len {self.window_len}")
        if self.stride < 1:
            raise InvalidConfig(f"stride must be >= 1, got {self.stride}")
        if self.pooling not in ("mean", "last"):
            raise InvalidConfig(f"pooling must be mean or last, got {self.pooling!r}")
        if self.lora is not None and self.lora.rank > self.d_model:
            raise InvalidConfig(
                f"lora rank {self.lora.rank} exceeds projection dim {self.d_model}")

    @property
    def n_patches(self) -> int:
        return (self.window_len - self.patch_len) // self.stride + 1

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.lora is not None:
            d["lora"] = {"rank": self.lora.rank, "alpha": self.lora.alpha,
                         "targets": list(self.lora.targets)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        lora = d.get("lora")
        if lora is not None:
            d["lora"] = LoraConfig(rank=lora["rank"], alpha=lora["alpha"],
                                   targets=tuple(lora["targets"]))
        return cls(**d)
