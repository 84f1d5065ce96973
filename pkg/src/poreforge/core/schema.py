"""Pydantic v2 models for run configuration, reports and manifests."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "1"
SEED_LIMIT = 2**64


def _now() -> datetime:
    return datetime.now(timezone.utc)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- Configuration --


class InputConfig(_Section):
    reference: Path | None = None
    references: dict[Literal["xy", "xz", "yz"], Path] | None = None
    crop: int | None = Field(default=None, ge=2)

    @model_validator(mode="after")
    def _one_source(self) -> InputConfig:
        if self.reference is not None and self.references is not None:
            raise ValueError("Give either input.reference or input.references, not both")
        if self.references is not None and set(self.references) != {"xy", "xz", "yz"}:
            raise ValueError("input.references needs exactly the keys xy, xz and yz")
        return self


class DesignConfig(_Section):
    n: int = Field(default=16, ge=1)
    m_cap: int = Field(default=12, ge=1)
    m: int | None = Field(default=None, ge=1)
    max_lag: int | None = Field(default=None, ge=1)
    lcor_eps_rel: float = Field(default=0.05, gt=0)
    lcor_window: int = Field(default=3, ge=1)
    slope: float = Field(default=0.2, gt=0, lt=1)
    bn_eps: float = Field(default=1e-5, gt=0)
    bn_momentum: float = Field(default=0.1, gt=0, le=1)


class TrainConfig(_Section):
    iterations: int = Field(default=1000, ge=1)
    batch_size: int = Field(default=1, ge=1)
    descriptor: Literal["gram", "acf"] = "gram"
    mode: Literal["basic", "improved"] = "improved"
    slice_size: int | None = Field(default=None, ge=2)
    noise_side: int | None = Field(default=None, ge=4)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    log_every: int = Field(default=50, ge=1)
    memory_budget_mb: float = Field(default=4096.0, gt=0)


class AdamConfig(_Section):
    lr: float = Field(default=0.1, ge=0)
    beta1: float = Field(default=0.1, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)


class BankConfig(_Section):
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    widths: list[int] = Field(default_factory=lambda: [8, 16, 16, 16], min_length=1)
    layer_weights: list[float] | None = None

    @model_validator(mode="after")
    def _weights_match(self) -> BankConfig:
        if any(w < 1 for w in self.widths):
            raise ValueError("bank.widths entries must be at least 1")
        if self.layer_weights is not None:
            if len(self.layer_weights) != len(self.widths):
                raise ValueError("bank.layer_weights must have one entry per bank layer")
            if any(w < 0 for w in self.layer_weights):
                raise ValueError("bank.layer_weights must be non-negative")
        return self


class AcfConfig(_Section):
    max_lag: int = Field(default=16, ge=0)


class ReconstructConfig(_Section):
    dims: tuple[int, int, int] = (64, 64, 64)
    sub_block: tuple[int, int, int] | None = None
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    porosity: float | None = Field(default=None, ge=0, le=1)
    method: Literal["quantile", "otsu"] = "quantile"
    count: int = Field(default=1, ge=1)
    save_continuous: bool = True

    @field_validator("dims", "sub_block")
    @classmethod
    def _positive(cls, v: tuple[int, int, int] | None) -> tuple[int, int, int] | None:
        if v is not None and min(v) < 1:
            raise ValueError("dimensions must be at least 1")
        return v

    @model_validator(mode="after")
    def _block_fits(self) -> ReconstructConfig:
        if self.sub_block is not None and any(b > d for b, d in zip(self.sub_block, self.dims)):
            raise ValueError("reconstruct.sub_block must not exceed reconstruct.dims")
        return self


EvalDescriptor = Literal["s2", "lineal_path", "cluster", "lpd"]


class EvaluateConfig(_Section):
    descriptors: list[EvalDescriptor] = Field(
        default_factory=lambda: ["s2", "lineal_path", "cluster", "lpd"]
    )
    max_lag: int = Field(default=20, ge=0)
    lpd_window: int = Field(default=20, ge=1)
    lpd_bin_width: float = Field(default=0.02, gt=0, le=1)
    full_connectivity: bool = False


class AnnealConfig(_Section):
    dims: list[int] | None = None
    weights: dict[Literal["s2", "lineal_path"], float] = Field(
        default_factory=lambda: {"s2": 1.0}
    )
    max_lag: int | None = Field(default=None, ge=1)
    t0: float | None = Field(default=None, gt=0)
    cooling: float = Field(default=0.95, gt=0, lt=1)
    swaps_per_temperature: int | None = Field(default=None, ge=1)
    max_swaps: int = Field(default=200_000, ge=1)
    energy_threshold: float = Field(default=0.0, ge=0)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    audit: bool = False

    @field_validator("dims")
    @classmethod
    def _dims(cls, v: list[int] | None) -> list[int] | None:
        if v is None:
            return v
        if len(v) not in (2, 3) or min(v) < 2:
            raise ValueError("sa.dims must have 2 or 3 entries, each at least 2")
        if len(v) == 3 and max(v) > 64:
            raise ValueError("3D annealing is limited to 64 voxels per side")
        return v

    @field_validator("weights")
    @classmethod
    def _weights(cls, v: dict[str, float]) -> dict[str, float]:
        if any(w < 0 for w in v.values()) or sum(v.values()) <= 0:
            raise ValueError("sa.weights must be non-negative with a positive sum")
        return v


class SweepConfig(_Section):
    depths: list[int] = Field(default_factory=lambda: [3, 5, 8, 11], min_length=1)
    widths: list[int] | None = Field(default=None, min_length=1)
    side: int | None = Field(default=None, ge=2)

    @field_validator("depths", "widths")
    @classmethod
    def _positive(cls, v: list[int] | None) -> list[int] | None:
        if v is not None and min(v) < 1:
            raise ValueError("sweep depths and widths must be at least 1")
        return v


class RunConfig(_Section):
    schema_version: str = SCHEMA_VERSION
    input: InputConfig = Field(default_factory=InputConfig)
    design: DesignConfig = Field(default_factory=DesignConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    adam: AdamConfig = Field(default_factory=AdamConfig)
    bank: BankConfig = Field(default_factory=BankConfig)
    acf: AcfConfig = Field(default_factory=AcfConfig)
    reconstruct: ReconstructConfig = Field(default_factory=ReconstructConfig)
    evaluate: EvaluateConfig = Field(default_factory=EvaluateConfig)
    sa: AnnealConfig = Field(default_factory=AnnealConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output_dir: Path = Path("runs")

    @model_validator(mode="after")
    def _acf_truncation(self) -> RunConfig:
        size = self.train.slice_size
        if self.train.descriptor == "acf" and size is not None and self.acf.max_lag >= size:
            raise ValueError(
                f"acf.max_lag={self.acf.max_lag} must be smaller than train.slice_size={size}"
            )
        return self


# -- Reports --


class SpecSummary(BaseModel):
    m: int
    n: int
    out_channels: int = 3
    receptive_field: int
    name: str
    warnings: list[str] = Field(default_factory=list)


class PriorReport(BaseModel):
    image: str
    height: int
    width: int
    pixel_size: float | None = None
    porosity: float
    max_lag: int
    l_cor: int
    l_cor_um: float | None = None
    converged: bool
    recommended: SpecSummary
    s2_csv: str | None = None
    warnings: list[str] = Field(default_factory=list)


class TrainReport(BaseModel):
    mode: str
    descriptor: str
    iterations: int
    batch_size: int
    slice_size: int
    noise_side: int | None = None
    seed: int
    losses: list[float]
    wall_time_s: float
    reference_porosity: float
    spec: SpecSummary
    model_path: str | None = None
    model_sha256: str | None = None
    config: dict[str, Any] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)


class ReconReport(BaseModel):
    seed: int
    dims: tuple[int, int, int]
    sub_block: tuple[int, int, int]
    tiles: int
    method: str
    target_porosity: float | None
    achieved_porosity: float
    wall_time_s: float
    model_path: str | None = None
    model_sha256: str | None = None
    continuous_path: str | None = None
    binary_path: str | None = None
    warnings: list[str] = Field(default_factory=list)


class CurveComparison(BaseModel):
    descriptor: str
    volume: str
    target: str | None = None
    mean_absolute_deviation: float | None = None
    csv: str | None = None


class EvaluationReport(BaseModel):
    volumes: list[str]
    reference: str | None = None
    max_lag: int
    lpd_window: int | None = None
    porosity: dict[str, float]
    curves: list[CurveComparison]
    l_cor: dict[str, int] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)


class AnnealReport(BaseModel):
    dims: list[int]
    porosity: float
    initial_energy: float
    best_energy: float
    final_energy: float
    t0: float
    swaps: int
    accepted: int
    result_path: str | None = None
    trace_path: str | None = None
    audited: bool = False


class SweepRow(BaseModel):
    m: int
    n: int
    name: str
    receptive_field: int
    final_loss: float
    porosity: float
    l_cor: int
    converged: bool
    s2_mad: float
    wall_time_s: float


class SweepReport(BaseModel):
    reference_porosity: float
    reference_l_cor: int
    side: int
    max_lag: int
    rows: list[SweepRow]
    warnings: list[str] = Field(default_factory=list)


class RunManifest(BaseModel):
    command: str
    schema_version: str = SCHEMA_VERSION
    poreforge_version: str
    numpy_version: str
    python_version: str
    created_at: datetime = Field(default_factory=_now)
    config: dict[str, Any] = Field(default_factory=dict)
    seeds: dict[str, int] = Field(default_factory=dict)
    files: dict[str, str] = Field(default_factory=dict)
