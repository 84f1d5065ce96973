"""Config-driven stage wiring shared by the CLI commands and the depth sweep."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from poreforge.core.descriptors import (
    CorrelationLength,
    DescriptorCurve,
    autocorrelation_distance,
    two_point_probability,
)
from poreforge.core.schema import DesignConfig, InputConfig, PriorReport, RunConfig, TrainReport
from poreforge.core.volume import Image2D, load_image, porosity
from poreforge.nn.losses import (
    DescriptionFunction,
    LossError,
    Orientation,
    ReferenceSet,
    get_description,
)
from poreforge.nn.network import ModelParams, NetworkSpec, design_from_prior, init_params
from poreforge.pipeline.trainer import spec_summary, train

logger = logging.getLogger(__name__)


class RunError(Exception):
    pass


@dataclass(frozen=True)
class Prior:
    image: Image2D
    curve: DescriptorCurve
    phi: float
    correlation: CorrelationLength
    spec: NetworkSpec


def crop_center(image: Image2D, side: int) -> Image2D:
    """Centered ``side`` x ``side`` crop of a reference image."""
    if side > min(image.height, image.width):
        raise RunError(
            f"Crop side {side} exceeds the reference size {image.height}x{image.width}"
        )
    top = (image.height - side) // 2
    left = (image.width - side) // 2
    return Image2D(image.data[top : top + side, left : left + side], pixel_size=image.pixel_size)


def load_reference(path: Path, crop: int | None = None) -> Image2D:
    image = load_image(path)
    if crop is not None:
        image = crop_center(image, crop)
        logger.info("Cropped %s to %dx%d", path.name, crop, crop)
    return image


def load_references(inp: InputConfig) -> ReferenceSet:
    """One reference gives an isotropic set; three labelled ones an anisotropic set."""
    if inp.references is not None:
        images = {k: load_reference(Path(v), inp.crop) for k, v in inp.references.items()}
        return ReferenceSet.anisotropic(images["xy"], images["xz"], images["yz"])
    if inp.reference is None:
        raise RunError("No reference image: set input.reference or input.references")
    return ReferenceSet.isotropic(load_reference(Path(inp.reference), inp.crop))


def default_max_lag(image: Image2D) -> int:
    return max(1, min(image.height, image.width) // 2)


def analyze_image(image: Image2D, design: DesignConfig) -> Prior:
    """Porosity, S2, autocorrelation distance and the recommended network of one image."""
    max_lag = design.max_lag if design.max_lag is not None else default_max_lag(image)
    if max_lag >= min(image.height, image.width):
        raise RunError(
            f"design.max_lag={max_lag} must be smaller than the image side "
            f"{min(image.height, image.width)}"
        )
    curve = two_point_probability(image, max_lag)
    phi = porosity(image)
    correlation = autocorrelation_distance(curve, phi, design.lcor_eps_rel, design.lcor_window)
    spec = design_from_prior(correlation, design.n, design.m_cap, design.m)
    return Prior(image=image, curve=curve, phi=phi, correlation=correlation, spec=spec)


def prior_report(prior: Prior, name: str, s2_csv: str | None = None) -> PriorReport:
    image = prior.image
    l_cor_um = None
    if image.pixel_size is not None:
        l_cor_um = prior.correlation.l_cor * image.pixel_size
    return PriorReport(
        image=name,
        height=image.height,
        width=image.width,
        pixel_size=image.pixel_size,
        porosity=prior.phi,
        max_lag=len(prior.curve.lags) - 1,
        l_cor=prior.correlation.l_cor,
        l_cor_um=l_cor_um,
        converged=prior.correlation.converged,
        recommended=spec_summary(prior.spec),
        s2_csv=s2_csv,
        warnings=list(prior.spec.warnings),
    )


def design_for(refs: ReferenceSet, design: DesignConfig) -> NetworkSpec:
    """Network for a reference set; anisotropic sets use the deepest per-plane design."""
    if refs.is_isotropic:
        return analyze_image(refs.images[Orientation.XY], design).spec
    priors = [analyze_image(refs.images[o], design) for o in refs.images]
    return max(priors, key=lambda p: p.spec.m).spec


def description_for(cfg: RunConfig, refs: ReferenceSet) -> DescriptionFunction:
    try:
        return get_description(
            cfg.train.descriptor,
            refs,
            bank_seed=cfg.bank.seed,
            bank_widths=tuple(cfg.bank.widths),
            bank_layer_weights=cfg.bank.layer_weights,
            slope=cfg.design.slope,
            acf_max_lag=cfg.acf.max_lag,
        )
    except LossError as exc:
        raise RunError(str(exc)) from exc


def train_from_config(
    cfg: RunConfig, refs: ReferenceSet, spec: NetworkSpec | None = None
) -> tuple[ModelParams, TrainReport]:
    """Design (unless a spec is given), initialize and train one model."""
    spec = spec if spec is not None else design_for(refs, cfg.design)
    logger.info(
        "Training %s (receptive field %d) in %s mode",
        spec.name,
        spec.receptive_field,
        cfg.train.mode,
    )
    params = init_params(
        spec,
        cfg.train.seed,
        slope=cfg.design.slope,
        bn_eps=cfg.design.bn_eps,
        bn_momentum=cfg.design.bn_momentum,
    )
    return train(
        refs,
        spec,
        cfg.train,
        adam=cfg.adam,
        description=description_for(cfg, refs),
        params=params,
    )
