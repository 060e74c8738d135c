"""Beer-Lambert synthetic juice spectra.

Each juice is a mixture of a few absorbing components whose attenuation
curves are sums of Gaussian bands. Concentrations carry region and vineyard
offsets so origin is learnable; sensory scores are clipped affine functions
of concentrations so the wavelengths that matter are known in advance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dataset import (
    DEFAULT_GRID,
    LABEL_MAX,
    LABEL_MIN,
    SENSORY_ATTRIBUTES,
    Dataset,
    Sample,
    SampleMetadata,
    SensoryLabels,
    Spectrum,
    WavelengthGrid,
)
from .errors import ConfigInfeasible


@dataclass(frozen=True)
class Band:
    center_nm: float
    width_nm: float
    height: float


@dataclass(frozen=True)
class Component:
    name: str
    epsilon: Tuple[float, ...]

    def __post_init__(self) -> None:
        eps = np.asarray(self.epsilon, dtype=float)
        if eps.ndim != 1 or not np.all(np.isfinite(eps)) or np.any(eps < 0):
            raise ValueError(f"component {self.name!r}: epsilon must be finite and >= 0")
        object.__setattr__(self, "epsilon", tuple(float(e) for e in eps))

    @classmethod
    def from_bands(cls, name: str, bands: Sequence[Band], grid: WavelengthGrid = DEFAULT_GRID) -> "Component":
        wl = grid.wavelengths.astype(float)
        eps = np.zeros_like(wl)
        for b in bands:
            eps += b.height * np.exp(-0.5 * ((wl - b.center_nm) / b.width_nm) ** 2)
        return cls(name, tuple(eps))


@dataclass(frozen=True)
class MixtureSpec:
    components: Tuple[Tuple[Component, float], ...]
    path_length_cm: float = 1.0
    noise_sd: float = 0.0

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("mixture needs at least one component")
        if self.path_length_cm <= 0:
            raise ValueError("path length must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        lengths = {len(c.epsilon) for c, _ in self.components}
        if len(lengths) != 1:
            raise ValueError("components disagree on grid length")
        for c, conc in self.components:
            if not np.isfinite(conc) or conc < 0:
                raise ValueError(f"concentration of {c.name!r} must be finite and >= 0")


def beer_lambert_absorbance(spec: MixtureSpec, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """A = sum(epsilon * l * c) over components, plus optional Gaussian noise.

    Returns a raw array so callers can decide whether to wrap it in a
    validated ``Spectrum`` (noise can push near-zero values slightly negative).
    """
    absorbance = np.zeros(len(spec.components[0][0].epsilon))
    for component, conc in spec.components:
        absorbance += np.asarray(component.epsilon) * spec.path_length_cm * conc
    if spec.noise_sd > 0:
        if rng is None:
            raise ValueError("noise_sd > 0 requires an rng")
        absorbance = absorbance + rng.normal(0.0, spec.noise_sd, size=absorbance.shape)
    return absorbance


def beer_lambert_spectrum(spec: MixtureSpec, rng: Optional[np.random.Generator] = None) -> Spectrum:
    return Spectrum(tuple(beer_lambert_absorbance(spec, rng)))


@dataclass(frozen=True)
class ComponentProfile:
    """Generator recipe for one absorbing species.

    ``region_shift``/``vineyard_shift`` scale the per-origin concentration
    offsets; ``juice_sd`` is the within-vineyard juice-to-juice spread.
    """

    name: str
    bands: Tuple[Band, ...]
    base_conc: float
    juice_sd: float
    region_shift: float = 0.0
    vineyard_shift: float = 0.0


@dataclass(frozen=True)
class LabelResponse:
    """score = clip(intercept + sum(coef * concentration), 0, 9)."""

    intercept: float
    coefficients: Mapping[str, float]

    def __call__(self, concentrations: Mapping[str, float]) -> float:
        raw = self.intercept + sum(coef * concentrations[name] for name, coef in self.coefficients.items())
        return float(np.clip(raw, LABEL_MIN, LABEL_MAX))


def default_components() -> Tuple[ComponentProfile, ...]:
    # The narrow "tannin" band at 204 nm carries all sensory signal. It sits
    # on a broad phenolic band with the same centre, so the interference is
    # symmetric and the neighbours of 204 nm never beat it.
    return (
        ComponentProfile("tannin", (Band(204.0, 1.2, 1.0),), base_conc=1.0, juice_sd=0.35),
        ComponentProfile(
            "phenolic", (Band(204.0, 25.0, 1.2),), base_conc=1.2, juice_sd=0.1,
            region_shift=0.35, vineyard_shift=0.2,
        ),
        ComponentProfile(
            "hydroxycinnamate", (Band(280.0, 15.0, 0.5), Band(320.0, 18.0, 0.6)), base_conc=1.0,
            juice_sd=0.08, region_shift=0.3, vineyard_shift=0.25,
        ),
        ComponentProfile(
            "flavonol", (Band(365.0, 25.0, 0.35),), base_conc=0.8, juice_sd=0.06,
            region_shift=0.25, vineyard_shift=0.2,
        ),
        ComponentProfile(
            "pigment", (Band(430.0, 45.0, 0.15),), base_conc=1.0, juice_sd=0.08,
            region_shift=0.2, vineyard_shift=0.3,
        ),
    )


def default_label_responses() -> Dict[str, LabelResponse]:
    return {
        "astringency": LabelResponse(1.0, {"tannin": 3.5}),
        "bitterness": LabelResponse(0.5, {"tannin": 3.0}),
        "herbaceous": LabelResponse(2.0, {"tannin": 2.5}),
    }


@dataclass(frozen=True)
class SynthConfig:
    n_juices: int = 31
    replicates_per_juice: int = 3
    n_regions: int = 2
    n_vineyards: int = 4
    seed: int = 0
    noise_sd: float = 0.004
    path_length_cm: float = 1.0
    components: Tuple[ComponentProfile, ...] = field(default_factory=default_components)
    label_response: Mapping[str, LabelResponse] = field(default_factory=default_label_responses)
    grid: WavelengthGrid = DEFAULT_GRID


def _check(config: SynthConfig) -> None:
    for name in ("n_juices", "replicates_per_juice", "n_regions", "n_vineyards"):
        if getattr(config, name) < 1:
            raise ConfigInfeasible(f"{name} must be >= 1")
    if config.n_vineyards < config.n_regions:
        raise ConfigInfeasible(
            f"{config.n_vineyards} vineyards cannot be nested into {config.n_regions} regions"
        )
    if config.n_juices < config.n_vineyards:
        raise ConfigInfeasible(f"{config.n_juices} juices cannot populate {config.n_vineyards} vineyards")
    if not config.components:
        raise ConfigInfeasible("at least one component is required")
    names = {c.name for c in config.components}
    for attr, response in config.label_response.items():
        if attr not in SENSORY_ATTRIBUTES:
            raise ConfigInfeasible(f"unknown sensory attribute {attr!r}")
        missing = set(response.coefficients) - names
        if missing:
            raise ConfigInfeasible(f"label response for {attr} uses unknown components {sorted(missing)}")
    if config.noise_sd < 0 or config.path_length_cm <= 0:
        raise ConfigInfeasible("noise_sd must be >= 0 and path length > 0")


def generate_synthetic_dataset(config: SynthConfig = SynthConfig()) -> Dataset:
    _check(config)
    rng = np.random.default_rng(config.seed)
    grid = config.grid
    comps = [Component.from_bands(p.name, p.bands, grid) for p in config.components]

    # vineyard v sits in region v % n_regions; juice j in vineyard j % n_vineyards
    region_names = [f"Region{r + 1}" for r in range(config.n_regions)]
    vineyard_region = [v % config.n_regions for v in range(config.n_vineyards)]
    vineyard_names = [
        f"{region_names[vineyard_region[v]]}-Vineyard{v + 1}" for v in range(config.n_vineyards)
    ]

    # Origin offsets: regions on alternating signs, vineyards spread inside a region.
    n_comp = len(config.components)
    region_effect = rng.choice([-1.0, 1.0], size=(config.n_regions, n_comp))
    if config.n_regions >= 2:
        region_effect[1] = -region_effect[0]
    vineyard_effect = rng.normal(0.0, 1.0, size=(config.n_vineyards, n_comp))

    samples: List[Sample] = []
    for j in range(config.n_juices):
        v = j % config.n_vineyards
        r = vineyard_region[v]
        conc: Dict[str, float] = {}
        for k, profile in enumerate(config.components):
            c = (
                profile.base_conc
                + profile.region_shift * region_effect[r, k]
                + profile.vineyard_shift * vineyard_effect[v, k]
                + profile.juice_sd * rng.normal()
            )
            conc[profile.name] = max(c, 0.0)
        labels = SensoryLabels(
            **{attr: round(resp(conc), 4) for attr, resp in config.label_response.items()}
        )
        harvest = "hand" if rng.random() < 0.5 else "machine"
        tss = round(float(max(18.0 + 1.5 * region_effect[r, 0] + rng.normal(0, 0.8), 0.0)), 3)
        ph = round(float(np.clip(3.3 + 0.1 * region_effect[r, 1 % n_comp] + rng.normal(0, 0.05), 2.5, 4.5)), 3)
        ta = round(float(max(7.0 + 0.6 * vineyard_effect[v, 0] + rng.normal(0, 0.3), 0.0)), 3)
        mixture = MixtureSpec(
            components=tuple((c, conc[c.name]) for c in comps),
            path_length_cm=config.path_length_cm,
            noise_sd=config.noise_sd,
        )
        juice_id = f"J{j + 1:02d}"
        for rep in range(1, config.replicates_per_juice + 1):
            absorbance = beer_lambert_absorbance(mixture, rng)
            # match the 6-significant-digit CSV rendering so files round-trip exactly
            absorbance = np.array([float(format(a, ".6g")) for a in absorbance])
            samples.append(
                Sample(
                    sample_id=f"{juice_id}-R{rep}",
                    spectrum=Spectrum(tuple(absorbance)),
                    metadata=SampleMetadata(
                        juice_id=juice_id,
                        variety="Chardonnay" if j % 2 == 0 else "Pinot noir",
                        region=region_names[r],
                        vineyard=vineyard_names[v],
                        block=f"B{j % 3 + 1}",
                        harvest_type=harvest,
                        replicate=rep,
                        tss=tss,
                        ph=ph,
                        ta=ta,
                    ),
                    labels=labels,
                )
            )
    return Dataset(grid=grid, samples=tuple(samples))
