"""Run configuration: a sectioned key = value document validated section by section."""

import configparser
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator
from typing_extensions import Annotated

from carrier.field import CarrierParams, CutoffParams, default_cutoffs
from channel import ChannelGeometry
from constants import DEFAULT_QUALITY_FLOOR, LOG_PREFIX_CONFIG
from errors import ConfigValidationError, GeometryError
from fem.manufactured import MMS_MESH_SIZES
from logger import logger
from solver import SolveOptions
from utils import fingerprint, parse_float_list

AUTO = "auto"
DEV_SAMPLE_CAP = 10


def _auto_or_float(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() == AUTO:
        return None
    return value


def _float_list(value: Any) -> Any:
    if isinstance(value, str):
        return parse_float_list(value)
    return value


AutoFloat = Annotated[Optional[float], BeforeValidator(_auto_or_float)]
FloatList = Annotated[List[float], BeforeValidator(_float_list)]


class FlowSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    flux: float = Field(..., description="prescribed flux Φ")


class CarrierSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epsilon: AutoFloat = Field(default=None, description="layer thickness ε, None for auto")
    dist: AutoFloat = Field(default=None, description="transition offset 𝔡, None for auto")
    smooth_pi: bool = False

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"epsilon = {v} must lie in (0, 1)")
        return v

    @field_validator("dist")
    @classmethod
    def validate_dist(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0.0:
            raise ValueError(f"dist = {v} must be positive")
        return v


class MeshSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    half_length: float = Field(..., gt=0.0, description="truncation T, Ω_T = {|x1| < T}")
    h: float = Field(..., gt=0.0, description="target mesh size")
    quality_floor: float = Field(default=DEFAULT_QUALITY_FLOOR, gt=0.0, lt=1.0)


class AnalysisSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    samples: int = Field(default=50, ge=1, description="random solenoidal fields per diagnostic")
    t_step: float = Field(default=0.5, gt=0.0, description="spacing of the decay and growth grids")
    epsilon_grid: Optional[FloatList] = None
    dist_grid: Optional[FloatList] = None
    mms_h: FloatList = Field(default_factory=lambda: list(MMS_MESH_SIZES))
    bracket_flux: bool = False
    bracket_hi: float = Field(default=1.0, gt=0.0)
    bracket_steps: int = Field(default=4, ge=1)


class RunSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0)
    output_dir: str = "output"


SECTIONS = {
    "geometry": ChannelGeometry,
    "flow": FlowSection,
    "carrier": CarrierSection,
    "mesh": MeshSection,
    "solver": SolveOptions,
    "analysis": AnalysisSection,
    "run": RunSection,
}


class RunConfig(BaseModel):
    """A fully validated run: every section plus the resolved carrier cutoffs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    geometry: ChannelGeometry
    flow: FlowSection
    carrier: CarrierSection
    mesh: MeshSection
    solver: SolveOptions
    analysis: AnalysisSection
    run: RunSection
    cutoffs: CutoffParams = Field(..., description="ε and 𝔡 after the auto policy")
    dev: bool = False
    fingerprint: str = ""

    @property
    def flux(self) -> float:
        return self.flow.flux

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def carrier_params(self) -> CarrierParams:
        return CarrierParams(flux=self.flux, cutoffs=self.cutoffs, geometry=self.geometry)

    def resolved(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"fingerprint"})


def _section_problems(name: str, error: ValidationError) -> List[str]:
    problems = []
    for err in error.errors():
        where = ".".join(str(part) for part in err["loc"]) or name
        problems.append(f"[{name}] {where}: {err['msg']}")
    return problems


def _read_sections(text: str, problems: List[str]) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        problems.append(f"unreadable configuration: {e}")
        return {}
    for name in parser.sections():
        if name not in SECTIONS:
            problems.append(f"unknown section [{name}]")
    return {name: dict(parser[name]) for name in parser.sections() if name in SECTIONS}


def parse_config(text: str, dev: bool = False) -> RunConfig:
    """Validate a configuration document and resolve the auto cutoffs.

    With dev set, h is doubled and the random sample counts are capped at 10 for quick runs.

    Raises:
        ConfigValidationError: Listing every problem found, across all sections.
    """
    problems: List[str] = []
    raw = _read_sections(text, problems)
    sections: Dict[str, BaseModel] = {}
    for name, model in SECTIONS.items():
        try:
            sections[name] = model(**raw.get(name, {}))
        except ValidationError as e:
            problems.extend(_section_problems(name, e))

    cutoffs = None
    if dev and "mesh" in sections:
        sections["mesh"] = sections["mesh"].model_copy(update={"h": 2.0 * sections["mesh"].h})
    if "geometry" in sections and "mesh" in sections:
        geometry, mesh = sections["geometry"], sections["mesh"]
        L = geometry.straight_from
        if mesh.half_length < L + 1.0:
            problems.append(f"[mesh] half_length: T = {mesh.half_length} must satisfy T >= L + 1 = {L + 1.0}")
        try:
            geometry.check_width()
        except GeometryError as e:
            problems.append(f"[geometry] {e}")
    if "geometry" in sections and "mesh" in sections and "carrier" in sections:
        carrier = sections["carrier"]
        try:
            cutoffs = default_cutoffs(geometry, mesh.h, carrier.epsilon, carrier.dist, carrier.smooth_pi)
            if "flow" in sections:
                CarrierParams(flux=sections["flow"].flux, cutoffs=cutoffs, geometry=geometry)
        except ValidationError as e:
            problems.extend(_section_problems("carrier", e))

    if problems:
        for problem in problems:
            logger.error(f"{LOG_PREFIX_CONFIG}: {problem}")
        raise ConfigValidationError(problems)

    if dev:
        analysis = sections["analysis"]
        sections["analysis"] = analysis.model_copy(update={"samples": min(analysis.samples, DEV_SAMPLE_CAP)})
    config = RunConfig(**sections, cutoffs=cutoffs, dev=dev, fingerprint=fingerprint(text))
    for section, values in config.resolved().items():
        logger.info(f"{LOG_PREFIX_CONFIG}: {section} = {values}")
    return config


def load_config(path: Union[str, Path], dev: bool = False) -> RunConfig:
    """Read and validate a configuration file.

    Raises:
        ConfigValidationError: If the file cannot be read or does not validate.
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigValidationError([f"cannot read {path}: {e}"]) from e
    return parse_config(text, dev)
