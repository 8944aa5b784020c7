"""Pipeline configuration document: models, validation and loading."""

from pathlib import Path
from typing import Any, Mapping, Optional, Union

import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.clustering.dfm import DfmConfig
from src.clustering.kmeans import KmeansParams
from src.errors import ConfigError
from src.fda.depth import BoxplotParams, OutlierParams
from src.features.hog import HogParams
from src.ingest.missing import MissingPolicy
from src.state.models import GridSpec, RegionOfInterest
from src.synth.generator import SynthConfig

logger = structlog.get_logger()

DEFAULTS_PATH = Path(__file__).parent / "defaults.yaml"
MAX_SEED = (1 << 64) - 1


class FdaConfig(DfmConfig):
    """Fourier smoothing size plus the Fisher-EM settings."""

    n_basis: int = Field(default=15, description="Odd number of Fourier basis functions")

    @field_validator("n_basis")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v < 1 or v % 2 == 0:
            raise ValueError(f"must be a positive odd integer, got {v}")
        return v


class PipelineConfig(BaseModel):
    """Every parameter that influences results."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid: GridSpec = Field(default_factory=GridSpec)
    roi: RegionOfInterest = Field(default_factory=RegionOfInterest)
    hog: HogParams = Field(default_factory=HogParams)
    kmeans: KmeansParams = Field(default_factory=KmeansParams)
    policy: MissingPolicy = Field(default_factory=MissingPolicy)
    fda: FdaConfig = Field(default_factory=FdaConfig)
    outliers: OutlierParams = Field(default_factory=OutlierParams)
    boxplot: BoxplotParams = Field(default_factory=BoxplotParams)
    synth: SynthConfig = Field(
        default_factory=SynthConfig,
        description="Synthetic city; its grid and seed are replaced by the top-level ones",
    )
    seed: int = Field(default=20150901, ge=0, le=MAX_SEED)

    def synth_config(self) -> SynthConfig:
        """The synthetic city on this config's grid and seed.

        Raises:
            ConfigError: the city does not fit the top-level grid
        """
        data = self.synth.model_dump()
        data.update(grid=self.grid.model_dump(), seed=self.seed)
        try:
            return SynthConfig.model_validate(data)
        except ValidationError as e:
            findings = _synth_findings(e)
            raise ConfigError(
                "invalid synthetic city: " + "; ".join(str(f) for f in findings), findings=findings
            )


class Finding(BaseModel):
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.key}: {self.message}"


class ValidationReport(BaseModel):
    findings: list[Finding] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def keys(self) -> list[str]:
        return [f.key for f in self.findings]


def _synth_findings(error: ValidationError) -> list[Finding]:
    return [
        Finding(key=".".join(["synth", *(str(p) for p in err["loc"])]), message=err["msg"])
        for err in error.errors()
    ]


def _synth_conflicts(cfg: PipelineConfig) -> list[Finding]:
    """synth.grid and synth.seed may only repeat the top-level values."""
    findings = []
    explicit = cfg.synth.model_fields_set
    if "grid" in explicit and cfg.synth.grid != cfg.grid:
        findings.append(
            Finding(key="synth.grid", message="differs from the top-level grid; set grid instead")
        )
    if "seed" in explicit and cfg.synth.seed != cfg.seed:
        findings.append(
            Finding(key="synth.seed", message="differs from the top-level seed; set seed instead")
        )
    return findings


def _cross_checks(cfg: PipelineConfig, synthetic: bool) -> list[Finding]:
    findings = []
    if not cfg.roi.fits(cfg.grid.n_rows, cfg.grid.n_cols):
        if cfg.roi.row_range[1] >= cfg.grid.n_rows:
            findings.append(Finding(key="roi.row_range", message=f"exceeds {cfg.grid.n_rows} grid rows"))
        if cfg.roi.col_range[1] >= cfg.grid.n_cols:
            findings.append(Finding(key="roi.col_range", message=f"exceeds {cfg.grid.n_cols} grid cols"))
    for key, message in cfg.hog.problems(cfg.grid.n_rows, cfg.grid.n_cols):
        findings.append(Finding(key=f"hog.{key}", message=message))
    if cfg.fda.n_basis >= cfg.grid.quarters_per_day:
        findings.append(
            Finding(
                key="fda.n_basis",
                message=f"{cfg.fda.n_basis} must be below {cfg.grid.quarters_per_day} quarters per day",
            )
        )
    if cfg.kmeans.force_k is not None and cfg.kmeans.force_k < 1:
        findings.append(Finding(key="kmeans.force_k", message="must be at least 1"))
    findings.extend(_synth_conflicts(cfg))
    if synthetic:
        try:
            cfg.synth_config()
        except ConfigError as e:
            findings.extend(e.findings)
    return findings


def validate_config(
    cfg: Union[PipelineConfig, Mapping[str, Any]], synthetic: bool = False
) -> ValidationReport:
    """List every problem of a config; never raises on bad values.

    Args:
        cfg: A PipelineConfig or a raw nested mapping (as read from YAML)
        synthetic: Also check the synthetic city against the top-level grid

    Returns:
        Findings with dotted key paths; empty when the config is valid
    """
    data = cfg.model_dump(exclude_unset=True) if isinstance(cfg, PipelineConfig) else dict(cfg)
    try:
        parsed = PipelineConfig.model_validate(data)
    except ValidationError as e:
        return ValidationReport(
            findings=[
                Finding(key=".".join(str(p) for p in err["loc"]) or "<root>", message=err["msg"])
                for err in e.errors()
            ]
        )
    return ValidationReport(findings=_cross_checks(parsed, synthetic))


def set_dotted(data: dict, key: str, value: Any) -> None:
    """Set ``a.b.c`` in a nested dict, creating sections as needed."""
    *sections, leaf = key.split(".")
    node = data
    for section in sections:
        child = node.setdefault(section, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{section} is not a section (while setting {key})")
        node = child
    node[leaf] = value


def load_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    synthetic: bool = False,
) -> PipelineConfig:
    """Load a YAML config document, apply dotted-key overrides and validate.

    Args:
        path: YAML file; None uses built-in defaults
        overrides: e.g. {"seed": 7, "policy.max_gap_quarters": 2}
        synthetic: The synthetic city will be generated, so check it too

    Raises:
        ConfigError: unreadable file, unknown key or invalid value; carries
            every finding
    """
    raw: dict = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid YAML: {e}")
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
        raw = loaded

    for key, value in (overrides or {}).items():
        if value is not None:
            set_dotted(raw, key, value)

    report = validate_config(raw, synthetic)
    if not report.ok:
        raise ConfigError(
            "invalid config: " + "; ".join(str(f) for f in report.findings),
            findings=report.findings,
        )
    cfg = PipelineConfig.model_validate(raw)
    logger.debug("config loaded", path=str(path) if path else None, seed=cfg.seed)
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    """YAML text of a config, loadable by ``load_config``.

    The synthetic city's grid and seed are left out; they come from the top level.
    """
    data = cfg.model_dump(mode="json", exclude={"synth": {"grid", "seed"}})
    return yaml.safe_dump(data, sort_keys=False)
