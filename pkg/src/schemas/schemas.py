from typing import Annotated, Any, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.settings import DEFAULT_BANDWIDTH, DEFAULT_FREEZER_DELAY_S, OUTPUT_DIR

FloatSeries = Union[float, List[float]]


# ==================== Grid Schemas ====================

class GridSection(BaseModel):
    """Timescales in seconds. Omitted tender/market durations default to the next shorter one."""
    model_config = ConfigDict(extra="forbid")

    horizon_s: int = Field(86400, gt=0)
    sfr_s: Optional[int] = Field(None, gt=0)
    da_s: Optional[int] = Field(None, gt=0)
    id_s: Optional[int] = Field(None, gt=0)
    system_s: int = Field(300, gt=0)
    control_s: int = Field(10, gt=0)
    lead_da_s: int = Field(12 * 3600, ge=0)
    lead_id_s: int = Field(3600, ge=0)


# ==================== Resource Schemas ====================

class ResourceBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str = Field(min_length=1, max_length=64)

    @field_validator('label')
    @classmethod
    def label_must_not_be_blank(cls, v):
        if not v.strip():
            raise ValueError('Label must not be empty or contain only whitespace')
        if any(c in v for c in ' ,[]'):
            raise ValueError('Label must not contain spaces, commas or brackets')
        return v.strip()


class BatterySection(ResourceBase):
    """Ideal battery with symmetric power limits."""
    type: Literal["battery"]
    p_max_kW: float = Field(gt=0)
    x_max_kWh: float = Field(ge=0)
    x0_kWh: Optional[float] = Field(None, ge=0, description="Initial state, half of x_max_kWh when omitted")

    @model_validator(mode="after")
    def check_initial_state(self):
        if self.x0_kWh is not None and self.x0_kWh > self.x_max_kWh:
            raise ValueError('x0_kWh must not exceed x_max_kWh')
        return self


class FreezerSection(ResourceBase):
    """Freezer warehouse; defaults reproduce the reference warehouse."""
    type: Literal["freezer"]
    p_min_kW: float = 0.0
    p_max_kW: float = 300.0
    r_min_kW_per_min: float = -100.0
    r_max_kW_per_min: float = 100.0
    x_max_kWh: float = Field(1800.0, gt=0)
    theta_in_min_C: float = -29.0
    theta_in_max_C: float = -27.0
    theta_out_C: float = 5.0
    discharge_s: float = Field(36000.0, gt=0)
    fill: float = Field(0.5, ge=0, le=1)
    delay_s: float = Field(DEFAULT_FREEZER_DELAY_S, ge=0)


class TurbineSection(ResourceBase):
    type: Literal["turbine"]
    p_min_kW: float
    p_max_kW: float
    ramp_kW_per_min: float = Field(gt=0)


class GenericSection(ResourceBase):
    """Explicit parameter set; scalars apply to every system interval, omitted limits are disabled."""
    type: Literal["generic"]
    p_min_kW: FloatSeries
    p_max_kW: FloatSeries
    r_min_kW_per_s: Optional[FloatSeries] = None
    r_max_kW_per_s: Optional[FloatSeries] = None
    x_min_kWh: Optional[FloatSeries] = None
    x_max_kWh: Optional[FloatSeries] = None
    x0_min_kWh: float = 0.0
    x0_max_kWh: float = 0.0
    a_per_s: float = Field(0.0, le=0)
    b_kW_per_unit: float = 0.0
    c: float = 1.0
    u: FloatSeries = 0.0
    delay_s: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def check_initial_range(self):
        if self.x0_min_kWh > self.x0_max_kWh:
            raise ValueError('x0_min_kWh must not exceed x0_max_kWh')
        return self


ResourceSection = Annotated[
    Union[BatterySection, FreezerSection, TurbineSection, GenericSection],
    Field(discriminator="type"),
]


# ==================== Structure, Price and Output Schemas ====================

class StructureSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bandwidth: int = Field(DEFAULT_BANDWIDTH, ge=0)
    time_invariant_gamma: bool = True


class PriceSection(BaseModel):
    """Expected prices, either inline (scalar or per interval) or from a CSV file."""
    model_config = ConfigDict(extra="forbid")

    csv: Optional[str] = None
    c_DA: FloatSeries = 0.0
    c_ID: FloatSeries = 0.0
    c_SFR: FloatSeries = 0.0
    c_up: FloatSeries = 0.0
    c_dn: FloatSeries = 0.0
    w_exp: FloatSeries = 0.0
    up_frac: FloatSeries = 0.0
    dn_frac: FloatSeries = 0.0


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = OUTPUT_DIR
    trace: bool = True


class ModeSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    market: Literal["full-markets", "markets-frozen"] = "markets-frozen"
    objective: Literal["profit", "max-capacity"] = "max-capacity"

    @model_validator(mode="after")
    def check_combination(self):
        if self.market == "markets-frozen" and self.objective == "profit":
            raise ValueError('Mode conflict: the profit objective needs full-markets mode')
        return self


# ==================== Scenario File ====================

class ScenarioFile(BaseModel):
    """Scenario document read by `solve` and embedded in every result document."""
    model_config = ConfigDict(extra="forbid")

    name: str = Field("scenario", min_length=1, max_length=255)
    grid: GridSection = Field(default_factory=GridSection)
    resources: List[ResourceSection] = Field(min_length=1)
    structures: Optional[List[StructureSection]] = None
    mode: ModeSection = Field(default_factory=ModeSection)
    prices: Optional[PriceSection] = None
    signal: Optional[str] = None  # simulate falls back to it without --signal
    outputs: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def check_sections(self):
        if self.structures is not None and len(self.structures) != len(self.resources):
            raise ValueError(
                f'structures has {len(self.structures)} entries for {len(self.resources)} resources'
            )
        labels = [r.label for r in self.resources]
        if len(set(labels)) != len(labels):
            raise ValueError('Resource labels must be unique')
        if self.mode.objective == "profit" and self.prices is None:
            raise ValueError('The profit objective needs a prices section')
        return self


# ==================== Result Documents ====================

class PolicyDocument(BaseModel):
    """Dense Q (N_S+1 rows of N_S values, masked entries exactly 0), q per breakpoint, γ per system interval."""
    label: str
    Q: List[List[float]]
    q: List[float]
    gamma_kW: Optional[List[float]] = None


class MarketDocument(BaseModel):
    da: PolicyDocument
    id: PolicyDocument


class BidResultDocument(BaseModel):
    scenario: ScenarioFile
    policies: List[PolicyDocument]
    market: MarketDocument
    gamma_agg_kW: List[float]
    objective_value: float
    standalone_kW: List[float]
    sigma: Optional[float] = None
    stats: dict[str, Any] = Field(default_factory=dict)


class SimulationSummary(BaseModel):
    """Outcome of one `simulate` run."""
    result: str
    signal: str
    violations: List[str] = Field(default_factory=list)
    trace_csv: Optional[str] = None
    regulation_csv: Optional[str] = None


# ==================== Error Rendering ====================

RESOURCE_TYPES = ("battery", "freezer", "turbine", "generic")


def json_pointer(loc: tuple) -> str:
    """'/resources/0/p_max_kW' for pydantic location ('resources', 0, 'battery', 'p_max_kW')."""
    parts = [str(p) for p in loc if p not in RESOURCE_TYPES]
    return "/" + "/".join(p.replace("~", "~0").replace("/", "~1") for p in parts)


def validation_problems(error: ValidationError) -> list[str]:
    return [f"{json_pointer(tuple(e['loc']))}: {e['msg']}" for e in error.errors()]
