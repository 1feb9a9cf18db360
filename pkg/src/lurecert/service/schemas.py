"""Request and response models for the certification service."""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class NetworkSpec(BaseModel):
    weights: list
    activations: list[str]


class SectorSpec(BaseModel):
    sigma1: list
    sigma2: list
    y_upper: list[float]


class SystemSpec(BaseModel):
    """The JSON system document, as accepted by every endpoint."""

    model_config = ConfigDict(populate_by_name=True)

    a: list = Field(alias="A")
    b: list = Field(alias="B")
    c: list = Field(alias="C")
    network: NetworkSpec
    sector: Optional[SectorSpec] = None

    def to_doc(self):
        doc = {"A": self.a, "B": self.b, "C": self.c,
               "network": self.network.model_dump()}
        if self.sector is not None:
            doc["sector"] = self.sector.model_dump()
        return doc


class CheckRequest(BaseModel):
    system: SystemSpec
    metzler_tol: float = 0.0
    hurwitz_margin: float = 1e-9


class SectorRequest(BaseModel):
    system: SystemSpec
    y_values: Optional[list[float]] = None
    y_max: float = 8.0
    count: int = Field(default=9, ge=1)
    grid: int = Field(default=1000, ge=10)


class CertifyRequest(BaseModel):
    system: SystemSpec
    y_probe_max: float = 20.0
    tol: float = 1e-3
    hurwitz_margin: float = 1e-9


class LyapRequest(BaseModel):
    system: SystemSpec
    seed: int = 0
    samples_per_level: int = Field(default=512, ge=1)
    rho_start: Optional[float] = None
    rho_factor: float = 1.3
    rho_cap: float = 1e9
    grid: int = Field(default=50, ge=2)
    y_probe_max: float = 20.0
    tol: float = 1e-3


class SimulateRequest(BaseModel):
    system: SystemSpec
    region: Literal["aizerman", "ellipsoid"] = "aizerman"
    region_scale: float = Field(default=1.0, gt=0.0)
    samples: int = Field(default=100, ge=1)
    seed: int = 0
    horizon: float = 50.0
    step: float = 1e-3
    y_probe_max: float = 20.0
    tol: float = 1e-3
    samples_per_level: int = Field(default=512, ge=1)


class CompareRequest(BaseModel):
    system: SystemSpec
    seed: int = 0
    samples_per_level: int = Field(default=512, ge=1)
    y_probe_max: float = 20.0
    tol: float = 1e-3


class RunResponse(BaseModel):
    command: str
    exit_code: int
    summary: str
    report: dict
    csvs: dict[str, str] = {}
