"""
Toolkit Configuration

Pydantic models for type-safe experiment configuration.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator


class DomainSpec(BaseModel):
    """Reference to a gallery domain."""

    name: str = Field(..., description="Gallery domain name")
    params: Dict[str, Any] = Field(default_factory=dict, description="Gallery parameters")

    def build(self) -> Any:
        """Construct the ImplicitDomain this spec names."""
        from .core import gallery_domain

        return gallery_domain(self.name, **self.params)


class SetSpec(BaseModel):
    """Selection of the boundary set E.

    ``all``, ``box`` and ``ball`` select indices of the sampled boundary cloud;
    ``csv`` reads a point cloud file and ``generator`` builds a parametric cloud.
    """

    kind: Literal["all", "box", "ball", "csv", "generator"] = Field(
        "all", description="How E is selected"
    )
    lo: Optional[List[float]] = Field(None, description="Lower box corner")
    hi: Optional[List[float]] = Field(None, description="Upper box corner")
    center: Optional[List[float]] = Field(None, description="Ball center")
    radius: Optional[float] = Field(None, gt=0, description="Ball radius")
    path: Optional[Path] = Field(None, description="CSV point cloud")
    generator: Optional[str] = Field(None, description="Cloud generator name")
    params: Dict[str, Any] = Field(default_factory=dict, description="Generator parameters")

    @model_validator(mode="after")
    def check_kind_fields(self) -> "SetSpec":
        if self.kind == "box" and (self.lo is None or self.hi is None):
            raise ValueError("box selection needs 'lo' and 'hi'")
        if self.kind == "ball" and (self.center is None or self.radius is None):
            raise ValueError("ball selection needs 'center' and 'radius'")
        if self.kind == "csv" and self.path is None:
            raise ValueError("csv selection needs 'path'")
        if self.kind == "generator" and self.generator is None:
            raise ValueError("generator selection needs 'generator'")
        return self


class PorosityConfig(BaseModel):
    """Parameters of the porous-cube refinement."""

    M: float = Field(2.0, gt=1.0, description="Ball dilation of porous cubes")
    delta: float = Field(0.05, gt=0.0, lt=1.0, description="Porosity threshold")
    beta: float = Field(4.0, gt=0.0, description="Packing exponent, must exceed beta0")
    tau: float = Field(0.1, gt=0.0, lt=1.0, description="Allowed relative mass loss")
    t: float = Field(1e-3, gt=0.0, lt=1.0, description="Shell thickness")
    rho: float = Field(0.01, gt=0.0, le=1.0, description="Lower bound on mu(E)/mu(root)")
    M0: Optional[float] = Field(None, gt=1.0, description="Recorded bound on M")

    @model_validator(mode="after")
    def check_m0(self) -> "PorosityConfig":
        if self.M0 is not None and self.M >= self.M0:
            raise ValueError(f"M={self.M} must stay below M0={self.M0}")
        return self


class SawtoothParams(BaseModel):
    """Operating point of the sawtooth constructions."""

    C0: float = Field(7.0, gt=1.0, description="Dilation selecting cubes near E")
    C_tilde: int = Field(8, ge=1, description="Path completion length")
    lam: float = Field(9.0 / 8.0, gt=1.0, description="Cube dilation lambda")
    K_inner: float = Field(3.0, ge=3.0, description="Whitney constant for the inner forest")
    K_outer: float = Field(12.0, ge=12.0, description="Whitney constant for R^D minus E")
    levels_below_mesh: int = Field(3, ge=1, description="Forest depth below the mesh scale")


class WoSParams(BaseModel):
    """Walk-on-spheres estimator settings."""

    n_walks: int = Field(20000, ge=1000, description="Walks per estimate")
    eps_shell: float = Field(1e-4, gt=0.0, description="Boundary shell thickness")
    max_steps: int = Field(20000, ge=1, description="Step cap per walk")
    escape_factor: float = Field(1000.0, gt=1.0, description="Escape radius in units of r0")
    chunk_size: int = Field(4096, ge=1, description="Walks per random substream")
    workers: int = Field(1, ge=1, description="Worker threads")


class PipelineConfig(BaseModel):
    """Complete experiment pipeline configuration."""

    pipeline: Literal["main-theorem", "in-and-out", "verify-nta", "sub-nta"] = Field(
        "main-theorem", description="Pipeline preset"
    )
    domain: DomainSpec = Field(..., description="Base domain")
    E: SetSpec = Field(default_factory=SetSpec, description="Boundary set E")
    porosity: PorosityConfig = Field(default_factory=PorosityConfig)
    sawtooth: SawtoothParams = Field(default_factory=SawtoothParams)
    wos: WoSParams = Field(default_factory=WoSParams)

    seed: int = Field(42, description="Global random seed")
    output_dir: Path = Field(Path("gmt-out"), description="Report bundle directory")
    h: float = Field(2.0 ** -5, gt=0.0, description="Boundary mesh")
    c0: float = Field(0.25, gt=0.0, le=0.25, description="Cube tree scale ratio")
    depth: int = Field(4, ge=1, description="Cube tree depth")
    z: Optional[List[float]] = Field(None, description="Pole for harmonic measure")
    n_test_sets: int = Field(10, ge=1, description="Test sets F for the sandwich stage")
    beta_epsilon: float = Field(0.3, gt=0.0, lt=2.0, description="Bad-scale threshold")
    beta_scales: int = Field(4, ge=1, description="Dyadic scales in the energy grid")
    C_corkscrew: float = Field(4.0, gt=1.0, description="Corkscrew constant tested")
    emit_plots: bool = Field(False, description="Write plot-ready CSV files")

    @field_validator("output_dir")
    def validate_output_dir(cls, v: Path) -> Path:
        if v.exists() and not v.is_dir():
            raise ValueError(f"Output path is not a directory: {v}")
        return v

    @classmethod
    def from_file(cls, config_path: Union[str, Path]) -> "PipelineConfig":
        """Load configuration from a JSON or YAML file."""
        config_path = Path(config_path)

        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        with open(config_path, "r") as f:
            config_data = yaml.safe_load(f)

        return cls(**config_data)

    def to_file(self, config_path: Union[str, Path]) -> None:
        """Save configuration to a YAML file."""
        config_path = Path(config_path)
        config_path.parent.mkdir(parents=True, exist_ok=True)

        with open(config_path, "w") as f:
            yaml.safe_dump(self.model_dump(mode="json"), f, default_flow_style=False, indent=2)
