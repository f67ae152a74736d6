"""
Toolkit Report Models

Pydantic models for the reports and estimates the toolkit emits.
"""

from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

Verdict = Literal["pass", "fail", "indeterminate"]


class WoSEstimate(BaseModel):
    """Walk-on-spheres estimate of a harmonic measure value."""

    value: float = Field(..., ge=0.0, le=1.0, description="Estimated harmonic measure")
    n_walks: int = Field(..., description="Number of walks")
    hits: int = Field(..., description="Walks whose exit point lies in the set")
    std_err: float = Field(..., description="Binomial standard error")
    eps_shell: float = Field(..., description="Boundary shell thickness")
    escape_radius: Optional[float] = Field(None, description="Escape radius, if any")
    seed: int = Field(..., description="Global seed")
    escaped_fraction: float = Field(..., description="Fraction of escaped walks")
    unreliable: bool = Field(False, description="More than half the walks escaped")


class DoublingProfile(BaseModel):
    """Empirical local doubling constant of a discrete measure."""

    C_mu: float = Field(..., ge=1.0, description="Empirical doubling constant")
    region_center: List[float] = Field(..., description="Center of the tested region")
    region_radius: float = Field(..., description="Radius of the tested region")
    scale_range: Tuple[float, float] = Field(..., description="(r_lo, r_hi)")
    beta0: float = Field(..., description="log2 of C_mu")
    n_pairs: int = Field(0, description="Ratios evaluated")
    skipped: int = Field(0, description="Pairs skipped for zero-mass denominators")


class UniformityFit(BaseModel):
    """Empirical envelope of d_Omega against relative cube distance."""

    s_grid: List[float] = Field(..., description="Relative distance grid")
    envelope: List[float] = Field(..., description="Max d_Omega with relative distance <= s")
    log_ratio_max: float = Field(..., description="max d_Omega / log2(2 + s) over the sample")
    bound: float = Field(..., description="Bound on the log ratio for consistency")
    consistent: bool = Field(..., description="Uniformity-consistent flag")
    n_pairs: int = Field(..., description="Pairs evaluated")


class AxiomCheck(BaseModel):
    """Outcome of one cube-tree axiom."""

    name: str
    passed: bool
    witness: Optional[Dict[str, Any]] = Field(None, description="Worst-case witness")


class CubeAxiomReport(BaseModel):
    """Partition, nesting and sandwich verdicts for a cube tree."""

    partition: AxiomCheck
    nesting: AxiomCheck
    sandwich: AxiomCheck
    c1_achieved: float = Field(..., description="Largest c1 making the inner ball inclusion hold")

    @property
    def all_passed(self) -> bool:
        return self.partition.passed and self.nesting.passed and self.sandwich.passed


class CarlesonReport(BaseModel):
    """Carleson sums over every cube of a tree."""

    C1: float = Field(..., description="Sup of the normalized sums")
    argmax: Optional[Tuple[int, int]] = Field(None, description="(level, index) attaining C1")
    ratios: List[Tuple[int, int, float]] = Field(default_factory=list)
    excluded: List[Tuple[int, int]] = Field(
        default_factory=list, description="Zero-mass cubes left out of the sup"
    )


class ShellDecayFit(BaseModel):
    """Power-law fit of shell mass ratios."""

    t_grid: List[float]
    envelope: List[float]
    t0_hat: Optional[float] = None
    alpha_hat: Optional[float] = None
    residual_max: Optional[float] = Field(None, description="Max log-log residual")
    undefined: bool = Field(False, description="All shells were empty")
    n_cubes: int = 0


class RegularityProfile(BaseModel):
    """Upper and lower Ahlfors constants at the tested scales."""

    A_upper: float
    A_lower: float
    witness_upper: Optional[Tuple[List[float], float]] = None
    witness_lower: Optional[Tuple[List[float], float]] = None
    n_balls: int = 0


class TraceReport(BaseModel):
    """Result of the boundary trace comparison at tolerance 2h."""

    passed: bool
    max_E_gap: float = Field(..., description="Max distance from E to the sawtooth boundary")
    max_trace_gap: float = Field(..., description="Max distance from the trace to E")
    witness: Optional[List[float]] = None
    n_boundary_samples: int = 0
    n_trace_samples: int = 0


class BetaRecord(BaseModel):
    """Bilateral beta number at one center and scale."""

    xi: List[float]
    r: float
    value: float = Field(..., ge=0.0)
    plane_normal: List[float]
    flat_term: float = Field(..., ge=0.0)
    bilateral_term: float = Field(..., ge=0.0)
    degenerate: bool = False


class CarlesonEnergyReport(BaseModel):
    """Discrete sigma-mass of the bad set B_epsilon."""

    epsilon: float
    xi0: List[float]
    r0: float
    estimate: float = Field(..., ge=0.0)
    C_UR_emp: float = Field(..., ge=0.0)
    n_cells: int = 0
    n_bad: int = 0


class AinftyRow(BaseModel):
    xi: List[float]
    r: float
    F_id: str
    omega_ratio: float = Field(..., ge=0.0)
    hd_ratio: float = Field(..., ge=0.0)


class AinftyScatter(BaseModel):
    """Scatter of harmonic-measure ratios against Hausdorff ratios."""

    rows: List[AinftyRow] = Field(default_factory=list)
    domain_id: str
    seed: int
    modulus: Dict[str, Tuple[float, float]] = Field(
        default_factory=dict,
        description="epsilon -> (delta for omega=>H^d, delta for H^d=>omega)",
    )
    dropped: int = 0


class DoublingRow(BaseModel):
    xi: List[float]
    r: float
    ratio: Optional[float]
    std_err: Optional[float]
    indeterminate: bool = False


class DoublingTable(BaseModel):
    """Harmonic measure doubling ratios over a grid."""

    rows: List[DoublingRow] = Field(default_factory=list)
    sup_ratio: Optional[float] = None


class ComparisonRow(BaseModel):
    kind: Literal["ratio", "wbig", "harnack"]
    lhs: float
    rhs: float
    ratio: Optional[float]
    indeterminate: bool = False


class ComparisonReport(BaseModel):
    """Both sides of the harmonic measure comparisons with empirical constants."""

    rows: List[ComparisonRow] = Field(default_factory=list)
    constants: Dict[str, Optional[float]] = Field(default_factory=dict)


class MaxPrincipleReport(BaseModel):
    """Comparison of harmonic measures of a shared boundary set."""

    inner: WoSEstimate
    outer: WoSEstimate
    margin: float = Field(..., description="outer - inner + 3 joint std_err")
    passed: bool


class StageVerdict(BaseModel):
    stage: str
    verdict: Verdict
    details: Dict[str, Any] = Field(default_factory=dict)


class ReportBundle(BaseModel):
    """Manifest and verdicts of one pipeline run."""

    pipeline: str
    seed: int
    version: str
    config: Dict[str, Any]
    started: datetime = Field(default_factory=datetime.utcnow)
    wall_clock: float = 0.0
    artifacts: Dict[str, str] = Field(default_factory=dict, description="path -> sha256")
    bundle_sha256: Optional[str] = None
    verdicts: List[StageVerdict] = Field(default_factory=list)

    @property
    def overall(self) -> Verdict:
        kinds = {v.verdict for v in self.verdicts}
        if "fail" in kinds:
            return "fail"
        if "indeterminate" in kinds or not kinds:
            return "indeterminate"
        return "pass"
