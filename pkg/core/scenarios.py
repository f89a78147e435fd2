"""
Dynamics built from a waiting-time distribution

SemiMarkovModel   jump map E applied after each renewal: NZ generator k(t)(E - 1),
                  TCL and Redfield forms derived channel by channel
HazardModel       local generator h(t) L for a GKSL generator L, NZ form derived

plus the operator forms of the worked two-level examples.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .generators import (DEFAULT_DECONVOLUTION_GRID, DEFAULT_SCAN, GeneratorSpec,
                         hazard_tcl, nz_from_semimarkov, to_nz, to_redfield, to_tcl)
from .superop import (IDENTITY, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, KrausMap, SuperOperator,
                      deph_map, diag_map, dissipator, flip_map, liouville, sandwich)
from .timegrid import TimeGrid
from .waiting_time import JumpStatistics, RenewalFunctions, WaitingTimeSpec, build, jump_statistics

logger = logging.getLogger(__name__)


def deconvolution_grid(t_end: float) -> TimeGrid:
    """Default deconvolution step on [0, max(t_end, default end)]"""
    end = max(float(t_end), DEFAULT_DECONVOLUTION_GRID.t_end)
    return TimeGrid(end, int(round(end / DEFAULT_DECONVOLUTION_GRID.step)) + 1)


@dataclass(frozen=True, eq=False)
class SemiMarkovModel:
    """rho_t = sum_n p_n(t) E^n rho_0"""
    kraus: KrausMap
    renewal: RenewalFunctions

    @classmethod
    def from_spec(cls, kraus: KrausMap, spec: WaitingTimeSpec) -> "SemiMarkovModel":
        return cls(kraus, build(spec))

    @property
    def dim(self) -> int:
        return self.kraus.dim

    def nz(self) -> GeneratorSpec:
        return nz_from_semimarkov(self.kraus, self.renewal)

    def tcl(self, scan: TimeGrid = DEFAULT_SCAN) -> GeneratorSpec:
        return to_tcl(self.nz(), scan)

    def redfield(self) -> GeneratorSpec:
        return to_redfield(self.nz())

    def jump_statistics(self, n_max: int, t_end: float) -> JumpStatistics:
        return jump_statistics(self.renewal, n_max, t_end)


@dataclass(frozen=True, eq=False)
class HazardModel:
    """K_t = h(t) L with L a GKSL generator with real damping eigenvalues"""
    generator: SuperOperator
    renewal: RenewalFunctions

    @classmethod
    def from_spec(cls, generator: SuperOperator, spec: WaitingTimeSpec) -> "HazardModel":
        return cls(generator, build(spec))

    @property
    def dim(self) -> int:
        return self.generator.dim

    def tcl(self, scan: TimeGrid = DEFAULT_SCAN) -> GeneratorSpec:
        return hazard_tcl(self.generator, self.renewal, scan)

    def nz(self, t_end: float = DEFAULT_DECONVOLUTION_GRID.t_end) -> GeneratorSpec:
        """Kernels deconvolved on a grid covering [0, t_end]"""
        return to_nz(self.tcl(), deconvolution_grid(t_end))

    def redfield(self, t_end: float = DEFAULT_DECONVOLUTION_GRID.t_end) -> GeneratorSpec:
        return to_redfield(self.nz(t_end))


def lindblad_generator(operators) -> SuperOperator:
    """Sum of dissipators, one per jump operator"""
    operators = [np.asarray(c, dtype=complex) for c in operators]
    if not operators:
        raise ValidationError("at least one jump operator is needed")
    total = dissipator(operators[0])
    for op in operators[1:]:
        total = total + dissipator(op)
    return total


# --- Two-level examples ---

def flip_model(spec: WaitingTimeSpec) -> SemiMarkovModel:
    """Population exchange at every jump"""
    return SemiMarkovModel.from_spec(flip_map(), spec)


def diag_model(spec: WaitingTimeSpec) -> SemiMarkovModel:
    return SemiMarkovModel.from_spec(diag_map(), spec)


def deph_model(spec: WaitingTimeSpec) -> SemiMarkovModel:
    return SemiMarkovModel.from_spec(deph_map(), spec)


def amplitude_damping_model(spec: WaitingTimeSpec) -> HazardModel:
    """h(t) (sigma_- . sigma_+ - {sigma_+ sigma_-, .}/2)"""
    return HazardModel.from_spec(dissipator(SIGMA_MINUS), spec)


def flip_tcl_direct(h: float, mu: float) -> SuperOperator:
    """mu (sigma_- . sigma_+ + sigma_+ . sigma_- - 1) + (h - mu)/2 (sigma_z . sigma_z - 1)"""
    identity = SuperOperator.identity(2)
    exchange = sandwich(SIGMA_MINUS, SIGMA_PLUS) + sandwich(SIGMA_PLUS, SIGMA_MINUS) - identity
    dephasing = sandwich(SIGMA_Z, SIGMA_Z) - identity
    return exchange * mu + dephasing * (0.5 * (h - mu))


def amplitude_damping_nz_direct(k: float, k_sqrt: float) -> SuperOperator:
    """k D[sigma_-] + (k_sqrt - k/2)/2 (sigma_z . sigma_z - 1)

    Smooth parts only; the coherence eigenvalue is -k_sqrt.
    """
    dephasing = sandwich(SIGMA_Z, SIGMA_Z) - SuperOperator.identity(2)
    return dissipator(SIGMA_MINUS) * k + dephasing * (0.5 * (k_sqrt - 0.5 * k))


def factor_of_two_defect() -> float:
    """|| (E_deph - 1) - 2 (E_diag - 1) ||_F, zero for the two-level maps"""
    identity = SuperOperator.identity(2)
    l_deph = liouville(deph_map()) - identity
    l_diag = liouville(diag_map()) - identity
    return l_deph.distance(l_diag * 2.0)


def coherence_factor(maps: np.ndarray, rho0: Optional[np.ndarray] = None) -> np.ndarray:
    """2 Re rho_01(t) for maps applied to |+><+| (the coherence decay factor)"""
    if rho0 is None:
        rho0 = 0.5 * (IDENTITY + SIGMA_PLUS + SIGMA_MINUS)
    vectors = maps @ rho0.reshape(-1, order='F')
    # column stacking: entry (0, 1) sits at index 2
    return 2.0 * vectors[:, 2].real
