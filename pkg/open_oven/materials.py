"""Substance properties and their temperature/cure dependence."""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .const import EPS0, R_GAS, T_REF

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class CureKinetics:
    """Kamal-Sourour autocatalytic cure law parameters."""

    a1: float
    e1: float
    a2: float = 0.0
    e2: float = 1.0
    m: float = 0.0
    n: float = 1.0
    dh: float = 0.0
    alpha_gel: float = 0.5
    shrink: float = 0.0

    def __post_init__(self) -> None:
        """Reject parameter sets that give negative rates."""
        if self.a1 < 0 or self.a2 < 0:
            raise ValueError("pre-exponential rates must be >= 0")
        if self.e1 <= 0 or self.e2 <= 0:
            raise ValueError("activation energies must be > 0")
        if self.m < 0 or self.n <= 0:
            raise ValueError("reaction orders need m >= 0 and n > 0")
        if not 0.0 < self.alpha_gel < 1.0:
            raise ValueError("alpha_gel must lie in (0, 1)")
        if self.dh < 0:
            raise ValueError("exotherm dh must be >= 0")

    def rate(self, temperature, alpha):
        """Return dalpha/dt for temperature (K) and degree of cure.

        dalpha/dt = (a1 exp(-e1/RT) + a2 exp(-e2/RT) alpha^m) (1-alpha)^n
        """
        t = np.asarray(temperature, dtype=float)
        a = np.clip(np.asarray(alpha, dtype=float), 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            inv_rt = np.where(t > 0, 1.0 / (R_GAS * np.maximum(t, 1e-300)), 0)
            k1 = np.where(t > 0, self.a1 * np.exp(-self.e1 * inv_rt), 0.0)
            k2 = np.where(t > 0, self.a2 * np.exp(-self.e2 * inv_rt), 0.0)
        return (k1 + k2 * a**self.m) * (1.0 - a) ** self.n


@dataclass(frozen=True)
class Material:
    """Electromagnetic, thermal and cure description of one substance."""

    name: str
    eps_r: float
    tan_delta: float
    density: float
    heat_capacity: float
    conductivity_thermal: float
    cte: float = 0.0
    modulus: float = 0.0
    poisson: float = 0.3
    cure: CureKinetics | None = None
    eps_slope_T: float = 0.0
    tan_slope_T: float = 0.0
    tan_slope_alpha: float = 0.0

    def __post_init__(self) -> None:
        """Enforce the physical bounds of the stored values."""
        if self.eps_r < 1.0:
            raise ValueError(f"{self.name}: eps_r must be >= 1")
        if self.tan_delta < 0.0:
            raise ValueError(f"{self.name}: tan_delta must be >= 0")
        for key in ("density", "heat_capacity", "conductivity_thermal"):
            if getattr(self, key) <= 0.0:
                raise ValueError(f"{self.name}: {key} must be > 0")
        if not -1.0 < self.poisson < 0.5:
            raise ValueError(f"{self.name}: poisson must lie in (-1, 0.5)")

    @property
    def volumetric_heat_capacity(self) -> float:
        """rho * cp in J/(m^3 K)."""
        return self.density * self.heat_capacity


def effective_em(mat: Material, temperature=T_REF, alpha=0.0):
    """Linearized (eps_r, tan_delta) at temperature and degree of cure.

    Works element-wise on arrays. Values are clamped to eps_r >= 1 and
    tan_delta >= 0 instead of extrapolating past them.
    """
    dt = np.asarray(temperature, dtype=float) - T_REF
    a = np.asarray(alpha, dtype=float)
    eps = mat.eps_r + mat.eps_slope_T * dt
    tan = mat.tan_delta + mat.tan_slope_T * dt + mat.tan_slope_alpha * a
    eps = np.maximum(eps, 1.0)
    tan = np.maximum(tan, 0.0)
    if eps.ndim == 0 and tan.ndim == 0:
        return float(eps), float(tan)
    return np.broadcast_arrays(eps, tan)


def effective_conductivity(mat: Material, freq, temperature=T_REF, alpha=0.0):
    """Equivalent ohmic conductivity (S/m) of the loss tangent at freq."""
    if np.any(np.asarray(freq) <= 0):
        raise ValueError("frequency must be > 0")
    eps, tan = effective_em(mat, temperature, alpha)
    sigma = 2.0 * math.pi * np.asarray(freq) * EPS0 * np.asarray(eps) * tan
    if np.ndim(sigma) == 0:
        return float(sigma)
    return sigma


def conductivity_from_em(eps_r, tan_delta, freq):
    """sigma = 2 pi f eps0 eps_r tan_delta for already evaluated props."""
    return 2.0 * math.pi * freq * EPS0 * np.asarray(eps_r) * tan_delta


def _library() -> dict[str, Material]:
    polymer_kinetics = CureKinetics(
        a1=5e5, e1=6e4, a2=0.0, e2=6e4, m=0.0, n=1.0, dh=3e5,
        alpha_gel=0.6, shrink=0.02,
    )
    return {
        "air": Material(
            "air", 1.0, 0.0, 1.2, 1005.0, 0.026,
        ),
        "filler": Material(
            "filler", 6.0, 0.0005, 3000.0, 800.0, 3.0,
            cte=7e-6, modulus=200e9, poisson=0.25,
        ),
        "solder-sample": Material(
            "solder-sample", 4.6, 0.6, 7400.0, 220.0, 5.0,
            cte=22e-6, modulus=30e9, poisson=0.35,
        ),
        "borosilicate": Material(
            "borosilicate", 4.6, 0.0037, 2230.0, 830.0, 1.14,
            cte=3.3e-6, modulus=64e9, poisson=0.2,
        ),
        "idealized-polymer": Material(
            "idealized-polymer", 3.5, 0.05, 1200.0, 1200.0, 0.2,
            cte=60e-6, modulus=3e9, poisson=0.35,
            cure=polymer_kinetics, tan_slope_alpha=-0.03,
        ),
    }


BUNDLED_MATERIALS: dict[str, Material] = _library()


@dataclass
class MaterialTable:
    """Name-indexed set of materials with a stable integer ordering."""

    materials: dict[str, Material] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Air is always present as the background medium."""
        if "air" not in self.materials:
            self.materials = {
                "air": BUNDLED_MATERIALS["air"], **self.materials
            }

    @property
    def names(self) -> list[str]:
        """Material names in index order."""
        return list(self.materials)

    def index(self, name: str) -> int:
        """Integer index of a material name."""
        return self.names.index(name)

    def __getitem__(self, key) -> Material:
        if isinstance(key, (int, np.integer)):
            return self.materials[self.names[int(key)]]
        return self.materials[key]

    def __contains__(self, name) -> bool:
        return name in self.materials

    def __len__(self) -> int:
        return len(self.materials)

    def property_array(self, attr: str) -> np.ndarray:
        """One value of attr per material index."""
        return np.array(
            [getattr(mat, attr) for mat in self.materials.values()],
            dtype=float,
        )
