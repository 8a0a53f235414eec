"""Analytic TM resonances of the partially dielectric-filled open cavity.

The dielectric section (0 <= z <= l_d) is shorted at z = 0 and meets a
below-cutoff air section at z = l_d. With Ez ~ cos(beta z) in the
dielectric and Ez ~ exp(-alpha (z - l_d)) in the air, continuity of the
transverse E and H fields at the interface gives

    beta tan(beta l_d) = eps_r alpha

which is solved here for the semi-infinite air section. See
docs/physics_notes.md for the derivation.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.optimize import bisect

from .const import C0, ROOT_RTOL, ROOT_SCAN_STEP_HZ
from .errors import AboveCutoff, BandOutsideTrappedRegime

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class CavitySpec:
    """Cross-section, section lengths and filler permittivity."""

    a: float
    b: float
    l_d: float
    l_air: float
    eps_r: float

    def __post_init__(self) -> None:
        """Check sizes are positive and the filler gives contrast."""
        for key in ("a", "b", "l_d", "l_air"):
            if getattr(self, key) <= 0:
                raise ValueError(f"cavity {key} must be > 0")
        if self.eps_r < 1.0:
            raise ValueError("cavity eps_r must be >= 1")

    @property
    def length(self) -> float:
        """Total cavity length l_d + l_air."""
        return self.l_d + self.l_air


@dataclass(frozen=True)
class TmMode:
    """One trapped TM_mn resonance."""

    m: int
    n: int
    branch: int
    freq: float
    beta_d: float
    alpha_air: float


def cutoff_wavenumber(spec: CavitySpec, m: int, n: int) -> float:
    """kc = sqrt((m pi / a)^2 + (n pi / b)^2)."""
    if m < 1 or n < 1:
        raise ValueError("TM modes need m, n >= 1")
    return math.hypot(m * math.pi / spec.a, n * math.pi / spec.b)


def cutoff_frequency(spec: CavitySpec, m: int, n: int) -> float:
    """Cutoff frequency (Hz) of the air-filled cross-section."""
    return C0 * cutoff_wavenumber(spec, m, n) / (2.0 * math.pi)


def dielectric_cutoff_frequency(spec: CavitySpec, m: int, n: int) -> float:
    """Cutoff frequency (Hz) of the dielectric-filled cross-section."""
    return cutoff_frequency(spec, m, n) / math.sqrt(spec.eps_r)


def evanescent_rate(spec: CavitySpec, m: int, n: int, freq: float) -> float:
    """Attenuation constant alpha (Np/m) in the air section."""
    kc = cutoff_wavenumber(spec, m, n)
    k0 = 2.0 * math.pi * freq / C0
    if k0 >= kc:
        raise AboveCutoff(
            f"{freq:.6g} Hz is at or above the TM{m}{n} air cutoff "
            f"{cutoff_frequency(spec, m, n):.6g} Hz"
        )
    return math.sqrt(kc * kc - k0 * k0)


def _beta_d(spec: CavitySpec, kc: float, freq: float) -> float:
    k0 = 2.0 * math.pi * freq / C0
    return math.sqrt(max(spec.eps_r * k0 * k0 - kc * kc, 0.0))


def _freq_for_beta(spec: CavitySpec, kc: float, beta: float) -> float:
    return C0 * math.sqrt((beta * beta + kc * kc) / spec.eps_r) / (2 * math.pi)


def matching_residual(spec: CavitySpec, m: int, n: int, freq: float):
    """g(f) = beta_d tan(beta_d l_d) - eps_r alpha."""
    kc = cutoff_wavenumber(spec, m, n)
    beta = _beta_d(spec, kc, freq)
    alpha = evanescent_rate(spec, m, n, freq)
    return beta * math.tan(beta * spec.l_d) - spec.eps_r * alpha


def solve_resonances(
    spec: CavitySpec,
    m: int,
    n: int,
    f_lo: float,
    f_hi: float,
    scan_step: float = ROOT_SCAN_STEP_HZ,
) -> list[TmMode]:
    """All trapped TM_mn roots in [f_lo, f_hi], ascending.

    Each interval between consecutive tan singularities is scanned on a
    grid no coarser than scan_step; sign changes are refined by bisection.
    """
    if f_lo >= f_hi:
        raise ValueError("f_lo must be below f_hi")
    kc = cutoff_wavenumber(spec, m, n)
    fd = dielectric_cutoff_frequency(spec, m, n)
    fa = cutoff_frequency(spec, m, n)
    lo, hi = max(f_lo, fd), min(f_hi, fa)
    if spec.eps_r <= 1.0 or lo >= hi:
        raise BandOutsideTrappedRegime(
            f"band [{f_lo:.6g}, {f_hi:.6g}] Hz misses the trapped regime "
            f"({fd:.6g}, {fa:.6g}) Hz of TM{m}{n}"
        )

    # tan(beta l_d) poles at beta l_d = (k + 1/2) pi split the band
    beta_lo = _beta_d(spec, kc, lo)
    beta_hi = _beta_d(spec, kc, hi)
    k_first = math.ceil(beta_lo * spec.l_d / math.pi - 0.5)
    k_last = math.floor(beta_hi * spec.l_d / math.pi - 0.5)
    poles = [
        _freq_for_beta(spec, kc, (k + 0.5) * math.pi / spec.l_d)
        for k in range(max(k_first, 0), k_last + 1)
    ]
    edges = [lo, *[p for p in poles if lo < p < hi], hi]

    def g(freq):
        return matching_residual(spec, m, n, freq)

    modes = []
    for left, right in zip(edges[:-1], edges[1:]):
        # stay clear of the pole itself and of the cutoff end points
        pad = (right - left) * 1e-9
        count = max(int(math.ceil((right - left) / scan_step)), 1) + 1
        grid = np.linspace(left + pad, right - pad, count + 1)
        values = np.array([g(f) for f in grid])
        signs = np.sign(values)
        for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
            f0, f1 = grid[i], grid[i + 1]
            # a sign flip through +inf/-inf is a pole, not a root
            if values[i] > 0 and values[i + 1] < 0:
                continue
            root = bisect(g, f0, f1, xtol=1e-12, rtol=ROOT_RTOL)
            beta = _beta_d(spec, kc, root)
            modes.append(
                TmMode(
                    m=m,
                    n=n,
                    branch=int(math.floor(beta * spec.l_d / math.pi)),
                    freq=float(root),
                    beta_d=beta,
                    alpha_air=evanescent_rate(spec, m, n, root),
                )
            )
    modes.sort(key=lambda mode: mode.freq)
    _LOGGER.debug(
        "TM%d%d: %d roots in [%.6g, %.6g] Hz", m, n, len(modes), f_lo, f_hi
    )
    return modes


def mode_table(
    spec: CavitySpec,
    pairs,
    f_lo: float,
    f_hi: float,
    scan_step: float = ROOT_SCAN_STEP_HZ,
) -> list[TmMode]:
    """Roots for several (m, n) pairs; pairs outside the regime are skipped."""
    table = []
    for m, n in pairs:
        try:
            table.extend(
                solve_resonances(spec, m, n, f_lo, f_hi, scan_step)
            )
        except BandOutsideTrappedRegime as err:
            _LOGGER.info("Skipping TM%d%d: %s", m, n, err)
    table.sort(key=lambda mode: (mode.freq, mode.m, mode.n))
    return table
