"""Semicircle density, its Stieltjes transform, and empirical counterparts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fourfold_rmt.constants import FIXED_POINT_TOL, M_ESTIMATE_MIN_C
from fourfold_rmt.linalg_core import hermitian_eigenvalues, invert_shifted


@dataclass(frozen=True)
class SpectralPoint:
    E: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)


def _as_z(z) -> complex | np.ndarray:
    if isinstance(z, SpectralPoint):
        return z.z
    return np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)


def rho(x):
    """Semicircle density sqrt((4 - x^2)_+) / (2 pi)."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2 * np.pi)
    return float(out) if out.ndim == 0 else out


def m_semicircle(z):
    """Stieltjes transform of the semicircle law, the root of m + 1/(m + z) = 0 with Im m > 0.

    Both roots of m^2 + z m + 1 = 0 are formed (the small one as the reciprocal
    of the large one, to avoid cancellation) and the one in the upper half plane
    is kept.
    """
    z = _as_z(z)
    zz = np.asarray(z, dtype=complex)
    if np.any(zz.imag <= 0):
        raise ValueError("m_semicircle requires Im z > 0")
    root = np.sqrt(zz * zz - 4.0)
    r1 = (-zz + root) / 2
    r2 = (-zz - root) / 2
    big = np.where(np.abs(r1) >= np.abs(r2), r1, r2)
    small = 1.0 / big
    m = np.where(big.imag > 0, big, small)
    return complex(m) if m.ndim == 0 else m


def fixed_point_residual(z) -> float | np.ndarray:
    """|m + 1/(m + z)| at the computed m."""
    m = m_semicircle(z)
    z = _as_z(z)
    r = np.abs(m + 1.0 / (m + z))
    return float(r) if np.ndim(r) == 0 else r


def m_empirical(h, z, method: str = "trace") -> complex:
    """m_N(z) = N^{-1} Tr (H - z)^{-1}.

    ``method="trace"`` averages the resolvent diagonal; ``method="spectrum"``
    sums (lambda_i - z)^{-1} over the eigenvalues.
    """
    z = complex(_as_z(z))
    if z.imag <= 0:
        raise ValueError("m_empirical requires Im z > 0")
    h = np.asarray(h)
    n = h.shape[0]
    if method == "trace":
        return complex(np.trace(invert_shifted(h, z)) / n)
    if method == "spectrum":
        lam = hermitian_eigenvalues(h)
        return complex(np.mean(1.0 / (lam - z)))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class MEstimateReport:
    c: float
    lower_abs: bool
    upper_abs: bool
    inverse_eta: bool
    lower_im: bool

    @property
    def passed(self) -> bool:
        return self.c >= M_ESTIMATE_MIN_C and all(
            (self.lower_abs, self.upper_abs, self.inverse_eta, self.lower_im)
        )


def check_m_estimates(zs) -> MEstimateReport:
    """Largest c <= 1 with c <= |m|, |m| <= 1 - c eta, Im m >= c eta on the grid; plus |m| <= 1/eta."""
    zs = np.asarray(zs, dtype=complex).ravel()
    if np.any(np.abs(zs.real) > 10) or np.any(zs.imag <= 0) or np.any(zs.imag > 10):
        raise ValueError("grid must lie in {|E| <= 10, 0 < eta <= 10}")
    m = m_semicircle(zs)
    am, eta = np.abs(m), zs.imag
    c = min(1.0, float(am.min()), float(((1 - am) / eta).min()), float((m.imag / eta).min()))
    return MEstimateReport(
        c=c,
        lower_abs=bool(np.all(c <= am)),
        upper_abs=bool(np.all(am <= 1 - c * eta + 1e-15)),
        inverse_eta=bool(np.all(am <= 1 / eta)),
        lower_im=bool(np.all(m.imag >= c * eta - 1e-15)),
    )


def density_mass(a: float = -2.0, b: float = 2.0) -> float:
    """Integral of rho over [a, b] within [-2, 2], by quadrature with the algebraic edge weight."""
    from scipy.integrate import quad

    a, b = max(a, -2.0), min(b, 2.0)
    if b <= a:
        return 0.0
    if (a, b) == (-2.0, 2.0):
        val, _ = quad(lambda x: 1.0 / (2 * np.pi), -2.0, 2.0, weight="alg", wvar=(0.5, 0.5))
        return float(val)
    val, _ = quad(rho, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(val)


def stieltjes_density(h, E, eta: float) -> np.ndarray:
    """(1/pi) Im m_N(E + i eta) for each E, through the spectrum."""
    lam = hermitian_eigenvalues(h)
    E = np.atleast_1d(np.asarray(E, dtype=float))
    vals = np.mean(1.0 / (lam[None, :] - (E[:, None] + 1j * eta)), axis=1)
    return vals.imag / np.pi


__all__ = [
    "FIXED_POINT_TOL",
    "MEstimateReport",
    "SpectralPoint",
    "check_m_estimates",
    "density_mass",
    "fixed_point_residual",
    "m_empirical",
    "m_semicircle",
    "rho",
    "stieltjes_density",
]
