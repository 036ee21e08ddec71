"""The R matrix, the stability parameters Gamma_S/Gamma_R, and the spectral domain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fourfold_rmt.constants import E_MAX, ETA_MAX, POINTS_PER_DECADE
from fourfold_rmt.ensembles import EntryDistribution, VarianceProfile, neg, pseudo_variance_matrix
from fourfold_rmt.linalg_core import inf_operator_norm
from fourfold_rmt.semicircle import m_semicircle


@dataclass(frozen=True)
class RMatrix:
    """r_xy = E h_xy^2 restricted to x != -x, y != -y."""

    r: np.ndarray
    indices: np.ndarray
    full: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.r.shape[0]


def r_matrix(profile: VarianceProfile, dist: EntryDistribution | str) -> RMatrix:
    """Build R from the profile and the entry law (analytic second moments)."""
    full = pseudo_variance_matrix(profile, dist)
    n = profile.n
    idx = np.arange(n)
    keep = idx[idx != neg(idx, n)]
    return RMatrix(full[np.ix_(keep, keep)], keep, full)


@dataclass(frozen=True)
class GammaValues:
    z: complex
    gamma_s: float
    gamma_r: float

    @property
    def gamma(self) -> float:
        return max(self.gamma_s, self.gamma_r)

    @property
    def singular(self) -> bool:
        return not (math.isfinite(self.gamma_s) and math.isfinite(self.gamma_r))


def stability_norm(m2: complex, a: np.ndarray) -> float:
    """||(1 - m^2 a)^{-1}||_inf; ``inf`` if the matrix is numerically singular."""
    k = a.shape[0]
    if k == 0:
        return 1.0
    mat = np.eye(k) - m2 * a
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError:
        return math.inf
    if not np.all(np.isfinite(inv)):
        return math.inf
    return inf_operator_norm(inv)


def gamma_values(z: complex, S, R) -> GammaValues:
    """Gamma_S, Gamma_R and their maximum at z.

    ``S`` may be a profile or an array, ``R`` an :class:`RMatrix` or an array.
    A singular (1 - m^2 S) is reported as an infinite value rather than raised.
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("Gamma is defined for Im z > 0")
    s = S.s if isinstance(S, VarianceProfile) else np.asarray(S, dtype=float)
    r = R.r if isinstance(R, RMatrix) else np.asarray(R, dtype=float)
    m2 = m_semicircle(z) ** 2
    return GammaValues(z, stability_norm(m2, s), stability_norm(m2, r))


class GammaEvaluator:
    """Gamma_S and Gamma_R along many z for one (S, R), via cached eigendecompositions.

    S and R are symmetric, so (1 - m^2 A)^{-1} = V diag(1 / (1 - m^2 w)) V^T
    with the real eigenpairs (w, V) of A computed once.
    """

    def __init__(self, S, R):
        s = S.s if isinstance(S, VarianceProfile) else np.asarray(S, dtype=float)
        r = R.r if isinstance(R, RMatrix) else np.asarray(R, dtype=float)
        self._eig = [self._decompose(a) for a in (s, r)]

    @staticmethod
    def _decompose(a):
        n = a.shape[0]
        if n == 0 or not np.allclose(a, a.T, rtol=0, atol=1e-14):
            return a
        rows = np.arange(n)[:, None]
        if np.array_equal(a, a[0][(np.arange(n)[None, :] - rows) % n]):
            # circulant: a_xy = c_(y-x), eigenvalues N ifft(c)
            return ("circulant", n * np.fft.ifft(a[0]))
        return np.linalg.eigh(a)

    @staticmethod
    def _norm(m2: complex, e) -> float:
        if isinstance(e, np.ndarray):
            return stability_norm(m2, e)
        if isinstance(e[0], str):
            den = 1.0 - m2 * e[1]
            if np.any(np.abs(den) < 1e-300):
                return math.inf
            return float(np.sum(np.abs(np.fft.fft(1.0 / den) / den.size)))
        w, V = e
        den = 1.0 - m2 * w
        if np.any(np.abs(den) < 1e-300):
            return math.inf
        d = 1.0 / den
        re = (V * d.real) @ V.T
        im = (V * d.imag) @ V.T
        return float(np.max(np.sum(np.hypot(re, im), axis=1)))

    def __call__(self, z: complex) -> GammaValues:
        z = complex(z)
        if z.imag <= 0:
            raise ValueError("Gamma is defined for Im z > 0")
        m2 = m_semicircle(z) ** 2
        return GammaValues(z, self._norm(m2, self._eig[0]), self._norm(m2, self._eig[1]))


def eta_grid(M: float, eta_max: float = ETA_MAX, per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Geometric grid from ``eta_max`` down to 1/M, ``per_decade`` points per decade (descending)."""
    lo = 1.0 / M
    if lo > eta_max:
        raise ValueError("empty eta grid: 1/M exceeds eta_max")
    decades = math.log10(eta_max / lo)
    k = max(1, int(math.ceil(decades * per_decade)))
    return np.geomspace(eta_max, lo, k + 1)


def domain_condition(eta: float, gv: GammaValues, M: float, gamma: float) -> bool:
    """1/(M eta) <= min(M^-g / Gamma^3, M^-2g / (Gamma^4 Im m))."""
    G = gv.gamma
    if not math.isfinite(G):
        return False
    im_m = m_semicircle(gv.z).imag
    bound = min(M ** (-gamma) / G**3, M ** (-2 * gamma) / (G**4 * im_m))
    return 1.0 / (M * eta) <= bound


@dataclass
class EtaScan:
    E: float
    eta_E: float
    degenerate: bool
    etas: np.ndarray
    gammas: list[GammaValues]
    condition: np.ndarray


def scan_eta(E: float, gamma: float, profile: VarianceProfile, dist, etas=None, R: RMatrix | None = None, gamma_fn=None) -> EtaScan:
    """Walk the eta grid downward from the top; eta_E is the last point before the first failure.

    The walk stops at the first failing point, so ``etas`` and ``condition``
    cover only the scanned prefix of the grid.
    """
    if not 0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    M = profile.M
    etas = eta_grid(M) if etas is None else np.sort(np.asarray(etas, dtype=float))[::-1]
    if etas.size == 0:
        raise ValueError("empty eta grid")
    R = r_matrix(profile, dist) if R is None else R
    fn = gamma_fn or GammaEvaluator(profile, R)
    gvs, cond = [], []
    for eta in etas:
        gv = fn(complex(E, eta))
        gvs.append(gv)
        cond.append(domain_condition(eta, gv, M, gamma))
        if not cond[-1]:
            break
    cond = np.array(cond)
    k = len(cond)
    if not cond[0]:
        return EtaScan(E, float(etas[0]), True, etas[:k], gvs, cond)
    last = k - 2 if not cond[-1] else k - 1
    return EtaScan(E, float(etas[last]), False, etas[:k], gvs, cond)


def eta_threshold(E: float, gamma: float, profile: VarianceProfile, dist, etas=None, **kw) -> float:
    """eta_E on a discrete grid: smallest grid eta such that the domain inequality holds on all of [eta, 10].

    Returns the top of the grid when the inequality already fails there.
    """
    return scan_eta(E, gamma, profile, dist, etas, **kw).eta_E


@dataclass
class SpectralDomainSpec:
    gamma: float
    E_grid: np.ndarray
    eta_E: np.ndarray
    degenerate: np.ndarray
    points: list[tuple[float, float]]
    scans: list[EtaScan] = field(repr=False, default_factory=list)
    metadata: dict = field(default_factory=dict)

    def contains(self, z: complex, tol: float = 1e-12) -> bool:
        return any(abs(E - z.real) <= tol and abs(eta - z.imag) <= tol * max(1, eta) for E, eta in self.points)


def spectral_domain(gamma: float, profile: VarianceProfile, dist, E_grid=None, etas=None) -> SpectralDomainSpec:
    """Discretised spectral domain {E + i eta : |E| <= 10, eta_E <= eta <= 10}.

    Admitted points are grid points with eta >= eta_E that also satisfy the
    defining inequality themselves.
    """
    E_grid = np.linspace(-E_MAX, E_MAX, 41) if E_grid is None else np.asarray(E_grid, dtype=float)
    if np.any(np.abs(E_grid) > E_MAX):
        raise ValueError("E grid must lie in [-10, 10]")
    R = r_matrix(profile, dist)
    M = profile.M
    fn = GammaEvaluator(profile, R)
    scans, pts = [], []
    for E in E_grid:
        sc = scan_eta(float(E), gamma, profile, dist, etas, R=R, gamma_fn=fn)
        scans.append(sc)
        if sc.degenerate:
            continue
        for eta, ok in zip(sc.etas, sc.condition):
            if eta >= sc.eta_E and ok and eta >= 1.0 / M:
                pts.append((float(E), float(eta)))
    return SpectralDomainSpec(
        gamma=gamma,
        E_grid=E_grid,
        eta_E=np.array([s.eta_E for s in scans]),
        degenerate=np.array([s.degenerate for s in scans]),
        points=pts,
        scans=scans,
        metadata={
            "points_per_decade": POINTS_PER_DECADE if etas is None else None,
            "eta_grid": "geometric 10 -> 1/M" if etas is None else "caller supplied",
            "M": M,
            "note": "continuum condition on [E+i eta, E+10i] checked on the grid only",
        },
    )


def kappa_theta(z: complex) -> tuple[float, float]:
    """kappa = ||E| - 2| and the edge-adapted theta(z)."""
    E, eta = z.real, z.imag
    kappa = abs(abs(E) - 2.0)
    if abs(E) <= 2:
        theta = kappa + eta / math.sqrt(kappa + eta)
    else:
        theta = math.sqrt(kappa + eta)
    return kappa, theta


def gamma_r_bound(z: complex, N: int, C: float = 1.0) -> float:
    """C log N / min(eta + E^2, theta): the a priori upper bound on Gamma_R."""
    z = complex(z)
    _, theta = kappa_theta(z)
    return C * math.log(N) / min(z.imag + z.real**2, theta)


def fit_gamma_r_constant(zs, N: int, gamma_r: np.ndarray) -> float:
    """Smallest C with Gamma_R <= C log N / min(eta + E^2, theta) on the given points."""
    ratios = [g / gamma_r_bound(z, N, 1.0) for z, g in zip(zs, gamma_r)]
    return float(max(ratios))
