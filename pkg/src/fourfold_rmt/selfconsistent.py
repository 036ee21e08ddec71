"""Error terms of the two self-consistent equations and the Lambda control parameters.

For each index x the diagonal equation

    -sum_a s_xa v_a + Upsilon_x = 1/(v_x + m) - 1/m,     v_x = G_xx - m,

and, for x != -x, the counterdiagonal equation

    G_{x,-x} = m^2 sum_{a != -a} r_xa G_{a,-a} + eps_x

are algebraic consequences of the resolvent identities. Every error term is
computed here from freshly inverted minors, with the fluctuation parts Z_x and
eps2_x in their explicit closed forms, so the residuals vanish up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fourfold_rmt.ensembles import EntryDistribution, FourfoldMatrix, VarianceProfile, neg, pseudo_variance_matrix
from fourfold_rmt.linalg_core import as_square
from fourfold_rmt.resolvent import GreenFunction, green_minor
from fourfold_rmt.semicircle import m_semicircle


class MinorCache:
    """Green functions of minors of one matrix at one z, keyed by the index set."""

    def __init__(self, h, z: complex):
        self.h = as_square(h, "H")
        self.z = complex(z)
        self._store: dict[tuple[int, ...], GreenFunction] = {}

    def __call__(self, *T: int) -> np.ndarray:
        n = self.h.shape[0]
        key = tuple(sorted({t % n for t in T}))
        if key not in self._store:
            self._store[key] = green_minor(self.h, key, self.z)
        return self._store[key]._full


def _fresh(h, z):
    h = as_square(h, "H")

    def get(*T):
        return green_minor(h, T, z)._full

    return get


@dataclass
class DiagErrorBreakdown:
    x: int
    v_x: complex
    A: complex
    B: complex
    C: complex
    Y: complex
    Z: complex
    h_xx: complex
    upsilon: complex
    residual: complex
    self_paired: bool
    lhs: complex = field(repr=False, default=0j)
    rhs: complex = field(repr=False, default=0j)


@dataclass
class OffdiagErrorBreakdown:
    x: int
    eps1: complex
    eps2: complex
    eps3: complex
    eps4: complex
    residual: complex

    @property
    def eps(self) -> complex:
        return self.eps1 + self.eps2 - self.eps3 - self.eps4


def _unpack(h, profile, dist):
    if isinstance(h, FourfoldMatrix):
        return h.h, profile if profile is not None else h.profile, dist if dist is not None else h.dist
    return as_square(h, "H"), profile, dist


def diag_breakdown(h, profile: VarianceProfile | None, z: complex, x: int, cache=None) -> DiagErrorBreakdown:
    """All terms of the diagonal self-consistent equation at index x."""
    h, profile, _ = _unpack(h, profile, None)
    n = h.shape[0]
    z = complex(z)
    x %= n
    xm = neg(x, n)
    s = profile.s
    get = cache if cache is not None else _fresh(h, z)
    m = m_semicircle(z)

    G = get()
    v = G.diagonal() - m
    A = np.sum(s[x] * G[:, x] * G[x, :]) / G[x, x]

    if x == xm:
        Gx = get(x)
        act = np.delete(np.arange(n), x)
        hr, hc = h[x, act], h[act, x]
        Gb = Gx[np.ix_(act, act)]
        full_q = hr @ Gb @ hc
        diag_q = np.sum(hr * Gb.diagonal() * hc)
        Z = np.sum((np.abs(hr) ** 2 - s[x, act]) * Gb.diagonal()) + (full_q - diag_q)
        B = C = Y = 0j
        ups = h[x, x] + A - Z
    else:
        Gx = get(x)
        Gxx = get(x, xm)
        act = np.setdiff1d(np.arange(n), [x, xm])
        g_mm = Gx[xm, xm]
        B = np.sum(s[x, act] * Gx[act, xm] * Gx[xm, act]) / g_mm
        C = (
            (abs(h[x, xm]) ** 2 - s[xm, x]) * g_mm
            + h[xm, x] * np.sum(h[x, act] * Gx[act, xm])
            + h[x, xm] * np.sum(Gx[xm, act] * h[act, x])
        )
        Y = (h[x, act] @ Gx[act, xm]) * (Gx[xm, act] @ h[act, x]) / g_mm
        hr, hc = h[x, act], h[act, x]
        Gb = Gxx[np.ix_(act, act)]
        full_q = hr @ Gb @ hc
        diag_q = np.sum(hr * Gb.diagonal() * hc)
        Z = np.sum((np.abs(hr) ** 2 - s[x, act]) * Gb.diagonal()) + (full_q - diag_q)
        ups = h[x, x] + A + B - C - Y - Z

    lhs = -np.sum(s[x] * v) + ups
    rhs = 1.0 / (v[x] + m) - 1.0 / m
    return DiagErrorBreakdown(
        x=x,
        v_x=complex(v[x]),
        A=complex(A),
        B=complex(B),
        C=complex(C),
        Y=complex(Y),
        Z=complex(Z),
        h_xx=complex(h[x, x]),
        upsilon=complex(ups),
        residual=complex(lhs - rhs),
        self_paired=x == xm,
        lhs=complex(lhs),
        rhs=complex(rhs),
    )


def offdiag_breakdown(
    h,
    profile: VarianceProfile | None,
    z: complex,
    x: int,
    dist: EntryDistribution | str | None = None,
    r_full: np.ndarray | None = None,
    cache=None,
) -> OffdiagErrorBreakdown:
    """All terms of the counterdiagonal self-consistent equation at index x (x != -x).

    ``r_full`` is the N x N matrix of E h_xy^2; by default it is derived from
    ``dist`` (or from the sample's distribution), falling back to ``s``.
    """
    h, profile, dist = _unpack(h, profile, dist)
    n = h.shape[0]
    z = complex(z)
    x %= n
    xm = neg(x, n)
    if x == xm:
        raise ValueError(f"offdiag_breakdown needs x != -x, got x={x} with N={n}")
    if r_full is None:
        r_full = pseudo_variance_matrix(profile, dist) if dist is not None else profile.s
    r = r_full[x]
    get = cache if cache is not None else _fresh(h, z)
    m = m_semicircle(z)
    m2 = m * m

    G = get()
    Gx = get(x)
    Gxx = get(x, xm)
    idx = np.arange(n)
    neg_idx = neg(idx, n)
    act = np.setdiff1d(idx, [x, xm])
    act_neg = neg(act, n)
    g_mm = Gx[xm, xm]
    gg = G[x, x] * g_mm
    counter = G[idx, neg_idx]  # G_{a,-a}
    paired = idx == neg_idx

    eps1 = (
        -m2 * (r[x] * G[x, xm] + r[xm] * G[xm, x])
        + m2 * np.sum(r[paired] * G[paired, paired])
        + (gg - m2) * np.sum(r[act] * counter[act])
        - gg * h[x, xm]
    )
    hx = h[x, act]
    Gb = Gxx[np.ix_(act, act_neg)]  # G^(x,-x)_{a,-b}
    full_q = hx @ Gb @ hx
    diag_q = np.sum(hx * Gb.diagonal() * hx)
    eps2 = gg * (np.sum((hx**2 - r[act]) * Gb.diagonal()) + (full_q - diag_q))
    eps3 = g_mm * np.sum(r[act] * G[act, x] * G[x, act_neg])
    eps4 = G[x, x] * np.sum(r[act] * Gx[act, xm] * Gx[xm, act_neg])

    eps = eps1 + eps2 - eps3 - eps4
    resid = G[x, xm] - m2 * np.sum(r[~paired] * counter[~paired]) - eps
    return OffdiagErrorBreakdown(x, complex(eps1), complex(eps2), complex(eps3), complex(eps4), complex(resid))


@dataclass(frozen=True)
class LambdaParams:
    lambda_d: float
    lambda_g: float
    lambda_minus: float

    @property
    def lambda_o(self) -> float:
        return max(self.lambda_g, self.lambda_minus)

    @property
    def lambda_(self) -> float:
        return max(self.lambda_d, self.lambda_o)

    def to_json(self) -> dict:
        return {
            "lambda_d": self.lambda_d,
            "lambda_g": self.lambda_g,
            "lambda_minus": self.lambda_minus,
            "lambda_o": self.lambda_o,
            "lambda": self.lambda_,
        }


def lambda_params(G, m: complex) -> LambdaParams:
    """Lambda_d, Lambda_g, Lambda_- of the full Green function G (T empty).

    Lambda_g ranges over pairs (x, y) with y outside {x, -x} (any x, including
    self-paired ones); Lambda_- over x != -x.
    """
    if isinstance(G, GreenFunction):
        if G.T:
            raise ValueError("lambda_params needs the Green function of H itself (T empty)")
        G = G._full
    G = np.asarray(G)
    n = G.shape[0]
    idx = np.arange(n)
    nidx = neg(idx, n)
    lam_d = float(np.max(np.abs(G.diagonal() - m)))
    mask = np.ones((n, n), dtype=bool)
    mask[idx, idx] = False
    mask[idx, nidx] = False
    lam_g = float(np.max(np.abs(G[mask]))) if mask.any() else 0.0
    np_ = idx != nidx
    lam_m = float(np.max(np.abs(G[idx[np_], nidx[np_]]))) if np_.any() else 0.0
    return LambdaParams(lam_d, lam_g, lam_m)


def all_breakdowns(h, profile=None, z: complex = 1j, dist=None, use_cache: bool = True):
    """Diagonal breakdowns for every x and counterdiagonal ones for every x != -x."""
    hh, profile, dist = _unpack(h, profile, dist)
    n = hh.shape[0]
    cache = MinorCache(hh, z) if use_cache else None
    r_full = pseudo_variance_matrix(profile, dist) if dist is not None else profile.s
    diag = [diag_breakdown(hh, profile, z, x, cache=cache) for x in range(n)]
    off = [
        offdiag_breakdown(hh, profile, z, x, r_full=r_full, cache=cache)
        for x in range(n)
        if x != neg(x, n)
    ]
    return diag, off


def upsilon_from_green(G, s: np.ndarray, m: complex) -> np.ndarray:
    """Upsilon_x for all x read off the diagonal equation: 1/G_xx - 1/m + (S v)_x.

    Equal to the sum of the named error terms up to rounding; avoids all minors.
    """
    G = G._full if isinstance(G, GreenFunction) else np.asarray(G)
    v = G.diagonal() - m
    return 1.0 / G.diagonal() - 1.0 / m + np.asarray(s) @ v


def upsilon_mean(breakdowns, n: int | None = None) -> complex:
    """[Upsilon] = N^{-1} sum_x Upsilon_x over a full set of diagonal breakdowns."""
    xs = sorted(b.x for b in breakdowns)
    n = len(xs) if n is None else n
    if xs != list(range(n)) or not xs:
        raise ValueError("upsilon_mean needs one breakdown for every index 0..N-1")
    return complex(np.mean([b.upsilon for b in breakdowns]))
