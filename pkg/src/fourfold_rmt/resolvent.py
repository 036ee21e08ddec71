"""Minors, their Green functions, resolvent identities and partial expectations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from fourfold_rmt.constants import DEFAULT_MC_RESAMPLES, WARD_RESIDUAL_PER_DIM, identity_tolerance
from fourfold_rmt.ensembles import (
    RESAMPLE_TAG,
    FourfoldMatrix,
    VarianceProfile,
    make_rng,
    neg,
    rebuild_with,
    resample_orbits,
)
from fourfold_rmt.linalg_core import as_square, invert_shifted


def canonical_minor(T: Iterable[int], n: int) -> tuple[int, ...]:
    """Sorted, deduplicated index set reduced mod n."""
    T = tuple(sorted({int(t) % n for t in T}))
    return T


def minor_matrix(h, T: Iterable[int]) -> np.ndarray:
    """H^(T): rows and columns in T set to zero; shape unchanged."""
    h = as_square(h, "H").copy()
    T = list(canonical_minor(T, h.shape[0]))
    h[T, :] = 0
    h[:, T] = 0
    return h


class GreenFunction:
    """G^(T)(z) = (H^(T) - z)^{-1} as an N x N object.

    Entries with a row or column in T are never read by the theory and are
    not exposed: indexing them raises ``IndexError``; :meth:`masked` returns
    them as NaN.
    """

    def __init__(self, full: np.ndarray, z: complex, T: Sequence[int]):
        self._full = full
        self.z = complex(z)
        self.T = tuple(T)
        n = full.shape[0]
        self.n = n
        inside = np.zeros(n, dtype=bool)
        inside[list(self.T)] = True
        self._inside = inside
        self.active = np.flatnonzero(~inside)

    @property
    def eta(self) -> float:
        return self.z.imag

    def _check(self, i: int, j: int) -> None:
        if self._inside[i % self.n] or self._inside[j % self.n]:
            raise IndexError(f"entry ({i}, {j}) lies in a removed row/column of the minor {self.T}")

    def __getitem__(self, ij) -> complex:
        i, j = ij
        self._check(i, j)
        return complex(self._full[i % self.n, j % self.n])

    def masked(self) -> np.ndarray:
        """Full matrix copy with rows/columns in T replaced by NaN."""
        out = self._full.copy()
        out[self._inside, :] = np.nan
        out[:, self._inside] = np.nan
        return out

    def block(self) -> np.ndarray:
        """Compact (N-|T|) x (N-|T|) block on the active indices."""
        return self._full[np.ix_(self.active, self.active)]

    def row(self, i: int) -> np.ndarray:
        """Row i (with NaN in removed columns)."""
        if self._inside[i % self.n]:
            raise IndexError(f"row {i} lies in the removed set {self.T}")
        r = self._full[i % self.n].copy()
        r[self._inside] = np.nan
        return r


def green_minor(h, T: Iterable[int], z: complex) -> GreenFunction:
    """Green function of the minor H^(T) at z (Im z > 0)."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("green functions are evaluated for Im z > 0 only")
    h = as_square(h, "H")
    n = h.shape[0]
    T = canonical_minor(T, n)
    full = np.zeros((n, n), dtype=complex)
    inside = np.zeros(n, dtype=bool)
    inside[list(T)] = True
    act = np.flatnonzero(~inside)
    # H^(T) - z is block diagonal: the active block and -z on T.
    full[np.ix_(act, act)] = invert_shifted(h[np.ix_(act, act)], z)
    full[inside, inside] = -1.0 / z
    return GreenFunction(full, z, T)


def green(h, z: complex) -> np.ndarray:
    """Plain resolvent matrix (T empty)."""
    return green_minor(h, (), z)._full


class _MinorCache:
    def __init__(self, h, z):
        self.h, self.z, self._c = h, z, {}

    def __call__(self, T) -> GreenFunction:
        key = canonical_minor(T, self.h.shape[0])
        if key not in self._c:
            self._c[key] = green_minor(self.h, key, self.z)
        return self._c[key]


@dataclass
class IdentityReport:
    schur: float
    rid1_first: float
    rid1_second: float
    rid2_left: float
    rid2_right: float
    tolerance: float
    checked: int

    @property
    def max_residual(self) -> float:
        return max(self.schur, self.rid1_first, self.rid1_second, self.rid2_left, self.rid2_right)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["max_residual"] = self.max_residual
        d["passed"] = self.passed
        return d


def random_tuples(n: int, count: int, seed: int, max_T: int = 2) -> list[tuple[int, int, int, tuple[int, ...]]]:
    """Index tuples (i, j, k, T) with i, j, k outside T and k not in {i, j}.

    Needs n >= 2; for n = 2 the minor set is empty.
    """
    if n == 1:
        return [(0, 0, 0, ())] * count
    rng = make_rng(seed, 0x7E57)
    out = []
    while len(out) < count:
        size = int(rng.integers(0, max_T + 1))
        size = min(size, n - 2)
        perm = rng.permutation(n)
        T = tuple(sorted(int(t) for t in perm[:size]))
        rest = perm[size:]
        k = int(rest[0])
        i = int(rng.choice(rest[1:]))
        j = int(rng.choice(rest[1:]))
        out.append((i, j, k, T))
    return out


def check_resolvent_identities(h, z: complex, tuples) -> IdentityReport:
    """Max residuals of Schur's formula and the two families of resolvent identities.

    ``tuples`` holds (i, j, k, T). Schur is checked for i; the expansions in k
    need i, j != k; the row/column expansions need i != j.
    """
    h = as_square(h, "H")
    n = h.shape[0]
    z = complex(z)
    cache = _MinorCache(h, z)
    res = dict(schur=0.0, rid1_first=0.0, rid1_second=0.0, rid2_left=0.0, rid2_right=0.0)
    count = 0
    for i, j, k, T in tuples:
        T = canonical_minor(T, n)
        if {i, j, k} & set(T):
            raise ValueError(f"indices ({i}, {j}, {k}) must lie outside T={T}")
        G = cache(T)
        Ti = cache(T + (i,))
        # Schur complement formula
        a = np.setdiff1d(np.arange(n), T + (i,))
        quad = h[i, a] @ Ti._full[np.ix_(a, a)] @ h[a, i] if a.size else 0.0
        res["schur"] = max(res["schur"], abs(1 / G[i, i] - (h[i, i] - z - quad)))
        if k not in (i, j):
            Tk = cache(T + (k,))
            lhs = G[i, j]
            rhs = Tk[i, j] + G[i, k] * G[k, j] / G[k, k]
            res["rid1_first"] = max(res["rid1_first"], abs(lhs - rhs))
            lhs2 = 1 / G[i, i]
            rhs2 = 1 / Tk[i, i] - G[i, k] * G[k, i] / (G[i, i] * Tk[i, i] * G[k, k])
            res["rid1_second"] = max(res["rid1_second"], abs(lhs2 - rhs2))
        if i != j:
            Tj = cache(T + (j,))
            ai = np.setdiff1d(np.arange(n), T + (i,))
            aj = np.setdiff1d(np.arange(n), T + (j,))
            left = -G[i, i] * (h[i, ai] @ Ti._full[ai, j])
            right = -G[j, j] * (Tj._full[i, aj] @ h[aj, j])
            res["rid2_left"] = max(res["rid2_left"], abs(G[i, j] - left))
            res["rid2_right"] = max(res["rid2_right"], abs(G[i, j] - right))
        count += 1
    return IdentityReport(**{k_: float(v) for k_, v in res.items()}, tolerance=identity_tolerance(z.imag), checked=count)


def ward_residuals(gf: GreenFunction) -> np.ndarray:
    """| sum_l |G_kl|^2 - Im G_kk / eta | for every active k."""
    blk = gf.block()
    lhs = np.sum(np.abs(blk) ** 2, axis=1)
    rhs = blk.diagonal().imag / gf.eta
    return np.abs(lhs - rhs)


def check_ward(gf: GreenFunction) -> float:
    """Max Ward-identity residual over rows; raises if it exceeds 1e-10 N."""
    r = ward_residuals(gf)
    worst = float(r.max()) if r.size else 0.0
    if worst > WARD_RESIDUAL_PER_DIM * gf.n:
        raise AssertionError(f"Ward identity residual {worst:.3e} exceeds {WARD_RESIDUAL_PER_DIM * gf.n:.3e}")
    return worst


def _require_minor(gf: GreenFunction, x: int) -> None:
    need = {x % gf.n, neg(x, gf.n)}
    if not need <= set(gf.T):
        raise ValueError(f"minor {gf.T} must contain {sorted(need)}")


def partial_expectation_quadratic(
    gf_minor: GreenFunction, profile: VarianceProfile, x: int, r_full: np.ndarray | None = None
) -> tuple[complex, complex]:
    """Closed-form partial expectations of the quadratic forms in row x.

    Returns ``(sum_a s_xa G_aa, sum_a r_xa G_{a,-a})`` with sums over the
    active indices of a minor containing {x, -x}. These are
    sum_ab E_x[h_xa G_ab h_bx] and sum_ab E_x[h_xa G_ab h_{b,-x}].
    ``r_full`` defaults to ``s`` (real entries).
    """
    _require_minor(gf_minor, x)
    n = gf_minor.n
    a = gf_minor.active
    r = profile.s if r_full is None else r_full
    G = gf_minor._full
    diag = complex(np.sum(profile.s[x, a] * G[a, a]))
    a2 = a[~gf_minor._inside[neg(a, n)]]
    off = complex(np.sum(r[x, a2] * G[a2, neg(a2, n)]))
    return diag, off


@dataclass
class PartialExpectation:
    value: complex
    expectation: complex
    fluctuation: complex
    stderr: float
    resamples: int


def partial_expectation_mc(
    statistic: Callable[[np.ndarray], complex],
    sample: FourfoldMatrix,
    x: int,
    resamples: int = DEFAULT_MC_RESAMPLES,
    seed: int = 0,
) -> PartialExpectation:
    """Monte Carlo E_x and F_x of ``statistic(H)``.

    The minor H^(x,-x) is held fixed while every orbit touching rows/columns
    x and -x is redrawn from the ensemble. ``F_x`` is the observed value minus
    the E_x estimate.
    """
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    value = complex(statistic(sample.h))
    rng = make_rng(sample.seed, RESAMPLE_TAG, x % sample.n, seed)
    ids, vals = resample_orbits(sample, x % sample.n, rng, resamples)
    draws = np.array([complex(statistic(rebuild_with(sample, ids, v))) for v in vals])
    est = complex(draws.mean())
    se = float(np.sqrt(np.mean(np.abs(draws - est) ** 2) / resamples))
    return PartialExpectation(value, est, value - est, se, resamples)


__all__ = [
    "GreenFunction",
    "IdentityReport",
    "PartialExpectation",
    "check_resolvent_identities",
    "check_ward",
    "green",
    "green_minor",
    "minor_matrix",
    "partial_expectation_mc",
    "partial_expectation_quadratic",
    "random_tuples",
    "ward_residuals",
]
