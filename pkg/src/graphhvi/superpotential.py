"""Piecewise-polynomial densities and their filled-in interval subdifferentials.

A density beta is a finite list of polynomial pieces separated by
breakpoints.  Its antiderivative j (with j(0) = 0) is locally Lipschitz,
and the multivalued map t -> [min, max] of the one-sided limits of beta
is exactly the Clarke subdifferential of j for this class, because
one-sided limits of polynomials always exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P


@dataclass(frozen=True)
class PiecewiseDensity:
    """Density with pieces[i] on (breakpoints[i-1], breakpoints[i]).

    Coefficients are ascending-degree.  Piece 0 extends to -inf, the last
    piece to +inf.
    """

    breakpoints: np.ndarray
    pieces: tuple[np.ndarray, ...]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        if bp.ndim != 1:
            raise ValueError("breakpoints must be a 1-d sequence")
        if len(bp) > 1 and not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        pieces = tuple(np.atleast_1d(np.asarray(c, dtype=float))
                       for c in self.pieces)
        if any(len(c) == 0 for c in pieces):
            raise ValueError("empty coefficient list")
        if len(pieces) != len(bp) + 1:
            raise ValueError("need len(breakpoints) + 1 pieces")
        object.__setattr__(self, "pieces", pieces)
        bp.setflags(write=False)

    def _eval(self, x, idx, order: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        for i, c in enumerate(self.pieces):
            mask = idx == i
            if mask.any():
                cc = P.polyder(c, order) if order else c
                out[mask] = P.polyval(x[mask], cc)
        return out

    def value(self, x) -> np.ndarray:
        """Right-continuous evaluation (breakpoints take the right piece)."""
        x = np.asarray(x, dtype=float)
        return self._eval(x, np.searchsorted(self.breakpoints, x, side="right"))

    def derivative(self, x) -> np.ndarray:
        """Right-continuous derivative of the density."""
        x = np.asarray(x, dtype=float)
        return self._eval(x, np.searchsorted(self.breakpoints, x, side="right"),
                          order=1)

    def one_sided(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Left and right limits at each point (equal off breakpoints)."""
        x = np.asarray(x, dtype=float)
        left = self._eval(x, np.searchsorted(self.breakpoints, x, side="left"))
        right = self._eval(x, np.searchsorted(self.breakpoints, x, side="right"))
        return left, right

    def jumps(self) -> list[tuple[float, float, float]]:
        """Breakpoints where the one-sided limits differ, with their limits."""
        out = []
        for i, b in enumerate(self.breakpoints):
            left = float(P.polyval(b, self.pieces[i]))
            right = float(P.polyval(b, self.pieces[i + 1]))
            if left != right:
                out.append((float(b), left, right))
        return out

    def min_breakpoint_gap(self) -> float:
        if len(self.breakpoints) < 2:
            return math.inf
        return float(np.min(np.diff(self.breakpoints)))


@dataclass(frozen=True)
class SubdifferentialInterval:
    lo: float
    hi: float


@dataclass(frozen=True)
class GrowthCertificate:
    """Certified constant alpha with max(|dj(s)|) <= alpha*(1+|s|) on [-r, r].

    ``global_bound`` is true when both unbounded pieces are (at most)
    linear and the bound extends analytically to the whole line; the
    reported alpha then covers all of R.
    """

    alpha_j: float
    r: float
    global_bound: bool


@dataclass(frozen=True)
class Superpotential:
    """Density together with its exact piecewise-polynomial antiderivative."""

    density: PiecewiseDensity
    antiderivative: tuple[np.ndarray, ...]

    def value(self, x) -> np.ndarray:
        """j(x); continuous with j(0) = 0."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.density.breakpoints, x, side="right")
        out = np.empty(x.shape)
        for i, c in enumerate(self.antiderivative):
            mask = idx == i
            if mask.any():
                out[mask] = P.polyval(x[mask], c)
        return out

    def interval(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Filled-in subdifferential as (lo, hi) arrays."""
        left, right = self.density.one_sided(x)
        return np.minimum(left, right), np.maximum(left, right)

    def directional(self, s, d) -> np.ndarray:
        """Generalized directional derivative max(lo*d, hi*d), elementwise."""
        lo, hi = self.interval(s)
        d = np.asarray(d, dtype=float)
        return np.maximum(lo * d, hi * d)

    def lipschitz_bound(self, r: float) -> float:
        """sup over [-r, r] of max(|lo|, |hi|) of the subdifferential."""
        cand = _extremum_candidates(self.density, r)
        lo, hi = self.interval(cand)
        return float(np.max(np.maximum(np.abs(lo), np.abs(hi)), initial=0.0))

    def derivative_bound(self, r: float) -> float:
        """sup over [-r, r] of |beta'|, for Picard contraction constants."""
        der = PiecewiseDensity(self.density.breakpoints,
                               tuple(P.polyder(c) for c in self.density.pieces))
        cand = _extremum_candidates(der, r)
        left, right = der.one_sided(cand)
        return float(np.max(np.maximum(np.abs(left), np.abs(right)), initial=0.0))


def build(density: PiecewiseDensity) -> Superpotential:
    """Antidifferentiate a density with continuity constants and j(0) = 0."""
    bp = density.breakpoints
    prim = [P.polyint(c) for c in density.pieces]
    k = len(bp)
    consts = [0.0] * (k + 1)
    i0 = int(np.searchsorted(bp, 0.0, side="right"))
    consts[i0] = -float(P.polyval(0.0, prim[i0]))
    for i in range(i0, k):  # rightward continuity at bp[i]
        consts[i + 1] = (float(P.polyval(bp[i], prim[i])) + consts[i]
                         - float(P.polyval(bp[i], prim[i + 1])))
    for i in range(i0 - 1, -1, -1):  # leftward continuity at bp[i]
        consts[i] = (float(P.polyval(bp[i], prim[i + 1])) + consts[i + 1]
                     - float(P.polyval(bp[i], prim[i])))
    anti = []
    for c, c0 in zip(prim, consts):
        c = c.copy()
        c[0] += c0
        anti.append(c)
    return Superpotential(density=density, antiderivative=tuple(anti))


def subdifferential(sp: Superpotential, t: float) -> SubdifferentialInterval:
    """Interval [lo, hi] of the filled-in subdifferential at t."""
    lo, hi = sp.interval(np.asarray([t]))
    return SubdifferentialInterval(float(lo[0]), float(hi[0]))


def directional_derivative(sp: Superpotential, s: float, d: float) -> float:
    """j°(s; d) = max(lo*d, hi*d) over the subdifferential interval at s."""
    return float(sp.directional(np.asarray([s]), np.asarray([d]))[0])


def _real_roots(coef: np.ndarray, a: float, b: float) -> np.ndarray:
    coef = np.trim_zeros(np.atleast_1d(coef), "b")
    if len(coef) < 2:
        return np.empty(0)
    roots = P.polyroots(coef)
    roots = roots[np.abs(roots.imag) < 1e-10].real
    return roots[(roots > a) & (roots < b)]


def _extremum_candidates(density: PiecewiseDensity, r: float,
                         grid: int = 129) -> np.ndarray:
    """Breakpoints, clipped piece endpoints, piece critical points, and a grid."""
    bp = density.breakpoints
    cand = [np.linspace(-r, r, grid), bp[(bp >= -r) & (bp <= r)]]
    bounds = np.concatenate(([-r], np.clip(bp, -r, r), [r]))
    for i, c in enumerate(density.pieces):
        a, b = bounds[i], bounds[i + 1]
        if a < b:
            cand.append(_real_roots(P.polyder(c), a, b))
    return np.unique(np.concatenate(cand))


def _growth_ratio_max(sp: Superpotential, r: float) -> float:
    """max over [-r, r] of max(|lo|, |hi|) / (1 + |t|)."""
    density = sp.density
    cand = [_extremum_candidates(density, r), np.asarray([0.0])]
    # critical points of p(s)/(1 +/- s) on each signed segment of each piece
    bp = density.breakpoints
    bounds = np.concatenate(([-r], np.clip(bp, -r, r), [r]))
    for i, c in enumerate(density.pieces):
        a, b = bounds[i], bounds[i + 1]
        if a >= b:
            continue
        dc = P.polyder(c)
        if b > 0:  # d/ds p/(1+s) = 0  <=>  (1+s) p' - p = 0
            q = P.polysub(P.polymul(np.array([1.0, 1.0]), dc), c)
            cand.append(_real_roots(q, max(a, 0.0), b))
        if a < 0:  # d/ds p/(1-s) = 0  <=>  (1-s) p' + p = 0
            q = P.polyadd(P.polymul(np.array([1.0, -1.0]), dc), c)
            cand.append(_real_roots(q, a, min(b, 0.0)))
    pts = np.unique(np.concatenate(cand))
    lo, hi = sp.interval(pts)
    ratio = np.maximum(np.abs(lo), np.abs(hi)) / (1.0 + np.abs(pts))
    return float(np.max(ratio, initial=0.0))


def growth_certificate(sp: Superpotential, r: float) -> GrowthCertificate:
    """Smallest lattice-certified alpha with |dj(s)| <= alpha*(1+|s|) on [-r, r].

    If both unbounded pieces are linear the tail ratios are monotone, so a
    global alpha is exact; it is then reported with ``global_bound=True``.
    """
    if r <= 0:
        raise ValueError("certification range must be positive")
    density = sp.density
    bp = density.breakpoints

    def eff_degree(c):
        c = np.trim_zeros(np.atleast_1d(c), "b")
        return max(len(c) - 1, 0)

    tails_linear = (eff_degree(density.pieces[0]) <= 1
                    and eff_degree(density.pieces[-1]) <= 1)
    if not tails_linear:
        return GrowthCertificate(alpha_j=_growth_ratio_max(sp, r), r=r,
                                 global_bound=False)
    # cover all breakpoints, then add the exact tail suprema (monotone tails)
    big = max(r, float(np.max(np.abs(bp), initial=0.0)), 1.0)
    alpha = _growth_ratio_max(sp, big)
    for c in (density.pieces[0], density.pieces[-1]):
        c = np.atleast_1d(c)
        if len(c) > 1:
            alpha = max(alpha, abs(float(c[1])))
    return GrowthCertificate(alpha_j=alpha, r=r, global_bound=True)


def relaxed_monotonicity_estimate(sp: Superpotential, r: float,
                                  samples: int = 200) -> float:
    """Lattice lower estimate of the relaxed-monotonicity constant.

    Maximizes ``(j°(s; t-s) + j°(t; s-t)) / |t-s|^2`` over sampled pairs in
    [-r, r] (grid plus breakpoints with small offsets), floored at 0.  This
    is a lower estimate of the true constant.
    """
    if r <= 0:
        raise ValueError("range must be positive")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    bp = sp.density.breakpoints
    pts = [np.linspace(-r, r, samples)]
    for off in (0.0, 1e-6, 1e-3):
        pts.append(bp + off)
        pts.append(bp - off)
    lat = np.unique(np.clip(np.concatenate(pts), -r, r))
    lo, hi = sp.interval(lat)
    d = lat[None, :] - lat[:, None]  # t - s
    fwd = np.maximum(lo[:, None] * d, hi[:, None] * d)    # j°(s; t-s)
    bwd = np.maximum(-lo[None, :] * d, -hi[None, :] * d)  # j°(t; s-t)
    mask = np.abs(d) > 1e-12
    ratio = (fwd + bwd)[mask] / d[mask] ** 2
    return max(0.0, float(np.max(ratio, initial=0.0)))


def mollify(sp: Superpotential, h: float) -> Superpotential:
    """Replace each jump at b by the linear ramp through the one-sided
    limits at b-h and b+h; smooth pieces are untouched outside the ramps."""
    if h <= 0:
        raise ValueError("ramp width must be positive")
    density = sp.density
    gap = density.min_breakpoint_gap()
    if 2.0 * h >= gap:
        raise ValueError(f"ramp width {h} too large for breakpoint gap {gap}")
    if not density.jumps():
        return sp
    new_bp: list[float] = []
    new_pieces: list[np.ndarray] = [density.pieces[0]]
    for i, b in enumerate(density.breakpoints):
        left = float(P.polyval(b, density.pieces[i]))
        right = float(P.polyval(b, density.pieces[i + 1]))
        if left == right:
            new_bp.append(float(b))
        else:
            slope = (right - left) / (2.0 * h)
            mid = 0.5 * (left + right)
            ramp = np.array([mid - slope * b, slope])
            new_bp.extend([float(b) - h, float(b) + h])
            new_pieces.append(ramp)
        new_pieces.append(density.pieces[i + 1])
    return build(PiecewiseDensity(np.asarray(new_bp), tuple(new_pieces)))


@dataclass(frozen=True)
class SuperpotentialSchedule:
    """Step schedule: superpotential i applies for t <= entries[i].until."""

    untils: tuple[float, ...]
    sps: tuple[Superpotential, ...]

    def __post_init__(self):
        if len(self.untils) != len(self.sps) or not self.sps:
            raise ValueError("schedule needs matching, nonempty lists")
        if any(b <= a for a, b in zip(self.untils, self.untils[1:])):
            raise ValueError("schedule 'until' times must increase")

    def at(self, t: float) -> Superpotential:
        for until, sp in zip(self.untils, self.sps):
            if t <= until:
                return sp
        return self.sps[-1]


def from_document(doc: dict) -> Superpotential:
    """Parse ``{"breakpoints": [...], "pieces": [[c0, c1, ...], ...]}``."""
    if not isinstance(doc, dict) or set(doc) != {"breakpoints", "pieces"}:
        raise ValueError(f"malformed superpotential document: {doc!r}")
    return build(PiecewiseDensity(np.asarray(doc["breakpoints"], dtype=float),
                                  tuple(np.asarray(c, dtype=float)
                                        for c in doc["pieces"])))


def schedule_from_document(entries: list) -> SuperpotentialSchedule:
    """Parse a schedule file: list of ``{"until": t, "density": {...}}``."""
    untils, sps = [], []
    for rec in entries:
        if not isinstance(rec, dict) or set(rec) != {"until", "density"}:
            raise ValueError(f"malformed schedule entry: {rec!r}")
        untils.append(float(rec["until"]))
        sps.append(from_document(rec["density"]))
    return SuperpotentialSchedule(tuple(untils), tuple(sps))
