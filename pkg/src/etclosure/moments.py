"""Near-equilibrium moment assembly and its numeric verification.

A full multiplier pair (rank M and rank N symmetric tensors) splits into the
equilibrium dressing of a scalar lambda and a covector mu_alpha plus
trace-free deviations (:func:`make_deviation`).  The potential deviation
Delta h'^a is the truncated Taylor series whose coefficients are the closure
tensors, contracted with tensor powers of the deviations
(:func:`delta_hprime`).

Two numeric checks live here:

* :func:`symmetry_residual` differentiates Delta h'^a with respect to the
  full multiplier components (projection and deviation split recomputed at
  every perturbed point) and measures how far the resulting moment tensors
  are from total symmetry.  The closure construction guarantees symmetry, so
  the residual is finite-difference noise unless a coefficient is corrupted.

* :func:`equilibrium_moments_with_traces` computes the kinetic moments of the
  equilibrium distribution by one-dimensional quadrature in the local rest
  frame, boosts them, and reports the mass-shell trace residuals.  The
  kinetic integrals use the positive occupancy f_eq(lambda, gamma E), so the
  densities extracted here are positive; they are not the multiplier-side
  n = gamma dH/dlambda of the equilibrium module, which carries the opposite
  sign convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .closure import ClosureSpec, ClosureTensorSet, build_closure_tensor, iter_orders
from .equilibrium import (
    ConvergenceError,
    ThermoState,
    equilibrium_hprime,
    equilibrium_multipliers,
    project_equilibrium,
)
from .family import realize
from .scalar import double_factorial
from .tensors import (
    DenseSymTensor,
    FourVector,
    arrangements,
    canonical_indices,
    index_counts,
    trace_pair,
    transform,
)

Counts = Tuple[int, int, int, int]


@dataclass(frozen=True)
class MultiplierState:
    """Equilibrium base plus trace-free multiplier deviations."""

    base: ThermoState
    lam_dev: DenseSymTensor
    mu_dev: DenseSymTensor
    spec: ClosureSpec

    def __post_init__(self):
        if self.lam_dev.rank != self.spec.M:
            raise ValueError(
                f"lambda deviation rank {self.lam_dev.rank} != M = {self.spec.M}"
            )
        if self.mu_dev.rank != self.spec.N:
            raise ValueError(f"mu deviation rank {self.mu_dev.rank} != N = {self.spec.N}")

    @classmethod
    def at_equilibrium(cls, base: ThermoState, spec: ClosureSpec) -> "MultiplierState":
        return cls(base, DenseSymTensor.zeros(spec.M), DenseSymTensor.zeros(spec.N), spec)


@dataclass(frozen=True)
class MomentSet:
    """The two moment tensors, the potential, and the truncation orders."""

    A: DenseSymTensor
    B: DenseSymTensor
    hprime: FourVector
    truncation: Tuple[int, int]


def deviation_projection_residual(state: MultiplierState) -> float:
    """Largest projection of the deviations; zero for honest deviations."""
    lam_p, mu_p = project_equilibrium(state.lam_dev, state.mu_dev, state.spec.m)
    return max(abs(float(lam_p)), max(abs(float(c)) for c in mu_p.components))


def make_deviation(raw: DenseSymTensor, M_or_N: int, m=1) -> DenseSymTensor:
    """Trace-free deviation: raw minus its equilibrium-shaped projection.

    The even-rank (lambda-type) projection and the odd-rank (mu-type)
    projection are inverse to the equilibrium dressing, so the result
    projects to zero exactly in rational arithmetic and the map is
    idempotent.  Rank 0 and rank 1 blocks are pure equilibrium: their
    deviations vanish identically.
    """
    if raw.rank != M_or_N:
        raise ValueError(f"rank {raw.rank} does not match declared {M_or_N}")
    if raw.rank % 2 == 0:
        if raw.rank == 0:
            return DenseSymTensor.zeros(0)
        lam_p, _ = project_equilibrium(raw, DenseSymTensor.zeros(1), m)
        eq_part, _ = equilibrium_multipliers(lam_p, _ZERO_MU, raw.rank, 1, m)
        return raw - eq_part
    if raw.rank == 1:
        return DenseSymTensor.zeros(1)
    _, mu_p = project_equilibrium(DenseSymTensor.zeros(0), raw, m)
    _, eq_part = equilibrium_multipliers(0, mu_p, 0, raw.rank, m)
    return raw - eq_part


_ZERO_MU = FourVector((1, 0, 0, 0), "upper")  # placeholder direction, never used


# ---------------------------------------------------------------------------
# the Delta h' series


def _count_poly(dev: DenseSymTensor) -> Dict[Counts, object]:
    """Multiplicity-weighted values of a symmetric tensor, keyed by counts."""
    poly: Dict[Counts, object] = {}
    for idx, val in dev.items():
        if val == 0:
            continue
        poly[index_counts(idx)] = val * arrangements(idx)
    return poly


def _convolve(p: Dict[Counts, object], q: Dict[Counts, object]) -> Dict[Counts, object]:
    out: Dict[Counts, object] = {}
    for c1, v1 in p.items():
        for c2, v2 in q.items():
            key = (c1[0] + c2[0], c1[1] + c2[1], c1[2] + c2[2], c1[3] + c2[3])
            acc = out.get(key)
            term = v1 * v2
            out[key] = term if acc is None else acc + term
    return out


def _canonical_from_counts(c: Counts) -> Tuple[int, ...]:
    return (0,) * c[0] + (1,) * c[1] + (2,) * c[2] + (3,) * c[3]


_UNIT_POLY: Dict[Counts, object] = {(0, 0, 0, 0): 1}


def delta_hprime(
    state: MultiplierState, tensors: Optional[ClosureTensorSet] = None
) -> FourVector:
    """Truncated series sum_{h,k} (1/h!k!) C_{h,k} . lam_dev^h . mu_dev^k.

    The closure tensor of each order is realized at the base state and
    contracted with h copies of the lambda deviation and k copies of the mu
    deviation over its trailing slots; the free slot is the output index.
    Exact when the state and deviations are rational and gamma is rational.
    """
    spec = state.spec
    lam_poly = _count_poly(state.lam_dev)
    mu_poly = _count_poly(state.mu_dev)
    lam_pows = [_UNIT_POLY]
    mu_pows = [_UNIT_POLY]
    comps = [0, 0, 0, 0]
    for h, k in iter_orders(spec):
        if h == 0 and k == 0:
            continue
        while len(lam_pows) <= h:
            lam_pows.append(_convolve(lam_pows[-1], lam_poly))
        while len(mu_pows) <= k:
            mu_pows.append(_convolve(mu_pows[-1], mu_poly))
        poly = _convolve(lam_pows[h], mu_pows[k])
        if not poly:
            continue
        elem = tensors.get(h, k) if tensors is not None else build_closure_tensor(spec, h, k)
        realized = realize(elem, state.base.lam, state.base.mu, spec.m, spec.registry)
        w = Fraction(1, factorial(h) * factorial(k))
        for counts, pv in poly.items():
            if pv == 0:
                continue
            tail = _canonical_from_counts(counts)
            for a in range(4):
                comps[a] = comps[a] + w * pv * realized.get((a,) + tail)
    return FourVector(tuple(comps), "upper")


# ---------------------------------------------------------------------------
# symmetry of the derived moments


def symmetry_residual(
    state: MultiplierState,
    step: float = 1e-4,
    tensors: Optional[ClosureTensorSet] = None,
) -> float:
    """Asymmetry of d(Delta h'^a)/d(multiplier components), relative.

    Each canonical component of the full rank-M and rank-N multiplier tensors
    is perturbed coherently (all index arrangements together); the
    equilibrium projection and the deviation split are recomputed at every
    perturbed point, so this differentiates the genuine composite map.  The
    central-difference derivative divided by the arrangement count is the
    slot-wise derivative, and the assembled (rank+1) arrays must be totally
    symmetric.  Returns the worst relative mismatch over both blocks.

    The trace and derivative descent between adjacent coefficient tensors
    makes every order below the truncation cancel exactly, so the residual
    of an intact series scales as the square of the deviation size (the
    first omitted order); keep deviations small relative to the equilibrium
    multipliers when interpreting the absolute number.
    """
    spec = state.spec
    m = spec.m
    if tensors is None:
        tensors = ClosureTensorSet.build(spec)
    eq_lam, eq_mu = equilibrium_multipliers(state.base.lam, state.base.mu, spec.M, spec.N, m)
    full_lam = (eq_lam + state.lam_dev).map_values(float)
    full_mu = (eq_mu + state.mu_dev).map_values(float)

    def series_at(fl: DenseSymTensor, fm: DenseSymTensor) -> FourVector:
        lam_p, mu_p = project_equilibrium(fl, fm, m)
        el, em = equilibrium_multipliers(lam_p, mu_p, spec.M, spec.N, m)
        base = ThermoState(
            float(lam_p),
            FourVector(tuple(float(c) for c in mu_p.components), "lower"),
            float(m),
            statistics=state.base.statistics,
            k_B=state.base.k_B,
            h_planck=state.base.h_planck,
            w=state.base.w,
        )
        inner = MultiplierState(base, fl - el, fm - em, spec)
        return delta_hprime(inner, tensors)

    worst = 0.0
    for block in ("lam", "mu"):
        tensor = full_lam if block == "lam" else full_mu
        if tensor.rank == 0:
            continue
        derivs = {}
        for bidx in canonical_indices(tensor.rank):
            center = float(tensor.get(bidx))
            h = step * max(1.0, abs(center))
            plus = tensor.with_entry(bidx, center + h)
            minus = tensor.with_entry(bidx, center - h)
            if block == "lam":
                gp, gm = series_at(plus, full_mu), series_at(minus, full_mu)
            else:
                gp, gm = series_at(full_lam, plus), series_at(full_lam, minus)
            mult = arrangements(bidx)
            derivs[bidx] = [
                (float(gp[a]) - float(gm[a])) / (2.0 * h * mult) for a in range(4)
            ]
        scale = max(abs(v) for row in derivs.values() for v in row)
        grouped: Dict[Tuple[int, ...], list] = {}
        for bidx, row in derivs.items():
            for a in range(4):
                grouped.setdefault(tuple(sorted((a,) + bidx)), []).append(row[a])
        spread = max(max(vals) - min(vals) for vals in grouped.values())
        worst = max(worst, spread / max(scale, 1e-300))
    return worst


# ---------------------------------------------------------------------------
# kinetic moments at equilibrium


def _angular(counts3: Tuple[int, int, int]) -> float:
    """Integral of a unit-vector monomial over the sphere."""
    if any(b % 2 for b in counts3):
        return 0.0
    b = sum(counts3)
    num = 1
    for bi in counts3:
        num *= double_factorial(bi - 1)
    return 4.0 * math.pi * num / double_factorial(b + 1)


def _boost_matrix(u: FourVector):
    uc = [float(c) for c in u.raised().components]
    mat = [[0.0] * 4 for _ in range(4)]
    mat[0][0] = uc[0]
    for i in (1, 2, 3):
        mat[0][i] = uc[i]
        mat[i][0] = uc[i]
        for j in (1, 2, 3):
            mat[i][j] = (1.0 if i == j else 0.0) + uc[i] * uc[j] / (1.0 + uc[0])
    return mat


def kinetic_moment(state: ThermoState, rank: int, _cache: Optional[dict] = None) -> DenseSymTensor:
    """Equilibrium moment with `rank` momentum factors, boosted from rest.

    In the rest frame p = m(cosh x, sinh x w) with w on the unit sphere, and
    the invariant measure reduces to m^2 sinh^2 x dx dOmega, so a component
    with a time legs and spatial counts (b1, b2, b3) is

        m^(2+a+b) * integral f_eq(lambda, gamma m cosh x) cosh^a x
                    sinh^(b+2) x dx * [sphere moment of w^b].
    """
    dist = state.dist
    cache = _cache if _cache is not None else {}
    gm = state.gamma * state.m

    def radial(a: int, b: int) -> float:
        key = (a, b)
        if key not in cache:
            def integrand(x: float) -> float:
                try:
                    c = math.cosh(x)
                    s = math.sinh(x)
                except OverflowError:
                    return 0.0
                f = dist.f_eq(state.lam, gm * c)
                if f == 0.0:
                    # decay has underflowed; avoid 0 * inf from the sinh powers
                    return 0.0
                return f * c**a * s ** (b + 2)

            val, err = quad(integrand, 0.0, np.inf, epsabs=1e-300, epsrel=1e-13, limit=400)
            if not math.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
                raise ConvergenceError(
                    f"moment quadrature error {err:.3e} too large for value {val:.6e}"
                )
            cache[key] = state.m ** (2 + a + b) * val
        return cache[key]

    vals = {}
    for idx in canonical_indices(rank):
        counts = index_counts(idx)
        a, spatial = counts[0], counts[1:]
        if any(b % 2 for b in spatial):
            vals[idx] = 0.0
            continue
        ang = _angular(spatial)
        vals[idx] = radial(a, sum(spatial)) * ang if ang else 0.0
    rest = DenseSymTensor(rank, vals)
    uc = state.u.raised().components
    if all(float(c) == 0.0 for c in uc[1:]):
        return rest
    return transform(rest, _boost_matrix(state.u))


def equilibrium_moments_with_traces(state: ThermoState, spec: ClosureSpec):
    """Kinetic moment tensors of one equilibrium state plus trace residuals.

    Returns (MomentSet, report).  The report carries the relative residuals
    of the mass-shell trace chain (metric trace of a rank r+2 moment equals
    -m^2 times the rank r moment) for both moment tensors, and the kinetic
    densities n, p, e extracted from the low-rank moments.
    """
    cache: dict = {}
    a_mom = kinetic_moment(state, spec.M + 1, cache)
    b_mom = kinetic_moment(state, spec.N + 1, cache)
    hp, _, _ = equilibrium_hprime(state)
    mset = MomentSet(a_mom, b_mom, hp, (spec.h_max, spec.k_max))

    msq = float(state.m) ** 2
    report = {
        "traces": {},
        "kinetic": {},
        "orders": {"M": spec.M, "N": spec.N},
    }
    for name, mom in (("A", a_mom), ("B", b_mom)):
        if mom.rank < 2:
            continue
        lower = kinetic_moment(state, mom.rank - 2, cache)
        traced = trace_pair(mom)
        target = lower.scale(-msq)
        scale = max(traced.max_abs(), target.max_abs(), 1e-300)
        report["traces"][name] = (traced - target).max_abs() / scale

    t1 = kinetic_moment(state, 1, cache)
    t2 = kinetic_moment(state, 2, cache)
    u_low = state.u.lowered().components
    n_kin = -sum(float(u_low[a]) * t1.get((a,)) for a in range(4))
    e_kin = sum(
        float(u_low[a]) * float(u_low[b]) * t2.get((a, b)) for a in range(4) for b in range(4)
    )
    g_trace = -t2.get((0, 0)) + sum(t2.get((i, i)) for i in (1, 2, 3))
    p_kin = (g_trace + e_kin) / 3.0
    report["kinetic"] = {"n": n_kin, "p": p_kin, "e": e_kin}
    return mset, report
