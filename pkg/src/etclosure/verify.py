"""Verification suites: the package's claims, runnable as one harness.

Each suite returns a :class:`SuiteResult` with case and failure counts, the
worst residual seen, and replayable failure payloads.  Exact suites
(characteristic, cross-route, compatibility, round-trips) compare canonical
symbolic forms and record residual 0.0 or 1.0; numeric suites record the
worst relative residual against their tolerance.

The mutation harness corrupts coefficients of prebuilt closure tensors
(scaling one phi_s by 11/10) before the suites that consume them run; a
healthy harness must then fail, which is the negative control wired to
`verify --mutate`.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Callable, Dict, List, Optional, Sequence

from .closure import (
    ClosureSpec,
    ClosureTensorSet,
    build_closure_tensor,
    closure_coeff,
    closure_coeff_N1,
    derive_C_from_E,
    verify_compatibility,
)
from .equilibrium import (
    H_from_distribution,
    JuttnerFamily,
    ThermoState,
    equilibrium_multipliers,
    gibbs_residual,
    integrability_residual,
    mj_closed_form_H,
    project_equilibrium,
)
from .family import (
    CharacteristicError,
    FFamilyElement,
    check_characteristic,
    lift,
    mu_derivative,
    basis_mu_contraction,
    realize,
    trace,
)
from .moments import (
    MultiplierState,
    equilibrium_moments_with_traces,
    make_deviation,
    symmetry_residual,
)
from .oracle import (
    brute_mu_contract,
    brute_realize_basis,
    brute_symmetrize,
    brute_trace,
    fd_mu_derivative,
    random_float_timelike,
    random_rational_timelike,
    random_sym_tensor,
)
from .scalar import FunctionRegistry, ScalarExpr, SingularRatioError
from .tensors import (
    DenseSymTensor,
    canonical_indices,
    contract_mu,
    gmu_basis,
    symmetrize,
    trace_pair,
)


@dataclass
class VerifyConfig:
    """Knobs shared by all suites."""

    M: int = 2
    N: int = 1
    h_max: int = 2
    k_max: int = 2
    seed: int = 0
    mutate: int = 0
    tol: Optional[float] = None
    states: int = 3
    registry: Optional[FunctionRegistry] = None
    m: object = 1

    def reg(self) -> FunctionRegistry:
        return self.registry if self.registry is not None else FunctionRegistry.polynomials(self.seed)

    def spec(self, **overrides) -> ClosureSpec:
        kw = dict(M=self.M, N=self.N, h_max=self.h_max, k_max=self.k_max,
                  registry=self.reg(), m=self.m)
        kw.update(overrides)
        return ClosureSpec(**kw)

    def tolerance(self, default: float) -> float:
        return self.tol if self.tol is not None else default


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: int = 0
    max_residual: float = 0.0
    seed: int = 0
    failed_cases: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, residual: float, detail: Optional[dict] = None) -> None:
        self.cases += 1
        self.max_residual = max(self.max_residual, residual)
        if not ok:
            self.failures += 1
            if detail is not None and len(self.failed_cases) < 20:
                self.failed_cases.append(detail)

    def to_json_obj(self) -> dict:
        return {
            "suite": self.name,
            "cases": self.cases,
            "failures": self.failures,
            "max_residual": self.max_residual,
            "seed": self.seed,
            "failed_cases": self.failed_cases,
        }


def mutate_tensor_set(
    tensors: ClosureTensorSet,
    rng: random.Random,
    count: int = 1,
    orders: Optional[Sequence[tuple]] = None,
) -> ClosureTensorSet:
    """Copy of the set with one phi_s of `count` chosen tensors scaled by 11/10.

    The input set is left untouched.  `orders` restricts the candidate (h, k)
    keys; the symmetry negative control uses the first-order tensors, whose
    corruption shows up at zeroth order in the deviations.
    """
    pool = dict(tensors.tensors)
    keys = sorted(
        key
        for key, el in pool.items()
        if not el.is_zero() and (orders is None or key in orders)
    )
    if not keys:
        raise ValueError("nothing to mutate: no nonzero tensor among the candidates")
    for _ in range(count):
        key = keys[rng.randrange(len(keys))]
        el = pool[key]
        s_choices = [s for s, phi in enumerate(el.coeffs) if not phi.is_zero()]
        s = s_choices[rng.randrange(len(s_choices))]
        coeffs = list(el.coeffs)
        coeffs[s] = coeffs[s].scale(Fraction(11, 10))
        pool[key] = FFamilyElement(el.rank, coeffs)
    return ClosureTensorSet(tensors.spec, pool)


def _build_set(spec: ClosureSpec, orders: Sequence[tuple]) -> ClosureTensorSet:
    ts = ClosureTensorSet(spec)
    for h, k in orders:
        ts.tensors[(h, k)] = build_closure_tensor(spec, h, k)
    return ts


def _orders_up_to_rank(spec: ClosureSpec, rank_cap: int) -> List[tuple]:
    out = []
    hmax = rank_cap if spec.M else 0
    kmax = rank_cap if spec.N >= 3 else 0
    for h in range(hmax + 1):
        for k in range(kmax + 1):
            if spec.rank(h, k) <= rank_cap:
                out.append((h, k))
    return out


def _exact_gamma(mu) -> Fraction:
    gsq = Fraction(mu.gamma_sq())
    rn, rd = isqrt(gsq.numerator), isqrt(gsq.denominator)
    if rn * rn != gsq.numerator or rd * rd != gsq.denominator:
        raise ValueError("state was expected to have rational gamma")
    return Fraction(rn, rd)


# ---------------------------------------------------------------------------
# suites


def suite_characteristic(cfg: VerifyConfig) -> SuiteResult:
    """Descent relation holds for every constructed closure tensor, rank <= 12."""
    res = SuiteResult("characteristic", seed=cfg.seed)
    rng = random.Random(cfg.seed)
    spec = cfg.spec()
    orders = _orders_up_to_rank(spec, 12)
    tensors = _build_set(spec, orders)
    if cfg.mutate:
        tensors = mutate_tensor_set(tensors, rng, cfg.mutate)
    for h, k in orders:
        ok, residuals = check_characteristic(tensors.get(h, k))
        res.record(ok, 0.0 if ok else 1.0,
                   {"M": spec.M, "N": spec.N, "h": h, "k": k,
                    "bad_s": [i + 1 for i, r in enumerate(residuals) if not r.is_zero()]})
    return res


def suite_cross_route(cfg: VerifyConfig) -> SuiteResult:
    """Closed-form coefficients equal the recursive construction exactly."""
    res = SuiteResult("cross_route", seed=cfg.seed)
    rng = random.Random(cfg.seed)
    if cfg.N >= 3:
        spec = cfg.spec()
        orders = [(h, k) for h in range(cfg.h_max + 1) for k in range(cfg.k_max + 1)]
        tensors = _build_set(spec, orders)
        if cfg.mutate:
            tensors = mutate_tensor_set(tensors, rng, cfg.mutate)
        for h, k in orders:
            direct = tensors.get(h, k)
            recursive = derive_C_from_E(spec, h, k)
            ok = direct == recursive
            res.record(ok, 0.0 if ok else 1.0, {"route": "recursive", "h": h, "k": k})
    else:
        for h in range(4):
            n = cfg.M * h + 1
            for s in range(n // 2 + 1):
                ok = closure_coeff(cfg.M, 1, h, 0, s) == closure_coeff_N1(cfg.M, h, s)
                res.record(ok, 0.0 if ok else 1.0, {"route": "k0-reduction", "h": h, "s": s})
    return res


def suite_compatibility(cfg: VerifyConfig) -> SuiteResult:
    """Trace-vs-derivative descent between adjacent orders, exact."""
    res = SuiteResult("compatibility", seed=cfg.seed)
    rng = random.Random(cfg.seed)
    spec = cfg.spec()
    orders = _orders_up_to_rank(spec, 12)
    needed = set(orders)
    for h, k in orders:
        if spec.M >= 2 and spec.rank(h + 1, k) <= 12:
            needed.add((h + 1, k))
        if spec.N >= 3 and spec.rank(h, k + 1) <= 12:
            needed.add((h, k + 1))
    tensors = _build_set(spec, sorted(needed))
    if cfg.mutate:
        tensors = mutate_tensor_set(tensors, rng, cfg.mutate)
    for h, k in orders:
        lam_feasible = spec.M >= 2 and (h + 1, k) in tensors.tensors
        mu_feasible = spec.N >= 3 and (h, k + 1) in tensors.tensors
        if not lam_feasible and not mu_feasible:
            continue
        try:
            report = verify_compatibility(spec, h, k, tensors=tensors)
        except CharacteristicError:
            # a corrupted tensor has no well-defined mu-derivative; that is
            # a detected incompatibility, not a harness error
            for cond, feasible in (("lambda", lam_feasible), ("mu", mu_feasible)):
                if feasible:
                    res.record(False, 1.0, {"condition": cond, "h": h, "k": k,
                                            "error": "characteristic"})
            continue
        if lam_feasible:
            ok = bool(report["lambda_ok"])
            res.record(ok, 0.0 if ok else 1.0, {"condition": "lambda", "h": h, "k": k})
        if mu_feasible:
            ok = bool(report["mu_ok"])
            res.record(ok, 0.0 if ok else 1.0, {"condition": "mu", "h": h, "k": k})
    return res


def suite_oracle(cfg: VerifyConfig) -> SuiteResult:
    """Coefficient-space operations agree with brute-force components."""
    res = SuiteResult("oracle", seed=cfg.seed)
    rng = random.Random(cfg.seed)

    # symmetrize vs literal permutation average
    for rank in (0, 1, 2, 3, 4, 5):
        raw = {}
        for idx in itertools.product(range(4), repeat=rank):
            raw[idx] = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        ok = symmetrize(raw, rank=rank) == brute_symmetrize(raw, rank=rank)
        res.record(ok, 0.0 if ok else 1.0, {"op": "symmetrize", "rank": rank})

    # basis realization vs brute permutation average
    for n, s in ((2, 0), (2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (6, 2)):
        mu = random_rational_timelike(rng)
        ok = gmu_basis(n, s, mu) == brute_realize_basis(n, s, mu)
        res.record(ok, 0.0 if ok else 1.0, {"op": "basis", "n": n, "s": s})

    # tensor-level trace and contraction
    for rank in (2, 3, 4, 5):
        t = random_sym_tensor(rank, rng)
        mu = random_rational_timelike(rng)
        ok = trace_pair(t) == brute_trace(t)
        res.record(ok, 0.0 if ok else 1.0, {"op": "trace_pair", "rank": rank})
        ok = contract_mu(t, mu) == brute_mu_contract(t, mu)
        res.record(ok, 0.0 if ok else 1.0, {"op": "contract_mu", "rank": rank})

    # coefficient-space trace of family elements vs brute component trace
    reg = cfg.reg()
    for n in (4, 5, 6):
        lead = ScalarExpr.zero()
        for p in range(2):
            lead = lead + ScalarExpr.monomial(
                Fraction(rng.randint(-5, 5), rng.randint(1, 4)), -6 - 2 * p, 0, (p, 0)
            )
        elem = FFamilyElement.from_leading(n, lead)
        mu = random_rational_timelike(rng)
        lam = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
        ok = realize(trace(elem), lam, mu, 1, reg) == brute_trace(realize(elem, lam, mu, 1, reg))
        res.record(ok, 0.0 if ok else 1.0, {"op": "family_trace", "n": n})

    # contraction table of the maximal-metric element
    for n in (2, 4, 6):
        mu = random_rational_timelike(rng)
        gamma = _exact_gamma(mu)
        for r in range(1, n + 1):
            lhs = gmu_basis(n, n // 2)
            for _ in range(r):
                lhs = brute_mu_contract(lhs, mu)
            coeffs = basis_mu_contraction(n, r)
            rhs = DenseSymTensor.zeros(n - r)
            for s, phi in enumerate(coeffs):
                if phi.is_zero():
                    continue
                rhs = rhs + gmu_basis(n - r, s, mu).scale(phi.evaluate(0, gamma, 1))
            ok = lhs == rhs
            res.record(ok, 0.0 if ok else 1.0, {"op": "mu_contraction_table", "n": n, "r": r})

    # single-contraction identity: top element eats one mu
    for n in (4, 6):
        mu = random_rational_timelike(rng)
        lhs = brute_mu_contract(gmu_basis(n, n // 2), mu)
        ok = lhs == gmu_basis(n - 1, (n - 2) // 2, mu)
        res.record(ok, 0.0 if ok else 1.0, {"op": "single_contraction", "n": n})
    return res


def suite_roundtrip(cfg: VerifyConfig) -> SuiteResult:
    """Equilibrium multiplier round-trip and lift/trace inversion, exact."""
    res = SuiteResult("roundtrip", seed=cfg.seed)
    rng = random.Random(cfg.seed)

    for M in (0, 2, 4, 6):
        for N in (1, 3, 5):
            lam = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
            mu = random_rational_timelike(rng)
            m = Fraction(rng.randint(1, 5), rng.randint(1, 3))
            lam_t, mu_t = equilibrium_multipliers(lam, mu, M, N, m)
            lam_back, mu_back = project_equilibrium(lam_t, mu_t, m)
            ok = lam_back == lam and tuple(mu_back.components) == tuple(
                mu.lowered().components
            )
            res.record(ok, 0.0 if ok else 1.0, {"op": "multiplier_roundtrip", "M": M, "N": N})

    reg = cfg.reg()
    produced = 0
    attempts = 0
    while produced < 50 and attempts < 500:
        attempts += 1
        n = rng.randint(1, 4)
        r = rng.randint(1, 2)
        half = n // 2
        # admissible exponents sit outside the resonant band [n-half-1, n-half+r-2]
        p_pool = [p for p in range(0, 8) if p < n - half - 1 or p > n - half + r - 2]
        lead = ScalarExpr.zero()
        for p in rng.sample(p_pool, k=min(2, len(p_pool))):
            lead = lead + ScalarExpr.monomial(
                Fraction(rng.randint(-6, 6), rng.randint(1, 5)), -6 - 2 * p, 0, (rng.randint(0, 3), 0)
            )
        if lead.is_zero():
            continue
        elem = FFamilyElement.from_leading(n, lead)
        free = None
        if rng.random() < 0.5:
            free = [
                ScalarExpr.monomial(Fraction(rng.randint(-4, 4), rng.randint(1, 3)), 0, 0, (rng.randint(0, 3), 0))
                for _ in range(r)
            ]
        lifted = lift(elem, r, free=free)
        back = lifted
        for _ in range(r):
            back = trace(back)
        ok = back == elem
        res.record(ok, 0.0 if ok else 1.0,
                   {"op": "lift_trace", "n": n, "r": r, "attempt": attempts})
        produced += 1

    # resonant exponents must raise, never return a wrong value
    for n, r in ((2, 1), (3, 1), (4, 1), (2, 2), (4, 2)):
        half = n // 2
        band = range(max(0, n - half - 1), n - half + r - 1)
        for p in band:
            elem = FFamilyElement.from_leading(
                n, ScalarExpr.monomial(Fraction(1), -6 - 2 * p, 0, (0, 0))
            )
            try:
                lift(elem, r)
                ok = False
            except SingularRatioError:
                ok = True
            res.record(ok, 0.0 if ok else 1.0, {"op": "lift_resonance", "n": n, "r": r, "p": p})
    return res


def suite_derivative(cfg: VerifyConfig) -> SuiteResult:
    """Coefficient-space mu derivative matches finite differences of realize."""
    res = SuiteResult("derivative", seed=cfg.seed)
    rng = random.Random(cfg.seed)
    tol = cfg.tolerance(1e-6)
    spec = cfg.spec()
    orders = [hk for hk in _orders_up_to_rank(spec, 7) if hk != (0, 0)]
    elems = [(hk, build_closure_tensor(spec, *hk)) for hk in orders]
    reg = cfg.reg()
    for case in range(cfg.states):
        mu = random_float_timelike(rng)
        lam = rng.uniform(-1.0, 1.0)
        for (h, k), elem in elems:
            exact = realize(mu_derivative(elem), lam, mu, 1, reg)
            approx = fd_mu_derivative(elem, lam, mu, 1, reg, step=1e-4 * math.sqrt(float(mu.gamma_sq())))
            scale = max(exact.max_abs(), approx.max_abs(), 1e-10)
            rel = (exact - approx).max_abs() / scale
            res.record(rel <= tol, rel, {"op": "fd_mu", "h": h, "k": k, "case": case})
    return res


def suite_symmetry(cfg: VerifyConfig) -> SuiteResult:
    """Moment symmetry of the Delta h' series under full-multiplier FD.

    Deviations are scaled to 1e-6: the truncated series agrees with the
    exact potential only up to the first omitted order, so its FD asymmetry
    grows as the square of the deviation size and would swamp the check at
    O(1) deviations.  The negative control corrupts a first-order tensor,
    whose broken trace identity is visible at zeroth order in the deviations
    (a corrupted top-order coefficient only shows at the truncation order).
    """
    res = SuiteResult("symmetry", seed=cfg.seed)
    rng = random.Random(cfg.seed)
    tol = cfg.tolerance(1e-6)
    spec = cfg.spec()
    tensors = ClosureTensorSet.build(spec)
    if cfg.mutate:
        first_order = [key for key in ((1, 0), (0, 1)) if key in tensors.tensors]
        tensors = mutate_tensor_set(tensors, rng, cfg.mutate, orders=first_order)
    devscale = 1e-6
    for case in range(cfg.states):
        mu = random_float_timelike(rng)
        lam = rng.uniform(0.2, 1.0)
        base = ThermoState(lam, mu, float(cfg.m))
        lam_dev = make_deviation(
            random_sym_tensor(spec.M, rng, rational=False), spec.M, spec.m
        ).scale(devscale)
        mu_dev = make_deviation(
            random_sym_tensor(spec.N, rng, rational=False), spec.N, spec.m
        ).scale(devscale)
        mstate = MultiplierState(base, lam_dev, mu_dev, spec)
        rel = symmetry_residual(mstate, step=1e-6, tensors=tensors)
        res.record(rel <= tol, rel, {"op": "symmetry", "case": case})
    return res


def suite_equilibrium(cfg: VerifyConfig) -> SuiteResult:
    """Quadrature H vs the Bessel oracle; Gibbs and integrability residuals."""
    res = SuiteResult("equilibrium", seed=cfg.seed)
    tol = cfg.tolerance(1e-8)
    lam = 1.0
    for z in (0.1, 1.0, 10.0):
        dist = JuttnerFamily("nondegenerate")
        h_quad = H_from_distribution(dist.F, lam, z, 1.0)
        h_closed = mj_closed_form_H(lam, z, 1.0)
        rel = abs(h_quad - h_closed) / abs(h_closed)
        res.record(rel <= tol, rel, {"op": "bessel", "z": z})

        state = ThermoState.rest(lam, z, 1.0)
        rel = gibbs_residual(state)
        res.record(rel <= tol, rel, {"op": "gibbs", "z": z})
        rel = integrability_residual(state)
        res.record(rel <= tol, rel, {"op": "integrability", "z": z})
    return res


def suite_kinetic(cfg: VerifyConfig) -> SuiteResult:
    """Mass-shell trace chain of the kinetic equilibrium moments."""
    res = SuiteResult("kinetic", seed=cfg.seed)
    rng = random.Random(cfg.seed)
    tol = cfg.tolerance(1e-8)
    pairs = [(0, 1)]
    if (cfg.M, cfg.N) != (0, 1):
        pairs.append((cfg.M, cfg.N))
    for M, N in pairs:
        spec = ClosureSpec(M, N, registry=cfg.reg(), m=1)
        for boosted in (False, True):
            if boosted:
                mu = random_float_timelike(rng)
                state = ThermoState(0.5, mu, 1.0)
            else:
                state = ThermoState.rest(0.5, 1.3, 1.0)
            _, report = equilibrium_moments_with_traces(state, spec)
            for name, rel in report["traces"].items():
                res.record(rel <= tol, rel,
                           {"op": "trace_chain", "M": M, "N": N, "tensor": name,
                            "boosted": boosted})
    return res


SUITES: Dict[str, Callable[[VerifyConfig], SuiteResult]] = {
    "characteristic": suite_characteristic,
    "cross_route": suite_cross_route,
    "compatibility": suite_compatibility,
    "oracle": suite_oracle,
    "roundtrip": suite_roundtrip,
    "derivative": suite_derivative,
    "symmetry": suite_symmetry,
    "equilibrium": suite_equilibrium,
    "kinetic": suite_kinetic,
}


def run_suites(names: Optional[Sequence[str]] = None, cfg: Optional[VerifyConfig] = None):
    cfg = cfg or VerifyConfig()
    chosen = list(SUITES) if not names else list(names)
    results = []
    for name in chosen:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; available: {', '.join(SUITES)}")
        results.append(SUITES[name](cfg))
    return results
