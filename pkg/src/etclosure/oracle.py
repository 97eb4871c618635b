"""Brute-force reference implementations for property tests.

Everything here recomputes results at the raw component level: literal
permutation averages, explicit metric sums, central finite differences.  The
point is independence, so this module deliberately reimplements arithmetic
that exists elsewhere in coefficient space and shares no code with it beyond
the container types.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from math import factorial
from typing import Optional, Sequence, Tuple

from .family import FFamilyElement, realize
from .tensors import DenseSymTensor, FourVector, canonical_indices

# literal metric components, written out rather than imported
_G = (
    (-1, 0, 0, 0),
    (0, 1, 0, 0),
    (0, 0, 1, 0),
    (0, 0, 0, 1),
)


@dataclass(frozen=True)
class OracleConfig:
    """Cost guards and determinism knobs for brute-force comparisons."""

    max_rank: int = 6
    arithmetic: str = "rational"
    fd_step: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.max_rank > 8:
            raise ValueError("max_rank above 8 is unaffordable (4^rank components)")
        if self.arithmetic not in ("rational", "float"):
            raise ValueError(f"unknown arithmetic mode {self.arithmetic!r}")

    def rng(self) -> random.Random:
        return random.Random(self.seed)


def _guard(rank: int, config: Optional[OracleConfig]) -> None:
    cap = config.max_rank if config is not None else 8
    if rank > cap:
        raise ValueError(f"rank {rank} exceeds oracle cap {cap}")


def _mean(total, count: int):
    if isinstance(total, (int, Fraction)):
        return total * Fraction(1, count)
    return total / count


def brute_symmetrize(raw, rank: Optional[int] = None, config: Optional[OracleConfig] = None):
    """Average over all rank! slot permutations, evaluated entrywise.

    `raw` is either a mapping from full index tuples to values or a nested
    sequence indexed [i1][i2]...[in].
    """
    if rank is None:
        if hasattr(raw, "keys"):
            rank = len(next(iter(raw.keys()))) if raw else 0
        else:
            rank = 0
            probe = raw
            while isinstance(probe, (list, tuple)):
                rank += 1
                probe = probe[0]
    _guard(rank, config)

    def lookup(idx: Tuple[int, ...]):
        if hasattr(raw, "keys"):
            return raw.get(idx, 0)
        v = raw
        for i in idx:
            v = v[i]
        return v

    fact = factorial(rank)
    vals = {}
    for idx in canonical_indices(rank):
        total = None
        for perm in permutations(idx):
            item = lookup(perm)
            total = item if total is None else total + item
        vals[idx] = _mean(total, fact) if rank else lookup(())
    return DenseSymTensor(rank, vals)


def brute_realize_basis(
    n: int, s: int, mu: Optional[FourVector] = None, config: Optional[OracleConfig] = None
) -> DenseSymTensor:
    """sym(g x ... x g x mu x ... x mu) by literal permutation average.

    s metric blocks occupy the first 2s slots pairwise, the remaining n - 2s
    slots each carry a contravariant mu component.
    """
    _guard(n, config)
    if not 0 <= 2 * s <= n:
        raise ValueError("need 0 <= 2s <= n")
    if n > 2 * s and mu is None:
        raise ValueError("mu required when n > 2s")
    mu_up: Sequence = (0, 0, 0, 0)
    if mu is not None:
        c = mu.components
        mu_up = (-c[0], c[1], c[2], c[3]) if mu.variance == "lower" else c

    fact = factorial(n)
    vals = {}
    for idx in canonical_indices(n):
        total = None
        for perm in permutations(idx):
            term = 1
            for j in range(s):
                term = term * _G[perm[2 * j]][perm[2 * j + 1]]
                if term == 0:
                    break
            if term != 0:
                for j in range(2 * s, n):
                    term = term * mu_up[perm[j]]
            total = term if total is None else total + term
        vals[idx] = _mean(total, fact) if n else 1
    return DenseSymTensor(n, vals)


def brute_trace(t: DenseSymTensor, config: Optional[OracleConfig] = None) -> DenseSymTensor:
    """Metric contraction of the last two slots, summed over all 16 pairs."""
    _guard(t.rank, config)
    if t.rank < 2:
        raise ValueError("trace needs rank >= 2")
    vals = {}
    for idx in canonical_indices(t.rank - 2):
        total = None
        for a in range(4):
            for b in range(4):
                gab = _G[a][b]
                if gab == 0:
                    continue
                term = gab * t.get(idx + (a, b))
                total = term if total is None else total + term
        vals[idx] = total
    return DenseSymTensor(t.rank - 2, vals)


def brute_mu_contract(
    t: DenseSymTensor, mu: FourVector, config: Optional[OracleConfig] = None
) -> DenseSymTensor:
    """Contraction of the last slot with the covariant mu, written out."""
    _guard(t.rank, config)
    if t.rank < 1:
        raise ValueError("contraction needs rank >= 1")
    c = mu.components
    mu_low = (-c[0], c[1], c[2], c[3]) if mu.variance == "upper" else c
    vals = {}
    for idx in canonical_indices(t.rank - 1):
        total = None
        for a in range(4):
            term = mu_low[a] * t.get(idx + (a,))
            total = term if total is None else total + term
        vals[idx] = total
    return DenseSymTensor(t.rank - 1, vals)


def fd_mu_derivative(
    f: FFamilyElement,
    lam,
    mu: FourVector,
    m=1,
    registry=None,
    step: float = 1e-5,
) -> DenseSymTensor:
    """d(realize(f))/d(mu_beta) by central differences, rank n+1 components.

    The derivative slot is placed first; for elements of the family the
    result is totally symmetric, so any slot assignment must agree with the
    coefficient-space derivative.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    mu_low = [float(c) for c in mu.lowered().components]
    plus_minus = []
    for beta in range(4):
        shifted = []
        for sgn in (+1.0, -1.0):
            comps = list(mu_low)
            comps[beta] += sgn * step
            vec = FourVector(tuple(comps), "lower")
            if float(vec.gamma_sq()) <= 0:
                raise ValueError("perturbed mu left the timelike cone; reduce step")
            shifted.append(realize(f, lam, vec, m, registry))
        plus_minus.append(shifted)
    vals = {}
    for idx in canonical_indices(f.rank + 1):
        beta, rest = idx[0], idx[1:]
        plus, minus = plus_minus[beta]
        vals[idx] = (float(plus.get(rest)) - float(minus.get(rest))) / (2.0 * step)
    return DenseSymTensor(f.rank + 1, vals)


# ---------------------------------------------------------------------------
# seeded random inputs


def random_sym_tensor(rank: int, rng: random.Random, rational: bool = True) -> DenseSymTensor:
    vals = {}
    for idx in canonical_indices(rank):
        if rational:
            vals[idx] = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        else:
            vals[idx] = rng.uniform(-1.0, 1.0)
    return DenseSymTensor(rank, vals)


def random_rational_timelike(rng: random.Random) -> FourVector:
    """Future timelike four-vector with rational components and rational gamma.

    Built as gamma * (cosh, sinh * unit), with cosh = (1+t^2)/(1-t^2),
    sinh = 2t/(1-t^2) for rational t in (0,1) and a rational unit 3-vector
    from the Pythagorean parametrization, so gamma_sq is an exact rational
    square.
    """
    t = Fraction(rng.randint(0, 6), 10)
    cosh = (1 + t * t) / (1 - t * t)
    sinh = 2 * t / (1 - t * t)
    p, q, r = (rng.randint(1, 5) for _ in range(3))
    den = p * p + q * q + r * r
    unit = (Fraction(2 * p * r, den), Fraction(2 * q * r, den), Fraction(p * p + q * q - r * r, den))
    gamma = Fraction(rng.randint(1, 8), rng.randint(1, 4))
    return FourVector(
        (gamma * cosh, gamma * sinh * unit[0], gamma * sinh * unit[1], gamma * sinh * unit[2]),
        "upper",
    )


def random_float_timelike(rng: random.Random) -> FourVector:
    v = [rng.uniform(-0.5, 0.5) for _ in range(3)]
    v2 = sum(x * x for x in v)
    u0 = (1.0 + v2) ** 0.5
    gamma = rng.uniform(0.5, 3.0)
    return FourVector((gamma * u0, gamma * v[0], gamma * v[1], gamma * v[2]), "upper")


def write_failure_artifact(tag: str, payload: dict, directory: Optional[str] = None) -> str:
    """Dump a JSON replay artifact (inputs, seed, mismatch) and return its path."""
    directory = directory or tempfile.gettempdir()
    path = os.path.join(directory, f"etclosure-{tag}-{int(time.time())}.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
    return path
