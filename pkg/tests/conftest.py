from __future__ import annotations

import random
from fractions import Fraction

import pytest

from etclosure.scalar import FunctionRegistry, PolynomialFunction


@pytest.fixture
def registry() -> FunctionRegistry:
    # Polynomial c_q functions keep every evaluation exact in rational
    # arithmetic; degrees are high enough that third lambda-derivatives
    # are still nonzero.
    return FunctionRegistry(
        {
            0: PolynomialFunction([Fraction(1), Fraction(2), Fraction(1, 3), Fraction(1, 5)]),
            1: PolynomialFunction([Fraction(0), Fraction(1, 2), Fraction(-1), Fraction(1, 7)]),
            2: PolynomialFunction([Fraction(3), Fraction(-1), Fraction(2)]),
            3: PolynomialFunction([Fraction(1, 7), Fraction(2), Fraction(1), Fraction(-1, 2)]),
            4: PolynomialFunction([Fraction(2), Fraction(1, 4), Fraction(1, 9)]),
            5: PolynomialFunction([Fraction(-1), Fraction(1, 3)]),
        }
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
