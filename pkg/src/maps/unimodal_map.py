"""
Unimodal map families: logistic, tent and user polynomials

A MapFamily is an immutable description of x -> f(x; r) on [a, b] with a single
maximum at the critical point C. Iterates f^q and their first three derivatives
are evaluated by accumulating the chain rule along the orbit.
"""
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from loguru import logger

from src.utils.errors import (
    MapDomainError,
    MapValidationError,
    NonDifferentiableError,
    SingularSchwarzianError,
)

ArrayLike = Union[float, np.ndarray]

# Cube root of machine epsilon, the usual central-difference step scale
FD_STEP = float(np.cbrt(np.finfo(float).eps))


class MapFamilyId(str, Enum):
    """Supported map families"""
    LOGISTIC = "logistic"
    TENT = "tent"
    CUSTOM = "custom"


def central_difference(func: Callable[[float], float], x: float, h: Optional[float] = None) -> float:
    """
    Central finite difference of func at x

    Args:
        func: Scalar function
        x: Evaluation point
        h: Step; defaults to cbrt(eps) * max(1, |x|)

    Returns:
        Approximate derivative
    """
    if h is None:
        h = FD_STEP * max(1.0, abs(x))
    return (func(x + h) - func(x - h)) / (2.0 * h)


@dataclass(frozen=True)
class MapFamily:
    """
    Parametrized unimodal map f(x; r) on [a, b] with maximum at C

    Custom maps are f(x) = r * P(x) with P given by coefficients in increasing
    degree order.
    """
    family_id: MapFamilyId
    r: float
    domain: Tuple[float, float] = (0.0, 1.0)
    critical: float = 0.5
    coeffs: Tuple[float, ...] = ()
    check_points: int = 10_000
    validate: bool = field(default=True, compare=False, repr=False)
    _d1: Tuple[float, ...] = field(default=(), init=False, compare=False, repr=False)
    _d2: Tuple[float, ...] = field(default=(), init=False, compare=False, repr=False)
    _d3: Tuple[float, ...] = field(default=(), init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "family_id", MapFamilyId(self.family_id))
        object.__setattr__(self, "r", float(self.r))
        a, b = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (a, b))
        object.__setattr__(self, "critical", float(self.critical))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

        if not a < self.critical < b:
            raise MapValidationError(f"Critical point {self.critical} not inside domain [{a}, {b}]")

        if self.family_id is MapFamilyId.CUSTOM:
            if len(self.coeffs) < 3:
                raise MapValidationError("Custom map needs a polynomial of degree >= 2")
            d1 = P.polyder(self.coeffs)
            object.__setattr__(self, "_d1", tuple(d1))
            object.__setattr__(self, "_d2", tuple(P.polyder(d1)))
            object.__setattr__(self, "_d3", tuple(P.polyder(d1, 2)))
        elif self.critical != 0.5:
            raise MapValidationError(f"{self.family_id.value} map has its critical point at 0.5")

        if self.validate:
            self.check()

    # ------------------------------------------------------------------
    # Construction helpers

    @classmethod
    def logistic(cls, r: float, **kwargs) -> "MapFamily":
        return cls(MapFamilyId.LOGISTIC, r, **kwargs)

    @classmethod
    def tent(cls, r: float, **kwargs) -> "MapFamily":
        return cls(MapFamilyId.TENT, r, **kwargs)

    @classmethod
    def custom(
        cls,
        coeffs: Sequence[float],
        critical: float,
        domain: Tuple[float, float] = (0.0, 1.0),
        r: float = 1.0,
        **kwargs,
    ) -> "MapFamily":
        return cls(MapFamilyId.CUSTOM, r, domain=tuple(domain), critical=critical, coeffs=tuple(coeffs), **kwargs)

    @classmethod
    def from_spec(cls, spec: Dict[str, Any], check_points: int = 10_000, validate: bool = True) -> "MapFamily":
        """
        Build a map from a specification dictionary

        Args:
            spec: {"family": "logistic", "r": ..., "domain": [a, b]} or
                {"family": "custom", "coeffs": [...], "critical": C, "domain": [a, b]}
            check_points: Grid size for the construction checks
            validate: Run the construction checks (off for family templates)

        Returns:
            Validated MapFamily
        """
        family = MapFamilyId(spec.get("family", "logistic"))
        domain = tuple(spec.get("domain", (0.0, 1.0)))
        if family is MapFamilyId.CUSTOM:
            if "coeffs" not in spec or "critical" not in spec:
                raise MapValidationError("Custom map spec needs 'coeffs' and 'critical'")
            return cls.custom(
                spec["coeffs"],
                spec["critical"],
                domain=domain,
                r=spec.get("r", 1.0),
                check_points=check_points,
                validate=validate,
            )
        if "r" not in spec:
            raise MapValidationError(f"{family.value} map spec needs 'r'")
        return cls(family, spec["r"], domain=domain, check_points=check_points, validate=validate)

    @classmethod
    def from_file(cls, path: Union[str, Path], check_points: int = 10_000) -> "MapFamily":
        """Load a map specification JSON file"""
        with open(path, "r", encoding="utf-8") as f:
            spec = json.load(f)
        logger.info(f"Map specification loaded from {path}")
        return cls.from_spec(spec, check_points=check_points)

    def to_spec(self) -> Dict[str, Any]:
        spec: Dict[str, Any] = {"family": self.family_id.value, "r": self.r, "domain": list(self.domain)}
        if self.family_id is MapFamilyId.CUSTOM:
            spec["coeffs"] = list(self.coeffs)
            spec["critical"] = self.critical
        return spec

    def with_parameter(self, r: float, validate: bool = False) -> "MapFamily":
        """Same family at another parameter value"""
        return replace(self, r=r, validate=validate)

    # ------------------------------------------------------------------
    # Properties

    @property
    def a(self) -> float:
        return self.domain[0]

    @property
    def b(self) -> float:
        return self.domain[1]

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def is_smooth(self) -> bool:
        return self.family_id is not MapFamilyId.TENT

    # ------------------------------------------------------------------
    # Evaluation

    def _value(self, x: ArrayLike) -> ArrayLike:
        """f(x) without domain checks; broadcasts over numpy arrays"""
        return self.value_at_parameter(x, self.r)

    def value_at_parameter(self, x: ArrayLike, r: ArrayLike) -> ArrayLike:
        """f(x; r) for any r broadcastable against x, no checks"""
        if self.family_id is MapFamilyId.LOGISTIC:
            return r * x * (1.0 - x)
        if self.family_id is MapFamilyId.TENT:
            return r * np.minimum(x, 1.0 - x)
        return r * P.polyval(x, self.coeffs)

    def _jet(self, x: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
        """(f, f', f'', f''') at x; the tent kink is the caller's concern"""
        r = self.r
        if self.family_id is MapFamilyId.LOGISTIC:
            zero = 0.0 * x
            return r * x * (1.0 - x), r * (1.0 - 2.0 * x), zero - 2.0 * r, zero
        if self.family_id is MapFamilyId.TENT:
            zero = 0.0 * x
            return r * np.minimum(x, 1.0 - x), np.where(x < self.critical, r, -r), zero, zero
        return (
            r * P.polyval(x, self.coeffs),
            r * P.polyval(x, self._d1),
            r * P.polyval(x, self._d2),
            r * P.polyval(x, self._d3),
        )

    def _check_domain(self, x: float):
        if not self.a <= x <= self.b:
            raise MapDomainError(f"x={x} outside domain [{self.a}, {self.b}]")

    def evaluate(self, x: float) -> float:
        """
        Evaluate f(x; r)

        Raises:
            MapDomainError: if x is outside [a, b]
        """
        self._check_domain(x)
        return float(self._value(x))

    __call__ = evaluate

    def iterate(self, x: float, q: int) -> float:
        """
        Apply f q times to x; q = 0 is the identity

        Raises:
            MapDomainError: if x is outside [a, b]
        """
        if q < 0:
            raise ValueError(f"Iteration count must be non-negative, got {q}")
        self._check_domain(x)
        return self.iterate_unchecked(x, q)

    def iterate_unchecked(self, x: float, q: int) -> float:
        x = float(x)
        for _ in range(q):
            x = float(self._value(x))
        return x

    def iterate_array(self, xs: np.ndarray, q: int) -> np.ndarray:
        """Vectorized f^q over an array of points"""
        out = np.asarray(xs, dtype=float)
        for _ in range(q):
            out = self._value(out)
        return out

    def orbit(self, x: float, n: int) -> np.ndarray:
        """The first n + 1 points x, f(x), ..., f^n(x)"""
        self._check_domain(x)
        points = np.empty(n + 1)
        points[0] = x
        for k in range(n):
            points[k + 1] = self._value(points[k])
        return points

    # ------------------------------------------------------------------
    # Derivatives

    def derivative(self, x: float) -> float:
        """
        f'(x; r): analytic for built-in families, central difference for custom maps

        Raises:
            MapDomainError: if x is outside [a, b]
            NonDifferentiableError: at the tent map's kink
        """
        self._check_domain(x)
        if self.family_id is MapFamilyId.CUSTOM:
            return central_difference(lambda t: float(self._value(t)), x)
        return self.derivatives(x)[1]

    def derivatives(self, x: float) -> Tuple[float, float, float, float]:
        """Analytic (f, f', f'', f''') at x"""
        if self.family_id is MapFamilyId.TENT and x == self.critical:
            raise NonDifferentiableError(f"Tent map is not differentiable at C={self.critical}")
        return tuple(float(v) for v in self._jet(x))

    def schwarzian(self, x: float) -> float:
        """
        Schwarzian derivative f'''/f' - 1.5 (f''/f')^2

        Raises:
            SingularSchwarzianError: where f'(x) = 0
        """
        self._check_domain(x)
        _, d1, d2, d3 = self.derivatives(x)
        if d1 == 0.0:
            raise SingularSchwarzianError(f"f'({x}) = 0, Schwarzian undefined")
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    def iterate_jet(self, x: float, q: int, check: bool = True) -> Tuple[float, float, float, float]:
        """
        f^q(x) and its first three derivatives by the chain rule along the orbit

        For g = f o h: g' = f'(h) h', g'' = f''(h) h'^2 + f'(h) h'',
        g''' = f'''(h) h'^3 + 3 f''(h) h' h'' + f'(h) h'''.
        """
        if check:
            self._check_domain(x)
        h, h1, h2, h3 = float(x), 1.0, 0.0, 0.0
        for _ in range(q):
            v, d1, d2, d3 = self.derivatives(h)
            h1, h2, h3 = (
                d1 * h1,
                d2 * h1 * h1 + d1 * h2,
                d3 * h1 ** 3 + 3.0 * d2 * h1 * h2 + d1 * h3,
            )
            h = v
        return h, h1, h2, h3

    def iterate_derivative(self, x: float, q: int) -> float:
        """(f^q)'(x) by the chain rule"""
        return self.iterate_jet(x, q)[1]

    def multiplier(self, points: Sequence[float]) -> float:
        """Product of f' along a periodic orbit"""
        return float(np.prod([self.derivatives(s)[1] for s in points]))

    # ------------------------------------------------------------------
    # Construction checks

    def check(self):
        """
        Grid checks: range inside [a, b], increasing on [a, C), decreasing on (C, b],
        negative Schwarzian away from C for smooth families

        Raises:
            MapValidationError: on the first failed check
        """
        a, b, c = self.a, self.b, self.critical
        xs = np.linspace(a, b, self.check_points)
        ys = self._value(xs)
        slack = 1e-12 * self.length
        if np.any(ys < a - slack) or np.any(ys > b + slack):
            raise MapValidationError(
                f"{self.family_id.value} r={self.r} does not map [{a}, {b}] into itself "
                f"(range [{ys.min()}, {ys.max()}])"
            )

        # flat tops sit below rounding noise next to C
        left = np.append(xs[xs < c], c)
        right = np.insert(xs[xs > c], 0, c)
        if np.any(np.diff(self._value(left)) < -slack):
            raise MapValidationError(f"{self.family_id.value} r={self.r} is not increasing on [a, C)")
        if np.any(np.diff(self._value(right)) > slack):
            raise MapValidationError(f"{self.family_id.value} r={self.r} is not decreasing on (C, b]")

        if self.is_smooth:
            _, d1, d2, d3 = self._jet(xs)
            usable = (np.abs(d1) > 1e-8) & (xs != c)
            s = d3[usable] / d1[usable] - 1.5 * (d2[usable] / d1[usable]) ** 2
            if np.any(s >= 0.0):
                bad = xs[usable][np.argmax(s >= 0.0)]
                raise MapValidationError(
                    f"{self.family_id.value} r={self.r} has non-negative Schwarzian near x={bad}"
                )
        logger.debug(f"Validated {self.family_id.value} map r={self.r} on {self.check_points} points")


@dataclass(frozen=True)
class IterateHandle:
    """The q-th iterate f^q of a map, as a callable"""
    map: MapFamily
    q: int

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"Iteration count must be non-negative, got {self.q}")

    def __call__(self, x: float) -> float:
        return self.map.iterate(x, self.q)

    def derivative(self, x: float) -> float:
        return self.map.iterate_jet(x, self.q)[1]


def evaluate(map_family: MapFamily, x: float) -> float:
    return map_family.evaluate(x)


def iterate(map_family: MapFamily, x: float, q: int) -> float:
    return map_family.iterate(x, q)


def derivative(map_family: MapFamily, x: float) -> float:
    return map_family.derivative(x)


def schwarzian(map_family: MapFamily, x: float) -> float:
    return map_family.schwarzian(x)
