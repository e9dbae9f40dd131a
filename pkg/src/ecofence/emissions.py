"""Average-speed tailpipe emission model.

A vehicle's emission rate is a polynomial curve of its average speed:

    rate_g_per_km(v) = (k / v) * (a + b*v + c*v^2 + d*v^3 + e*v^4 + f*v^5 + g*v^6)

with ``v`` in km/h.  Rates convert to the per-minute units used by the
budget optimizer as ``rate_g_per_km * v / 60`` (g/km * km/h = g/h, /60 =
g/min).  Coefficient sets are keyed by EURO class (1..4, lower class =
dirtier vehicle) and pollutant, and are normally loaded from a coefficient
table file; see :meth:`CoefficientTable.from_csv` for the format and
:func:`load_default_table` for the bundled illustrative values.

The curve has a 1/v singularity, so speeds must be strictly positive when
evaluating the g/km form.  A stationary vehicle is defined to emit 0 g/min
(idling is outside this model), which :func:`vehicle_emission_rate` handles
without touching the singular form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Mapping

logger = logging.getLogger(__name__)

EURO_CLASSES = (1, 2, 3, 4)

# Speed domain (km/h) over which bundled tables are validated.
SPEED_DOMAIN = (1.0, 130.0)

# Grid used for load-time table checks: domain endpoints plus every 5 km/h.
_CHECK_SPEEDS = (1.0,) + tuple(float(v) for v in range(5, 131, 5))


class ConfigurationError(Exception):
    """A coefficient table is missing entries or violates its invariants."""


class EmissionModelError(Exception):
    """The emission curve produced a non-finite value."""


class Pollutant(Enum):
    """Pollutant species tracked by the model (extensible: NOx, PM, ...)."""

    CO = "CO"


def validate_euro_class(euro_class: int) -> int:
    """Check that ``euro_class`` is one of the supported classes 1..4."""
    if euro_class not in EURO_CLASSES:
        raise ValueError(f"euro_class must be in {EURO_CLASSES}, got {euro_class!r}")
    return euro_class


@dataclass(frozen=True)
class EmissionCoefficients:
    """Polynomial parameters of the average-speed curve for one vehicle class.

    The names ``k, a..g`` follow the curve definition in the module
    docstring; they are unrelated to the optimizer's per-vehicle symbols.
    """

    k: float
    a: float
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 0.0
    f: float = 0.0
    g: float = 0.0


def emission_rate_g_per_km(coeffs: EmissionCoefficients, v: float) -> float:
    """Evaluate the average-speed curve at speed ``v`` (km/h), in g/km.

    Raises ValueError for v <= 0 (the k/v term is singular at 0) and
    EmissionModelError if the result is not finite.  Negative polynomial
    values are physically meaningless and clamp to 0 with a warning.
    """
    if v <= 0:
        raise ValueError("speed must be positive")
    poly = (
        coeffs.a
        + coeffs.b * v
        + coeffs.c * v**2
        + coeffs.d * v**3
        + coeffs.e * v**4
        + coeffs.f * v**5
        + coeffs.g * v**6
    )
    rate = coeffs.k / v * poly
    if not math.isfinite(rate):
        raise EmissionModelError(f"emission rate is not finite at v={v} for {coeffs}")
    if rate < 0.0:
        logger.warning("negative emission rate %g at v=%g clamped to 0", rate, v)
        return 0.0
    return rate


def to_g_per_min(rate_gkm: float, v: float) -> float:
    """Convert a g/km rate at speed ``v`` (km/h) to g/min."""
    if rate_gkm < 0:
        raise ValueError("rate must be non-negative")
    if v < 0:
        raise ValueError("speed must be non-negative")
    return rate_gkm * v / 60.0


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficient sets for every (euro_class, pollutant) pair.

    Tables must be total on EURO classes 1..4 for every pollutant they
    carry, and dirtier (lower) classes must emit at least as much as
    cleaner ones at any fixed speed.  Both properties are checked when a
    table is constructed, over a sampled speed grid spanning
    ``SPEED_DOMAIN``.
    """

    entries: Mapping[tuple[int, Pollutant], EmissionCoefficients]

    def __post_init__(self) -> None:
        self._validate()

    def lookup(self, euro_class: int, pollutant: Pollutant) -> EmissionCoefficients:
        try:
            return self.entries[(euro_class, pollutant)]
        except KeyError:
            raise ConfigurationError(
                f"no coefficients for euro_class={euro_class}, pollutant={pollutant.value}"
            ) from None

    def pollutants(self) -> tuple[Pollutant, ...]:
        return tuple(sorted({p for _, p in self.entries}, key=lambda p: p.value))

    def _validate(self) -> None:
        problems: list[str] = []
        for (cls, pollutant), coeffs in self.entries.items():
            if cls not in EURO_CLASSES:
                problems.append(f"unknown euro_class {cls!r}")
                continue
            for v in _CHECK_SPEEDS:
                try:
                    rate = emission_rate_g_per_km(coeffs, v)
                except EmissionModelError:
                    problems.append(
                        f"class {cls}/{pollutant.value}: non-finite rate at v={v}"
                    )
                    break
                if rate < 0:
                    problems.append(
                        f"class {cls}/{pollutant.value}: negative rate at v={v}"
                    )
                    break
        for pollutant in self.pollutants():
            present = [c for c in EURO_CLASSES if (c, pollutant) in self.entries]
            if len(present) != len(EURO_CLASSES):
                missing = sorted(set(EURO_CLASSES) - set(present))
                problems.append(
                    f"pollutant {pollutant.value}: missing classes {missing}"
                )
                continue
            # Lower class = dirtier: rate must be non-decreasing as the
            # class number decreases, at every sampled speed.
            for v in _CHECK_SPEEDS:
                rates = [
                    emission_rate_g_per_km(self.entries[(c, pollutant)], v)
                    for c in EURO_CLASSES
                ]
                for hi, lo in zip(rates, rates[1:]):
                    if hi < lo:
                        problems.append(
                            f"pollutant {pollutant.value}: class ordering violated at v={v}"
                        )
                        break
                else:
                    continue
                break
        if problems:
            raise ConfigurationError("invalid coefficient table: " + "; ".join(problems))

    @classmethod
    def from_csv(cls, text: str) -> "CoefficientTable":
        """Parse a coefficient table from its text form.

        The format is CSV with ``#`` comment lines and a header row::

            euro_class,pollutant,k,a,b,c,d,e,f,g

        Units are stated in the file header: rates on a g/km basis,
        speeds in km/h.
        """
        entries: dict[tuple[int, Pollutant], EmissionCoefficients] = {}
        header: list[str] | None = None
        expected = ["euro_class", "pollutant", "k", "a", "b", "c", "d", "e", "f", "g"]
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [part.strip() for part in line.split(",")]
            if header is None:
                header = fields
                if header != expected:
                    raise ConfigurationError(
                        f"line {lineno}: header must be {','.join(expected)}"
                    )
                continue
            if len(fields) != len(expected):
                raise ConfigurationError(
                    f"line {lineno}: expected {len(expected)} fields, got {len(fields)}"
                )
            try:
                euro_class = int(fields[0])
                pollutant = Pollutant(fields[1])
                values = [float(x) for x in fields[2:]]
            except ValueError as exc:
                raise ConfigurationError(f"line {lineno}: {exc}") from None
            key = (euro_class, pollutant)
            if key in entries:
                raise ConfigurationError(
                    f"line {lineno}: duplicate entry for class {euro_class}/{fields[1]}"
                )
            entries[key] = EmissionCoefficients(*values)
        if header is None:
            raise ConfigurationError("coefficient table has no header row")
        return cls(entries=entries)

    @classmethod
    def from_file(cls, path) -> "CoefficientTable":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_csv(handle.read())


def load_default_table() -> CoefficientTable:
    """Load the coefficient table bundled with the package.

    The bundled values are illustrative, chosen to satisfy the class
    ordering invariant with margin; they are not calibrated against any
    measured fleet.
    """
    resource = resources.files("ecofence") / "data" / "default_coefficients.csv"
    return CoefficientTable.from_csv(resource.read_text(encoding="utf-8"))


def vehicle_emission_rate(
    euro_class: int,
    pollutant: Pollutant,
    v: float,
    table: CoefficientTable,
) -> float:
    """Per-minute emission rate for a vehicle of the given class at speed ``v``.

    A stationary vehicle (v = 0) emits 0 g/min by definition; the singular
    g/km form is never evaluated in that case.
    """
    coeffs = table.lookup(euro_class, pollutant)
    if v < 0:
        raise ValueError("speed must be non-negative")
    if v == 0:
        return 0.0
    return to_g_per_min(emission_rate_g_per_km(coeffs, v), v)
