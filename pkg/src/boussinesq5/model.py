"""
Model parameters
================

Physical inputs of the fifth-order Boussinesq model and the PDE
coefficients derived from them.

The water-wave model is written in terms of four dimensionless inputs
(:math:`\\alpha, \\beta, \\theta, \\tau`). A specific choice of
:math:`\\theta` and :math:`\\tau` turns it into the coupled system

.. math::

   \\eta_t + u_x - a u_{xxx} + a_1(\\eta u)_x + a_2(\\eta u_{xx})_x
       + b u_{xxxxx} = 0,

   u_t + \\eta_x - a \\eta_{xxx} + a_1 u u_x + a_3(\\eta\\eta_{xx})_x
       + a_4 u_x u_{xx} + b \\eta_{xxxxx} = 0,

posed on :math:`(0, L)` with boundary feedback gains
:math:`\\alpha_1, \\alpha_2`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

__all__ = [
    "THETA_SQ_CANONICAL",
    "TAU_CANONICAL",
    "CONFIG_KEYS",
    "ConstraintViolation",
    "ConfigError",
    "PhysicalParameters",
    "ModelCoefficients",
    "ConstraintCheck",
    "ValidationReport",
    "derive_coefficients",
    "validate_coefficients",
    "appendix_identity_residual",
    "parse_config",
    "read_config",
    "coefficients_from_mapping",
]

#: Value of theta**2 that makes the fifth-order coefficients consistent.
THETA_SQ_CANONICAL = 0.5 - 0.5 / math.sqrt(5.0)
#: Surface tension paired with the canonical theta.
TAU_CANONICAL = 2.0 / 3.0 - THETA_SQ_CANONICAL

CONFIG_KEYS = (
    "alpha", "beta", "theta_sq", "tau",
    "a", "b", "a1", "a2", "a3", "a4",
    "alpha1", "alpha2", "L",
)


class ConstraintViolation(ValueError):
    """Raised when coefficients break an admissibility constraint.

    Attributes
    ----------
    constraint : str
        Short name of the failed constraint, e.g. ``"4b > a^2"``.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class ConfigError(ValueError):
    """Malformed configuration text; ``token`` holds the offending piece."""

    def __init__(self, token: str, message: str):
        super().__init__(f"{message} (at {token!r})")
        self.token = token


@dataclass(frozen=True)
class PhysicalParameters:
    """Dimensionless inputs of the water-wave model.

    Parameters
    ----------
    alpha : float
        Amplitude ratio, positive. ``alpha = 0`` is allowed and switches
        off every nonlinear term.
    beta : float
        Squared depth ratio, positive.
    theta_sq : float
        Square of the normalised height at which the velocity is taken,
        in ``[0, 1]``.
    tau : float, optional
        Surface tension. Defaults to ``2/3 - theta_sq``.
    """

    alpha: float
    beta: float
    theta_sq: float = THETA_SQ_CANONICAL
    tau: float | None = None

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", 2.0 / 3.0 - self.theta_sq)
        if not self.alpha >= 0.0:
            raise ConstraintViolation("alpha >= 0", f"got alpha={self.alpha}")
        if not self.beta > 0.0:
            raise ConstraintViolation("beta > 0", f"got beta={self.beta}")
        if not 0.0 <= self.theta_sq <= 1.0:
            raise ConstraintViolation(
                "0 <= theta^2 <= 1", f"got theta_sq={self.theta_sq}")

    @classmethod
    def canonical(cls, alpha: float = 1.0, beta: float = 1.0):
        """Parameters at the canonical ``theta`` and ``tau``."""
        return cls(alpha, beta, THETA_SQ_CANONICAL, TAU_CANONICAL)


@dataclass(frozen=True)
class ModelCoefficients:
    """Coefficients of the PDE system, feedback gains and domain length.

    The instance is a plain record. Use :meth:`check` (or
    :func:`validate_coefficients` for a non-raising report) to enforce
    the admissibility constraints.
    """

    a: float
    b: float
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    L: float = 1.0

    def check(self) -> "ModelCoefficients":
        """Raise :class:`ConstraintViolation` on the first failed constraint."""
        for item in validate_coefficients(self).checks:
            if not item.passed:
                raise ConstraintViolation(item.name, item.detail)
        return self

    @property
    def is_linear(self) -> bool:
        """True when every nonlinear coefficient is zero."""
        return self.a1 == 0.0 and self.a2 == 0.0 and self.a3 == 0.0 and self.a4 == 0.0

    def linearized(self) -> "ModelCoefficients":
        """Copy with the nonlinear coefficients set to zero."""
        return replace(self, a1=0.0, a2=0.0, a3=0.0, a4=0.0)

    def with_gains(self, alpha1: float, alpha2: float) -> "ModelCoefficients":
        return replace(self, alpha1=alpha1, alpha2=alpha2)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_coefficients`.

    ``checks`` holds the hard constraints. ``flags`` holds notes that do
    not make the coefficients inadmissible.
    """

    checks: tuple
    flags: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]


def validate_coefficients(c: ModelCoefficients) -> ValidationReport:
    """Check the admissibility constraints without raising.

    Parameters
    ----------
    c : ModelCoefficients

    Returns
    -------
    ValidationReport
        One entry per constraint (``b > 0``, ``a != b``, ``L > 0``, gains
        nonnegative, ``4b > a^2``). A negative ``a`` is reported in
        ``flags``: the derived coefficients have ``a < 0``, whereas the
        sign list usually quoted for the model has ``a > 0``.
    """
    checks = (
        ConstraintCheck("b > 0", c.b > 0, f"b={c.b}"),
        ConstraintCheck("a != b", c.a != c.b, f"a={c.a}, b={c.b}"),
        ConstraintCheck("L > 0", c.L > 0, f"L={c.L}"),
        ConstraintCheck("alpha1 >= 0", c.alpha1 >= 0, f"alpha1={c.alpha1}"),
        ConstraintCheck("alpha2 >= 0", c.alpha2 >= 0, f"alpha2={c.alpha2}"),
        ConstraintCheck("4b > a^2", 4 * c.b > c.a * c.a,
                        f"4b={4 * c.b}, a^2={c.a * c.a}"),
    )
    flags = []
    if c.a < 0:
        flags.append("a < 0: derived sign, opposite to the a > 0 convention")
    if c.a2 > 0:
        flags.append("a2 > 0: opposite to the a2 < 0 convention")
    return ValidationReport(checks, tuple(flags))


def derive_coefficients(p: PhysicalParameters, alpha1: float = 1.0,
                        alpha2: float = 1.0, L: float = 1.0,
                        require_canonical: bool = True) -> ModelCoefficients:
    """Derive the PDE coefficients from the physical inputs.

    Parameters
    ----------
    p : PhysicalParameters
    alpha1, alpha2 : float
        Feedback gains at ``x = 0`` and ``x = L``.
    L : float
        Domain length.
    require_canonical : bool
        When true (default) reject ``theta_sq``/``tau`` away from the
        canonical pair, the only values for which the fifth-order terms
        of both equations share one coefficient ``b``.

    Returns
    -------
    ModelCoefficients

    Raises
    ------
    ConstraintViolation
        If the derived coefficients are inadmissible, or the inputs are
        not canonical while ``require_canonical`` is set.

    Examples
    --------
    >>> c = derive_coefficients(PhysicalParameters.canonical(1.0, 1.0))
    >>> round(c.a, 7), round(c.b, 8)
    (-0.0284701, 0.00121582)
    """
    t2 = p.theta_sq
    if require_canonical:
        if abs(t2 - THETA_SQ_CANONICAL) > 1e-12:
            raise ConstraintViolation(
                "canonical theta", f"theta_sq={t2}, expected {THETA_SQ_CANONICAL}")
        if abs(p.tau - (2.0 / 3.0 - t2)) > 1e-12:
            raise ConstraintViolation(
                "canonical tau", f"tau={p.tau}, expected {2.0 / 3.0 - t2}")
    al, be = float(p.alpha), float(p.beta)
    c = ModelCoefficients(
        a=0.5 * be * (t2 - 1.0 / 3.0),
        b=be * be / 120.0 * (25.0 * t2 * t2 - 10.0 * t2 + 1.0),
        a1=al,
        a2=0.5 * al * be * (t2 - 1.0),
        a3=al * be,
        a4=al * be * (2.0 - t2),
        alpha1=float(alpha1),
        alpha2=float(alpha2),
        L=float(L),
    )
    return c.check()


def appendix_identity_residual(theta_sq: float = THETA_SQ_CANONICAL,
                               tau: float | None = None) -> float:
    """Residual of the compatibility identity for the fifth-order terms.

    Returns
    ``(25 t^2 - 10 t + 1)/120 - [(t^2 - 6 t + 5)/24 + tau (t - 1)/2]``
    with ``t = theta_sq``. The residual vanishes at the canonical pair.
    """
    t = theta_sq
    if tau is None:
        tau = 2.0 / 3.0 - t
    return (25 * t * t - 10 * t + 1) / 120 - ((t * t - 6 * t + 5) / 24
                                              + 0.5 * tau * (t - 1))


def parse_config(text: str) -> dict:
    """Parse flat ``key=value`` text into a dict of floats.

    Blank lines and ``#`` comments are ignored. Unknown keys, duplicate
    keys and non-numeric values raise :class:`ConfigError`.

    >>> parse_config("a = 1  # dispersion\\nb=2")
    {'a': 1.0, 'b': 2.0}
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(key, f"line {lineno}: unknown key")
        if key in out:
            raise ConfigError(key, f"line {lineno}: duplicate key")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(val, f"line {lineno}: not a number") from None
    return out


def read_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def coefficients_from_mapping(m: dict) -> ModelCoefficients:
    """Build coefficients from a parsed configuration.

    If ``a`` and ``b`` are both present the coefficients are taken as
    given (missing nonlinear ones default to zero). Otherwise they are
    derived from ``alpha``, ``beta`` (default 1) and ``theta_sq``/``tau``.
    Gains default to 1 and ``L`` to 1.
    """
    gains = dict(alpha1=m.get("alpha1", 1.0), alpha2=m.get("alpha2", 1.0),
                 L=m.get("L", 1.0))
    direct = ("a" in m) or ("b" in m)
    if direct:
        if not ("a" in m and "b" in m):
            raise ConfigError("a" if "a" not in m else "b",
                              "direct coefficients need both a and b")
        c = ModelCoefficients(m["a"], m["b"], m.get("a1", 0.0), m.get("a2", 0.0),
                              m.get("a3", 0.0), m.get("a4", 0.0), **gains)
        return c.check()
    for k in ("a1", "a2", "a3", "a4"):
        if k in m:
            raise ConfigError(k, "nonlinear coefficients given without a and b")
    p = PhysicalParameters(m.get("alpha", 1.0), m.get("beta", 1.0),
                           m.get("theta_sq", THETA_SQ_CANONICAL), m.get("tau"))
    return derive_coefficients(p, **gains)
