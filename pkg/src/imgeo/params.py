"""Scalar constants, weight dictionaries and regime classifiers derived from kappa."""

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """A parameter lies outside the range where the formula makes sense."""


class InadmissibleWeight(DomainError):
    """A force-point weight rho <= -2."""


@dataclass(frozen=True)
class Constants:
    kappa: float
    kappa_prime: float
    lam: float
    lam_prime: float
    chi: float

    @property
    def critical_angle(self):
        return 2.0 * self.lam_prime / self.chi


@dataclass(frozen=True)
class ImaginaryParams:
    constants: Constants
    alpha: float = 0.0
    beta: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.alpha > -self.constants.chi:
            raise DomainError(f"alpha={self.alpha} must exceed -chi={-self.constants.chi}")

    @property
    def angle_range(self):
        """Length of the interval of angles available at the singularity."""
        return 2.0 * math.pi * (1.0 + self.alpha / self.constants.chi)


def derive_constants(kappa):
    kappa = float(kappa)
    if not 0.0 < kappa < 4.0:
        raise DomainError(f"kappa={kappa} must lie in (0, 4)")
    s = math.sqrt(kappa)
    return Constants(
        kappa=kappa,
        kappa_prime=16.0 / kappa,
        lam=math.pi / s,
        lam_prime=math.pi * s / 4.0,
        chi=2.0 / s - s / 2.0,
    )


def critical_angle(kappa):
    return derive_constants(kappa).critical_angle


def critical_kappa_for_n(n):
    """Largest kappa for which n non-intersecting rays fit around one point."""
    if int(n) != n or n < 1:
        raise DomainError(f"n={n} must be a positive integer")
    return 8.0 / (n + 2)


RHO_KINDS = ("flow", "counterflow_from_origin", "counterflow_from_infinity")


def rho_from_alpha(params, kind="flow"):
    c = params.constants
    a = params.alpha
    if kind == "flow":
        rho = 2.0 - c.kappa + 2.0 * math.pi * a / c.lam
    elif kind == "counterflow_from_origin":
        rho = 2.0 - c.kappa_prime - 2.0 * math.pi * a / c.lam_prime
    elif kind == "counterflow_from_infinity":
        rho = c.kappa_prime - 6.0 + 2.0 * math.pi * a / c.lam_prime
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {RHO_KINDS}")
    if not rho > -2.0:
        raise InadmissibleWeight(f"rho={rho} is not > -2")
    return rho


def alpha_at_simple_threshold(kappa):
    """Value of alpha at which the flow weight equals kappa/2 - 2."""
    s = math.sqrt(kappa)
    return 0.75 * s - 2.0 / s


def _check_rho(rho):
    if not rho > -2.0:
        raise DomainError(f"rho={rho} must be > -2")


def max_self_hits(kappa, rho):
    if not 0.0 < kappa < 4.0:
        raise DomainError(f"kappa={kappa} must lie in (0, 4)")
    _check_rho(rho)
    # the ratio is rounded first so that exact boundary cases such as
    # kappa=3, rho=-1/2 are not pushed over an integer by float error
    ratio = round(kappa / (2.0 * (2.0 + rho)), 12)
    return max(1, math.ceil(ratio))


def bessel_dimension(kappa, rho):
    return 1.0 + 2.0 * (rho + 2.0) / kappa


def regime(kappa, rho):
    _check_rho(rho)
    if rho >= kappa / 2.0 - 2.0 - 1e-12:
        return "simple"
    return "self_intersecting"


def mu_from_beta(kappa, beta):
    """Radial drift mu that realizes the log-singularity strength beta.

    The winding of the curve grows like beta / (2 pi (chi + alpha)) turns per
    unit of log radius exactly when kappa * mu = sqrt(kappa) * beta.
    """
    return beta / math.sqrt(kappa)
