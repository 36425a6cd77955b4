"""Parameters of the k-server join-the-shortest-queue system.

Rates are normalized so that the arrival rate plus all service rates sum to
one; the discrete-time chain obtained this way has the same stationary
distribution as the continuous-time original. Exact rational copies of the
normalized rates are kept alongside the floats because one verification path
(the invariant-vector identity) is run in exact arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import InvalidParameterError


@dataclass(frozen=True)
class QueueParams:
    """Normalized system parameters.

    ``lam`` is the arrival probability mass per step, ``mu[i]`` the service
    mass of server i, ``rho`` the traffic intensity lam / sum(mu). The
    ``*_exact`` twins carry the same values as Fractions; normalization is
    exact there, so lam_exact + sum(mu_exact) == 1 identically.
    """

    k: int
    lam: float
    mu: tuple[float, ...]
    rho: float
    lam_exact: Fraction = field(repr=False, compare=False, default=None)
    mu_exact: tuple[Fraction, ...] = field(repr=False, compare=False, default=None)

    @property
    def mu_total(self) -> float:
        return float(sum(self.mu_exact))

    @property
    def rho_exact(self) -> Fraction:
        return self.lam_exact / sum(self.mu_exact)


def normalize(lam_raw, mu_raw: Sequence, *, allow_unstable: bool = False) -> QueueParams:
    """Scale raw positive rates by 1/(lam_raw + sum(mu_raw)).

    The traffic intensity is scale-invariant, so it is the same before and
    after. Unstable parameter sets (rho >= 1) are refused unless
    ``allow_unstable`` is set; that flag exists so error paths and the
    stability gate stay testable.
    """
    mu_list = list(mu_raw)
    if len(mu_list) < 2:
        raise InvalidParameterError(f"need at least 2 servers, got {len(mu_list)}")
    try:
        lam_f = Fraction(lam_raw)
        mu_f = [Fraction(m) for m in mu_list]
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"rates must be numeric: {exc}") from exc
    if lam_f <= 0:
        raise InvalidParameterError(f"arrival rate must be positive, got {lam_raw}")
    for i, m in enumerate(mu_f):
        if m <= 0:
            raise InvalidParameterError(f"service rate {i + 1} must be positive, got {mu_list[i]}")

    total = lam_f + sum(mu_f)
    lam_f = lam_f / total
    mu_f = [m / total for m in mu_f]
    rho_f = lam_f / sum(mu_f)
    if rho_f >= 1 and not allow_unstable:
        raise InvalidParameterError(
            f"unstable parameters: traffic intensity {float(rho_f):.6g} >= 1 "
            "(pass allow_unstable=True to construct anyway)"
        )
    return QueueParams(
        k=len(mu_f),
        lam=float(lam_f),
        mu=tuple(float(m) for m in mu_f),
        rho=float(rho_f),
        lam_exact=lam_f,
        mu_exact=tuple(mu_f),
    )


def check_stability(params: QueueParams) -> bool:
    """True iff the traffic intensity is strictly below one.

    Decided on the exact rationals so the boundary case rho == 1 is not
    misclassified by float rounding.
    """
    return params.rho_exact < 1
