"""Shannon-information accounting for the two-basis qudit protocol.

Conventions: all entropies and informations are in bits.  ``P`` denotes the
character distribution seen by the legitimate receiver, ``E_k`` the
probability that character ``k`` arrives flipped to some other character.

The mutual-information estimate between the stations models a sifted round
as: character ``k`` is kept intact with probability ``1 - E_k`` and
otherwise lands on ``j != k`` with probability proportional to ``P_j``,

    I_AB = H(P) + sum_k P_k (1 - E_k) log2(1 - E_k)
         + sum_k sum_{j != k} P_k E_k P_j / (1 - P_k)
           * log2(E_k P_j / (1 - P_k)),

which treats the receiver marginal as ``P`` itself.  The exact mutual
information of the same joint distribution is also provided as an oracle.
Errors of the intercept-resend form ``E_k = c (1 - P_k)`` leave the
receiver marginal equal to ``P``, so for them the two expressions agree
exactly; a flat error rate on a non-flat source makes them differ.

An intercept-resend attacker who measures a fraction ``eta`` of the photons
in a random basis guesses right half the time, so her information is
``I_E = (eta / 2) H(P)`` and she causes per-character errors
``E_k = (eta / 2)(1 - P_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize, special

__all__ = [
    "CLONING_ATTACK_ERROR_BOUND",
    "shannon_entropy",
    "info_ab",
    "mutual_information_exact",
    "info_eve",
    "intercept_resend_errors",
    "uniform_intercept_error",
    "security_crossover",
    "CrossoverResult",
    "InfoReport",
    "security_report",
]

#: Error-rate threshold below which a symmetric universal-cloning attack on a
#: 37-character alphabet would beat the stations' mutual information.  Quoted
#: for context only: no linear-optics implementation of that attack is known,
#: so the intercept-resend crossover computed here is the operative benchmark.
CLONING_ATTACK_ERROR_BOUND = 0.42

_LN2 = np.log(2.0)


def _check_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("expected a one-dimensional probability vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum():.12f}, expected 1")
    return p


def shannon_entropy(p) -> float:
    """Entropy of a distribution in bits; zero entries contribute nothing."""
    p = _check_distribution(p)
    return float(-special.xlogy(p, p).sum() / _LN2) + 0.0


def intercept_resend_errors(p, eta: float) -> np.ndarray:
    """Per-character error rates caused by intercepting a fraction ``eta``."""
    p = _check_distribution(p)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta!r}")
    return 0.5 * eta * (1.0 - p)


def uniform_intercept_error(d: int) -> Fraction:
    """Average error of a full intercept on a uniform alphabet of size d.

    Exactly ``(d - 1) / (2 d)``: the attack is noticed half the time on each
    of the ``d - 1`` wrong characters.
    """
    if d < 1:
        raise ValueError(f"alphabet size must be positive, got {d}")
    return Fraction(d - 1, 2 * d)


def _broadcast_errors(p: np.ndarray, errors) -> np.ndarray:
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim == 0:
        e = np.full_like(p, float(e))
    if e.shape != p.shape:
        raise ValueError(f"errors shape {e.shape} does not match {p.shape}")
    if np.any(e < 0) or np.any(e >= 1.0):
        raise ValueError("error rates must lie in [0, 1)")
    return e


def info_ab(p, errors) -> float:
    """Station-to-station information in bits for given per-character errors.

    ``errors`` may be a scalar or one rate per character.  Requires every
    ``P_k`` below 1 so the error redistribution is well defined.
    """
    p = _check_distribution(p)
    e = _broadcast_errors(p, errors)
    if p.size > 1 and np.any(p >= 1.0):
        raise ValueError("degenerate distribution with a certain character")
    entropy = -special.xlogy(p, p).sum() / _LN2
    keep = (p * special.xlogy(1.0 - e, 1.0 - e)).sum() / _LN2
    if p.size == 1:
        return float(entropy + keep)
    ratio = np.outer(e / (1.0 - p), p)
    np.fill_diagonal(ratio, 0.0)
    weight = p[:, None] * ratio
    flip = special.xlogy(weight, ratio).sum() / _LN2
    return float(entropy + keep + flip)


def _joint(p: np.ndarray, e: np.ndarray) -> np.ndarray:
    joint = np.outer(p * e / (1.0 - p), p)
    np.fill_diagonal(joint, p * (1.0 - e))
    return joint


def mutual_information_exact(p, errors) -> float:
    """Exact mutual information of the error-redistribution joint, in bits.

    Oracle for :func:`info_ab`: identical when the receiver marginal equals
    ``P``, which holds for a uniform source with symmetric errors.
    """
    p = _check_distribution(p)
    e = _broadcast_errors(p, errors)
    if p.size == 1:
        return 0.0
    if np.any(p >= 1.0):
        raise ValueError("degenerate distribution with a certain character")
    joint = _joint(p, e)
    row = joint.sum(axis=1)
    col = joint.sum(axis=0)
    denom = np.outer(row, col)
    mask = joint > 0
    terms = special.xlogy(joint[mask], joint[mask] / denom[mask])
    return float(terms.sum() / _LN2)


def info_eve(p, eta: float) -> float:
    """Intercept-resend eavesdropper information, ``(eta / 2) H(P)`` bits."""
    p = _check_distribution(p)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta!r}")
    return 0.5 * eta * shannon_entropy(p)


@dataclass(frozen=True)
class CrossoverResult:
    """Intercept fraction at which the eavesdropper draws level.

    ``eta_star`` is None when the stations keep the information advantage for
    every intercept fraction up to one.
    """

    eta_star: float | None
    average_error: float | None
    common_information: float | None
    secure_for_all_eta: bool

    def as_dict(self) -> dict:
        return {
            "eta_star": self.eta_star,
            "average_error": self.average_error,
            "common_information_bits": self.common_information,
            "secure_for_all_eta": self.secure_for_all_eta,
        }


def security_crossover(p, xtol: float = 1e-6) -> CrossoverResult:
    """Solve ``I_AB(eta) = I_E(eta)`` for the intercept fraction.

    Uses a bracketing root solver on [0, 1] with the given tolerance in
    ``eta``; the result does not depend on a starting guess.  Below the
    crossover the stations hold more information than the attacker.
    """
    p = _check_distribution(p)

    def gap(eta: float) -> float:
        return info_ab(p, intercept_resend_errors(p, eta)) - info_eve(p, eta)

    if gap(1.0) >= 0.0:
        return CrossoverResult(None, None, None, True)
    eta_star = float(optimize.brentq(gap, 1e-12, 1.0, xtol=xtol))
    errors = intercept_resend_errors(p, eta_star)
    return CrossoverResult(
        eta_star=eta_star,
        average_error=float(np.dot(p, errors)),
        common_information=info_eve(p, eta_star),
        secure_for_all_eta=False,
    )


@dataclass(frozen=True)
class InfoReport:
    """Information budget of one operating point."""

    alphabet_size: int
    eta: float
    source_entropy: float
    average_error: float
    info_ab: float
    info_ab_exact: float
    info_eve: float
    secure: bool

    def as_dict(self) -> dict:
        return {
            "alphabet_size": self.alphabet_size,
            "eta": self.eta,
            "source_entropy_bits": self.source_entropy,
            "average_error": self.average_error,
            "info_ab_bits": self.info_ab,
            "info_ab_exact_bits": self.info_ab_exact,
            "info_eve_bits": self.info_eve,
            "secure": self.secure,
        }


def security_report(p, eta: float) -> InfoReport:
    """Evaluate both sides of the information balance at one intercept level."""
    p = _check_distribution(p)
    errors = intercept_resend_errors(p, eta)
    ab = info_ab(p, errors)
    eve = info_eve(p, eta)
    return InfoReport(
        alphabet_size=int(p.size),
        eta=float(eta),
        source_entropy=shannon_entropy(p),
        average_error=float(np.dot(p, errors)),
        info_ab=ab,
        info_ab_exact=mutual_information_exact(p, errors),
        info_eve=eve,
        secure=bool(ab > eve),
    )
