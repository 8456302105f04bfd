"""Intercept-resend eavesdropping strategies.

The attacker taps a fraction ``eta`` of the photons.  For each tapped photon
she picks a basis at random, measures the continuous detection-plane
position behind her own decoder, bins it to the nearest cell and re-prepares
the aperture state at that cell in her basis.  Her decoder has no dead
regions: any position maps to some character, which is the strongest form of
the attack.

The evidence-suppression variant additionally discards photons whose
position is incompatible with her basis having matched the sender's: the
position carries essentially no matched-basis intensity while still lying
under the crossed-basis envelope.  On an alphabet without one-sided support
regions this gains her nothing, because every position that decodes to a
character also carries matched-basis intensity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .optics import BASIS_BY_CODE, Basis

if TYPE_CHECKING:
    from .model import GaussianModel

__all__ = [
    "STRATEGIES",
    "AdversarySpec",
    "EveRound",
    "AttackArrays",
    "evidence_scores",
    "attack_batch",
    "intercept_resend",
    "suppress_on_evidence",
    "eve_information_estimate",
    "eve_log_to_csv",
]

STRATEGIES = ("none", "intercept_resend", "suppress_on_evidence")


@dataclass(frozen=True)
class AdversarySpec:
    """Attack strategy, tapped fraction and evidence threshold."""

    strategy: str = "none"
    eta: float = 0.0
    evidence_threshold: float = 1e-4

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta!r}")
        if not (self.evidence_threshold >= 0
                and np.isfinite(self.evidence_threshold)):
            raise ValueError(
                f"evidence_threshold must be non-negative, "
                f"got {self.evidence_threshold!r}")

    @property
    def active(self) -> bool:
        return self.strategy != "none" and self.eta > 0.0


@dataclass(frozen=True)
class EveRound:
    """The attacker's view of a single tapped photon."""

    basis: Basis
    measured: str
    resent: str | None
    dropped: bool


@dataclass(eq=False)
class AttackArrays:
    """Vectorized attack outcome for one batch of rounds.

    ``basis_code`` and ``measured_idx`` are defined only where ``attacked``
    is True; re-preparation is suppressed where ``dropped`` is True.
    """

    attacked: np.ndarray
    basis_code: np.ndarray
    measured_idx: np.ndarray
    dropped: np.ndarray


def evidence_scores(positions: np.ndarray,
                    model: "GaussianModel") -> tuple[np.ndarray, np.ndarray]:
    """Per-cell-sized likelihood scores of the two basis hypotheses.

    For each position returns ``(same, crossed)``: the peak matched-basis
    density over all characters and the envelope density, both multiplied by
    the cell area so that a score of order one means a comfortable detection
    probability.  Positions are taken in the decoded (logical) plane.
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    centers = model.alphabet.centers
    d2 = (np.sum(pts ** 2, axis=1)[:, None]
          - 2.0 * pts @ centers.T
          + np.sum(centers ** 2, axis=1)[None, :])
    dmin2 = np.clip(d2.min(axis=1), 0.0, None)
    area = model.alphabet.cell_area
    sig_ap = model.aperture_waist / 2.0
    sig_env = model.envelope_waist / 2.0
    same = area * np.exp(-0.5 * dmin2 / sig_ap ** 2) / (2.0 * np.pi * sig_ap ** 2)
    rsq = np.sum(pts ** 2, axis=1)
    crossed = area * np.exp(-0.5 * rsq / sig_env ** 2) / (2.0 * np.pi * sig_env ** 2)
    return same, crossed


def attack_batch(rng: np.random.Generator, alice_basis: np.ndarray,
                 alice_idx: np.ndarray, model: "GaussianModel",
                 spec: AdversarySpec) -> AttackArrays:
    """Apply the attack to a batch of prepared photons.

    Consumes the same random draws for both active strategies, so a
    suppression threshold of zero reproduces plain intercept-resend round for
    round.  Draw order: tap decisions, attack bases, measurement noise.
    """
    m = alice_idx.shape[0]
    if not spec.active:
        return AttackArrays(
            attacked=np.zeros(m, dtype=bool),
            basis_code=np.zeros(m, dtype=np.int8),
            measured_idx=np.full(m, -1, dtype=np.int64),
            dropped=np.zeros(m, dtype=bool),
        )
    attacked = rng.random(m) < spec.eta
    basis_code = rng.integers(0, 2, m).astype(np.int8)
    noise = rng.standard_normal((m, 2))

    centers = model.alphabet.centers
    matched = basis_code == alice_basis
    sign = (2 * basis_code - 1).astype(np.float64)
    phys_center = np.where(matched[:, None], sign[:, None] * centers[alice_idx],
                           0.0)
    sigma = np.where(matched, model.aperture_waist, model.envelope_waist) / 2.0
    physical = phys_center + sigma[:, None] * noise
    logical = sign[:, None] * physical

    measured_idx, _ = model.alphabet.nearest_cell(logical)
    dropped = np.zeros(m, dtype=bool)
    if spec.strategy == "suppress_on_evidence" and spec.evidence_threshold > 0:
        same, crossed = evidence_scores(logical, model)
        eps = spec.evidence_threshold
        dropped = attacked & (same < eps) & (crossed >= eps)
    return AttackArrays(attacked=attacked, basis_code=basis_code,
                        measured_idx=measured_idx, dropped=dropped)


def _single_attack(rng: np.random.Generator, sent: str, alice_basis: Basis,
                   model: "GaussianModel", threshold: float | None) -> EveRound:
    alphabet = model.alphabet
    a_code = BASIS_BY_CODE.index(alice_basis)
    spec = AdversarySpec(strategy="suppress_on_evidence" if threshold
                         else "intercept_resend", eta=1.0,
                         evidence_threshold=threshold or 0.0)
    out = attack_batch(rng, np.array([a_code]),
                       np.array([alphabet.index_of(sent)]), model, spec)
    basis = BASIS_BY_CODE[int(out.basis_code[0])]
    measured = alphabet.labels[int(out.measured_idx[0])]
    dropped = bool(out.dropped[0])
    return EveRound(basis=basis, measured=measured,
                    resent=None if dropped else measured, dropped=dropped)


def intercept_resend(rng: np.random.Generator, sent: str, alice_basis: Basis,
                     model: "GaussianModel") -> EveRound:
    """Tap one photon: random basis, nearest-cell readout, re-preparation."""
    return _single_attack(rng, sent, alice_basis, model, None)


def suppress_on_evidence(rng: np.random.Generator, sent: str,
                         alice_basis: Basis, model: "GaussianModel",
                         threshold: float = 1e-4) -> EveRound:
    """Tap one photon but drop it on clear evidence of a basis mismatch."""
    return _single_attack(rng, sent, alice_basis, model, threshold)


def eve_information_estimate(matched: np.ndarray, measured_idx: np.ndarray,
                             d: int) -> float:
    """Empirical attacker information per tapped photon, in bits.

    Only rounds where her basis matched the sender's yield usable records;
    the estimate is the matched fraction times the empirical entropy of her
    readouts on those rounds.
    """
    matched = np.asarray(matched, dtype=bool)
    n = matched.shape[0]
    if n == 0:
        return 0.0
    hits = np.asarray(measured_idx)[matched]
    if hits.size == 0:
        return 0.0
    counts = np.bincount(hits, minlength=d).astype(np.float64)
    freq = counts[counts > 0] / hits.size
    entropy = float(-(freq * np.log2(freq)).sum())
    return hits.size / n * entropy


def eve_log_to_csv(path, round_index: np.ndarray, basis_code: np.ndarray,
                   measured_idx: np.ndarray, dropped: np.ndarray,
                   labels: tuple[str, ...]) -> None:
    """Write the attacker's records: round, basis, measured char, dropped."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("round,basis,measured_char,dropped\n")
        for i in range(round_index.shape[0]):
            basis = BASIS_BY_CODE[int(basis_code[i])].value
            fh.write(f"{int(round_index[i])},{basis},"
                     f"{labels[int(measured_idx[i])]},{int(dropped[i])}\n")
