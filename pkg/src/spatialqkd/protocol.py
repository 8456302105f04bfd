"""Session engine for the two-basis character protocol.

One round: the sender draws a basis and a character, prepares the displaced
aperture state, and the receiver measures behind a random decoder arm.
Rounds with matching bases and a detection survive sifting; a random sample
of the sifted pairs is spent on error estimation and the rest is flattened
to a uniform key.

The engine is vectorized and batched.  Batch ``b`` of a session with seed
``s`` uses the generator seeded with ``[s, b]``, so transcripts are
reproducible bit for bit and independent of how work is split over batches;
error estimation and key flattening draw from their own fixed substreams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Union

import numpy as np

from .adversary import attack_batch, eve_information_estimate
from .alphabet import SourceDistribution
from .model import GaussianModel
from .optics import BASIS_BY_CODE, Basis, BasisConfig

if TYPE_CHECKING:
    from .config import ExperimentConfig

__all__ = [
    "BATCH_SIZE",
    "MIN_SAMPLES_PER_CHAR",
    "NoiseModel",
    "RoundRecord",
    "SiftedPair",
    "SessionLog",
    "ErrorEstimate",
    "SessionStats",
    "SessionResult",
    "alice_prepare",
    "bob_measure",
    "sift",
    "estimate_error",
    "flatten_key",
    "run_session",
]

BATCH_SIZE = 1 << 16

#: Sampled pairs per character and configuration below which the error
#: estimate is flagged as low confidence.
MIN_SAMPLES_PER_CHAR = 30

_ESTIMATE_STREAM = 0x5E1F
_FLATTEN_STREAM = 0xF1A7


@dataclass(frozen=True)
class NoiseModel:
    """Detector imperfections applied to every round.

    ``background_prob`` is a per-cell false-count probability; the detected
    distribution becomes ``(p_signal + b) / (1 + d b)``.  ``jitter_sigma``
    adds isotropic Gaussian blur to the detected position, in meters.
    ``loss_prob`` discards the detection outright and is applied last, so a
    loss probability of one yields no detections regardless of background.
    """

    background_prob: float = 0.0
    jitter_sigma: float = 0.0
    loss_prob: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.background_prob and np.isfinite(self.background_prob)):
            raise ValueError(
                f"background_prob must be non-negative, got {self.background_prob!r}")
        if not (self.jitter_sigma >= 0 and np.isfinite(self.jitter_sigma)):
            raise ValueError(
                f"jitter_sigma must be non-negative, got {self.jitter_sigma!r}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(
                f"loss_prob must be in [0, 1], got {self.loss_prob!r}")

    def background_weight(self, d: int) -> float:
        """Mixture weight of the uniform background among detections."""
        b = self.background_prob
        return d * b / (1.0 + d * b)


@dataclass(frozen=True)
class RoundRecord:
    """One protocol round as seen with full (omniscient) bookkeeping."""

    index: int
    alice_basis: Basis
    bob_basis: Basis
    sent: str
    received: str | None
    attacked: bool = False
    eve_basis: Basis | None = None
    eve_measured: str | None = None
    eve_dropped: bool = False


@dataclass(frozen=True)
class SiftedPair:
    """A matched-basis round that produced a detection."""

    config: BasisConfig
    sent: str
    received: str


@dataclass(eq=False)
class SessionLog:
    """Column-oriented record of every round.

    Basis columns hold codes indexing ``BASIS_BY_CODE``; character columns
    hold alphabet indices with -1 for no detection.  ``eve_basis`` and
    ``eve_measured`` are only meaningful where ``attacked`` is set.
    """

    labels: tuple[str, ...]
    alice_basis: np.ndarray
    bob_basis: np.ndarray
    sent: np.ndarray
    received: np.ndarray
    attacked: np.ndarray
    eve_basis: np.ndarray
    eve_measured: np.ndarray
    eve_dropped: np.ndarray

    def __len__(self) -> int:
        return self.sent.shape[0]

    def record(self, i: int) -> RoundRecord:
        attacked = bool(self.attacked[i])
        received = int(self.received[i])
        return RoundRecord(
            index=i,
            alice_basis=BASIS_BY_CODE[int(self.alice_basis[i])],
            bob_basis=BASIS_BY_CODE[int(self.bob_basis[i])],
            sent=self.labels[int(self.sent[i])],
            received=self.labels[received] if received >= 0 else None,
            attacked=attacked,
            eve_basis=BASIS_BY_CODE[int(self.eve_basis[i])] if attacked else None,
            eve_measured=self.labels[int(self.eve_measured[i])] if attacked else None,
            eve_dropped=bool(self.eve_dropped[i]),
        )

    def __iter__(self):
        return (self.record(i) for i in range(len(self)))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("round,alice_basis,bob_basis,sent,received,"
                     "attacked,eve_basis,eve_measured,eve_dropped\n")
            for i in range(len(self)):
                r = self.record(i)
                fh.write(f"{r.index},{r.alice_basis.value},{r.bob_basis.value},"
                         f"{r.sent},{r.received or ''},{int(r.attacked)},"
                         f"{r.eve_basis.value if r.eve_basis else ''},"
                         f"{r.eve_measured or ''},{int(r.eve_dropped)}\n")


def alice_prepare(rng: np.random.Generator,
                  source: SourceDistribution) -> tuple[Basis, str]:
    """Draw one round's basis (uniform) and character (source-distributed)."""
    basis = BASIS_BY_CODE[int(rng.integers(0, 2))]
    idx = int(rng.choice(len(source.labels), p=source.probabilities))
    return basis, source.labels[idx]


def _measure_batch(rng: np.random.Generator, prep_basis: np.ndarray,
                   prep_idx: np.ndarray, bob_basis: np.ndarray,
                   model: GaussianModel, noise: NoiseModel,
                   present: np.ndarray | None = None) -> np.ndarray:
    """Detected cell index per round, -1 for no detection.

    Draw order is fixed (position noise, jitter, background, loss) so that
    scalar and batched callers consume identical streams.
    """
    alphabet = model.alphabet
    m = prep_idx.shape[0]
    d = alphabet.d
    b_noise = rng.standard_normal((m, 2))
    jitter = rng.standard_normal((m, 2))
    bg_u = rng.random(m)
    bg_cell = rng.integers(0, d, m)
    loss_u = rng.random(m)

    matched = prep_basis == bob_basis
    sign = (2 * bob_basis.astype(np.int64) - 1).astype(np.float64)
    centers = np.where(matched[:, None],
                       sign[:, None] * alphabet.centers[prep_idx], 0.0)
    sigma = np.where(matched, model.aperture_waist, model.envelope_waist) / 2.0
    pos = centers + sigma[:, None] * b_noise + noise.jitter_sigma * jitter
    logical = sign[:, None] * pos
    idx, inside = alphabet.nearest_cell(logical)
    decoded = np.where(inside, idx, -1)

    if present is not None:
        decoded = np.where(present, decoded, -1)
    beta = noise.background_weight(d)
    if beta > 0:
        decoded = np.where(bg_u < beta, bg_cell, decoded)
    if noise.loss_prob > 0:
        decoded = np.where(loss_u < noise.loss_prob, -1, decoded)
    return decoded


def bob_measure(rng: np.random.Generator, sent: str, prep_basis: Basis,
                bob_basis: Basis, model: GaussianModel,
                noise: NoiseModel = NoiseModel()) -> str | None:
    """Measure one photon behind the given decoder arm."""
    alphabet = model.alphabet
    prep = np.array([BASIS_BY_CODE.index(prep_basis)], dtype=np.int8)
    bob = np.array([BASIS_BY_CODE.index(bob_basis)], dtype=np.int8)
    idx = np.array([alphabet.index_of(sent)])
    out = _measure_batch(rng, prep, idx, bob, model, noise)
    return alphabet.labels[int(out[0])] if out[0] >= 0 else None


def sift(rounds: Union[SessionLog, Iterable[RoundRecord]]) -> list[SiftedPair]:
    """Keep matched-basis rounds with a detection as (sent, received) pairs."""
    pairs = []
    for r in rounds:
        if r.alice_basis == r.bob_basis and r.received is not None:
            pairs.append(SiftedPair(
                config=BasisConfig(r.alice_basis, r.bob_basis),
                sent=r.sent, received=r.received))
    return pairs


@dataclass(eq=False)
class ErrorEstimate:
    """Sampled error rates per configuration and character.

    ``per_char[config_label]`` maps each character to its sampled error rate
    (NaN where the character was never sampled in that configuration).
    ``low_confidence`` is set when any character was sampled fewer than
    :data:`MIN_SAMPLES_PER_CHAR` times in some configuration.
    """

    labels: tuple[str, ...]
    per_char: dict[str, np.ndarray]
    counts: dict[str, np.ndarray]
    average: float
    sample_size: int
    low_confidence: bool

    def rate(self, config, label: str) -> float:
        key = config.label if isinstance(config, BasisConfig) else str(config)
        return float(self.per_char[key][self.labels.index(label)])

    def as_dict(self) -> dict:
        def clean(x: float) -> float | None:
            return None if np.isnan(x) else float(x)
        return {
            "average": clean(self.average) if self.sample_size else None,
            "sample_size": self.sample_size,
            "low_confidence": self.low_confidence,
            "per_char": {
                key: {lab: clean(v)
                      for lab, v in zip(self.labels, vec)}
                for key, vec in self.per_char.items()
            },
            "counts": {
                key: {lab: int(c) for lab, c in zip(self.labels, vec)}
                for key, vec in self.counts.items()
            },
        }


def _estimate_from_arrays(rng: np.random.Generator, config_code: np.ndarray,
                          sent: np.ndarray, received: np.ndarray,
                          labels: tuple[str, ...], sample_fraction: float,
                          ) -> tuple[ErrorEstimate, np.ndarray]:
    """Estimate errors on a random sample; return it and the keep mask."""
    d = len(labels)
    ns = sent.shape[0]
    k = min(ns, int(round(sample_fraction * ns))) if ns else 0
    if ns and sample_fraction > 0:
        k = max(k, 1)
    sample = np.zeros(ns, dtype=bool)
    if k:
        chosen = rng.choice(ns, size=k, replace=False)
        sample[chosen] = True

    per_char: dict[str, np.ndarray] = {}
    counts: dict[str, np.ndarray] = {}
    low = k == 0
    wrong_total = 0
    for code, key in ((1, "FF"), (0, "II")):
        mask = sample & (config_code == code)
        n_c = np.bincount(sent[mask], minlength=d)
        w_c = np.bincount(sent[mask & (sent != received)], minlength=d)
        with np.errstate(invalid="ignore"):
            rates = np.where(n_c > 0, w_c / np.maximum(n_c, 1), np.nan)
        per_char[key] = rates
        counts[key] = n_c
        low = low or bool((n_c < MIN_SAMPLES_PER_CHAR).any())
        wrong_total += int(w_c.sum())
    average = wrong_total / k if k else float("nan")
    estimate = ErrorEstimate(labels=labels, per_char=per_char, counts=counts,
                             average=average, sample_size=k,
                             low_confidence=low)
    return estimate, ~sample


def estimate_error(pairs: list[SiftedPair], sample_fraction: float = 0.1,
                   rng: np.random.Generator | None = None,
                   ) -> tuple[ErrorEstimate, list[SiftedPair]]:
    """Spend a random sample of sifted pairs on error estimation.

    Returns the estimate and the unsampled pairs, which remain available for
    key material.
    """
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError(
            f"sample_fraction must be in (0, 1], got {sample_fraction!r}")
    rng = rng or np.random.default_rng()
    if not pairs:
        est, _ = _estimate_from_arrays(rng, np.empty(0, np.int8),
                                       np.empty(0, np.int64),
                                       np.empty(0, np.int64), (), 1.0)
        return est, []
    # Build index arrays against the label set present in the pairs.
    seen = sorted({p.sent for p in pairs} | {p.received for p in pairs})
    lookup = {lab: i for i, lab in enumerate(seen)}
    sent = np.array([lookup[p.sent] for p in pairs])
    received = np.array([lookup[p.received] for p in pairs])
    code = np.array([1 if p.config.alice == Basis.F else 0 for p in pairs],
                    dtype=np.int8)
    est, keep = _estimate_from_arrays(rng, code, sent, received, tuple(seen),
                                      sample_fraction)
    return est, [p for p, k in zip(pairs, keep) if k]


def _flatten_mask(tape: np.ndarray, idx: np.ndarray,
                  probs: np.ndarray) -> np.ndarray:
    """Acceptance mask of the rejection step taking ``P`` to uniform."""
    p_min = probs.min()
    return tape < p_min / probs[idx]


def flatten_key(chars: list[str], source: SourceDistribution,
                rng: np.random.Generator) -> tuple[list[str], np.ndarray]:
    """Thin a character stream so the kept characters are uniform.

    Character ``k`` survives with probability ``min_j P_j / P_k``; the
    expected keep fraction is ``d * min_j P_j``.  Returns the kept
    characters and the boolean keep mask over the input positions, so two
    parties sharing the same random tape can apply it to parallel streams.
    """
    lookup = {lab: i for i, lab in enumerate(source.labels)}
    idx = np.array([lookup[c] for c in chars], dtype=np.int64)
    tape = rng.random(len(chars))
    mask = _flatten_mask(tape, idx, source.probabilities)
    return [c for c, m in zip(chars, mask) if m], mask


@dataclass(eq=False)
class SessionStats:
    """Summary counters and rates of one session."""

    rounds: int
    alphabet_size: int
    seed: int
    strategy: str
    eta: float
    detected: int
    loss_rate: float
    sifted: int
    sifted_fraction: float
    sent_histogram: dict[str, int]
    error: ErrorEstimate
    eve_attacked: int
    eve_dropped: int
    eve_matched: int
    eve_info_bits: float
    key_alice_length: int
    key_bob_length: int
    key_keep_fraction: float
    key_expected_keep: float

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "alphabet_size": self.alphabet_size,
            "seed": self.seed,
            "strategy": self.strategy,
            "eta": self.eta,
            "detected": self.detected,
            "loss_rate": self.loss_rate,
            "sifted": self.sifted,
            "sifted_fraction": self.sifted_fraction,
            "sent_histogram": self.sent_histogram,
            "error": self.error.as_dict(),
            "eve": {
                "attacked": self.eve_attacked,
                "dropped": self.eve_dropped,
                "matched_basis": self.eve_matched,
                "info_bits_per_photon": self.eve_info_bits,
            },
            "key": {
                "alice_length": self.key_alice_length,
                "bob_length": self.key_bob_length,
                "keep_fraction": self.key_keep_fraction,
                "expected_keep_fraction": self.key_expected_keep,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(eq=False)
class SessionResult:
    """Everything a session produces."""

    stats: SessionStats
    estimate: ErrorEstimate
    alice_key: list[str]
    bob_key: list[str]
    log: SessionLog | None
    eve_rounds: dict[str, np.ndarray] | None


def run_session(config: "ExperimentConfig") -> SessionResult:
    """Run a full session described by an experiment configuration.

    Deterministic in the session seed: identical configurations produce
    byte-identical statistics and logs.
    """
    config.validate()
    alphabet = config.build_alphabet()
    model = config.build_model(alphabet)
    if config.session.source == "uniform":
        source = SourceDistribution.uniform(alphabet.labels)
    else:
        source = model.source()
    probs = source.probabilities
    noise = config.noise
    adv = config.adversary
    n = config.session.rounds
    seed = config.session.seed
    d = alphabet.d

    cols: dict[str, list[np.ndarray]] = {key: [] for key in (
        "a_basis", "b_basis", "sent", "received",
        "attacked", "e_basis", "e_measured", "e_dropped")}
    for batch_index, start in enumerate(range(0, n, BATCH_SIZE)):
        m = min(BATCH_SIZE, n - start)
        rng = np.random.default_rng([seed, batch_index])
        a_basis = rng.integers(0, 2, m).astype(np.int8)
        a_idx = rng.choice(d, size=m, p=probs).astype(np.int64)
        atk = attack_batch(rng, a_basis, a_idx, model, adv)
        prep_idx = np.where(atk.attacked, atk.measured_idx, a_idx)
        prep_basis = np.where(atk.attacked, atk.basis_code, a_basis).astype(np.int8)
        b_basis = rng.integers(0, 2, m).astype(np.int8)
        present = ~(atk.attacked & atk.dropped)
        received = _measure_batch(rng, prep_basis, prep_idx, b_basis, model,
                                  noise, present=present)
        cols["a_basis"].append(a_basis)
        cols["b_basis"].append(b_basis)
        cols["sent"].append(a_idx)
        cols["received"].append(received)
        cols["attacked"].append(atk.attacked)
        cols["e_basis"].append(atk.basis_code)
        cols["e_measured"].append(atk.measured_idx)
        cols["e_dropped"].append(atk.dropped)

    def col(key: str, dtype) -> np.ndarray:
        if not cols[key]:
            return np.empty(0, dtype=dtype)
        return np.concatenate(cols[key]).astype(dtype)

    a_basis = col("a_basis", np.int8)
    b_basis = col("b_basis", np.int8)
    sent = col("sent", np.int64)
    received = col("received", np.int64)
    attacked = col("attacked", bool)
    e_basis = col("e_basis", np.int8)
    e_measured = col("e_measured", np.int64)
    e_dropped = col("e_dropped", bool)

    detected = received >= 0
    sift_mask = (a_basis == b_basis) & detected
    s_code = a_basis[sift_mask]
    s_sent = sent[sift_mask]
    s_recv = received[sift_mask]

    est_rng = np.random.default_rng([seed, _ESTIMATE_STREAM])
    estimate, keep = _estimate_from_arrays(
        est_rng, s_code, s_sent, s_recv, alphabet.labels,
        config.session.sample_fraction)
    r_sent = s_sent[keep]
    r_recv = s_recv[keep]

    flat_rng = np.random.default_rng([seed, _FLATTEN_STREAM])
    tape = flat_rng.random(r_sent.shape[0])
    keep_a = _flatten_mask(tape, r_sent, probs)
    keep_b = _flatten_mask(tape, r_recv, probs)
    alice_key = [alphabet.labels[i] for i in r_sent[keep_a]]
    bob_key = [alphabet.labels[i] for i in r_recv[keep_b]]

    matched_mask = attacked & (e_basis == a_basis)
    n_attacked = int(attacked.sum())
    eve_bits = eve_information_estimate(matched_mask[attacked],
                                        e_measured[attacked], d)
    hist = np.bincount(sent, minlength=d)
    n_detected = int(detected.sum())
    n_sifted = int(sift_mask.sum())

    stats = SessionStats(
        rounds=n,
        alphabet_size=d,
        seed=seed,
        strategy=adv.strategy,
        eta=adv.eta,
        detected=n_detected,
        loss_rate=1.0 - n_detected / n if n else 0.0,
        sifted=n_sifted,
        sifted_fraction=n_sifted / n_detected if n_detected else 0.0,
        sent_histogram={lab: int(c) for lab, c in zip(alphabet.labels, hist)},
        error=estimate,
        eve_attacked=n_attacked,
        eve_dropped=int(e_dropped.sum()),
        eve_matched=int(matched_mask.sum()),
        eve_info_bits=eve_bits,
        key_alice_length=len(alice_key),
        key_bob_length=len(bob_key),
        key_keep_fraction=len(alice_key) / r_sent.shape[0] if r_sent.size else 0.0,
        key_expected_keep=float(d * probs.min()),
    )

    log = None
    eve_rounds = None
    if config.session.keep_log:
        log = SessionLog(labels=alphabet.labels, alice_basis=a_basis,
                         bob_basis=b_basis, sent=sent, received=received,
                         attacked=attacked, eve_basis=e_basis,
                         eve_measured=e_measured, eve_dropped=e_dropped)
        where = np.nonzero(attacked)[0]
        eve_rounds = {
            "round_index": where,
            "basis_code": e_basis[where],
            "measured_idx": e_measured[where],
            "dropped": e_dropped[where],
        }
    return SessionResult(stats=stats, estimate=estimate, alice_key=alice_key,
                         bob_key=bob_key, log=log, eve_rounds=eve_rounds)
