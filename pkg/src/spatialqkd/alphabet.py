"""Hexagonal detection alphabets and binned probability maps.

Characters live at the sites of a triangular lattice; each character owns the
pointy-top hexagonal Voronoi cell of its site.  With center-to-vertex
distance ``a`` the lattice spacing is ``a * sqrt(3)`` and the cells tile the
plane without gaps, so nearest-site lookup and hexagon membership agree.
"""

from __future__ import annotations

import json
import os
import string
from dataclasses import dataclass

import numpy as np

from .optics import ALL_CONFIGS, Basis, BasisConfig, IntensityMap, hexagon_mask

__all__ = [
    "HexAlphabet",
    "SourceDistribution",
    "ProbabilityMap",
    "RiskyCell",
    "build_hex_alphabet",
    "build_packed_alphabet",
    "calibrate_envelope",
    "decode",
    "bin_probabilities",
    "source_from_conjugate",
    "leakage_check",
    "prune_alphabet",
    "save_alphabet",
    "load_alphabet",
]

_LABEL_CHARS = string.digits + string.ascii_uppercase + string.ascii_lowercase


def _spiral_labels(count: int) -> tuple[str, ...]:
    """Single-character labels for the first 62 cells, ``#index`` afterwards."""
    return tuple(_LABEL_CHARS[i] if i < len(_LABEL_CHARS) else f"#{i}"
                 for i in range(count))


def _ring_offsets(ring: int, spacing: float) -> list[np.ndarray]:
    """Lattice sites of one hexagonal ring, walked counterclockwise."""
    if ring == 0:
        return [np.zeros(2)]
    u = np.array([spacing, 0.0])
    v = np.array([0.5 * spacing, 0.5 * np.sqrt(3.0) * spacing])
    dirs = [u, v, v - u, -u, -v, u - v]
    pos = ring * u
    sites = []
    for side in range(6):
        step = dirs[(side + 2) % 6]
        for _ in range(ring):
            sites.append(pos.copy())
            pos = pos + step
    return sites


@dataclass(frozen=True, eq=False)
class HexAlphabet:
    """A set of hexagonal cells with string labels.

    Parameters
    ----------
    cell_radius : float
        Center-to-vertex distance of each cell, in meters.
    centers : ndarray of shape (d, 2)
        Cell centers.
    labels : tuple of str
        One label per cell, unique.
    rings : int or None
        Number of complete rings when the alphabet was built that way.
    """

    cell_radius: float
    centers: np.ndarray
    labels: tuple[str, ...]
    rings: int | None = None

    def __post_init__(self) -> None:
        c = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "labels", tuple(self.labels))
        if not (self.cell_radius > 0 and np.isfinite(self.cell_radius)):
            raise ValueError(f"cell_radius must be positive, got {self.cell_radius!r}")
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
            raise ValueError(f"centers must have shape (d, 2), got {c.shape}")
        if len(self.labels) != c.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {c.shape[0]} centers")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("alphabet labels must be unique")
        if c.shape[0] > 1:
            diff = c[:, None, :] - c[None, :, :]
            dist = np.hypot(diff[..., 0], diff[..., 1])
            np.fill_diagonal(dist, np.inf)
            if dist.min() < self.spacing * (1.0 - 1e-9):
                raise ValueError("cell centers closer than one lattice spacing")

    @property
    def d(self) -> int:
        return self.centers.shape[0]

    @property
    def spacing(self) -> float:
        return self.cell_radius * np.sqrt(3.0)

    @property
    def cell_area(self) -> float:
        return 1.5 * np.sqrt(3.0) * self.cell_radius ** 2

    @property
    def envelope_radius(self) -> float:
        """Radius of the circle circumscribing the whole cell pattern."""
        return float(np.hypot(self.centers[:, 0], self.centers[:, 1]).max()
                     + self.cell_radius)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown character {label!r}") from None

    def inverse_index(self, index: int) -> int:
        """Index of the cell at the point-reflected center, if present."""
        target = -self.centers[index]
        dist = np.hypot(*(self.centers - target).T)
        j = int(np.argmin(dist))
        if dist[j] > 1e-9 * self.spacing:
            raise ValueError(
                f"alphabet has no cell opposite {self.labels[index]!r}")
        return j

    def nearest_cell(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest cell index for each point and whether the point lies inside it.

        Ties resolve to the lowest index.  Returns ``(indices, inside)``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d2 = (np.sum(pts ** 2, axis=1)[:, None]
              - 2.0 * pts @ self.centers.T
              + np.sum(self.centers ** 2, axis=1)[None, :])
        idx = np.argmin(d2, axis=1)
        chosen = self.centers[idx]
        inside = hexagon_mask(pts[:, 0] - chosen[:, 0], pts[:, 1] - chosen[:, 1],
                              (0.0, 0.0), self.cell_radius)
        return idx, inside

    def contains(self, points: np.ndarray) -> np.ndarray:
        """True where a point lies inside some cell of the pattern."""
        _, inside = self.nearest_cell(points)
        return inside

    def to_dict(self) -> dict:
        return {
            "cell_radius": self.cell_radius,
            "rings": self.rings,
            "labels": list(self.labels),
            "centers": [[float(x), float(y)] for x, y in self.centers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HexAlphabet":
        return cls(cell_radius=float(data["cell_radius"]),
                   centers=np.asarray(data["centers"], dtype=np.float64),
                   labels=tuple(data["labels"]),
                   rings=data.get("rings"))


def build_hex_alphabet(rings: int = 3, cell_radius: float = 200e-6) -> HexAlphabet:
    """Alphabet of all cells within ``rings`` complete rings around the center.

    The size is ``d = 1 + 3 * rings * (rings + 1)``; labels run through
    digits, uppercase then lowercase letters in spiral order from the center.
    """
    if rings < 0:
        raise ValueError(f"rings must be non-negative, got {rings}")
    if not (cell_radius > 0 and np.isfinite(cell_radius)):
        raise ValueError(f"cell_radius must be positive, got {cell_radius!r}")
    spacing = cell_radius * np.sqrt(3.0)
    sites: list[np.ndarray] = []
    for ring in range(rings + 1):
        sites.extend(_ring_offsets(ring, spacing))
    centers = np.array(sites)
    return HexAlphabet(cell_radius=cell_radius, centers=centers,
                       labels=_spiral_labels(len(sites)), rings=rings)


def build_packed_alphabet(envelope_radius: float,
                          cell_radius: float) -> HexAlphabet:
    """Largest alphabet whose cells fit inside a circle of given radius.

    Walks lattice rings in spiral order and keeps every cell contained in the
    circle (center distance plus cell_radius within the radius, with a small
    relative tolerance).  Falls back to the single central cell when not even
    that fits, so the result is never empty.
    """
    if not (envelope_radius > 0 and np.isfinite(envelope_radius)):
        raise ValueError(
            f"envelope_radius must be positive, got {envelope_radius!r}")
    spacing = cell_radius * np.sqrt(3.0)
    max_ring = int(np.ceil(envelope_radius / spacing)) + 1
    kept: list[np.ndarray] = []
    for ring in range(max_ring + 1):
        for site in _ring_offsets(ring, spacing):
            reach = np.hypot(*site) + cell_radius
            if reach <= envelope_radius * (1.0 + 1e-9):
                kept.append(site)
    if not kept:
        kept = [np.zeros(2)]
    centers = np.array(kept)
    return HexAlphabet(cell_radius=cell_radius, centers=centers,
                       labels=_spiral_labels(len(kept)), rings=None)


def calibrate_envelope(alphabet: HexAlphabet, containment: float = 0.99) -> float:
    """Gaussian waist putting the given intensity fraction inside the pattern.

    Solves ``1 - exp(-2 R**2 / w**2) = containment`` for ``w``, where ``R``
    is the radius of the circle circumscribing the cell pattern.
    """
    if not 0.0 < containment < 1.0:
        raise ValueError(f"containment must be in (0, 1), got {containment!r}")
    radius = alphabet.envelope_radius
    return float(radius * np.sqrt(2.0 / -np.log1p(-containment)))


def decode(position, config: BasisConfig, alphabet: HexAlphabet) -> str | None:
    """Map a detection-plane position to a character, or None if undetected.

    Decoders behind a two-lens imaging arm see a point-inverted plane, so the
    position is negated before lookup whenever Bob measured in the imaging
    basis.  Positions outside every cell count as no detection.
    """
    pos = np.asarray(position, dtype=np.float64).reshape(1, 2)
    if config.bob == Basis.I:
        pos = -pos
    idx, inside = alphabet.nearest_cell(pos)
    return alphabet.labels[int(idx[0])] if bool(inside[0]) else None


@dataclass(frozen=True, eq=False)
class SourceDistribution:
    """Probability of each character at the source."""

    labels: tuple[str, ...]
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "labels", tuple(self.labels))
        if p.ndim != 1 or p.shape[0] != len(self.labels):
            raise ValueError("one probability per label required")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum():.12f}, expected 1")

    @classmethod
    def uniform(cls, labels) -> "SourceDistribution":
        labels = tuple(labels)
        return cls(labels, np.full(len(labels), 1.0 / len(labels)))

    def as_dict(self) -> dict[str, float]:
        return {lab: float(p) for lab, p in zip(self.labels, self.probabilities)}


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Binned detection probabilities for every configuration and source char.

    ``probs[config_label]`` has shape ``(n_sources, n_cells)``; entry
    ``[s, c]`` is the probability that a photon prepared as source character
    ``s`` lands in detection cell ``c``.  ``residual[config_label][s]`` is
    the probability of landing outside every cell.  The detection region may
    cover more cells than the source alphabet.
    """

    cell_labels: tuple[str, ...]
    cell_centers: np.ndarray
    source_labels: tuple[str, ...]
    probs: dict[str, np.ndarray]
    residual: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cell_labels", tuple(self.cell_labels))
        object.__setattr__(self, "source_labels", tuple(self.source_labels))
        centers = np.asarray(self.cell_centers, dtype=np.float64)
        object.__setattr__(self, "cell_centers", centers)
        nc, ns = len(self.cell_labels), len(self.source_labels)
        if centers.shape != (nc, 2):
            raise ValueError(f"expected {nc} cell centers, got {centers.shape}")
        expected = {c.label for c in ALL_CONFIGS}
        if set(self.probs) != expected or set(self.residual) != expected:
            raise ValueError(f"maps must cover configurations {sorted(expected)}")
        for key in expected:
            p = np.asarray(self.probs[key], dtype=np.float64)
            r = np.asarray(self.residual[key], dtype=np.float64)
            if p.shape != (ns, nc) or r.shape != (ns,):
                raise ValueError(f"bad shape for configuration {key}")
            if np.any(p < -1e-12) or np.any(r < -1e-12):
                raise ValueError(f"negative probabilities in {key}")
            total = p.sum(axis=1) + r
            if np.any(np.abs(total - 1.0) > 1e-6):
                raise ValueError(
                    f"probabilities for {key} sum to {total} instead of 1")
            self.probs[key] = np.clip(p, 0.0, None)
            self.residual[key] = np.clip(r, 0.0, None)

    def column(self, config, source_label: str) -> tuple[np.ndarray, float]:
        """Cell probabilities and residual for one configuration and source."""
        key = config.label if isinstance(config, BasisConfig) else str(config)
        try:
            s = self.source_labels.index(source_label)
        except ValueError:
            raise KeyError(f"unknown source character {source_label!r}") from None
        return self.probs[key][s].copy(), float(self.residual[key][s])

    def to_csv(self, path: str | os.PathLike) -> None:
        """Rows ``config,sent_char,cell_char,probability``; the row with
        cell char ``(residual)`` holds the outside-all-cells probability."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write("config,sent_char,cell_char,probability\n")
            for cfg in ALL_CONFIGS:
                p = self.probs[cfg.label]
                r = self.residual[cfg.label]
                for s, sent in enumerate(self.source_labels):
                    for c, cell in enumerate(self.cell_labels):
                        fh.write(f"{cfg.label},{sent},{cell},{p[s, c]:.12e}\n")
                    fh.write(f"{cfg.label},{sent},(residual),{r[s]:.12e}\n")


def _classify_points(points: np.ndarray, alphabet: HexAlphabet,
                     chunk: int = 65536) -> np.ndarray:
    """Cell index per point, -1 outside all cells; chunked to bound memory."""
    out = np.empty(points.shape[0], dtype=np.int64)
    for start in range(0, points.shape[0], chunk):
        sl = slice(start, start + chunk)
        idx, inside = alphabet.nearest_cell(points[sl])
        out[sl] = np.where(inside, idx, -1)
    return out


def bin_probabilities(imap: IntensityMap, alphabet: HexAlphabet,
                      subsamples: int = 8) -> tuple[np.ndarray, float]:
    """Integrate a detection density over each cell of the alphabet.

    Interior pixels are assigned whole to their cell by the midpoint rule;
    pixels on a cell boundary are split by a ``subsamples x subsamples``
    subgrid.  Returns per-cell probabilities and the residual outside all
    cells; together they add up to the map integral.
    """
    if subsamples < 1:
        raise ValueError("subsamples must be at least 1")
    n, step = imap.n, imap.step
    c = imap.coords()
    x, y = np.meshgrid(c, c, indexing="ij")
    pts = np.column_stack([x.ravel(), y.ravel()])
    ids = _classify_points(pts, alphabet).reshape(n, n)
    mass = imap.values * step ** 2

    boundary = np.zeros((n, n), dtype=bool)
    boundary[:-1, :] |= ids[:-1, :] != ids[1:, :]
    boundary[1:, :] |= ids[1:, :] != ids[:-1, :]
    boundary[:, :-1] |= ids[:, :-1] != ids[:, 1:]
    boundary[:, 1:] |= ids[:, 1:] != ids[:, :-1]

    acc = np.zeros(alphabet.d + 1)
    keep = ~boundary
    np.add.at(acc, ids[keep] + 1, mass[keep])

    bi, bj = np.nonzero(boundary)
    if bi.size:
        offsets = ((np.arange(subsamples) + 0.5) / subsamples - 0.5) * step
        ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
        sub = np.column_stack([
            (c[bi][:, None] + ox.ravel()[None, :]).ravel(),
            (c[bj][:, None] + oy.ravel()[None, :]).ravel(),
        ])
        sub_ids = _classify_points(sub, alphabet).reshape(bi.size, -1)
        weights = np.repeat(mass[bi, bj] / subsamples ** 2, subsamples ** 2)
        np.add.at(acc, sub_ids.ravel() + 1, weights)

    return acc[1:], float(acc[0])


def source_from_conjugate(maps: ProbabilityMap) -> SourceDistribution:
    """Character distribution read off the crossed-configuration maps.

    Averages the IF and FI cell probabilities over source characters and
    renormalizes over the cells.  In the crossed configurations the detected
    pattern does not depend on the sent character, so the average is the
    common cell distribution.
    """
    mixed = 0.5 * (maps.probs["IF"].mean(axis=0) + maps.probs["FI"].mean(axis=0))
    total = mixed.sum()
    if total <= 0:
        raise ValueError("crossed-configuration maps carry no probability")
    return SourceDistribution(maps.cell_labels, mixed / total)


@dataclass(frozen=True)
class RiskyCell:
    """A detection cell whose two-basis support is one-sided.

    ``reason`` is ``no_matched_support`` when the cell sees conjugate-basis
    intensity but essentially no matched-basis intensity (a detection there
    reveals basis information), or ``no_conjugate_support`` for the opposite
    imbalance.
    """

    label: str
    center: tuple[float, float]
    reason: str
    matched_support: float
    conjugate_support: float


def leakage_check(maps: ProbabilityMap, eps: float = 1e-4) -> list[RiskyCell]:
    """Flag detection cells supported in only one of the two bases.

    For each cell the matched support is the largest FF or II probability
    over source characters, the conjugate support the largest IF or FI
    probability.  Cells with one support at or above ``eps`` and the other
    below are returned; a sound alphabet yields an empty list.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    matched = np.maximum(maps.probs["FF"].max(axis=0), maps.probs["II"].max(axis=0))
    conj = np.maximum(maps.probs["IF"].max(axis=0), maps.probs["FI"].max(axis=0))
    flagged = []
    for j, label in enumerate(maps.cell_labels):
        if conj[j] >= eps and matched[j] < eps:
            reason = "no_matched_support"
        elif matched[j] >= eps and conj[j] < eps:
            reason = "no_conjugate_support"
        else:
            continue
        flagged.append(RiskyCell(label=label,
                                 center=(float(maps.cell_centers[j, 0]),
                                         float(maps.cell_centers[j, 1])),
                                 reason=reason,
                                 matched_support=float(matched[j]),
                                 conjugate_support=float(conj[j])))
    return flagged


def prune_alphabet(alphabet: HexAlphabet, labels) -> HexAlphabet:
    """Remove the given characters and their point-reflected partners.

    Keeping the alphabet closed under point reflection preserves the
    imaging-basis decode symmetry.  Raises if a label is unknown or if
    nothing would remain.
    """
    drop = set()
    for label in labels:
        i = alphabet.index_of(label)
        drop.add(i)
        drop.add(alphabet.inverse_index(i))
    keep = [i for i in range(alphabet.d) if i not in drop]
    if not keep:
        raise ValueError("pruning would remove every character")
    return HexAlphabet(cell_radius=alphabet.cell_radius,
                       centers=alphabet.centers[keep],
                       labels=tuple(alphabet.labels[i] for i in keep),
                       rings=None)


def save_alphabet(alphabet: HexAlphabet, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(alphabet.to_dict(), fh, indent=2)
        fh.write("\n")


def load_alphabet(path: str | os.PathLike) -> HexAlphabet:
    with open(path, "r", encoding="ascii") as fh:
        return HexAlphabet.from_dict(json.load(fh))
