"""Paraxial scalar optics for confocal lens cascades.

Fields are square complex sample grids indexed as ``samples[ix, iy]`` with
``x = (ix - n/2) * step`` and the same convention on the second axis.  A
single lens of focal length ``f`` placed confocally (object and image planes
one focal length away on either side) maps a field to its optical Fourier
transform, evaluated at spatial frequency ``q = k * rho / f``.  Chaining two
equal lenses gives a telescope, i.e. a point inversion of the input plane.

The discrete transform convention used throughout keeps power exactly
conserved: a lens step multiplies the centered FFT by ``step**2 / (lam * f)``
and rescales the grid half-extent to ``lam * f * n / (4 * extent)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

__all__ = [
    "Basis",
    "BasisConfig",
    "ALL_CONFIGS",
    "BASIS_BY_CODE",
    "Geometry",
    "ApertureSpec",
    "LensChain",
    "OpticalField",
    "IntensityMap",
    "GeometryError",
    "SamplingError",
    "grid_coords",
    "hexagon_mask",
    "make_aperture_field",
    "angular_spectrum",
    "propagate_chain",
    "point_inverted",
    "alice_chain",
    "bob_chain",
    "channel_chain",
    "full_chain",
    "analytic_amplitude",
    "detection_probability_map",
]


class GeometryError(ValueError):
    """Raised when apparatus parameters are inconsistent with the grid."""


class SamplingError(RuntimeError):
    """Raised when a propagated field is not resolved by the sample grid."""


class Basis(str, Enum):
    """Measurement basis: imaging arm (I) or Fourier arm (F)."""

    I = "I"
    F = "F"


@dataclass(frozen=True)
class BasisConfig:
    """Pair of basis choices, Alice's preparation and Bob's measurement."""

    alice: Basis
    bob: Basis

    @property
    def label(self) -> str:
        return self.alice.value + self.bob.value

    @property
    def matched(self) -> bool:
        return self.alice == self.bob

    @classmethod
    def from_label(cls, label: str) -> "BasisConfig":
        if len(label) != 2 or any(c not in ("I", "F") for c in label):
            raise ValueError(f"unknown basis configuration {label!r}")
        return cls(Basis(label[0]), Basis(label[1]))


#: The four preparation/measurement configurations, matched pairs first.
ALL_CONFIGS: tuple[BasisConfig, ...] = (
    BasisConfig(Basis.F, Basis.F),
    BasisConfig(Basis.I, Basis.I),
    BasisConfig(Basis.I, Basis.F),
    BasisConfig(Basis.F, Basis.I),
)

#: Integer encoding of the bases used by the vectorized session engine.
#: Code 0 is the imaging basis, code 1 the Fourier basis; the matched
#: detection-plane center then carries the sign ``2 * code - 1``.
BASIS_BY_CODE: tuple[Basis, Basis] = (Basis.I, Basis.F)


@dataclass(frozen=True)
class Geometry:
    """Apparatus description: wavelength, focal lengths, source and grid.

    Parameters
    ----------
    wavelength : float
        Vacuum wavelength in meters.
    imaging_focal : float
        Focal length ``f`` of each lens in a two-lens imaging arm.  The
        single-lens Fourier arm uses ``2 f`` so that both arms have the same
        physical length ``4 f``.
    channel_focal : float
        Focal length of the two relay lenses in the shared channel.
    aperture_waist : float
        Gaussian waist of the source aperture mode, in meters.
    grid_samples : int
        Samples per axis of the square grid (even).
    grid_extent : float
        Half-width of the grid along each axis, in meters.
    """

    wavelength: float = 514e-9
    imaging_focal: float = 100e-3
    channel_focal: float = 150e-3
    aperture_waist: float = 100e-6
    grid_samples: int = 512
    grid_extent: float = 4e-3

    def __post_init__(self) -> None:
        for name in ("wavelength", "imaging_focal", "channel_focal",
                     "aperture_waist", "grid_extent"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise GeometryError(f"{name} must be positive, got {value!r}")
        if self.grid_samples < 16 or self.grid_samples % 2:
            raise GeometryError(
                f"grid_samples must be an even integer >= 16, got {self.grid_samples}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def fourier_focal(self) -> float:
        """Focal length of the single-lens arm, twice the imaging focal."""
        return 2.0 * self.imaging_focal

    @property
    def conjugate_waist(self) -> float:
        """Waist of the aperture mode after one pass through the Fourier arm.

        A Gaussian of waist ``w`` maps to one of waist ``2 f_F / (k w)``
        where ``f_F`` is the Fourier-arm focal length.
        """
        return 2.0 * self.fourier_focal / (self.wavenumber * self.aperture_waist)


@dataclass(frozen=True)
class ApertureSpec:
    """Source aperture: shape, characteristic size and transverse offset.

    ``size`` is the Gaussian waist for shape ``gaussian``, the radius for
    ``circular`` and the center-to-vertex distance for ``hexagonal``.
    """

    shape: str = "gaussian"
    size: float = 100e-6
    center: tuple[float, float] = (0.0, 0.0)

    _SHAPES = ("gaussian", "circular", "hexagonal")

    def __post_init__(self) -> None:
        if self.shape not in self._SHAPES:
            raise GeometryError(
                f"aperture shape must be one of {self._SHAPES}, got {self.shape!r}")
        if not (self.size > 0 and np.isfinite(self.size)):
            raise GeometryError(f"aperture size must be positive, got {self.size!r}")

    def displaced(self, center) -> "ApertureSpec":
        return replace(self, center=(float(center[0]), float(center[1])))


@dataclass(frozen=True)
class LensChain:
    """Sequence of confocal lenses forming one arm of the apparatus.

    ``role`` records which arm the chain implements and constrains the
    focal-length structure: imaging arms are two equal lenses, Fourier arms a
    single lens, and the channel a two-lens relay.
    """

    focal_lengths: tuple[float, ...]
    role: str

    _ROLES = ("alice_I", "alice_F", "bob_I", "bob_F", "channel")

    def __post_init__(self) -> None:
        object.__setattr__(self, "focal_lengths",
                           tuple(float(f) for f in self.focal_lengths))
        if self.role not in self._ROLES:
            raise GeometryError(f"unknown chain role {self.role!r}")
        if any(not (f > 0 and np.isfinite(f)) for f in self.focal_lengths):
            raise GeometryError(f"focal lengths must be positive: {self.focal_lengths}")
        n = len(self.focal_lengths)
        if self.role in ("alice_F", "bob_F"):
            if n != 1:
                raise GeometryError(f"{self.role} arm must hold exactly one lens")
        else:
            if n != 2 or self.focal_lengths[0] != self.focal_lengths[1]:
                raise GeometryError(
                    f"{self.role} arm must hold two equal lenses, "
                    f"got {self.focal_lengths}")


def grid_coords(n: int, extent: float) -> np.ndarray:
    """Sample coordinates of one axis: ``(i - n/2) * step`` for i in 0..n-1."""
    step = 2.0 * extent / n
    return (np.arange(n) - n // 2) * step


@dataclass(frozen=True, eq=False)
class OpticalField:
    """Complex field samples on a centered square grid of given half-extent."""

    samples: np.ndarray
    extent: float
    wavelength: float

    def __post_init__(self) -> None:
        a = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GeometryError(f"field samples must be square, got shape {a.shape}")
        if a.shape[0] % 2:
            raise GeometryError("field grid must have an even number of samples")
        if not (self.extent > 0 and np.isfinite(self.extent)):
            raise GeometryError(f"field extent must be positive, got {self.extent!r}")
        if not np.all(np.isfinite(a.view(np.float64))):
            raise GeometryError("field samples contain non-finite values")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def step(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.step ** 2)

    def coords(self) -> np.ndarray:
        return grid_coords(self.n, self.extent)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.coords()
        return np.meshgrid(c, c, indexing="ij")

    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def normalized(self) -> "OpticalField":
        p = self.power
        if p <= 0:
            raise GeometryError("cannot normalize a zero-power field")
        return OpticalField(self.samples / np.sqrt(p), self.extent, self.wavelength)


@dataclass(frozen=True, eq=False)
class IntensityMap:
    """Probability density over the detection plane; integrates to one."""

    values: np.ndarray
    extent: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise GeometryError(f"map values must be square, got shape {v.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise GeometryError("map values must be finite and non-negative")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def step(self) -> float:
        return 2.0 * self.extent / self.n

    def coords(self) -> np.ndarray:
        return grid_coords(self.n, self.extent)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.step ** 2)

    def to_csv(self, path: str | os.PathLike) -> None:
        """Write rows ``row,col,value`` where row indexes x and col indexes y."""
        n = self.n
        rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        table = np.column_stack(
            [rows.ravel(), cols.ravel(), self.values.ravel()])
        np.savetxt(path, table, fmt=("%d", "%d", "%.12e"),
                   delimiter=",", header="row,col,value", comments="")

    def to_pgm(self, path: str | os.PathLike) -> None:
        """Write an 8-bit binary PGM image, linearly scaled to the map peak."""
        peak = float(self.values.max())
        scale = 255.0 / peak if peak > 0 else 0.0
        # Transpose so image rows run along y, then flip so +y is up.
        pixels = np.flipud(np.rint(self.values.T * scale).astype(np.uint8))
        with open(path, "wb") as fh:
            fh.write(f"P5\n{self.n} {self.n}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())


def hexagon_mask(x: np.ndarray, y: np.ndarray, center, circumradius: float,
                 rtol: float = 1e-12) -> np.ndarray:
    """Membership test for a pointy-top hexagon of given center-to-vertex size.

    A point belongs to the hexagon when its projection on each of the three
    edge normals (at 0, 60 and 120 degrees) stays within the inradius
    ``circumradius * sqrt(3) / 2``.  Boundary points count as inside.
    """
    dx = np.asarray(x, dtype=np.float64) - center[0]
    dy = np.asarray(y, dtype=np.float64) - center[1]
    inradius = circumradius * (np.sqrt(3.0) / 2.0) * (1.0 + rtol)
    half = np.sqrt(3.0) / 2.0
    inside = np.abs(dx) <= inradius
    inside &= np.abs(0.5 * dx + half * dy) <= inradius
    inside &= np.abs(-0.5 * dx + half * dy) <= inradius
    return inside


def make_aperture_field(spec: ApertureSpec, geom: Geometry) -> OpticalField:
    """Sample the aperture mode on the geometry grid, normalized to unit power.

    Raises :class:`GeometryError` when the aperture is too large for the grid
    (size above a quarter of the half-extent) or falls outside it.
    """
    if spec.size > geom.grid_extent / 4.0:
        raise GeometryError(
            f"aperture size {spec.size:g} exceeds a quarter of the grid "
            f"half-extent {geom.grid_extent:g}")
    cx, cy = spec.center
    if max(abs(cx), abs(cy)) + spec.size > geom.grid_extent:
        raise GeometryError(
            f"aperture at {spec.center} with size {spec.size:g} leaves the grid "
            f"(half-extent {geom.grid_extent:g})")
    x, y = np.meshgrid(grid_coords(geom.grid_samples, geom.grid_extent),
                       grid_coords(geom.grid_samples, geom.grid_extent),
                       indexing="ij")
    if spec.shape == "gaussian":
        rsq = (x - cx) ** 2 + (y - cy) ** 2
        amp = np.exp(-rsq / spec.size ** 2)
    elif spec.shape == "circular":
        rsq = (x - cx) ** 2 + (y - cy) ** 2
        amp = (rsq <= spec.size ** 2).astype(np.float64)
    else:
        amp = hexagon_mask(x, y, (cx, cy), spec.size).astype(np.float64)
    out = OpticalField(amp.astype(np.complex128), geom.grid_extent, geom.wavelength)
    if out.power <= 0:
        raise GeometryError(
            f"aperture of size {spec.size:g} covers no grid samples "
            f"(grid step {out.step:g})")
    return out.normalized()


def angular_spectrum(field: OpticalField) -> OpticalField:
    """Centered discrete Fourier transform of the field over spatial frequency.

    The output grid spans ``q`` in steps of ``pi / extent``; the scaling
    ``step**2 / (2 pi)`` makes the transform exactly unitary, so input and
    output powers agree to machine precision.
    """
    ft = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(field.samples)))
    out = ft * (field.step ** 2 / (2.0 * np.pi))
    q_extent = field.n * np.pi / (2.0 * field.extent)
    return OpticalField(out, q_extent, field.wavelength)


def _lens_step(field: OpticalField, focal: float) -> OpticalField:
    """One confocal lens: optical Fourier transform onto a rescaled grid."""
    ft = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(field.samples)))
    out = ft * (field.step ** 2 / (field.wavelength * focal))
    new_extent = field.wavelength * focal * field.n / (4.0 * field.extent)
    return OpticalField(out, new_extent, field.wavelength)


_BORDER_FRACTION = 0.05
_BORDER_POWER_TOL = 1e-6


def _check_contained(field: OpticalField, where: str) -> None:
    n = field.n
    border = max(1, int(round(_BORDER_FRACTION * n)))
    intensity = field.intensity()
    total = float(intensity.sum())
    if total <= 0:
        raise SamplingError(f"zero-power field {where}")
    inner = float(intensity[border:n - border, border:n - border].sum())
    frac = (total - inner) / total
    if frac > _BORDER_POWER_TOL:
        raise SamplingError(
            f"field power reaches the grid border {where}: fraction {frac:.3e} "
            f"of total lies in the outer {_BORDER_FRACTION:.0%} frame "
            f"(half-extent {field.extent:.4e} m, {n} samples); enlarge the "
            f"grid extent or refine the sampling")


def propagate_chain(field: OpticalField,
                    chain: LensChain | tuple | list) -> OpticalField:
    """Propagate a field through one or more lens chains, in order.

    Each lens applies one optical Fourier transform with grid rescaling.  The
    input field and the output of every lens must keep essentially all power
    away from the grid border; otherwise :class:`SamplingError` is raised with
    a diagnostic of where containment failed.
    """
    chains = (chain,) if isinstance(chain, LensChain) else tuple(chain)
    _check_contained(field, "at the chain input")
    out = field
    for c in chains:
        for idx, f in enumerate(c.focal_lengths):
            out = _lens_step(out, f)
            _check_contained(out, f"after lens {idx + 1} of arm {c.role}")
    return out


def point_inverted(field: OpticalField) -> OpticalField:
    """Point inversion about the grid origin, exact on the sample lattice.

    With the origin at index ``n/2``, inversion flips both axes and rolls by
    one sample so that index ``n/2`` stays fixed.
    """
    inv = np.roll(np.flip(field.samples, axis=(0, 1)), 1, axis=(0, 1))
    return OpticalField(inv, field.extent, field.wavelength)


def alice_chain(basis: Basis, geom: Geometry) -> LensChain:
    if basis == Basis.I:
        f = geom.imaging_focal
        return LensChain((f, f), "alice_I")
    return LensChain((geom.fourier_focal,), "alice_F")


def bob_chain(basis: Basis, geom: Geometry) -> LensChain:
    if basis == Basis.I:
        f = geom.imaging_focal
        return LensChain((f, f), "bob_I")
    return LensChain((geom.fourier_focal,), "bob_F")


def channel_chain(geom: Geometry) -> LensChain:
    f = geom.channel_focal
    return LensChain((f, f), "channel")


def full_chain(config: BasisConfig, geom: Geometry) -> tuple[LensChain, ...]:
    """The three arms photon traverses: Alice's, the channel relay, Bob's."""
    return (alice_chain(config.alice, geom), channel_chain(geom),
            bob_chain(config.bob, geom))


def analytic_amplitude(config: BasisConfig, spec: ApertureSpec,
                       geom: Geometry) -> OpticalField:
    """Closed-form detection-plane amplitude for a displaced aperture state.

    Matched configurations reproduce the aperture mode: upright for two
    Fourier arms, point-inverted for two imaging arms.  Crossed
    configurations give the aperture's Fourier transform evaluated at
    ``q = k rho / f_F``, with ``f_F`` the Fourier-arm focal length; for a
    Gaussian aperture this is evaluated in closed form (including the tilt
    phase from the displacement), other shapes fall back on one discrete
    transform.

    Returns a unit-power field on the same grid that ``propagate_chain`` over
    :func:`full_chain` would produce.
    """
    if config.matched:
        if config.alice == Basis.I:
            cx, cy = spec.center
            spec = spec.displaced((-cx, -cy))
        return make_aperture_field(spec, geom)
    f_f = geom.fourier_focal
    out_extent = geom.wavelength * f_f * geom.grid_samples / (4.0 * geom.grid_extent)
    if spec.shape == "gaussian":
        c = grid_coords(geom.grid_samples, out_extent)
        x, y = np.meshgrid(c, c, indexing="ij")
        k = geom.wavenumber
        qx, qy = k * x / f_f, k * y / f_f
        w = spec.size
        cx, cy = spec.center
        amp = np.exp(-(w ** 2 / 4.0) * (qx ** 2 + qy ** 2))
        phase = np.exp(-1j * (qx * cx + qy * cy))
        field = OpticalField(amp * phase, out_extent, geom.wavelength)
    else:
        spectrum = angular_spectrum(make_aperture_field(spec, geom))
        field = OpticalField(spectrum.samples, out_extent, geom.wavelength)
    return field.normalized()


def detection_probability_map(field: OpticalField) -> IntensityMap:
    """Pointwise squared modulus as a detection probability density."""
    p = field.power
    if p <= 0:
        raise GeometryError("cannot form a probability map from a zero field")
    return IntensityMap(field.intensity() / p, field.extent)
