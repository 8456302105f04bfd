import numpy as np
import pytest

from spatialqkd.optics import (ALL_CONFIGS, ApertureSpec, Basis, BasisConfig,
                               Geometry, GeometryError, IntensityMap,
                               LensChain, OpticalField, SamplingError,
                               alice_chain, analytic_amplitude,
                               angular_spectrum, bob_chain, channel_chain,
                               detection_probability_map, full_chain,
                               grid_coords, hexagon_mask, make_aperture_field,
                               point_inverted, propagate_chain)


@pytest.fixture()
def geom():
    return Geometry()


def gaussian_field(geom, waist, center=(0.0, 0.0)):
    return make_aperture_field(ApertureSpec("gaussian", waist, center), geom)


class TestBasisConfig:
    def test_labels(self):
        assert [c.label for c in ALL_CONFIGS] == ["FF", "II", "IF", "FI"]

    def test_matched(self):
        assert BasisConfig.from_label("FF").matched
        assert not BasisConfig.from_label("IF").matched

    def test_from_label_rejects_junk(self):
        for bad in ("XX", "F", "FFI", "fi"):
            with pytest.raises(ValueError):
                BasisConfig.from_label(bad)


class TestGeometry:
    def test_derived_quantities(self, geom):
        assert geom.fourier_focal == pytest.approx(2 * geom.imaging_focal)
        assert geom.wavenumber == pytest.approx(2 * np.pi / geom.wavelength)
        expected = 2 * geom.fourier_focal / (geom.wavenumber * geom.aperture_waist)
        assert geom.conjugate_waist == pytest.approx(expected)

    def test_rejects_bad_values(self):
        with pytest.raises(GeometryError):
            Geometry(wavelength=-1.0)
        with pytest.raises(GeometryError):
            Geometry(grid_samples=511)
        with pytest.raises(GeometryError):
            Geometry(grid_extent=0.0)


class TestLensChain:
    def test_roles_enforced(self, geom):
        with pytest.raises(GeometryError):
            LensChain((0.1,), "alice_I")
        with pytest.raises(GeometryError):
            LensChain((0.1, 0.2), "bob_I")
        with pytest.raises(GeometryError):
            LensChain((0.1, 0.1), "alice_F")
        with pytest.raises(GeometryError):
            LensChain((0.1,), "mystery")
        with pytest.raises(GeometryError):
            LensChain((-0.1,), "alice_F")

    def test_builders(self, geom):
        assert alice_chain(Basis.I, geom).focal_lengths == (0.1, 0.1)
        assert alice_chain(Basis.F, geom).focal_lengths == (0.2,)
        assert bob_chain(Basis.F, geom).role == "bob_F"
        assert channel_chain(geom).focal_lengths == (0.15, 0.15)
        chains = full_chain(BasisConfig.from_label("IF"), geom)
        assert [c.role for c in chains] == ["alice_I", "channel", "bob_F"]


class TestApertures:
    def test_unit_power(self, geom):
        for shape, size in (("gaussian", 100e-6), ("circular", 150e-6),
                            ("hexagonal", 200e-6)):
            field = make_aperture_field(ApertureSpec(shape, size), geom)
            assert field.power == pytest.approx(1.0, abs=1e-12)

    def test_too_large_rejected(self, geom):
        with pytest.raises(GeometryError):
            make_aperture_field(ApertureSpec("gaussian", 1.5e-3), geom)

    def test_off_grid_center_rejected(self, geom):
        with pytest.raises(GeometryError):
            make_aperture_field(
                ApertureSpec("gaussian", 100e-6, (3.95e-3, 0.0)), geom)

    def test_empty_indicator_rejected(self, geom):
        # Radius far below the grid step, centered between samples.
        off = geom.grid_extent / geom.grid_samples
        with pytest.raises(GeometryError):
            make_aperture_field(ApertureSpec("circular", 1e-6, (off, off)), geom)

    def test_unknown_shape_rejected(self):
        with pytest.raises(GeometryError):
            ApertureSpec("triangle", 1e-4)


class TestTransforms:
    def test_angular_spectrum_unitary(self, geom):
        field = gaussian_field(geom, 120e-6, (300e-6, -200e-6))
        spec = angular_spectrum(field)
        assert spec.power == pytest.approx(field.power, rel=1e-12)
        assert spec.extent == pytest.approx(
            field.n * np.pi / (2 * field.extent))

    def test_lens_power_and_extent(self, geom):
        field = gaussian_field(geom, 100e-6)
        out = propagate_chain(field, alice_chain(Basis.F, geom))
        assert out.power == pytest.approx(1.0, rel=1e-12)
        expected = geom.wavelength * geom.fourier_focal * field.n / (4 * field.extent)
        assert out.extent == pytest.approx(expected)

    def test_single_lens_removes_displacement(self, geom):
        """The transform modulus is a centered Gaussian whatever the offset."""
        outs = []
        for center in ((0.0, 0.0), (600e-6, -400e-6)):
            field = gaussian_field(geom, 100e-6, center)
            out = propagate_chain(field, alice_chain(Basis.F, geom))
            outs.append(np.abs(out.samples))
        peak = outs[0].max()
        assert np.max(np.abs(outs[0] - outs[1])) / peak < 1e-6
        # waist of the transform: 2 f / (k w), measured from second moments
        out = propagate_chain(gaussian_field(geom, 100e-6),
                              alice_chain(Basis.F, geom))
        x, _ = out.meshgrid()
        var = float((x ** 2 * out.intensity()).sum() / out.intensity().sum())
        waist = 2 * np.sqrt(var)  # intensity sigma is waist / 2 per axis
        assert waist == pytest.approx(geom.conjugate_waist, rel=1e-3)

    def test_telescope_is_point_inversion(self, geom):
        base = gaussian_field(geom, 120e-6, (500e-6, 300e-6))
        extra = gaussian_field(geom, 90e-6, (-300e-6, 200e-6))
        field = OpticalField(base.samples + 0.3j * extra.samples,
                             base.extent, base.wavelength).normalized()
        out = propagate_chain(field, alice_chain(Basis.I, geom))
        assert out.extent == pytest.approx(field.extent)
        inverted = point_inverted(field)
        assert np.max(np.abs(out.samples - inverted.samples)) < 1e-9

    def test_point_inverted_involution(self, geom):
        field = gaussian_field(geom, 150e-6, (400e-6, 100e-6))
        twice = point_inverted(point_inverted(field))
        assert np.array_equal(twice.samples, field.samples)

    def test_undersampled_field_raises(self, geom):
        # A near-delta aperture transforms to a nearly flat spectrum that
        # cannot stay away from the grid border.
        field = gaussian_field(geom, 8e-6)
        with pytest.raises(SamplingError):
            propagate_chain(field, alice_chain(Basis.F, geom))


class TestAnalyticEquivalence:
    @pytest.mark.parametrize("label", ["FF", "II", "IF", "FI"])
    def test_cascade_matches_closed_form(self, geom, label):
        config = BasisConfig.from_label(label)
        spec = ApertureSpec("gaussian", 100e-6, (346.4e-6, 600e-6))
        out = propagate_chain(make_aperture_field(spec, geom),
                              full_chain(config, geom))
        ref = analytic_amplitude(config, spec, geom)
        assert out.extent == pytest.approx(ref.extent, rel=1e-12)
        num = np.abs(out.samples) / np.sqrt(out.power)
        ana = np.abs(ref.samples)
        assert np.linalg.norm(num - ana) / np.linalg.norm(ana) < 1e-3

    def test_fallback_transform_matches_closed_form(self, geom):
        """The generic discrete-transform path agrees with the closed form."""
        config = BasisConfig.from_label("IF")
        spec = ApertureSpec("gaussian", 100e-6, (346.4e-6, 0.0))
        closed = analytic_amplitude(config, spec, geom)
        spectrum = angular_spectrum(make_aperture_field(spec, geom))
        fallback = OpticalField(spectrum.samples, closed.extent,
                                geom.wavelength).normalized()
        diff = np.abs(fallback.samples) - np.abs(closed.samples)
        assert np.linalg.norm(diff) / np.linalg.norm(np.abs(closed.samples)) < 1e-3

    def test_hard_aperture_tails_are_caught(self, geom):
        """Sharp-edged apertures spread past the grid and must be refused."""
        spec = ApertureSpec("hexagonal", 200e-6, (346.4e-6, 0.0))
        with pytest.raises(SamplingError):
            propagate_chain(make_aperture_field(spec, geom),
                            full_chain(BasisConfig.from_label("IF"), geom))

    def test_crossed_configs_share_modulus(self, geom):
        spec = ApertureSpec("gaussian", 100e-6, (200e-6, -346.4e-6))
        m_if = np.abs(analytic_amplitude(BasisConfig.from_label("IF"),
                                         spec, geom).samples)
        m_fi = np.abs(analytic_amplitude(BasisConfig.from_label("FI"),
                                         spec, geom).samples)
        assert np.max(np.abs(m_if - m_fi)) < 1e-12


class TestIntensityMap:
    def test_normalization(self, geom):
        field = gaussian_field(geom, 100e-6, (200e-6, 0.0))
        imap = detection_probability_map(field)
        assert imap.integral() == pytest.approx(1.0, abs=1e-9)

    def test_rejects_negative(self):
        with pytest.raises(GeometryError):
            IntensityMap(np.full((4, 4), -1.0), 1e-3)

    def test_csv_export(self, geom, tmp_path):
        field = gaussian_field(geom, 100e-6)
        imap = detection_probability_map(field)
        path = tmp_path / "map.csv"
        imap.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "row,col,value"
        assert len(lines) == 1 + imap.n ** 2

    def test_pgm_export(self, geom, tmp_path):
        field = gaussian_field(geom, 100e-6)
        imap = detection_probability_map(field)
        path = tmp_path / "map.pgm"
        imap.to_pgm(path)
        blob = path.read_bytes()
        header = f"P5\n{imap.n} {imap.n}\n255\n".encode()
        assert blob.startswith(header)
        assert len(blob) == len(header) + imap.n ** 2
        assert max(blob[len(header):]) == 255


class TestHexagonMask:
    def test_vertex_and_edge_points_inside(self):
        a = 200e-6
        inr = a * np.sqrt(3) / 2
        vertex = (a * np.cos(np.pi / 6), a * np.sin(np.pi / 6))
        assert hexagon_mask(np.array([vertex[0]]), np.array([vertex[1]]),
                            (0.0, 0.0), a)[0]
        assert hexagon_mask(np.array([inr]), np.array([0.0]), (0.0, 0.0), a)[0]
        assert not hexagon_mask(np.array([inr * 1.01]), np.array([0.0]),
                                (0.0, 0.0), a)[0]

    def test_grid_coords_centered(self):
        c = grid_coords(8, 4.0)
        assert c[4] == 0.0
        assert c[0] == -4.0
