import math

import numpy as np
import pytest

from twisted_noon.exceptions import DomainError, HologramExportError, ResolutionError
from twisted_noon.fields import (
    Grid,
    HologramSpec,
    SampledField,
    export_hologram,
    hologram_pixels,
    mub_overlap_report,
    overlap,
    rotate_field,
    synth_circular,
    synth_mode,
    synth_oam,
    synth_petal,
)
from twisted_noon.fock import ModeKind, ModeLabel

SMALL = Grid.square(256)
MEDIUM = Grid.square(512)


def test_normalized():
    field = synth_oam(1, MEDIUM)
    assert overlap(field, field).real == pytest.approx(1.0, abs=1e-6)
    assert field.ell_content == 1


@pytest.mark.parametrize("ell", [1, 10, 100])
def test_opposite_oam_orthogonal(ell):
    grid = Grid()
    assert abs(overlap(synth_oam(ell, grid), synth_oam(-ell, grid))) < 1e-6


def test_petal_overlaps():
    grid = Grid()
    m1 = synth_petal(10, "M1", grid)
    m2 = synth_petal(10, "M2", grid)
    plus = synth_oam(10, grid)
    assert abs(overlap(m1, m2)) < 1e-6
    assert abs(overlap(m1, plus)) ** 2 == pytest.approx(0.5, abs=1e-6)
    assert m1.ell_content == 10


def test_circular_basis():
    a = synth_circular(3, 1, SMALL)
    b = synth_circular(3, -1, SMALL)
    assert abs(overlap(a, b)) < 1e-6
    with pytest.raises(DomainError):
        synth_circular(3, 0, SMALL)


def test_synth_mode():
    field = synth_mode(ModeLabel(ModeKind.OAM_MINUS, 2), SMALL)
    assert field.ell_content == -2
    petal = synth_mode(ModeLabel(ModeKind.PETAL_M2, 2), SMALL)
    assert np.allclose(petal.values, synth_petal(2, "M2", SMALL).values)


def test_petal_mode_name():
    with pytest.raises(DomainError):
        synth_petal(2, "M3", SMALL)


def test_resolution_boundary():
    grid = Grid()
    grid.check_resolves(150)
    with pytest.raises(ResolutionError) as e:
        grid.check_resolves(151)
    assert e.value.required_px > grid.width_px
    with pytest.raises(ResolutionError):
        synth_oam(151, grid)
    with pytest.raises(DomainError):
        synth_oam(0, grid)


def test_rotate_quarter_turn():
    field = synth_oam(1, MEDIUM)
    rotated = rotate_field(field, math.pi / 2)
    assert abs(overlap(field.scaled(1j), rotated)) == pytest.approx(1.0, abs=1e-3)


def test_rotate_full_cycle_high_ell():
    field = synth_oam(100, Grid())
    rotated = rotate_field(field, 2 * math.pi / 100)
    assert abs(overlap(field, rotated)) == pytest.approx(1.0, abs=1e-3)


def test_rotate_bilinear():
    field = synth_oam(1, Grid())
    phi = 0.3
    rotated = rotate_field(field, phi, order=1)
    expected = field.scaled(np.exp(-1j * phi))
    assert abs(overlap(expected, rotated)) == pytest.approx(1.0, abs=1e-3)


def test_rotate_petal_into_partner():
    ell = 2
    m1 = synth_petal(ell, "M1", MEDIUM)
    m2 = synth_petal(ell, "M2", MEDIUM)
    rotated = rotate_field(m1, math.pi / (2 * ell))
    assert abs(overlap(m2, rotated)) == pytest.approx(1.0, abs=1e-3)


def test_rotation_linear():
    a = synth_oam(3, SMALL)
    b = synth_petal(3, "M2", SMALL)
    phi = 0.37
    lhs = rotate_field(a + b, phi)
    rhs = rotate_field(a, phi) + rotate_field(b, phi)
    assert np.max(np.abs(lhs.values - rhs.values)) < 1e-10


def test_rotation_by_zero_copies():
    field = synth_oam(2, SMALL)
    same = rotate_field(field, 0.0)
    assert np.array_equal(same.values, field.values)
    assert same.values is not field.values


def test_grid_mismatch():
    with pytest.raises(DomainError):
        overlap(synth_oam(1, SMALL), synth_oam(1, MEDIUM))


@pytest.mark.parametrize("ell", [1, 10, 100])
def test_mub_report(ell):
    report = mub_overlap_report(ell, Grid())
    assert report.passed
    assert report.max_deviation < 1e-3
    frame = report.to_frame()
    assert len(frame) == 4
    assert frame["deviation"].max() < 1e-3


def test_field_frame():
    frame = synth_oam(1, Grid.square(16, aperture_mm=1.0, ring_fraction=0.9)).to_frame()
    assert list(frame.columns) == ["x_mm", "y_mm", "re", "im"]
    assert len(frame) == 256
    assert frame["x_mm"].min() == pytest.approx(-frame["x_mm"].max())


def test_hologram_levels():
    field = synth_petal(2, "M1", SMALL)
    pixels = hologram_pixels(field, HologramSpec())
    assert pixels.dtype == np.uint8
    assert pixels.shape == SMALL.shape
    half = hologram_pixels(field, HologramSpec(phase_depth=math.pi))
    assert half.max() <= 128

    carved = hologram_pixels(field, HologramSpec(amplitude_masking="carve"))
    dark = np.abs(field.values) < 1e-6 * np.abs(field.values).max()
    assert np.all(carved[dark] == 0)


def test_hologram_spec_validation():
    with pytest.raises(DomainError):
        HologramSpec(grating_period=1)
    with pytest.raises(DomainError):
        HologramSpec(phase_depth=7.0)
    with pytest.raises(DomainError):
        HologramSpec(amplitude_masking="full")
    field = synth_oam(1, SMALL)
    with pytest.raises(DomainError):
        hologram_pixels(field, HologramSpec(resolution=(128, 128)))
    with pytest.raises(DomainError):
        hologram_pixels(SampledField(SMALL, field.values, 0), HologramSpec())


def test_export_deterministic(tmp_path):
    field = synth_petal(2, "M1", MEDIUM)
    first = export_hologram(field, HologramSpec(), tmp_path / "a.pgm")
    again = synth_petal(2, "M1", MEDIUM)
    second = export_hologram(again, HologramSpec(), tmp_path / "b.pgm")
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes().startswith(b"P5")

    png = export_hologram(field, HologramSpec(), tmp_path / "a.png")
    assert png.read_bytes().startswith(b"\x89PNG")


def test_export_bad_suffix(tmp_path):
    with pytest.raises(HologramExportError):
        export_hologram(synth_oam(1, SMALL), HologramSpec(), tmp_path / "a.bmp")
