import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringfilm.exceptions import ConfigurationError, ContactPenetration
from ringfilm.geometry import (
    DEFAULT_BORE_RADIUS,
    DimpleTexture,
    GapModel,
    Grid,
    RingProfile,
    WearProfile,
    boundary_shape,
    gap_field,
    ring_height,
    shape_field,
    texture_depression,
    wear_height,
)

CIRC = 2 * math.pi * DEFAULT_BORE_RADIUS


def test_grid_geometry():
    g = Grid(200, 40)
    assert g.dx1 == pytest.approx(0.005)
    assert g.dx2 == pytest.approx(CIRC / 40)
    assert g.x1[0] == pytest.approx(0.0025)
    X1, X2 = g.centers()
    assert X1.shape == g.shape == (200, 40)
    with pytest.raises(ConfigurationError):
        Grid(1, 1)
    with pytest.raises(ConfigurationError):
        Grid(10, 0)


def test_ring_height_and_edge():
    ring = RingProfile(R=64.0)
    assert ring_height(0.5, ring) == 0.0
    assert ring_height(1.0, ring) == pytest.approx(1000 * 0.25 / 128)
    assert RingProfile.from_edge_height(2.0).R == pytest.approx(62.5)
    assert RingProfile.from_edge_height(4.0).R == pytest.approx(31.25)
    assert RingProfile.from_edge_height(3.91).R == pytest.approx(32.0, abs=0.05)
    assert RingProfile.from_edge_height(2.5).edge_height == pytest.approx(2.5)
    with pytest.raises(ConfigurationError):
        RingProfile(R=0.0)


def test_wear_profile():
    w = WearProfile(delta=0.04)
    assert wear_height(math.pi * DEFAULT_BORE_RADIUS, w) == pytest.approx(0.04)
    far = wear_height(0.0, w)
    assert 0 < far < 1e-15
    assert wear_height(0.0, w) == pytest.approx(wear_height(CIRC, w), rel=1e-12)
    with pytest.raises(ConfigurationError):
        WearProfile(delta=-0.1)


def test_texture_depression():
    tex = DimpleTexture()
    assert texture_depression(0.5, 0.05, tex) == pytest.approx(1.0)
    assert texture_depression(0.4, 0.05, tex) == 0.0
    assert texture_depression(0.5, 0.0, tex) == 0.0
    # edge of the ellipse along x1
    assert texture_depression(0.5 + 0.039, 0.05, tex) == pytest.approx(1 - (0.078 / 0.08) ** 2)
    # periodic along x2 with the pitch
    assert texture_depression(0.3, 0.15, tex) == pytest.approx(texture_depression(0.3, 0.05, tex))
    with pytest.raises(ConfigurationError):
        DimpleTexture(len_x2=0.2, pitch_x2=0.1)


def test_gap_field_untextured():
    g = Grid(201, 1)
    gm = GapModel(RingProfile(64.0), WearProfile(0.0))
    h = gap_field(g, gm, 1.0)
    assert h.min() == pytest.approx(1.0)
    assert h[100, 0] == pytest.approx(1.0)
    with pytest.raises(ContactPenetration):
        gap_field(g, gm, -0.5)


def test_gap_field_adds_texture_depth():
    g = Grid(200, 20, length_x2=0.1)
    gm = GapModel(RingProfile(64.0), WearProfile(0.0), DimpleTexture())
    h = gap_field(g, gm, 0.8)
    plain = gap_field(g, GapModel(RingProfile(64.0), WearProfile(0.0)), 0.8)
    assert np.all(h >= plain)
    assert (h - plain).max() > 0.9


def test_boundary_shape():
    g = Grid(50, 4)
    gm = GapModel(RingProfile.from_edge_height(2.0), WearProfile(0.0))
    left, right = boundary_shape(g, gm)
    assert left == pytest.approx(np.full(4, 2.0))
    assert right == pytest.approx(np.full(4, 2.0))
    assert shape_field(g, gm).shape == (50, 4)


def test_h_feed_validation():
    with pytest.raises(ConfigurationError):
        GapModel(h_feed=0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.1), st.floats(0.0, CIRC), st.floats(0.0, 1.0))
def test_periodicity_in_x2(delta, x2, x1):
    gm = GapModel(RingProfile(64.0), WearProfile(delta), DimpleTexture(pitch_x2=CIRC / 1000,
                                                                        len_x2=CIRC / 2000))
    a = gm.shape_height(x1, x2)
    b = gm.shape_height(x1, x2 + CIRC)
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 0.06))
def test_gap_positive_for_positive_Z(Z, delta):
    g = Grid(40, 8, length_x2=0.1)
    gm = GapModel(RingProfile(64.0), WearProfile(delta), DimpleTexture())
    assert np.all(gap_field(g, gm, Z) > 0)
