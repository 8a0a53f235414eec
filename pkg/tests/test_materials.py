import math

import numpy as np
import pytest

from open_oven.const import EPS0, R_GAS, T_REF
from open_oven.materials import (
    BUNDLED_MATERIALS,
    CureKinetics,
    Material,
    MaterialTable,
    conductivity_from_em,
    effective_conductivity,
    effective_em,
)


def test_bundled_library_names():
    for name in ("air", "filler", "solder-sample", "idealized-polymer"):
        assert name in BUNDLED_MATERIALS
    assert BUNDLED_MATERIALS["filler"].eps_r == 6.0
    assert BUNDLED_MATERIALS["solder-sample"].tan_delta == 0.6


def test_loss_contrast_between_sample_and_filler():
    filler = BUNDLED_MATERIALS["filler"]
    sample = BUNDLED_MATERIALS["solder-sample"]
    contrast = (sample.eps_r * sample.tan_delta) / (
        filler.eps_r * filler.tan_delta
    )
    assert contrast == pytest.approx(920.0)


def test_table_puts_air_first():
    table = MaterialTable({"filler": BUNDLED_MATERIALS["filler"]})
    assert table.names == ["air", "filler"]
    assert table.index("filler") == 1
    assert table[1].name == "filler"
    assert "air" in table
    assert len(table) == 2
    np.testing.assert_allclose(
        table.property_array("eps_r"), [1.0, 6.0]
    )


def test_effective_em_clamps_tan_delta():
    mat = Material(
        "weird", 3.0, 0.05, 1000.0, 1000.0, 0.2, tan_slope_alpha=-0.1
    )
    eps, tan = effective_em(mat, T_REF, 1.0)
    assert eps == 3.0
    assert tan == 0.0


def test_effective_em_clamps_eps():
    mat = Material("soft", 1.5, 0.0, 1000.0, 1000.0, 0.2, eps_slope_T=-0.1)
    eps, _ = effective_em(mat, T_REF + 100.0, 0.0)
    assert eps == 1.0


def test_effective_em_broadcasts_arrays():
    mat = BUNDLED_MATERIALS["idealized-polymer"]
    eps, tan = effective_em(mat, np.full(4, T_REF), np.linspace(0, 1, 4))
    assert eps.shape == (4,)
    np.testing.assert_allclose(tan, 0.05 - 0.03 * np.linspace(0, 1, 4))


def test_conductivity_matches_loss_tangent():
    sample = BUNDLED_MATERIALS["solder-sample"]
    freq = 10.424e9
    expected = 2 * math.pi * freq * EPS0 * 4.6 * 0.6
    assert effective_conductivity(sample, freq) == pytest.approx(expected)
    assert conductivity_from_em(4.6, 0.6, freq) == pytest.approx(expected)


def test_conductivity_needs_positive_frequency():
    with pytest.raises(ValueError):
        effective_conductivity(BUNDLED_MATERIALS["filler"], 0.0)


def test_material_rejects_eps_below_one():
    with pytest.raises(ValueError):
        Material("bad", 0.5, 0.0, 1000.0, 1000.0, 1.0)


def test_material_rejects_non_positive_density():
    with pytest.raises(ValueError):
        Material("bad", 2.0, 0.0, 0.0, 1000.0, 1.0)


def test_kinetics_rate_first_order():
    kin = CureKinetics(a1=5e5, e1=6e4)
    k1 = 5e5 * math.exp(-6e4 / (R_GAS * 400.0))
    assert float(kin.rate(400.0, 0.25)) == pytest.approx(k1 * 0.75)


def test_kinetics_rate_vanishes_when_cured_or_frozen():
    kin = CureKinetics(a1=5e5, e1=6e4, a2=1e5, e2=5e4, m=1.0, n=1.5)
    assert float(kin.rate(450.0, 1.0)) == 0.0
    assert float(kin.rate(0.0, 0.3)) == 0.0


def test_kinetics_validation():
    with pytest.raises(ValueError):
        CureKinetics(a1=-1.0, e1=6e4)
    with pytest.raises(ValueError):
        CureKinetics(a1=1.0, e1=6e4, alpha_gel=1.5)
