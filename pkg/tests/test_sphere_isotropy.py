"""Isotropy algebra of the model sphere: brackets, tangency, pushforwards."""

import pytest

from moser_chains.errors import InternalInvariantError
from moser_chains.lie_jets import IntrinsicField, RPoly, bracket_intrinsic
from moser_chains.series_core import HoloSeries, gr
from moser_chains.sphere_isotropy import (
    FIELD_NAMES,
    ExtrinsicField,
    bracket_ext,
    commutator_table,
    expand_in_basis,
    intrinsic_fields,
    intrinsic_pushforward,
    standard_fields,
    tangency_residual,
)


def V(name):
    return RPoly.var(name)


# frozen structure constants of the isotropy algebra
EXPECTED_TABLE = {
    ("dilation", "rotation"): {},
    ("dilation", "parabolic1"): {"parabolic1": 1},
    ("dilation", "parabolic2"): {"parabolic2": 1},
    ("dilation", "inversion"): {"inversion": 2},
    ("rotation", "parabolic1"): {"parabolic2": -1},
    ("rotation", "parabolic2"): {"parabolic1": 1},
    ("rotation", "inversion"): {},
    ("parabolic1", "parabolic2"): {"inversion": 4},
    ("parabolic1", "inversion"): {},
    ("parabolic2", "inversion"): {},
}


class TestCommutators:
    def test_full_table(self):
        table = commutator_table()
        assert set(table) == set(EXPECTED_TABLE)
        for pair, expected in EXPECTED_TABLE.items():
            assert table[pair] == expected, pair

    def test_expand_rejects_outside_span(self):
        fields = standard_fields()
        rogue = ExtrinsicField(HoloSeries.one(8), HoloSeries.zero(8))
        with pytest.raises(InternalInvariantError):
            expand_in_basis(rogue, fields)


class TestTangency:
    def test_all_five_tangent(self):
        for nm, f in standard_fields().items():
            assert tangency_residual(f).is_zero(), nm

    def test_non_tangent_detected(self):
        bad = ExtrinsicField(HoloSeries.zero(8), HoloSeries.one(8) * gr(0, 1))
        assert not tangency_residual(bad).is_zero()
        with pytest.raises(InternalInvariantError):
            intrinsic_pushforward(bad)


# frozen intrinsic forms of the five pushed-forward fields
def _expected_intrinsic():
    u, x, y = V("u"), V("x"), V("y")
    return {
        "dilation": IntrinsicField(2 * u, x, y),
        "rotation": IntrinsicField(RPoly.zero(), -y, x),
        "parabolic1": IntrinsicField(
            -2 * x * x * x - 2 * x * y * y - 2 * y * u,
            u - 4 * x * y,
            3 * x * x - y * y,
        ),
        "parabolic2": IntrinsicField(
            2 * x * u - 2 * y * x * x - 2 * y * y * y,
            x * x - 3 * y * y,
            u + 4 * x * y,
        ),
        "inversion": IntrinsicField(
            u * u - (x * x + y * y) * (x * x + y * y),
            x * u - x * x * y - y * y * y,
            x * x * x + x * y * y + y * u,
        ),
    }


class TestPushforward:
    def test_frozen_intrinsic_fields(self):
        got = intrinsic_fields()
        expected = _expected_intrinsic()
        for nm in FIELD_NAMES:
            assert got[nm] == expected[nm], nm

    def test_pushforward_is_bracket_morphism(self):
        # the pushforward must intertwine extrinsic and intrinsic brackets
        ext = standard_fields()
        intr = intrinsic_fields()
        for nm1 in FIELD_NAMES:
            for nm2 in FIELD_NAMES:
                if nm1 >= nm2:
                    continue
                pushed = intrinsic_pushforward(bracket_ext(ext[nm1], ext[nm2]))
                direct = bracket_intrinsic(intr[nm1], intr[nm2])
                assert pushed == direct, (nm1, nm2)
