"""Spec file parsing, validation, and canonical round-trips."""

import json

import pytest

from isodilation.errors import SpecParseError, SpecValidationError
from isodilation.pipeline import DEMOS
from isodilation.specfile import emit_spec, parse_spec, spec_from_dict

VALID_SHIFT = {
    "operator": {"kind": "shift", "rule": {"name": "dirichlet"}},
    "m": 2,
    "truncation": {"N": 64, "n_blocks": 8},
}


class TestParse:
    def test_minimal_shift_spec(self):
        spec = parse_spec(json.dumps(VALID_SHIFT))
        assert spec.kind == "shift"
        assert spec.rule.kind == "dirichlet"
        assert spec.m == 2 and spec.n == 64 and spec.n_blocks == 8
        assert spec.schema_version == 1

    def test_dense_spec(self):
        spec = parse_spec(
            json.dumps(
                {
                    "operator": {"kind": "dense", "entries": [[[0.5, 0.5]]]},
                    "m": 2,
                    "truncation": {"n_blocks": 4},
                }
            )
        )
        assert spec.kind == "dense"
        assert spec.entries_matrix()[0][0] == 0.5 + 0.5j

    def test_malformed_json_reports_line(self):
        with pytest.raises(SpecParseError) as err:
            parse_spec('{"operator": }')
        assert "line 1" in str(err.value)

    def test_unknown_rule_named_in_error(self):
        bad = {
            "operator": {"kind": "shift", "rule": {"name": "drichlet"}},
            "m": 2,
            "truncation": {"N": 64, "n_blocks": 8},
        }
        with pytest.raises(SpecValidationError) as err:
            spec_from_dict(bad)
        assert "drichlet" in " ".join(err.value.errors)

    def test_n_too_small(self):
        bad = dict(VALID_SHIFT, truncation={"N": 3, "n_blocks": 8})
        with pytest.raises(SpecValidationError) as err:
            spec_from_dict(bad)
        assert any("N = 3" in e for e in err.value.errors)

    def test_n_blocks_too_small(self):
        bad = dict(VALID_SHIFT, truncation={"N": 64, "n_blocks": 3})
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_unknown_top_level_field_rejected(self):
        bad = dict(VALID_SHIFT, extra_field=1)
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_unknown_tolerance_rejected(self):
        bad = dict(VALID_SHIFT, tolerances={"no_such_tol": 1e-9})
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_wrong_schema_version_rejected(self):
        bad = dict(VALID_SHIFT, schema_version=2)
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_shift_requires_n(self):
        bad = dict(VALID_SHIFT, truncation={"n_blocks": 8})
        with pytest.raises(SpecValidationError) as err:
            spec_from_dict(bad)
        assert any("require N" in e for e in err.value.errors)

    def test_dense_rejects_mismatched_n(self):
        bad = {
            "operator": {"kind": "dense", "entries": [[[1.0, 0.0]]]},
            "m": 2,
            "truncation": {"N": 4, "n_blocks": 4},
        }
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_dense_rejects_nonsquare(self):
        bad = {
            "operator": {"kind": "dense", "entries": [[[1.0, 0.0], [2.0, 0.0]]]},
            "m": 2,
            "truncation": {"n_blocks": 4},
        }
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_geometric_range_enforced(self):
        bad = {
            "operator": {
                "kind": "shift",
                "rule": {"name": "geometric_concave", "r": 1.5},
            },
            "m": 2,
            "truncation": {"N": 64, "n_blocks": 8},
        }
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_stray_rule_parameter_rejected(self):
        bad = {
            "operator": {"kind": "shift", "rule": {"name": "dirichlet", "r": 0.5}},
            "m": 2,
            "truncation": {"N": 64, "n_blocks": 8},
        }
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)

    def test_path_m_consistency(self):
        bad = dict(VALID_SHIFT, path="three_concave")
        with pytest.raises(SpecValidationError):
            spec_from_dict(bad)


class TestRoundTrip:
    @pytest.mark.parametrize("name", sorted(DEMOS))
    def test_catalog_round_trips(self, name):
        spec = spec_from_dict(DEMOS[name])
        again = parse_spec(emit_spec(spec))
        assert again == spec
        assert again.to_jsonable() == spec.to_jsonable()

    def test_tolerances_and_seed_round_trip(self):
        data = dict(VALID_SHIFT, tolerances={"psd_tol": 1e-8}, seed=7)
        spec = spec_from_dict(data)
        again = parse_spec(emit_spec(spec))
        assert again == spec
        assert again.tolerances().psd_tol == 1e-8
        assert again.seed == 7
