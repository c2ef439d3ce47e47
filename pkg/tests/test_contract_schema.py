"""The published spec schema stays in lockstep with the server's validation."""

import json
import pathlib

from makeuplab.schedule import DEFAULT_SCHEDULE
from makeuplab.service import BACKENDS, COLORABLE_REGIONS, _SPEC_KEYS, parse_spec_document

from test_service import make_client, submit

SCHEMA = json.loads(
    (pathlib.Path(__file__).resolve().parents[1] / "docs" / "spec-schema.json").read_text()
)
PROPS = SCHEMA["properties"]


def test_schema_mirrors_server_bounds():
    assert SCHEMA["additionalProperties"] is False
    assert set(PROPS) == _SPEC_KEYS

    target = PROPS["color_targets"]["items"]
    assert target["additionalProperties"] is False
    assert set(target["required"]) == {"region", "color"}
    assert target["properties"]["region"]["enum"] == list(COLORABLE_REGIONS)
    assert target["properties"]["alpha"]["minimum"] == 0
    assert target["properties"]["alpha"]["maximum"] == 1

    assert PROPS["t_star"]["minimum"] == 1
    assert PROPS["t_star"]["maximum"] == DEFAULT_SCHEDULE.T
    assert PROPS["lambda"]["minimum"] == 0 and PROPS["lambda"]["maximum"] == 1
    assert PROPS["apply_steps"]["minimum"] == 0
    assert PROPS["seed"]["minimum"] == -(2**31)
    assert PROPS["seed"]["maximum"] == 2**31 - 1
    assert PROPS["backend"]["enum"] == sorted(BACKENDS)


def test_schema_defaults_match_server():
    parsed = parse_spec_document({"color_targets": [{"region": "lip", "color": "#B03A4A"}]})
    for key in ("main_prompt", "lambda", "apply_steps", "t_star",
                "inversion_steps", "reverse_steps", "seed", "debug"):
        assert parsed[key] == PROPS[key]["default"], key
    alpha_default = PROPS["color_targets"]["items"]["properties"]["alpha"]["default"]
    assert parsed["color_targets"][0]["alpha"] == alpha_default


# Docs chosen so schema validity and server validity coincide (none trip the
# two server-only rules the schema's description calls out).
CATALOG = [
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}]}, True),
    ({"color_targets": [{"region": "skin", "color": "c8a288", "alpha": 0.5}],
      "t_star": 60, "inversion_steps": 6, "reverse_steps": 8,
      "lambda": 0.3, "apply_steps": 4, "seed": -7, "debug": True,
      "backend": "toy", "main_prompt": "portrait"}, True),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}],
      "concepts": ["glossy lips:0.6", "matte finish"]}, True),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}], "sparkle": 1}, False),
    ({"color_targets": [{"region": "cheek", "color": "#B03A4A"}]}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A", "alpha": 1.5}]}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A"}]}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}], "t_star": 1001}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}], "seed": 2**31}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}], "backend": "quantum"}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}], "debug": "yes"}, False),
    ({"color_targets": [{"region": "lip", "color": "#B03A4A"}], "lambda": "low"}, False),
]


def test_schema_verdicts_align_with_server(tmp_path):
    client = make_client(tmp_path)
    for doc, schema_valid in CATALOG:
        resp = submit(client, spec=doc)
        accepted = resp.status_code == 202
        assert accepted == schema_valid, (doc, resp.status_code, resp.text)
