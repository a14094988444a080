import json
from pathlib import Path

import pytest

jsonschema = pytest.importorskip("jsonschema")

DATA = Path(__file__).resolve().parents[2] / "data"


def load(p):
    return json.loads(Path(p).read_text())


def test_registry_matches_schema():
    schema = load(DATA / "schemas" / "taxonomy.schema.json")
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(load(DATA / "taxonomy.json"), schema)


@pytest.mark.parametrize("path", sorted((DATA / "portfolios").glob("*.portfolio.json")), ids=lambda p: p.name)
def test_portfolios_match_schema(path):
    schema = load(DATA / "schemas" / "portfolio.schema.json")
    jsonschema.validate(load(path), schema)


def test_schema_rejects_unknown_family():
    schema = load(DATA / "schemas" / "portfolio.schema.json")
    doc = load(DATA / "portfolios" / "single_lognormal.portfolio.json")
    doc["scenarios"][0]["frequency"] = {"family": "Geometric", "p": 0.3}
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, schema)
