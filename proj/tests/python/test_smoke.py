import json
import math
from pathlib import Path

import pytest

import airisk

DATA = Path(__file__).resolve().parents[2] / "data"


def portfolio(name):
    return json.loads((DATA / "portfolios" / name).read_text())


@pytest.fixture(scope="module")
def registry():
    return airisk.load_registry()


def test_registry(registry):
    assert registry.version == "2025.11-1"
    assert registry.sub_threat_count == 53
    assert len(registry.domain_ids()) == 9
    refs = [a["reference"] for a in json.loads(registry.anchors_for("misuse"))]
    assert refs == ["GOVERN 1.5", "MANAGE 2.3"]


def test_calibration():
    mu, sigma = airisk.calibrate_lognormal(1e4, 1e6)
    assert mu == pytest.approx(11.5129254649702284, rel=1e-12)
    assert sigma == pytest.approx(1.39987233834392581, rel=1e-12)
    assert airisk.lognormal_quantile(mu, sigma, 0.95) == pytest.approx(1e6, rel=1e-9)


def test_simulate_is_reproducible(registry):
    p = portfolio("single_lognormal.portfolio.json")
    a, losses_a = airisk.simulate(p, trials=200_000, seed=5, registry=registry)
    b, losses_b = airisk.simulate(json.dumps(p), trials=200_000, seed=5, threads=1, registry=registry)
    assert losses_a == losses_b
    assert a == b
    assert a["portfolio"]["eal"] == pytest.approx(2 * math.exp(10.5), rel=0.02)
    assert len(losses_a) == 200_000


def test_rank_controls(registry):
    ranked = airisk.rank_controls(portfolio("customer_assistant.portfolio.json"), "jailbreak-support-bot",
                                  trials=5000, registry=registry)
    assert len(ranked) == 2
    assert ranked[0]["net_benefit"] >= ranked[1]["net_benefit"]


def test_incidents(registry):
    rep = airisk.classify_incidents(DATA / "incidents" / "aiid_2025_labels.json", reference_labels=True,
                                    registry=registry)
    assert rep["total"] == 133
    assert rep["per_domain"]["misuse"]["count"] == 81


def test_report_is_deterministic(registry):
    p = portfolio("customer_assistant.portfolio.json")
    a = airisk.render_report(p, "markdown", trials=2000, generated_at=0, registry=registry)
    b = airisk.render_report(p, "markdown", trials=2000, generated_at=0, registry=registry)
    assert a == b
    assert "1970-01-01T00:00:00Z" in a


def test_errors_carry_codes(registry):
    p = portfolio("single_lognormal.portfolio.json")
    p["scenarios"][0]["sub_threat_id"] = "time_travel"
    with pytest.raises(airisk.AiriskError) as info:
        airisk.simulate(p, trials=10, registry=registry)
    assert info.value.code == "ValidationFailed"
    with pytest.raises(airisk.AiriskError):
        airisk.render_report(portfolio("single_lognormal.portfolio.json"), "pdf", trials=10, registry=registry)


def test_service(registry):
    svc = airisk.Service(registry, max_trials=10_000)
    status, body, headers = svc.handle("POST", "/v1/portfolios", json.dumps(portfolio("zero_rate.portfolio.json")))
    assert status == 201
    assert headers["ETag"] == '"1"'
    status, body, _ = svc.handle("POST", "/v1/portfolios/dormant/simulate", '{"trials": 100}')
    assert status == 200
    assert json.loads(body)["portfolio"]["eal"] == 0.0
    status, body, _ = svc.handle("POST", "/v1/portfolios/dormant/simulate", '{"trials": 100000}')
    assert status == 422
