import dataclasses
from fractions import Fraction

import pytest

from qverify import identities, proofs
from qverify.qcore import QContext


def test_proof_ids_match_registry_identities():
    assert [p.id for p in proofs.PROOFS] == ["G2", "G3", "H2", "K2", "K3", "K4", "C2"]
    for p in proofs.PROOFS:
        assert p.identity in identities.REGISTRY


@pytest.mark.parametrize("proof_id", [p.id for p in proofs.PROOFS])
def test_three_way_agreement(proof_id):
    for point, report in proofs.certify_samples(proof_id, 2, seed=5):
        assert report.passed, (point, report.deviations)
        assert max(report.deviations.values()) < 1e-30


@pytest.mark.parametrize("proof_id", ["G2", "G3", "C2"])
def test_wrong_claim_is_caught(proof_id):
    point = identities.sample_point(proofs.get(proof_id).identity, 1)
    report = proofs.certify(proof_id, point, claimed_factor="1.000001")
    assert not report.passed
    assert report.deviations["lhs_rhs"] < 1e-30


def test_certification_does_not_use_registry_left_sides(monkeypatch):
    def boom(env):
        raise AssertionError("certification evaluated a registry left-hand side")

    for identity_id in ("G2", "H2", "K2", "K3", "K4", "C2"):
        record = identities.REGISTRY[identity_id]
        monkeypatch.setitem(identities.REGISTRY, identity_id, dataclasses.replace(record, lhs=boom))
    for p in proofs.PROOFS:
        point = identities.sample_point(p.identity, 0)
        assert proofs.certify(p.id, point).passed


def test_gosper_details_report_the_solved_coefficient():
    point = {"q": Fraction(1, 2), "a": Fraction(3), "b": Fraction(2)}
    report = proofs.certify("G3", point)
    q, beta, x = Fraction(1, 2), Fraction(4), Fraction(2, 5)
    assert report.details["a1"] == 1
    assert report.details["a2"] == (1 - q + beta * x - x) / ((1 - q) * (q - beta * x))
    assert report.details["t_star"] == (1 - x) / (q - beta * x)


def test_cantarini_coefficients_in_the_squared_base():
    env = identities.get("C2").environment({"q": Fraction(1, 2)}, QContext(Fraction(1, 2)).policy)
    coeffs = proofs.cantarini_coefficients(env)
    s = Fraction(1, 2)
    assert coeffs.a2 == (2 + s) / (s * (1 + s) ** 2)
    assert coeffs.t_star == 2 / (s * (1 + s))


def test_unknown_proof():
    with pytest.raises(KeyError):
        proofs.get("nosuch")
