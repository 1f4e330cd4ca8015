import math

import pytest

import bankdist


def test_version():
    assert bankdist.__version__ == "0.1.0"


def test_symmetric_growth():
    assert bankdist.symmetric_growth(100.0, 100.0) == 0.0
    assert bankdist.symmetric_growth(100.0, 0.0) == -2.0
    g = bankdist.symmetric_growth(100.0, 150.0)
    assert math.isclose(g, 50.0 / 125.0)
    with pytest.raises(bankdist.BankdistError):
        bankdist.symmetric_growth(0.0, 0.0)


def test_auc():
    assert bankdist.auc([0.1, 0.9], [False, True]) == 1.0
    assert bankdist.auc([0.9, 0.1], [False, True]) == 0.0
    assert bankdist.auc([0.5, 0.5], [False, True]) == 0.5


def test_edit_distance_and_names():
    assert bankdist.edit_distance("bank", "bnak") == 1
    a = bankdist.normalize_bank_name("The First National Bank of Springfield", "springfield")
    b = bankdist.normalize_bank_name("First Nat. Bank", "springfield")
    assert a == b


def test_rules_fire_on_run_language():
    hit = bankdist.match_rules("A run upon the Springfield bank began yesterday.")
    assert "bank_run" in hit
    miss = bankdist.match_rules("The river bank flooded after heavy rain.")
    assert miss == []


def test_synthetic_inputs(tmp_path):
    out = bankdist.write_synthetic_inputs(str(tmp_path), 20, 5, 0.2, 7)
    assert out["n_ground_truth"] == 5
    assert (tmp_path / "fixtures.jsonl").exists()
