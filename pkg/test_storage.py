"""
Tests for the run and report history storage
"""

import pytest

from models.database import make_session_factory
from models.report import PropertyReport
from services.storage_service import RunStorageService


@pytest.fixture
def db(database_url):
    session = make_session_factory(database_url)()
    yield session
    session.close()


@pytest.fixture
def storage():
    return RunStorageService()


def _run(**overrides):
    data = {
        "network": "butterfly",
        "field_size": 2,
        "targets": ["t2", "t1"],
        "permutation": [1, 2],
        "seed": 0,
        "code_seed": 0,
        "input_spec": "random:7",
        "retire_early": False,
        "fidelity": 1.0,
        "transmissions": 7,
        "transcript": '{"step": "prepare"}\n',
    }
    data.update(overrides)
    return data


def test_save_and_get_run(db, storage):
    record = storage.save_run(db, _run())
    assert record.id is not None
    assert record.created_at is not None
    fetched = storage.get_run(db, record.id)
    assert fetched.targets == "t2,t1"
    assert fetched.permutation == "1,2"
    assert fetched.input_spec == "random:7"
    assert storage.get_run(db, 999) is None


def test_list_runs_newest_first(db, storage):
    storage.save_run(db, _run(seed=1))
    storage.save_run(db, _run(seed=2, network="combination_3_2", field_size=3, transmissions=11))
    storage.save_run(db, _run(seed=3))
    assert [run.seed for run in storage.list_runs(db)] == [3, 2, 1]
    assert [run.seed for run in storage.list_runs(db, network="butterfly")] == [3, 1]
    assert [run.seed for run in storage.list_runs(db, skip=1, limit=1)] == [2]


def test_delete_run(db, storage):
    record = storage.save_run(db, _run())
    assert storage.delete_run(db, record.id)
    assert not storage.delete_run(db, record.id)
    assert storage.list_runs(db) == []


def test_run_statistics(db, storage):
    storage.save_run(db, _run(fidelity=1.0))
    storage.save_run(db, _run(fidelity=0.75, network="two_paths", transmissions=4))
    statistics = storage.run_statistics(db)
    assert statistics["total_runs"] == 2
    assert statistics["min_fidelity"] == pytest.approx(0.75)
    assert statistics["mean_transmissions"] == 5.5
    assert statistics["runs_per_network"] == {"butterfly": 1, "two_paths": 1}


def test_empty_statistics(db, storage):
    statistics = storage.run_statistics(db)
    assert statistics["total_runs"] == 0
    assert statistics["min_fidelity"] is None
    assert statistics["mean_transmissions"] == 0


def test_reports_round_trip(db, storage):
    report = PropertyReport(property="cat-states", instance="butterfly over F_2")
    report.passed(127)
    report.fail("outcomes [1, 0]", deviation=0.5)
    record = storage.save_report(db, report)
    assert record.failure_count == 1
    assert record.cases == 128
    stored = storage.list_reports(db)
    assert len(stored) == 1
    restored = storage.load_report(stored[0])
    assert restored.failures[0].witness == {"deviation": 0.5}
    assert not restored.ok
