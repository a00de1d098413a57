from macroent.core.storage import RunRecord, get_session, list_runs, record_run


def test_record_and_list_runs():
    record_run("witness", {"scenario": "rme"}, {"f": -1.65}, seed=3)
    record_run("sweep", {"param": "q"}, {"rows": 101})
    record_run("witness", {"scenario": "ime"}, {"f": -0.21})

    runs = list_runs()
    assert [run.command for run in runs] == ["witness", "sweep", "witness"]
    witness_runs = list_runs("witness", limit=1)
    assert len(witness_runs) == 1
    assert witness_runs[0].params == {"scenario": "ime"}

    with get_session() as session:
        stored = session.get(RunRecord, 1)
        assert stored.seed == 3
        assert stored.to_dict()["result"] == {"f": -1.65}
