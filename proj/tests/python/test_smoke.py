import json

import pytest

import trm


def small_config():
    cfg = trm.desk_preset()
    cfg["net"]["hidden"] = 16
    cfg["net"]["n_heads"] = 2
    cfg["schedule"].update(n=2, T=2, n_sup=4)
    cfg["train"].update(batch_size=4, max_steps=4, log_wall_time=False, seed=3)
    return cfg


def test_desk_preset_shape():
    cfg = trm.desk_preset()
    assert cfg["net"]["hidden"] == 64
    assert cfg["schedule"]["variant"] == "trm"
    assert trm.param_count(cfg) > 0


def test_effective_depth():
    assert trm.effective_depth(3, 6, 2) == 42
    assert trm.effective_depth(2, 2, 4) == 24


def test_gen_train_eval(tmp_path):
    data = tmp_path / "data"
    manifest = trm.gen_data("sudoku", data, 8, test_count=4, seed=1)
    assert manifest["counts"] == {"train": 8, "test": 4}
    assert (data / "train.jsonl").exists()

    result = trm.train(small_config(), data, tmp_path / "run")
    assert result["steps"] == 4
    lines = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 4
    assert {"step", "loss_answer", "loss_halt"} <= set(json.loads(lines[0]))

    report = trm.evaluate(result["final_checkpoint"], data)
    assert report["weights"] == "ema"
    assert 0.0 <= report["exact_match"] <= 1.0


def test_gen_data_refuses_overwrite(tmp_path):
    trm.gen_data("sudoku", tmp_path, 2, seed=1)
    with pytest.raises(Exception):
        trm.gen_data("sudoku", tmp_path, 2, seed=1)
    trm.gen_data("sudoku", tmp_path, 2, seed=1, force=True)


def test_missing_data_is_data_error(tmp_path):
    with pytest.raises(trm.DataError):
        trm.train(small_config(), tmp_path / "absent", tmp_path / "run")
