"""Recursive reasoning models with a C++ core.

Configs and reports are plain dicts with the same layout as the JSON files
written by the ``trm`` command line tool.
"""

import json
from os import PathLike

from . import _trm
from ._trm import DataError, NonFiniteLoss

__all__ = ["DataError", "NonFiniteLoss", "desk_preset", "param_count", "effective_depth", "gen_data", "train", "evaluate"]


def _dump(config):
    return "" if config is None else json.dumps(config)


def desk_preset() -> dict:
    return json.loads(_trm.desk_preset())


def param_count(config: dict | None = None) -> int:
    return _trm.param_count(_dump(config))


def effective_depth(T: int, n: int, n_layers: int) -> int:
    return _trm.effective_depth(T, n, n_layers)


def gen_data(task: str, out: str | PathLike, count: int, **options) -> dict:
    """Writes train/test splits and returns the manifest."""
    return json.loads(_trm.gen_data(task, out, count, **options))


def train(config: dict | None, data_dir: str | PathLike, out: str | PathLike) -> dict:
    return json.loads(_trm.train(_dump(config), data_dir, out))


def evaluate(checkpoint: str | PathLike, data_dir: str | PathLike, split: str = "test", use_ema: bool = True) -> dict:
    return json.loads(_trm.evaluate(checkpoint, data_dir, split, use_ema))
