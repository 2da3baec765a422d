import functools
import hashlib
import multiprocessing as mp
from dataclasses import is_dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, TypeVar, Union

import numpy as np
from omegaconf import DictConfig, OmegaConf
from tqdm import tqdm

from diskchain.configs import EvalConfig, LabelConfig, PostprocParams, SynthParams

T = TypeVar("T")
R = TypeVar("R")


def validate_config(config):
    if isinstance(config, (str, Path)):
        config = OmegaConf.load(config)
        try:
            return OmegaConf.to_object(config)
        except ValueError:
            return config
    elif isinstance(config, (dict, DictConfig)):
        return DictConfig(config)
    elif is_dataclass(config):
        return config
    else:
        try:
            return OmegaConf.load(config)
        except IOError:
            raise IOError(
                "Invalid config type. Must be a path to a yaml, a dict, or dataclass."
            )


def load_settings(path: Optional[Union[str, Path]] = None) -> dict[str, Any]:
    """
    Settings for the command line: one dataclass per config group.

    A YAML file may override any of the groups `labels`, `postproc`, `synth`
    and `eval`; unknown keys are rejected by the structured merge.
    """
    base = OmegaConf.structured(
        {
            "labels": LabelConfig,
            "postproc": PostprocParams,
            "synth": SynthParams,
            "eval": EvalConfig,
        }
    )
    if path is not None:
        base = OmegaConf.merge(base, validate_config(path))
    return {k: OmegaConf.to_object(base[k]) for k in base}


def pool_map(
    fn: Callable[..., R],
    items: Iterable[T],
    processes: int = 1,
    desc: Optional[str] = None,
    **kwargs,
) -> list[R]:
    """
    Apply `fn` to every item, in worker processes when `processes` > 1.

    Results come back in input order either way.

    Args:
        fn (Callable): A picklable, module-level function.
        items (Iterable): The inputs.
        processes (int): Number of processes to use.
        desc (str): Show a progress bar with this label.
        kwargs: Extra keyword arguments bound to `fn`.
    """
    eval_fn = functools.partial(fn, **kwargs)
    items = list(items)
    bar = functools.partial(tqdm, total=len(items), desc=desc, disable=desc is None)
    if processes <= 1 or len(items) <= 1:
        return list(bar(map(eval_fn, items)))
    with mp.Pool(processes=min(processes, len(items))) as pool:
        return list(bar(pool.imap(eval_fn, items)))


def checksum(*arrays: Any) -> str:
    """sha256 over the dtype, shape and bytes of each array."""
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()
