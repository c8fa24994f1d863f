"""Python bindings for the qphase core library."""

from . import _core
from ._core import (
    QphaseError,
    dmrg,
    load_grid,
    model_names,
    normalize_config,
    run,
    tlfi_vqe,
    vqad_profile,
)

__all__ = [
    "QphaseError",
    "dmrg",
    "load_grid",
    "model_names",
    "normalize_config",
    "run",
    "run_file",
    "tlfi_vqe",
    "vqad_profile",
]


def run_file(path, out=None, seed=None, workers=1, resume=False):
    """Run the YAML config at `path`; returns the output directory."""
    import pathlib

    text = pathlib.Path(path).read_text()
    run(text, out=None if out is None else str(out), seed=seed, workers=workers, resume=resume)
    if out is not None:
        return pathlib.Path(out)
    import yaml

    return pathlib.Path(yaml.safe_load(normalize_config(text))["output"])
