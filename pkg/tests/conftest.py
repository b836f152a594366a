import numpy as np
import pytest

from isodilation import DEMOS, demo_spec, run_pipeline
from isodilation.specfile import spec_from_dict


def _doubled_spec_dict(name: str) -> dict:
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEMOS[name].items()}
    trunc = dict(data["truncation"])
    if "N" in trunc:
        trunc["N"] *= 2
    trunc["n_blocks"] *= 2
    data["truncation"] = trunc
    return data


class DemoCache:
    """Run each demo pipeline at most once per session."""

    def __init__(self):
        self._results = {}

    def run(self, name: str, doubled: bool = False):
        key = (name, doubled)
        if key not in self._results:
            if doubled:
                spec = spec_from_dict(_doubled_spec_dict(name))
            else:
                spec = demo_spec(name)
            self._results[key] = run_pipeline(spec)
        return self._results[key]


@pytest.fixture(scope="session")
def demos() -> DemoCache:
    return DemoCache()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
