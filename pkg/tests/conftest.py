import json
import math
from pathlib import Path

import pytest

import ebqrng
from ebqrng import DeviceParams, backend, correlator_certificate

CONFIG_DIR = Path(ebqrng.__file__).parent / "configs"

TEST_DEVICE = {
    "alpha_mag": 0.05,
    "beta_mag": 9.9498743710662,
    "rel_phase": 0.0,
    "eta": 0.55,
    "t2": 0.99,
    "p1": 0.25,
    "dark_prob": 2.4e-05,
    "extinction_db": 23.0,
    "rep_rate_hz": 12.5e6,
}

# low-threshold certificate so short test blocks still certify entropy
TEST_CERT = correlator_certificate(p1=0.25, scale=1.0, h=0.02, c=0.1, d=2.0,
                                   epsilon=1e-10).to_json_dict()


def config_path(name: str) -> Path:
    return CONFIG_DIR / name


def make_config(**overrides) -> dict:
    """Small, fast protocol config for pipeline and CLI tests."""
    cfg = {
        "device": dict(TEST_DEVICE),
        "energy": {"margin": 1.0},
        "certificate": json.loads(json.dumps(TEST_CERT)),
        "protocol": {
            "blocks": 3,
            "rounds_per_block": 50_000,
            "seed": 4242,
            "extractor_seed": 999,
            "workers": 1,
        },
        "output": {"report": "report.ndjson", "bits": "certified_bits.bin"},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and key in cfg and key != "energy":
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


@pytest.fixture(scope="session")
def ideal_params() -> DeviceParams:
    """Lab-regime device in the ideal limit: no dark counts, x=0 blocked."""
    return DeviceParams(alpha_mag=0.05, beta_mag=math.sqrt(99.0),
                        eta=0.55, t2=0.99, p1=0.25)


@pytest.fixture(scope="session")
def desk_params() -> DeviceParams:
    """Lab-regime device with finite extinction and dark counts."""
    return DeviceParams(alpha_mag=0.05, beta_mag=math.sqrt(99.0),
                        eta=0.55, t2=0.99, p1=0.25,
                        dark_prob=2.4e-5, extinction_db=23.0)


@pytest.fixture(params=["ext", "py"])
def kernel_backend(request):
    """Run a test under each kernel backend, restoring the default after."""
    name = request.param
    if name not in backend.available_backends():
        pytest.skip(f"backend {name} unavailable")
    previous = backend.get_backend().NAME
    backend.set_backend(name)
    yield name
    backend.set_backend(previous)
