import pytest
from hypothesis import HealthCheck, settings

from edgesense.core import SimConfig
from edgesense.trace import build_round_trace, draw_events, generate_synthetic

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=75,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def tiny_cfg():
    """Two zones x three nodes, two simulated days at hourly rounds."""
    return SimConfig(n_zones=2, nodes_per_zone=3, rounds=48, round_minutes=60, seed=7)


@pytest.fixture(scope="session")
def tiny_traces(tiny_cfg):
    """Round-level trace shared by the engine-facing tests, events included."""
    hourly = generate_synthetic(tiny_cfg, rng_seed=tiny_cfg.seed)
    events = draw_events(
        tiny_cfg.rounds,
        tiny_cfg.n_zones,
        tiny_cfg.rounds_per_day,
        rate_per_zone_day=2.0,
        rng_seed=tiny_cfg.seed,
    )
    return build_round_trace(tiny_cfg, hourly, events)
