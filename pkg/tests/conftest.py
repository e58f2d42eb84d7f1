import pytest

from atomics.simbench import SimConfig, SimWorld, default_scene
from atomics.simbench.world import make_bench


def make_world(seed: int = 0, noiseless: bool = False, **overrides) -> SimWorld:
    kwargs = dict(seed=seed)
    if noiseless:
        kwargs.update(sigma_rel=0.0, step_noise_rel=0.0, backlash_um=0.0, render_noise=0.0)
    kwargs.update(overrides)
    return SimWorld(SimConfig(**kwargs), default_scene())


@pytest.fixture
def world():
    return make_world(seed=0)


@pytest.fixture
def quiet_world():
    """Noise-free world for exact-geometry and exact-model assertions."""
    return make_world(seed=0, noiseless=True)


@pytest.fixture
def bench(world):
    return make_bench(world)


@pytest.fixture
def quiet_bench(quiet_world):
    return make_bench(quiet_world)
