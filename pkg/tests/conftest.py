import pytest

from streampaint.schedule import build_schedule, make_timesteps


@pytest.fixture(scope="session")
def lcm_schedule():
    return build_schedule(mode="lcm")


@pytest.fixture(scope="session")
def ddim_schedule():
    return build_schedule(mode="ddim")


@pytest.fixture(scope="session")
def lcm_plan(lcm_schedule):
    return make_timesteps(lcm_schedule, 5)


@pytest.fixture(scope="session")
def ddim_plan(ddim_schedule):
    return make_timesteps(ddim_schedule, 5)
