import random

import pytest

from fatroute import PgftParams, build_pgft, preprocess

# The worked example fabric used throughout: 3 levels, 12 nodes, 6+6+4
# switches, doubled leaf-to-middle links, 2:1 blocking at the top.
FIG_PARAMS = PgftParams(h=3, m=(2, 2, 3), w=(1, 2, 2), p=(1, 2, 1))


@pytest.fixture(scope="session")
def fig_topo():
    return build_pgft(FIG_PARAMS)


@pytest.fixture(scope="session")
def fig_state(fig_topo):
    return preprocess(fig_topo)


def random_params(rng: random.Random, max_switches: int = 500) -> PgftParams:
    """Small random PGFT shape with bounded element counts."""
    while True:
        h = rng.choice((1, 2, 2, 3, 3, 4))
        m = tuple(rng.randint(2, 4) for _ in range(h))
        w = (1,) + tuple(rng.randint(1, 3) for _ in range(h - 1))
        p = (1,) + tuple(rng.randint(1, 2) for _ in range(h - 1))
        params = PgftParams(h=h, m=m, w=w, p=p)
        if params.switch_count <= max_switches and params.node_count <= 256:
            return params
