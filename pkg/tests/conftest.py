import numpy as np
import pytest

from lurecert import FeedforwardNet, demo_plant, demo_system


@pytest.fixture(scope="session")
def plant():
    return demo_plant()


@pytest.fixture(scope="session")
def demo():
    # fixture_net runs a grid verification per attempt, so build it once
    return demo_system(seed=0)


@pytest.fixture(scope="session")
def demo_doc(demo):
    from lurecert import system_to_dict
    return system_to_dict(demo)


@pytest.fixture(scope="session")
def toy_net():
    # single tanh neuron: y -> -2 tanh(y)
    return FeedforwardNet((np.array([[1.0]]), np.array([[-2.0]])), ("tanh",))
