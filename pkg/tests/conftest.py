import numpy as np
import pytest

from trdma.channel import ChannelSpec, CirSet, generate_synthetic


@pytest.fixture
def small_spec():
    return ChannelSpec(n_users=2, n_antennas=4, n_taps=32, seed=11)


@pytest.fixture
def small_bank(small_spec):
    return generate_synthetic(small_spec)


@pytest.fixture
def three_user_bank():
    return generate_synthetic(ChannelSpec(n_users=3, n_antennas=2, n_taps=16, seed=5))


@pytest.fixture
def delta_bank():
    """Factory of banks where user i sees a single tap at delay 0 on antenna i mod M only."""
    def make(n_users=2, n_antennas=2, n_taps=8, gain=1.0):
        taps = np.zeros((n_users, n_antennas, n_taps), dtype=np.complex128)
        for i in range(n_users):
            taps[i, i % n_antennas, 0] = gain
        return CirSet(taps, 1e-8, 0.15)
    return make


@pytest.fixture
def write_bytes(tmp_path):
    def write(name, data):
        p = tmp_path / name
        p.write_bytes(data)
        return str(p)
    return write
