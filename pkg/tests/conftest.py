import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from ghminv import MultiChannelField


def smooth_random_field(extent, channels, seed, blur=2.0, lo=-1.0, hi=1.0):
    """Band-limited random field; smoothness keeps resampling errors small."""
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(tuple(extent) + (channels,))
    for c in range(channels):
        data[..., c] = gaussian_filter(data[..., c], blur, mode="wrap")
        span = data[..., c].max() - data[..., c].min()
        data[..., c] = lo + (hi - lo) * (data[..., c] - data[..., c].min()) / span
    return MultiChannelField(data, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
