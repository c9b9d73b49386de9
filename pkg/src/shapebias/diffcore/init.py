import numpy as np


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    """Uniform on [-s, s] with s = sqrt(6 / (fan_in + fan_out))."""
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape if shape is not None else (fan_in, fan_out))
