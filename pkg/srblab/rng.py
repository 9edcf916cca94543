"""Deterministic random numbers.

Seeds are 64-bit words mixed with splitmix64; streams are xorshift64* started from a
mixed seed. The compiled versions live in `srblab.kernels` so sampling inside kernels
and here agree bit for bit.
"""
import struct

import numpy as np

from . import kernels

MASK = (1 << 64) - 1


def splitmix64(z):
    return int(kernels.splitmix64(np.uint64(int(z) & MASK)))


def float_bits(value):
    """IEEE-754 bits of a double, as an unsigned integer."""
    return struct.unpack("<Q", struct.pack("<d", float(value)))[0]


def derive_seed(master, *keys):
    """Mix a master seed with integer or float keys. Order of keys matters."""
    seed = int(master) & MASK
    for key in keys:
        word = float_bits(key) if isinstance(key, float) else int(key) & MASK
        seed = splitmix64(seed ^ splitmix64(word))
    return seed


def random_point(seed):
    """Uniform point of [0, 1)^2 drawn from the stream of `seed`."""
    x, y = uniform_array(seed, 2)
    return float(x), float(y)


def uniform_array(seed, n, key=0):
    return kernels.uniform_array(np.uint64(int(seed) & MASK), np.uint64(int(key) & MASK), int(n))
