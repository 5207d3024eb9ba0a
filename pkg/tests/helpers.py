import numpy as np

from app.services.uplink import SelectionMatrix


def random_channels(rng, K, n):
    """Canales complejos gaussianos K x n"""
    return (rng.standard_normal((K, n)) + 1j * rng.standard_normal((K, n))) / np.sqrt(2)


def full_selection(n_sub, n_rf=None):
    return SelectionMatrix(n_sub=n_sub, omega=tuple(range(n_rf or n_sub)))


def random_unit_vectors(rng, count, dim):
    vectors = random_channels(rng, count, dim)
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
