"""Counter-based random streams, one per Monte-Carlo path.

Each path owns a Philox generator keyed by ``(seed, path_index, purpose)``,
so batches can be simulated in any order (or split across workers) and still
produce bit-identical results.  ``purpose`` separates independent draws that
belong to the same path, e.g. the driving noise and an initial-momentum
sample.
"""

import numpy as np

NOISE = 0
INITIAL_MOMENTUM = 1
SCENARIO = 2
ALT_NOISE = 3

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def path_rng(seed, path_index, purpose=NOISE):
    """Return the dedicated generator of one path.

    path_index must fit in 48 bits; purpose in 16.
    """
    if not 0 <= int(path_index) < (1 << 48):
        raise ValueError("path_index out of range")
    if not 0 <= int(purpose) < (1 << 16):
        raise ValueError("purpose out of range")
    lo = np.uint64(int(path_index)) | (np.uint64(int(purpose)) << np.uint64(48))
    key = np.array([np.uint64(int(seed) & int(_MASK)), lo], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def normal_matrix(seed, path_indices, n_rows, purpose=NOISE):
    """Standard-normal draws, shape ``(n_rows, len(path_indices))``.

    Column ``i`` is the first ``n_rows`` variates of the stream of path
    ``path_indices[i]``; columns are independent and order-insensitive.
    """
    out = np.empty((n_rows, len(path_indices)))
    for col, idx in enumerate(path_indices):
        out[:, col] = path_rng(seed, idx, purpose).standard_normal(n_rows)
    return out


def noise_block(seed, path_indices, n_steps, draws=1, dim=1, purpose=NOISE):
    """Per-step driving noise for a batch, shape (n_steps, draws, n, dim).

    Column ``i`` consumes the stream of path ``path_indices[i]`` in the same
    order as the single-path simulators, so batched and one-at-a-time runs
    are bit-identical.
    """
    out = np.empty((n_steps, draws, len(path_indices), dim))
    for col, idx in enumerate(path_indices):
        out[:, :, col, :] = path_rng(seed, idx, purpose).standard_normal(
            (n_steps, draws, dim)
        )
    return out


def uniform_vector(seed, path_indices, purpose=SCENARIO):
    """One uniform variate per path (used to draw initial atoms)."""
    out = np.empty(len(path_indices))
    for col, idx in enumerate(path_indices):
        out[col] = path_rng(seed, idx, purpose).random()
    return out
