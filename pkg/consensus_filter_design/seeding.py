"""Seed handling shared by every stochastic stage.

All randomness flows through numpy's PCG64 bit generator. Derived seeds are
computed from (master seed, stream, index) tuples with SeedSequence, so a
realization gets the same seed whether it runs serially or in a worker.
"""
import numpy as np

# Stream identifiers for derived seeds.
DESIGN_STREAM = 0
TRIAL_STREAM = 1
INITIAL_STATE_STREAM = 2
RESAMPLE_STREAM = 3

def make_rng(seed):
    """Build a generator from an integer seed (or a tuple of integers).

    Args:
        seed (int or tuple): master or derived seed.

    Returns:
        numpy.random.Generator backed by PCG64.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

def sub_seed(seed, *index):
    """Derive a 32-bit integer seed from a master seed and an index path.

    Args:
        seed (int): master seed.
        *index (int): stream and replicate indices.

    Returns:
        seed (int): derived seed, stable across platforms.
    """
    sequence = np.random.SeedSequence([int(seed)] + [int(i) for i in index])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
