"""Per-trial random streams.

Every Monte-Carlo trial draws from its own Philox stream keyed by
``SeedSequence(master_seed, spawn_key=(trial_index, attempt))``. The
derivation depends only on those integers, so a run is reproducible
regardless of worker count or completion order.
"""

import numpy as np


def trial_stream(master_seed, trial_index, attempt=0):
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index), int(attempt)))
    return np.random.Generator(np.random.Philox(seq))


def stream(seed):
    """Stand-alone stream for non-trial sampling (tests, scripts)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
