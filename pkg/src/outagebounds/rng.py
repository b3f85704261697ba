"""Counter-based uniform streams.

Trial ``i`` under seed ``s`` always consumes the same Philox block, so any
slice of trials can be regenerated without replaying the ones before it.
"""

import numpy as np

from ._validation import check_seed

UNIFORMS_PER_TRIAL = 4
_SCALE = 2.0**-53


def trial_uniforms(seed, start, count):
    """Return a ``(count, 4)`` array of open-interval uniforms for trials ``start..start+count-1``."""
    seed = check_seed(seed)
    start = int(start)
    count = int(count)
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    if count == 0:
        return np.empty((0, UNIFORMS_PER_TRIAL))
    bitgen = np.random.Philox(key=seed, counter=start)
    raw = bitgen.random_raw(UNIFORMS_PER_TRIAL * count).reshape(count, UNIFORMS_PER_TRIAL)
    # 53 high bits, shifted by half a step so 0 and 1 never occur
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * _SCALE
