"""Reproducible random streams.

Stream `(seed, r)` is derived with jax's counter-based key folding, so any
run can be regenerated from the root seed and its index alone, independent
of worker count or scheduling.
"""

__all__ = [
    "StreamFactory",
    "numpy_generator",
]

import logging

import attrs
import jax
import numpy as np
from jaxtyping import PRNGKeyArray

logger = logging.getLogger(__name__)


def numpy_generator(key: PRNGKeyArray) -> np.random.Generator:
    """Wraps a jax key as a numpy Philox generator."""
    data = np.asarray(jax.random.key_data(key), dtype=np.uint64).ravel()
    philox_key = (int(data[0]) << 32) | int(data[-1])
    return np.random.Generator(np.random.Philox(key=philox_key))


@attrs.define(frozen=True)
class StreamFactory:
    seed: int = attrs.field(validator=attrs.validators.ge(0))

    def key(self, run_index: int) -> PRNGKeyArray:
        return jax.random.fold_in(jax.random.PRNGKey(self.seed), run_index)

    def stream(self, run_index: int) -> np.random.Generator:
        return numpy_generator(self.key(run_index))

    def split(self, run_index: int, num: int) -> list[np.random.Generator]:
        """Independent generators for the sub-tasks of one run."""
        keys = jax.random.split(self.key(run_index), num)
        return [numpy_generator(k) for k in keys]
