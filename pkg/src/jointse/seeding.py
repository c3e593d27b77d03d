import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from an ordered tuple of ints/strings."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little") & ((1 << 63) - 1)


def rng_for(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
