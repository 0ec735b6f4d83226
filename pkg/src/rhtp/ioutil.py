"""Small file-output helpers: every artifact is written via temp + rename."""

from __future__ import annotations

import os
import tempfile


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def derived_seed(*parts: int) -> int:
    """Stable 64-bit seed derived from a tuple of integers.

    Used to hand independent, reproducible RNG streams to scenes, targets and
    truth draws without threading generator state through the call tree.
    """
    import numpy as np

    ss = np.random.SeedSequence(list(parts))
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0])
