"""Kernel backend selection.

The compiled backend is used when its extension imported cleanly; otherwise
the pure-Python fallback takes over. VF_KERNEL=py or VF_KERNEL=cython forces
a specific backend (the latter raises if the extension is missing, so a
broken build cannot silently degrade).
"""

import os

_forced = os.environ.get("VF_KERNEL")

if _forced == "py":
    from . import pykernels as impl
elif _forced == "cython":
    from . import ckernels as impl  # type: ignore[no-redef]
elif _forced:
    raise ImportError(f"VF_KERNEL must be 'py' or 'cython', got {_forced!r}")
else:
    try:
        from . import ckernels as impl  # type: ignore[no-redef]
    except ImportError:
        from . import pykernels as impl

BACKEND = impl.BACKEND
ACT_RELU = impl.ACT_RELU
ACT_TANH = impl.ACT_TANH
forward = impl.forward
backward = impl.backward
train_sgd = impl.train_sgd
permutation = impl.permutation
