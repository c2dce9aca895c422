from typing import Optional

import numpy as np
from loguru import logger

from doccategorizer.engine.network import Network


def gradient_check(net: Network, x, y, kind, eps: float = 1e-5, max_checks: Optional[int] = None,
                   seed: int = 0, floor: Optional[float] = None) -> float:
    """Worst relative error between backward() and central finite differences.

    The analytic gradient comes from ``net`` in its own precision. Finite
    differences are always evaluated on a 64-bit copy, so a 32-bit network is
    compared against an accurate reference. Dropout masks sampled by the
    analytic pass are reused by the reference when the network is inside
    ``freeze_dropout()``. Gradient components below ``floor`` in magnitude
    are measured against ``floor`` instead of themselves.
    """
    _, analytic = net.backward(x, y, kind)
    reference = net.astype(np.float64)
    reference.mode = net.mode
    x64 = np.asarray(x, dtype=np.float64)
    y64 = np.asarray(y, dtype=np.float64)
    if floor is None:
        floor = 1e-3 if net.dtype == np.float32 else 1e-4
    rng = np.random.default_rng(seed)

    worst = 0.0
    for key, param in reference.parameters().items():
        flat = param.reshape(-1)
        indices = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            indices = rng.choice(flat.size, size=max_checks, replace=False)
        expected = analytic[key].reshape(-1).astype(np.float64)
        for i in indices:
            original = flat[i]
            flat[i] = original + eps
            plus = reference.loss(x64, y64, kind)
            flat[i] = original - eps
            minus = reference.loss(x64, y64, kind)
            flat[i] = original
            numeric = (plus - minus) / (2 * eps)
            denom = max(abs(numeric), abs(expected[i]), floor)
            worst = max(worst, abs(numeric - expected[i]) / denom)
    logger.debug("gradient check: max relative error = {}", worst)
    return worst
