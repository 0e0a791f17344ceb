"""Finite-difference verification of analytic gradients.

Central differences at 64-bit with a small step, compared coordinate-wise
against analytic gradients on a random sample of coordinates per
parameter array.  Used by the test suite for every parameter group
(embeddings, GRU, projection, quantile head) through the full losses.
"""

import numpy as np

from .neural import PAD_ROW


def central_difference(loss_fn, params, name, idx, step=1e-5):
    """d loss / d params[name][idx] by central differences."""
    arr = params[name]
    orig = arr[idx]
    arr[idx] = orig + step
    up = loss_fn(params)
    arr[idx] = orig - step
    down = loss_fn(params)
    arr[idx] = orig
    return (up - down) / (2.0 * step)


def check_gradients(loss_fn, params, grads, rng, samples_per_param=6,
                    step=1e-5, rtol=1e-4, atol=1e-7):
    """Compare analytic grads to central differences on sampled coordinates.

    Returns a report dict ``{name: (worst_abs_err, worst_scale)}``; an
    entry passes when ``abs_err <= atol + rtol * scale`` with scale the
    larger magnitude of the two gradients.  The frozen pad embedding row
    is skipped: its analytic gradient is masked to zero by contract.
    """
    report = {}
    for name, grad in grads.items():
        arr = params[name]
        worst = (0.0, 1.0)
        for _ in range(samples_per_param):
            idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
            if name == "emb" and idx[0] == PAD_ROW:
                idx = (1 + int(rng.integers(0, arr.shape[0] - 1)),) + idx[1:]
            fd = central_difference(loss_fn, params, name, idx, step=step)
            analytic = grad[idx]
            err = abs(analytic - fd)
            scale = max(abs(analytic), abs(fd))
            if err - rtol * scale > worst[0] - rtol * worst[1]:
                worst = (err, scale)
        report[name] = worst
    return report


def assert_gradients_match(report, rtol=1e-4, atol=1e-7):
    bad = {name: (err, scale) for name, (err, scale) in report.items()
           if err > atol + rtol * scale}
    assert not bad, f"gradient mismatches: {bad}"
