"""Central finite-difference checks of the analytic gradients."""

import numpy as np

from .network import activation_pattern, backward, forward, loss_ce, xavier_init

# |a - n| / max(|a| + |n|, floor); the floor keeps vanishing gradients from
# turning rounding noise into large relative errors.
REL_FLOOR = 1e-6


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), REL_FLOOR)


def check_arrays(evaluate, arrays, grads, rng, eps=1e-5, samples=40, pattern=None, max_resample=20):
    """Max relative error between ``grads`` and central differences of ``evaluate``.

    ``arrays`` are perturbed in place (and restored). Coordinates whose
    perturbation flips ``pattern()`` (a ReLU sign or max-pool winner) are
    resampled since the loss is not differentiable across the kink.
    """
    worst = 0.0
    for arr, grad in zip(arrays, grads):
        if arr.size == 0:
            continue
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        picks = rng.choice(arr.size, size=min(samples, arr.size), replace=False)
        for idx in picks:
            for _ in range(max_resample):
                orig = flat[idx]
                flat[idx] = orig + eps
                fp = evaluate()
                pp = pattern() if pattern else None
                flat[idx] = orig - eps
                fm = evaluate()
                pm = pattern() if pattern else None
                flat[idx] = orig
                if pp == pm:
                    break
                idx = rng.integers(arr.size)
            else:
                continue
            numeric = (fp - fm) / (2 * eps)
            worst = max(worst, relative_error(gflat[idx], numeric))
    return worst


def grad_check(spec, seed, eps=1e-5, batch=4, n_classes=None, samples=40):
    """Compare backward() against finite differences on a random batch.

    Checks every parameter array and the input gradient. Returns the max
    relative error over the sampled coordinates.
    """
    rng = np.random.default_rng(seed)
    params = xavier_init(spec, seed)
    # small random biases so ReLUs are not exactly at zero on zero input
    for p in params:
        if "b" in p:
            p["b"] = rng.normal(0.0, 0.1, size=p["b"].shape)
    k = n_classes or spec.output_shape[0]
    x = rng.uniform(0.0, 1.0, size=(batch,) + spec.input_shape)
    y = rng.integers(0, k, size=batch)

    state = {}

    def evaluate():
        out, cache = forward(spec, params, x)
        state["cache"] = cache
        return loss_ce(out, y)[0]

    def pattern():
        return activation_pattern(spec, state["cache"])

    out, cache = forward(spec, params, x)
    _, dlogits = loss_ce(out, y)
    grads, dx = backward(spec, params, cache, dlogits)
    return check_arrays(
        evaluate,
        params.arrays() + [x],
        grads.arrays() + [dx],
        rng,
        eps=eps,
        samples=samples,
        pattern=pattern,
    )
