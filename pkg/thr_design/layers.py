"""Forward/backward pairs of the layers of the surrogate network.

Every forward function returns (out, cache); the matching backward function
takes the upstream gradient and that cache. Inputs are 2-D arrays of shape
(batch, features).
"""
import numpy as np

BN_MOMENTUM = 0.9
BN_EPSILON = 1e-5


def affine_forward(x, w, b):
    out = x @ w + b
    return out, (x, w)


def affine_backward(dout, cache):
    """Returns dx, dw, db."""
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.), x


def relu_backward(dout, cache):
    return dout * (cache > 0)


def batchnorm_forward(x, gamma, beta, bn_state, mode='train', momentum=BN_MOMENTUM, eps=BN_EPSILON):
    """Batch normalization.

    In train mode the batch statistics normalize x and the running statistics
    in bn_state are updated in place,
        running = momentum * running + (1 - momentum) * batch.
    In infer mode the running statistics are used and the cache is None.

    Args:
        bn_state: dict
            'running_mean' and 'running_var' arrays of shape (features,)
        mode: str
            'train' or 'infer'
    """
    if mode == 'train':
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        inv_std = 1. / np.sqrt(var + eps)
        x_hat = (x - mean) * inv_std
        bn_state['running_mean'] = momentum * bn_state['running_mean'] + (1. - momentum) * mean
        bn_state['running_var'] = momentum * bn_state['running_var'] + (1. - momentum) * var
        return gamma * x_hat + beta, (x_hat, gamma, inv_std)
    if mode == 'infer':
        x_hat = (x - bn_state['running_mean']) / np.sqrt(bn_state['running_var'] + eps)
        return gamma * x_hat + beta, None
    raise ValueError(f"invalid batchnorm mode '{mode}'")


def batchnorm_backward(dout, cache):
    """Gradient through the batch statistics. Returns dx, dgamma, dbeta."""
    x_hat, gamma, inv_std = cache
    n = dout.shape[0]
    dbeta = dout.sum(axis=0)
    dgamma = (dout * x_hat).sum(axis=0)
    dx_hat = dout * gamma
    dx = inv_std / n * (n * dx_hat - dx_hat.sum(axis=0) - x_hat * (dx_hat * x_hat).sum(axis=0))
    return dx, dgamma, dbeta


def dropout_mask(shape, rate, rng):
    """Inverted-dropout mask: kept units are scaled by 1 / (1 - rate)."""
    if rate == 0.:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1. - rate)


def dropout_forward(x, rate, mode='train', rng=None, mask=None):
    """Inverted dropout; identity in infer mode. A precomputed mask
    overrides rng."""
    if mode == 'infer' or rate == 0.:
        return x, None
    if mask is None:
        mask = dropout_mask(x.shape, rate, rng)
    return x * mask, mask


def dropout_backward(dout, cache):
    return dout if cache is None else dout * cache
