"""Layer primitives with hand-written backward passes.

Every ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes ``(dout, cache)``.  Tensors are ``(N, C, H, W)`` float64 arrays.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(xp, k, stride):
    # (N, C, Ho, Wo, k, k) view
    w = sliding_window_view(xp, (k, k), axis=(2, 3))
    return w[:, :, ::stride, ::stride]


def conv_forward(x, w, b, stride=1, pad=0):
    """Cross-correlation. w: (Co, Ci, k, k), b: (Co,)."""
    k = w.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _windows(xp, k, stride)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, Co)
    out = out.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return np.ascontiguousarray(out), (x.shape, xp, w, stride, pad)


def _col2im(dcols, xp_shape, k, stride, ho, wo):
    """Scatter-add (N, Ho, Wo, C, k, k) patch gradients back onto a padded image."""
    dxp = np.zeros(xp_shape)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return dxp


def conv_backward(dout, cache):
    x_shape, xp, w, stride, pad = cache
    k = w.shape[2]
    ho, wo = dout.shape[2:]
    cols = _windows(xp, k, stride)
    dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    dcols = np.tensordot(dout, w, axes=([1], [0]))  # (N, Ho, Wo, Ci, k, k)
    dxp = _col2im(dcols, xp.shape, k, stride, ho, wo)
    if pad:
        dxp = dxp[:, :, pad:-pad, pad:-pad]
    return np.ascontiguousarray(dxp), dw, db


def deconv_forward(x, w, b, stride=2, pad=1):
    """Transposed convolution. w: (Ci, Co, k, k); out size (H-1)*stride - 2*pad + k."""
    n, _, h, wd = x.shape
    co, k = w.shape[1], w.shape[2]
    cols = np.tensordot(x, w, axes=([1], [0]))  # (N, H, W, Co, k, k)
    full = (n, co, (h - 1) * stride + k, (wd - 1) * stride + k)
    out = _col2im(cols, full, k, stride, h, wd)
    if pad:
        out = out[:, :, pad:-pad, pad:-pad]
    out = out + b[None, :, None, None]
    return np.ascontiguousarray(out), (x, w, stride, pad)


def deconv_backward(dout, cache):
    x, w, stride, pad = cache
    k = w.shape[2]
    dfull = np.pad(dout, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else dout
    cols = _windows(dfull, k, stride)  # (N, Co, H, W, k, k)
    dx = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    dw = np.tensordot(x, cols, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(dx), dw, db


def batchnorm_forward(x, gamma, beta, bn, train, momentum=0.1, eps=1e-5):
    """Spatial batch norm.

    ``bn`` is a dict holding ``mean`` and ``var`` running statistics; in
    training mode they are updated in place.  Inference mode is a fixed
    affine map.
    """
    if train:
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        if bn is not None:
            n = x.shape[0] * x.shape[2] * x.shape[3]
            unbiased = var * n / max(n - 1, 1)
            bn["mean"] *= 1.0 - momentum
            bn["mean"] += momentum * mu
            bn["var"] *= 1.0 - momentum
            bn["var"] += momentum * unbiased
    else:
        mu, var = bn["mean"], bn["var"]
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv, gamma, train)


def batchnorm_backward(dout, cache):
    xhat, inv, gamma, train = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if not train:
        return dxhat * inv[None, :, None, None], dgamma, dbeta
    m = dout.shape[0] * dout.shape[2] * dout.shape[3]
    mean_dxhat = dxhat.sum(axis=(0, 2, 3)) / m
    mean_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3)) / m
    dx = inv[None, :, None, None] * (
        dxhat - mean_dxhat[None, :, None, None] - xhat * mean_dxhat_xhat[None, :, None, None]
    )
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, mask):
    return dout * mask


def maxpool_forward(x):
    """2x2 max pooling with stride 2; ties go to the first element in row-major order."""
    n, c, h, w = x.shape
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, idx)


def maxpool_backward(dout, cache):
    shape, idx = cache
    n, c, h, w = shape
    dblocks = np.zeros((n, c, h // 2, w // 2, 4))
    np.put_along_axis(dblocks, idx[..., None], dout[..., None], axis=-1)
    dx = dblocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(shape)
    return dx


def sigmoid_forward(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(dout, out):
    return dout * out * (1.0 - out)


def concat_forward(xs):
    sizes = [x.shape[1] for x in xs]
    return np.concatenate(xs, axis=1), sizes


def concat_backward(dout, sizes):
    return np.split(dout, np.cumsum(sizes)[:-1], axis=1)


def mse_loss(pred, target):
    """Mean squared error over every element and its gradient w.r.t. ``pred``."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size
