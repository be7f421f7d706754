"""Dual-encoder / multi-decoder network mapping T1+T2 slices to property maps.

Layout for input size ``n = 2**m`` and encoder depth ``L`` (``n = 256``,
``L = 6`` is the reference configuration):

* two encoders ``enc{u}.{i}`` (i = 1..L): 3x3 conv (stride 2 at i = 1),
  BN, ReLU, 2x2 max-pool; conv output is ``2**(i+1)`` channels at
  ``n / 2**i``.
* ``dec{u}``: 4x4 stride-4 deconvolution to ``2**L`` channels, BN, ReLU.
* hub: concatenation of both encoder bottoms.
* V decoder branches ``br{v}``; for i = L-1..1 each runs
  ``cnv{i}`` (3x3 conv, BN, ReLU), ``dec{i}`` (4x4 stride-2 deconv, BN,
  ReLU) and ``map{i}`` (3x3 conv, sigmoid).  Below the top level the input
  of ``cnv{i}`` is the concatenation of ``dec{i+1}``, the pre-pool features
  of both encoders at level i, and ``proj{i}``, a 1x1 conv of ``map{i+1}``.
  ``map1`` has a single channel and is the branch output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NumericError
from . import layers as L

OUTPUT_NAMES = ("sigma", "epsilon", "rho")


@dataclass(frozen=True)
class Architecture:
    input_size: int = 256
    depth: int = 6
    n_outputs: int = 3

    def __post_init__(self):
        n = self.input_size
        if n < 16 or n & (n - 1):
            raise DomainError(f"input size must be a power of two >= 16, got {n}")
        if not 3 <= self.depth <= int(np.log2(n)) - 1:
            raise DomainError(f"depth {self.depth} incompatible with input size {n}")
        if self.n_outputs < 1:
            raise DomainError("need at least one output branch")

    @classmethod
    def for_size(cls, input_size: int, n_outputs: int = 3) -> "Architecture":
        m = int(np.log2(input_size))
        return cls(input_size, max(3, m - 2), n_outputs)


@dataclass
class NetworkParams:
    arch: Architecture
    weights: dict = field(default_factory=dict)
    bn_stats: dict = field(default_factory=dict)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.arch,
            {k: v.copy() for k, v in self.weights.items()},
            {k: {s: a.copy() for s, a in v.items()} for k, v in self.bn_stats.items()},
        )

    def manifest(self) -> list[tuple[str, tuple]]:
        items = [(k, v.shape) for k, v in self.weights.items()]
        for k, v in self.bn_stats.items():
            items += [(f"{k}.running_{s}", a.shape) for s, a in v.items()]
        return items

    def allclose(self, other: "NetworkParams", **kw) -> bool:
        return all(np.allclose(self.weights[k], other.weights[k], **kw) for k in self.weights)


def _layer_specs(arch: Architecture):
    """Yield ``(name, kind, c_in, c_out, k)`` for every parametrised layer."""
    depth = arch.depth
    for u in (1, 2):
        c_in = 1
        for i in range(1, depth + 1):
            c = 2 ** (i + 1)
            yield f"enc{u}.{i}", "conv", c_in, c, 3
            yield f"enc{u}.{i}.bn", "bn", c, c, 0
            c_in = c
        yield f"dec{u}", "deconv", 2 ** (depth + 1), 2 ** depth, 4
        yield f"dec{u}.bn", "bn", 2 ** depth, 2 ** depth, 0
    for v in range(1, arch.n_outputs + 1):
        for i in range(depth - 1, 0, -1):
            if i == depth - 1:
                c_in = 2 ** (depth + 1)
            else:
                yield f"br{v}.proj{i}", "conv", 2 ** (i + 1), 2 ** (i + 2), 1
                c_in = 3 * 2 ** (i + 2)
            yield f"br{v}.cnv{i}", "conv", c_in, 2 ** (i + 2), 3
            yield f"br{v}.cnv{i}.bn", "bn", 2 ** (i + 2), 2 ** (i + 2), 0
            yield f"br{v}.dec{i}", "deconv", 2 ** (i + 2), 2 ** (i + 1), 4
            yield f"br{v}.dec{i}.bn", "bn", 2 ** (i + 1), 2 ** (i + 1), 0
            yield f"br{v}.map{i}", "conv", 2 ** (i + 1), 1 if i == 1 else 2 ** i, 3


def build_network(arch: Architecture | None = None, seed: int = 0) -> NetworkParams:
    """Fan-in scaled uniform initialisation, deterministic in ``seed``."""
    arch = arch or Architecture()
    rng = np.random.default_rng(seed)
    weights, stats = {}, {}
    for name, kind, c_in, c_out, k in _layer_specs(arch):
        if kind == "bn":
            weights[f"{name}.gamma"] = np.ones(c_out)
            weights[f"{name}.beta"] = np.zeros(c_out)
            stats[name] = {"mean": np.zeros(c_out), "var": np.ones(c_out)}
            continue
        fan_in = c_in * k * k
        bound = np.sqrt(6.0 / fan_in)
        shape = (c_out, c_in, k, k) if kind == "conv" else (c_in, c_out, k, k)
        weights[f"{name}.w"] = rng.uniform(-bound, bound, size=shape)
        weights[f"{name}.b"] = rng.uniform(-1.0, 1.0, size=c_out) / np.sqrt(fan_in)
    return NetworkParams(arch, weights, stats)


class _Tape:
    """Forward-pass bookkeeping: caches for backward and output shapes for audits."""

    def __init__(self, params: NetworkParams, train: bool, check: bool):
        self.p = params.weights
        self.stats = params.bn_stats
        self.train = train
        self.check = check
        self.caches = {}
        self.shapes = {}

    def _record(self, name, out):
        self.shapes[name] = out.shape[1:]
        if self.check and not np.all(np.isfinite(out)):
            raise NumericError(f"non-finite activation in layer {name}")
        return out

    def conv(self, name, x, stride=1, pad=None):
        w = self.p[f"{name}.w"]
        pad = w.shape[2] // 2 if pad is None else pad
        out, self.caches[name] = L.conv_forward(x, w, self.p[f"{name}.b"], stride, pad)
        return self._record(name, out)

    def deconv(self, name, x, stride, pad):
        out, self.caches[name] = L.deconv_forward(x, self.p[f"{name}.w"], self.p[f"{name}.b"], stride, pad)
        return self._record(name, out)

    def bn_relu(self, name, x):
        bn = f"{name}.bn"
        y, c_bn = L.batchnorm_forward(x, self.p[f"{bn}.gamma"], self.p[f"{bn}.beta"], self.stats[bn], self.train)
        out, c_relu = L.relu_forward(y)
        self.caches[bn] = (c_bn, c_relu)
        return self._record(bn, out)

    def pool(self, name, x):
        out, self.caches[name] = L.maxpool_forward(x)
        return self._record(name, out)

    def sigmoid(self, name, x):
        out, self.caches[name] = L.sigmoid_forward(x)
        return self._record(name, out)

    def concat(self, name, xs):
        out, self.caches[name] = L.concat_forward(xs)
        return self._record(name, out)


def _run_forward(params: NetworkParams, x: np.ndarray, train: bool, check: bool = True):
    arch = params.arch
    depth = arch.depth
    t = _Tape(params, train, check)
    feats = {}
    bottoms = []
    for u in (1, 2):
        h = x[:, u - 1:u]
        for i in range(1, depth + 1):
            h = t.conv(f"enc{u}.{i}", h, stride=2 if i == 1 else 1)
            h = t.bn_relu(f"enc{u}.{i}", h)
            feats[u, i] = h
            h = t.pool(f"enc{u}.{i}.pool", h)
        h = t.deconv(f"dec{u}", h, stride=4, pad=0)
        bottoms.append(t.bn_relu(f"dec{u}", h))
    hub = t.concat("hub", bottoms)
    t.shapes["hub"] = (2,) + bottoms[0].shape[1:]

    outputs = []
    for v in range(1, arch.n_outputs + 1):
        h = hub
        prev_dec = prev_map = None
        for i in range(depth - 1, 0, -1):
            if i < depth - 1:
                proj = t.conv(f"br{v}.proj{i}", prev_map)
                h = t.concat(f"br{v}.concat{i}", [prev_dec, feats[1, i], feats[2, i], proj])
            h = t.bn_relu(f"br{v}.cnv{i}", t.conv(f"br{v}.cnv{i}", h))
            d = t.bn_relu(f"br{v}.dec{i}", t.deconv(f"br{v}.dec{i}", h, stride=2, pad=1))
            m = t.sigmoid(f"br{v}.map{i}.sigmoid", t.conv(f"br{v}.map{i}", d))
            if i == 1:
                t.shapes[f"br{v}.map1.sigmoid"] = m.shape[2:]
            prev_dec, prev_map = d, m
        outputs.append(m)
    return np.concatenate(outputs, axis=1), t


def _as_batch(t1, t2, n):
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    if t1.shape != t2.shape:
        raise DomainError(f"T1/T2 shape mismatch: {t1.shape} vs {t2.shape}")
    if t1.ndim == 2:
        t1, t2 = t1[None], t2[None]
    if t1.ndim != 3 or t1.shape[1:] != (n, n):
        raise DomainError(f"expected slices of shape ({n}, {n}), got {t1.shape}")
    return np.stack([t1, t2], axis=1)


def forward(params: NetworkParams, t1_slice, t2_slice, train: bool = False) -> np.ndarray:
    """Inference-mode forward pass.

    Accepts single ``(n, n)`` slices or stacks ``(B, n, n)``; returns
    ``(3, n, n)`` or ``(B, 3, n, n)`` sigmoid outputs (sigma, eps, rho).
    """
    single = np.ndim(t1_slice) == 2
    x = _as_batch(t1_slice, t2_slice, params.arch.input_size)
    out, _ = _run_forward(params, x, train=train)
    return out[0] if single else out


def _backward(params: NetworkParams, tape: _Tape, dout: np.ndarray) -> dict:
    arch = params.arch
    depth = arch.depth
    c = tape.caches
    grads = {k: np.zeros_like(v) for k, v in params.weights.items()}

    def conv_b(name, g, fn=L.conv_backward):
        dx, dw, db = fn(g, c[name])
        grads[f"{name}.w"] += dw
        grads[f"{name}.b"] += db
        return dx

    def bn_relu_b(name, g):
        c_bn, c_relu = c[f"{name}.bn"]
        g = L.relu_backward(g, c_relu)
        dx, dgamma, dbeta = L.batchnorm_backward(g, c_bn)
        grads[f"{name}.bn.gamma"] += dgamma
        grads[f"{name}.bn.beta"] += dbeta
        return dx

    dfeats = {(u, i): 0.0 for u in (1, 2) for i in range(1, depth + 1)}
    dhub = 0.0
    for v in range(arch.n_outputs, 0, -1):
        dmap = dout[:, v - 1:v]
        ddec = None
        for i in range(1, depth):
            g = L.sigmoid_backward(dmap, c[f"br{v}.map{i}.sigmoid"])
            g = conv_b(f"br{v}.map{i}", g)
            if ddec is not None:
                g = g + ddec
            g = bn_relu_b(f"br{v}.dec{i}", g)
            g = conv_b(f"br{v}.dec{i}", g, L.deconv_backward)
            g = bn_relu_b(f"br{v}.cnv{i}", g)
            g = conv_b(f"br{v}.cnv{i}", g)
            if i < depth - 1:
                g_dec, g_f1, g_f2, g_proj = L.concat_backward(g, c[f"br{v}.concat{i}"])
                dfeats[1, i] = dfeats[1, i] + g_f1
                dfeats[2, i] = dfeats[2, i] + g_f2
                dmap = conv_b(f"br{v}.proj{i}", g_proj)
                ddec = g_dec
            else:
                dhub = dhub + g
    dbottoms = L.concat_backward(dhub, c["hub"])
    for u in (2, 1):
        g = bn_relu_b(f"dec{u}", dbottoms[u - 1])
        g = conv_b(f"dec{u}", g, L.deconv_backward)
        for i in range(depth, 0, -1):
            g = L.maxpool_backward(g, c[f"enc{u}.{i}.pool"])
            g = g + dfeats[u, i]
            g = bn_relu_b(f"enc{u}.{i}", g)
            g = conv_b(f"enc{u}.{i}", g)
    return grads


def loss_and_gradients(params: NetworkParams, inputs: np.ndarray, targets: np.ndarray, train: bool = True):
    """MSE over batch, pixels and outputs, with reverse-mode gradients.

    ``inputs`` is ``(B, 2, n, n)`` (T1, T2) and ``targets`` ``(B, V, n, n)``.
    In training mode batch statistics are used and running BN statistics are
    updated as a side effect.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise DomainError("empty batch")
    pred, tape = _run_forward(params, inputs, train=train)
    if pred.shape != targets.shape:
        raise DomainError(f"target shape {targets.shape} does not match prediction {pred.shape}")
    loss, dpred = L.mse_loss(pred, targets)
    grads = _backward(params, tape, dpred)
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {k}")
    return loss, grads


def table_shapes(arch: Architecture) -> dict:
    """Expected per-module output shapes (channels, h, w) from the size algebra."""
    n = arch.input_size
    depth = arch.depth
    exp = {}
    for u in (1, 2):
        for i in range(1, depth + 1):
            exp[f"enc{u}.{i}"] = (2 ** (i + 1), n >> i, n >> i)
            exp[f"enc{u}.{i}.bn"] = (2 ** (i + 1), n >> i, n >> i)
            exp[f"enc{u}.{i}.pool"] = (2 ** (i + 1), n >> (i + 1), n >> (i + 1))
        exp[f"dec{u}"] = (2 ** depth, n >> (depth - 1), n >> (depth - 1))
        exp[f"dec{u}.bn"] = exp[f"dec{u}"]
    exp["hub"] = (2, 2 ** depth, n >> (depth - 1), n >> (depth - 1))
    for v in range(1, arch.n_outputs + 1):
        for i in range(depth - 1, 0, -1):
            exp[f"br{v}.cnv{i}"] = (2 ** (i + 2), n >> i, n >> i)
            exp[f"br{v}.cnv{i}.bn"] = exp[f"br{v}.cnv{i}"]
            exp[f"br{v}.dec{i}"] = (2 ** (i + 1), n >> (i - 1), n >> (i - 1))
            exp[f"br{v}.dec{i}.bn"] = exp[f"br{v}.dec{i}"]
            c_map = 1 if i == 1 else 2 ** i
            exp[f"br{v}.map{i}"] = (c_map, n >> (i - 1), n >> (i - 1))
            exp[f"br{v}.map{i}.sigmoid"] = (n, n) if i == 1 else exp[f"br{v}.map{i}"]
            if i < depth - 1:
                exp[f"br{v}.proj{i}"] = (2 ** (i + 2), n >> i, n >> i)
                exp[f"br{v}.concat{i}"] = (3 * 2 ** (i + 2), n >> i, n >> i)
    return exp


def audit_shapes(params: NetworkParams) -> tuple[dict, dict]:
    """Run a zero slice through the network; return (observed, expected) shapes."""
    n = params.arch.input_size
    x = np.zeros((1, 2, n, n))
    _, tape = _run_forward(params, x, train=False, check=False)
    return dict(tape.shapes), table_shapes(params.arch)
