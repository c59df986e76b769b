"""Small neural-net kit: MLPs, a GRU cell, and Adam, all explicit numpy.

Parameters live in flat dicts of arrays so they serialize trivially and
updates stay a pure function of (params, grads). Backward passes are written
out by hand; the unit suite checks every loss gradient against central finite
differences.
"""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng, fan_in, fan_out, scale=1.0, dtype=np.float64):
    lim = scale * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out)).astype(dtype)


class MLP:
    """Fully connected trunk with tanh hidden activations and a linear head."""

    def __init__(self, sizes, dtype=np.float32, final_scale=1.0):
        self.sizes = tuple(int(s) for s in sizes)
        self.dtype = np.dtype(dtype)
        self.final_scale = final_scale
        self.n_layers = len(self.sizes) - 1

    def init(self, rng) -> dict:
        params = {}
        for i in range(self.n_layers):
            scale = self.final_scale if i == self.n_layers - 1 else 1.0
            params[f"w{i}"] = glorot_uniform(rng, self.sizes[i], self.sizes[i + 1],
                                             scale, self.dtype)
            params[f"b{i}"] = np.zeros(self.sizes[i + 1], dtype=self.dtype)
        return params

    def forward(self, params, x):
        x = np.ascontiguousarray(x, dtype=self.dtype)
        cache = [x]
        for i in range(self.n_layers):
            x = x @ params[f"w{i}"] + params[f"b{i}"]
            if i < self.n_layers - 1:
                x = np.tanh(x)
            cache.append(x)
        return x, cache

    def backward(self, params, cache, dy):
        """Returns (grads, dx) for upstream gradient dy on the output."""
        grads = {}
        dy = np.ascontiguousarray(dy, dtype=self.dtype)
        for i in range(self.n_layers - 1, -1, -1):
            a_in = cache[i]
            if i < self.n_layers - 1:
                dy = dy * (1.0 - cache[i + 1] ** 2)  # through tanh
            grads[f"w{i}"] = a_in.T @ dy
            grads[f"b{i}"] = dy.sum(axis=0)
            if i > 0:
                dy = dy @ params[f"w{i}"].T
        dx = dy @ params["w0"].T
        return grads, dx


class GRU:
    """Single-layer gated recurrent unit (gate order r, z, n)."""

    def __init__(self, input_dim, hidden_dim, dtype=np.float32):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.dtype = np.dtype(dtype)

    def init(self, rng) -> dict:
        d, h = self.input_dim, self.hidden_dim
        return {
            "wx": glorot_uniform(rng, d, 3 * h, dtype=self.dtype),
            "wh": glorot_uniform(rng, h, 3 * h, dtype=self.dtype),
            "bx": np.zeros(3 * h, dtype=self.dtype),
            "bh": np.zeros(3 * h, dtype=self.dtype),
        }

    def step(self, params, x, h):
        """One cell step on (n, input_dim) with hidden (n, hidden_dim)."""
        hd = self.hidden_dim
        gx = x.astype(self.dtype) @ params["wx"] + params["bx"]
        gh = h @ params["wh"] + params["bh"]
        r = _sigmoid(gx[:, :hd] + gh[:, :hd])
        z = _sigmoid(gx[:, hd:2 * hd] + gh[:, hd:2 * hd])
        n = np.tanh(gx[:, 2 * hd:] + r * gh[:, 2 * hd:])
        h_new = (1.0 - z) * n + z * h
        cache = (x.astype(self.dtype), h, r, z, n, gh[:, 2 * hd:])
        return h_new, cache

    def backward_step(self, params, cache, dh_new, grads):
        """Backprop one cell step; accumulates into grads, returns (dx, dh)."""
        x, h, r, z, n, ghn = cache
        hd = self.hidden_dim
        dz = dh_new * (h - n)
        dn = dh_new * (1.0 - z)
        dh = dh_new * z
        da_n = dn * (1.0 - n ** 2)
        dr = da_n * ghn
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dgx = np.concatenate([da_r, da_z, da_n], axis=1)
        dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
        grads["wx"] += x.T @ dgx
        grads["bx"] += dgx.sum(axis=0)
        grads["wh"] += h.T @ dgh
        grads["bh"] += dgh.sum(axis=0)
        dx = dgx @ params["wx"].T
        dh += dgh @ params["wh"].T
        return dx, dh

    def zero_grads(self):
        d, h = self.input_dim, self.hidden_dim
        return {
            "wx": np.zeros((d, 3 * h), dtype=self.dtype),
            "wh": np.zeros((h, 3 * h), dtype=self.dtype),
            "bx": np.zeros(3 * h, dtype=self.dtype),
            "bh": np.zeros(3 * h, dtype=self.dtype),
        }


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class Adam:
    """Per-parameter-tree Adam with optional global gradient-norm clipping."""

    def __init__(self, tree, lr, betas=(0.9, 0.999), eps=1e-8, max_grad_norm=None):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.t = 0
        self.m = _tree_map(np.zeros_like, tree)
        self.v = _tree_map(np.zeros_like, tree)

    def step(self, tree, grads):
        if self.max_grad_norm is not None:
            total = np.sqrt(sum(float((g ** 2).sum()) for g in _tree_leaves(grads)))
            if total > self.max_grad_norm:
                scale = self.max_grad_norm / (total + 1e-12)
                grads = _tree_map(lambda g: g * scale, grads)
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for key, p, g, m, v in _tree_zip(tree, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return tree


def _tree_map(fn, tree):
    if isinstance(tree, dict):
        return {k: _tree_map(fn, v) for k, v in tree.items()}
    return fn(tree)


def _tree_leaves(tree):
    if isinstance(tree, dict):
        for v in tree.values():
            yield from _tree_leaves(v)
    else:
        yield tree


def _tree_zip(*trees):
    if isinstance(trees[0], dict):
        for k in trees[0]:
            yield from _tree_zip(*(t[k] for t in trees))
    else:
        yield (None, *trees)


def tree_finite(tree) -> bool:
    return all(np.isfinite(leaf).all() for leaf in _tree_leaves(tree))


def tree_copy(tree):
    return _tree_map(np.copy, tree)


def tree_add(acc, other, scale=1.0):
    """acc += scale * other, elementwise over matching trees."""
    for _, a, b in _tree_zip(acc, other):
        a += scale * b
    return acc
