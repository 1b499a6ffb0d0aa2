"""Three-branch scoring network: batched forward, manual reverse-mode
gradients for the fixed topology, and ADAM.

Rows are mention/entity pair inputs. Each branch is an affine stack with
ReLU and inverted dropout; branch outputs concatenate into a final stack
whose last layer is affine + Tanh, so scores live in (-1, 1). Gradients are
exact subgradients: 0 at the hinge kink and ReLU kink, first-argmax for the
max over negatives.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError


@dataclass
class Affine:
    w: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)


@dataclass(frozen=True)
class BranchMask:
    use_name: bool = True
    use_context: bool = True
    use_type: bool = True

    def __post_init__(self):
        if not (self.use_name or self.use_context or self.use_type):
            raise ConfigError("at least one branch must be enabled")

    @staticmethod
    def parse(spec: str) -> "BranchMask":
        parts = {p.strip() for p in spec.split(",") if p.strip()}
        known = {"name", "context", "type"}
        unknown = parts - known
        if unknown:
            raise ConfigError(f"unknown mask branches: {sorted(unknown)}")
        return BranchMask("name" in parts, "context" in parts, "type" in parts)

    def as_str(self) -> str:
        parts = [n for n, on in (("name", self.use_name),
                                 ("context", self.use_context),
                                 ("type", self.use_type)) if on]
        return ",".join(parts)


class RankerParams:
    """All weights of the scorer, addressable as named tensors."""

    def __init__(self, name_layers: list[Affine], context_layers: list[Affine],
                 type_layers: list[Affine], final_layers: list[Affine],
                 matcher: Affine):
        self.name_layers = name_layers
        self.context_layers = context_layers
        self.type_layers = type_layers
        self.final_layers = final_layers
        self.matcher = matcher
        self._check_chain()

    def _check_chain(self):
        for seg_name, seg in self.segments().items():
            for i in range(1, len(seg)):
                if seg[i].w.shape[0] != seg[i - 1].w.shape[1]:
                    raise NumericError(f"{seg_name} layer {i} input dim mismatch")
        branch_out = sum(seg[-1].w.shape[1] for seg in
                         (self.name_layers, self.context_layers, self.type_layers))
        if self.final_layers[0].w.shape[0] != branch_out:
            raise NumericError("final stack input dim does not match branch outputs")
        if self.final_layers[-1].w.shape[1] != 1:
            raise NumericError("final stack must end in a scalar")
        if self.matcher.w.shape != (self.name_layers[-1].w.shape[1], 1):
            raise NumericError("matcher head shape does not match name branch output")

    def segments(self) -> dict[str, list[Affine]]:
        return {"name": self.name_layers, "context": self.context_layers,
                "type": self.type_layers, "final": self.final_layers,
                "matcher": [self.matcher]}

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for seg_name, seg in self.segments().items():
            for i, layer in enumerate(seg):
                out[f"{seg_name}.{i}.w"] = layer.w
                out[f"{seg_name}.{i}.b"] = layer.b
        return out

    def set_tensor(self, name: str, value: np.ndarray) -> None:
        seg_name, idx, kind = name.split(".")
        layer = self.segments()[seg_name][int(idx)]
        if kind == "w":
            layer.w = value
        else:
            layer.b = value

    def clone(self) -> "RankerParams":
        def cp(seg):
            return [Affine(l.w.copy(), l.b.copy()) for l in seg]

        return RankerParams(cp(self.name_layers), cp(self.context_layers),
                            cp(self.type_layers), cp(self.final_layers),
                            Affine(self.matcher.w.copy(), self.matcher.b.copy()))

    def input_dims(self) -> tuple[int, int, int]:
        return (self.name_layers[0].w.shape[0],
                self.context_layers[0].w.shape[0],
                self.type_layers[0].w.shape[0])

    def branch_out_dims(self) -> tuple[int, int, int]:
        return (self.name_layers[-1].w.shape[1],
                self.context_layers[-1].w.shape[1],
                self.type_layers[-1].w.shape[1])


def init_segment(rng: np.random.Generator, fan_in: int, sizes: tuple[int, ...]) -> list[Affine]:
    layers = []
    for out in sizes:
        scale = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-scale, scale, size=(fan_in, out))
        layers.append(Affine(w, np.zeros(out)))
        fan_in = out
    return layers


# ---------------------------------------------------------------------------
# Forward / backward over batches of pair rows

def _layer_forward(x, layer, relu, dropout_p, rng, cache):
    pre = x @ layer.w + layer.b
    out = np.maximum(pre, 0.0) if relu else pre
    drop = None
    if relu and dropout_p > 0.0 and rng is not None:
        drop = (rng.random(out.shape) >= dropout_p) / (1.0 - dropout_p)
        out = out * drop
    if cache is not None:
        cache.append((x, pre, drop))
    return out


def _layer_backward(dout, layer, relu, cache_entry, grads, name):
    x, pre, drop = cache_entry
    if drop is not None:
        dout = dout * drop
    dpre = dout * (pre > 0.0) if relu else dout
    grads[f"{name}.w"] += x.T @ dpre
    grads[f"{name}.b"] += dpre.sum(axis=0)
    return dpre @ layer.w.T


def _segment_forward(x, layers, last_relu, dropout_p, rng, cache):
    for i, layer in enumerate(layers):
        relu = last_relu or i < len(layers) - 1
        x = _layer_forward(x, layer, relu, dropout_p, rng, cache)
    return x


def _segment_backward(dout, layers, last_relu, cache, grads, seg_name):
    for i in reversed(range(len(layers))):
        relu = last_relu or i < len(layers) - 1
        dout = _layer_backward(dout, layers[i], relu, cache[i], grads, f"{seg_name}.{i}")
    return dout


def zero_grads(params: RankerParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


def forward_batch(params: RankerParams, mask: BranchMask,
                  x_name: np.ndarray, x_ctx: np.ndarray, x_type: np.ndarray,
                  dropout_p: float = 0.0, rng: np.random.Generator | None = None,
                  want_cache: bool = False):
    """Scores for a batch of pair rows. Masked branches contribute zeros and
    are never evaluated, so their gradients vanish identically."""
    n_rows = x_name.shape[0] if mask.use_name else (
        x_ctx.shape[0] if mask.use_context else x_type.shape[0])
    d_name, d_ctx, d_type = params.branch_out_dims()
    cache = {"name": [], "context": [], "type": [], "final": []} if want_cache else None

    def branch(seg, x, on, out_dim, key):
        if not on:
            return np.zeros((n_rows, out_dim))
        return _segment_forward(np.asarray(x, dtype=np.float64), seg, True,
                                dropout_p, rng, cache[key] if cache else None)

    r_name = branch(params.name_layers, x_name, mask.use_name, d_name, "name")
    r_ctx = branch(params.context_layers, x_ctx, mask.use_context, d_ctx, "context")
    r_type = branch(params.type_layers, x_type, mask.use_type, d_type, "type")
    z = np.hstack([r_name, r_ctx, r_type])
    out = _segment_forward(z, params.final_layers, False, dropout_p, rng,
                           cache["final"] if cache else None)
    scores = np.tanh(out[:, 0])
    if want_cache:
        cache["scores"] = scores
        return scores, cache
    return scores


def backward_batch(params: RankerParams, mask: BranchMask, cache,
                   dscores: np.ndarray) -> dict[str, np.ndarray]:
    grads = zero_grads(params)
    dout = (dscores * (1.0 - cache["scores"] ** 2))[:, None]
    dz = _segment_backward(dout, params.final_layers, False, cache["final"], grads, "final")
    d_name, d_ctx, d_type = params.branch_out_dims()
    pieces = np.split(dz, [d_name, d_name + d_ctx], axis=1)
    for key, seg, on, dpiece in (
        ("name", params.name_layers, mask.use_name, pieces[0]),
        ("context", params.context_layers, mask.use_context, pieces[1]),
        ("type", params.type_layers, mask.use_type, pieces[2]),
    ):
        if on:
            _segment_backward(dpiece, seg, True, cache[key], grads, key)
    return grads


def matcher_forward(params: RankerParams, x_name: np.ndarray,
                    dropout_p: float = 0.0, rng: np.random.Generator | None = None,
                    want_cache: bool = False):
    """Name branch + matching head, used only by the auxiliary objective."""
    cache = {"name": [], "matcher": []} if want_cache else None
    r = _segment_forward(np.asarray(x_name, dtype=np.float64), params.name_layers,
                         True, dropout_p, rng, cache["name"] if cache else None)
    out = _segment_forward(r, [params.matcher], False, dropout_p, rng,
                           cache["matcher"] if cache else None)
    scores = np.tanh(out[:, 0])
    if want_cache:
        cache["scores"] = scores
        return scores, cache
    return scores


def matcher_backward(params: RankerParams, cache, dscores: np.ndarray) -> dict[str, np.ndarray]:
    grads = zero_grads(params)
    dout = (dscores * (1.0 - cache["scores"] ** 2))[:, None]
    dr = _segment_backward(dout, [params.matcher], False, cache["matcher"], grads, "matcher")
    _segment_backward(dr, params.name_layers, True, cache["name"], grads, "name")
    return grads


# ---------------------------------------------------------------------------
# ADAM

class Adam:
    """Bias-corrected ADAM over a subset of named tensors."""

    def __init__(self, names, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.names = tuple(names)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name in self.names:
            g = grads[name]
            t = tensors[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(t)
                self.v[name] = np.zeros_like(t)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1.0 - self.beta2 ** self.t)
            t -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
