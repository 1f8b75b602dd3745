"""Minimal dense-network engine in plain numpy: affine + nonlinearity stacks
with exact reverse-mode gradients, per-row input gradients, double backprop
for the gradient penalty, Gumbel-softmax output heads, and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY = "identity"
RELU = "relu"
LEAKY_RELU = "leaky_relu"
TANH = "tanh"

LEAKY_SLOPE = 0.2

_ACTIVATIONS = (IDENTITY, RELU, LEAKY_RELU, TANH)


class NetError(ValueError):
    """Network contract violation (shapes, widths, missing cache)."""


def _act(name: str, a: np.ndarray) -> np.ndarray:
    if name == IDENTITY:
        return a
    if name == RELU:
        return np.maximum(a, 0.0)
    if name == LEAKY_RELU:
        return np.where(a > 0.0, a, LEAKY_SLOPE * a)
    if name == TANH:
        return np.tanh(a)
    raise NetError(f"unknown activation {name!r}")


def _act_deriv(name: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    if name == IDENTITY:
        return np.ones_like(a)
    if name == RELU:
        return (a > 0.0).astype(np.float64)
    if name == LEAKY_RELU:
        return np.where(a > 0.0, 1.0, LEAKY_SLOPE)
    if name == TANH:
        return 1.0 - h * h
    raise NetError(f"unknown activation {name!r}")


def _act_deriv2(name: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    # second derivative; zero a.e. for the piecewise-linear family
    if name == TANH:
        return -2.0 * h * (1.0 - h * h)
    return np.zeros_like(a)


@dataclass(frozen=True)
class NetSpec:
    """Widths and nonlinearities of an affine stack.

    `widths[i]` is the output width of layer i; `activations[i]` its
    nonlinearity. The final activation is part of the stack (use identity
    for a raw-logit output)."""

    in_dim: int
    widths: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        if self.in_dim < 1 or len(self.widths) == 0:
            raise NetError("need a positive input width and at least one layer")
        if len(self.widths) != len(self.activations):
            raise NetError("one activation per layer required")
        if any(w < 1 for w in self.widths):
            raise NetError("layer widths must be positive")
        for name in self.activations:
            if name not in _ACTIVATIONS:
                raise NetError(f"unknown activation {name!r}")

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = []
        fan_in = self.in_dim
        for w in self.widths:
            dims.append((fan_in, w))
            fan_in = w
        return dims


@dataclass
class Grads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)

    def scale(self, c: float) -> "Grads":
        return Grads([c * w for w in self.weights], [c * b for b in self.biases])

    def add(self, other: "Grads") -> "Grads":
        return Grads(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )


class Network:
    """Affine stack with cached forward pass and exact reverse mode.

    Weight matrices are (fan_in, fan_out); rows of the batch are samples.
    Initialization is uniform on +-1/sqrt(fan_in) for weights and biases.
    """

    def __init__(self, spec: NetSpec, rng: np.random.Generator):
        self.spec = spec
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in spec.layer_dims():
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)

    def set_parameters(self, arrays: list[np.ndarray]) -> None:
        n = self.n_layers
        if len(arrays) != 2 * n:
            raise NetError("parameter count mismatch")
        for i in range(n):
            if arrays[i].shape != self.weights[i].shape:
                raise NetError("weight shape mismatch")
            if arrays[n + i].shape != self.biases[i].shape:
                raise NetError("bias shape mismatch")
        self.weights = [np.array(a, dtype=np.float64) for a in arrays[:n]]
        self.biases = [np.array(a, dtype=np.float64) for a in arrays[n:]]

    def zero_grads(self) -> Grads:
        return Grads(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )

    def forward(self, batch: np.ndarray) -> tuple[np.ndarray, dict]:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.spec.in_dim:
            raise NetError(
                f"batch width {batch.shape[-1] if batch.ndim == 2 else '?'} != input width {self.spec.in_dim}"
            )
        if not np.all(np.isfinite(batch)):
            raise NetError("non-finite input batch")
        pre, post = [], []
        h = batch
        for w, b, name in zip(self.weights, self.biases, self.spec.activations):
            a = h @ w + b
            h = _act(name, a)
            pre.append(a)
            post.append(h)
        cache = {"x": batch, "pre": pre, "post": post}
        return h, cache

    def backward(self, cache: dict, dout: np.ndarray) -> tuple[Grads, np.ndarray]:
        """Reverse-mode sweep; returns parameter grads and the input grad."""
        if not cache or "pre" not in cache:
            raise NetError("backward needs the cache from forward")
        dout = np.asarray(dout, dtype=np.float64)
        grads = self.zero_grads()
        delta = None
        upstream = dout
        for l in range(self.n_layers - 1, -1, -1):
            name = self.spec.activations[l]
            delta = upstream * _act_deriv(name, cache["pre"][l], cache["post"][l])
            h_prev = cache["x"] if l == 0 else cache["post"][l - 1]
            grads.weights[l] = h_prev.T @ delta
            grads.biases[l] = delta.sum(axis=0)
            upstream = delta @ self.weights[l].T
        return grads, upstream

    def input_gradient(self, cache: dict) -> np.ndarray:
        """Per-row gradient of the scalar output w.r.t. the input row."""
        if self.spec.out_dim != 1:
            raise NetError("input_gradient requires a scalar output")
        if not cache or "pre" not in cache:
            raise NetError("input_gradient needs the cache from forward")
        n = cache["x"].shape[0]
        return self._delta_sweep(np.ones((n, 1)), cache)[0]

    def _delta_sweep(self, dout, cache):
        """The delta recursion of reverse mode, keeping every delta_l.

        Returns (input gradient, deltas, upstream m_l per layer) where
        m_l is the value multiplied by sigma'(a_l) to form delta_l.
        """
        deltas = [None] * self.n_layers
        ms = [None] * self.n_layers
        upstream = dout
        for l in range(self.n_layers - 1, -1, -1):
            name = self.spec.activations[l]
            ms[l] = upstream
            deltas[l] = upstream * _act_deriv(name, cache["pre"][l], cache["post"][l])
            upstream = deltas[l] @ self.weights[l].T
        return upstream, deltas, ms


def gradient_penalty(
    net: Network,
    real_batch: np.ndarray,
    fake_batch: np.ndarray,
    rng: np.random.Generator,
    lam: float = 10.0,
    eps: np.ndarray | None = None,
) -> tuple[float, Grads]:
    """WGAN gradient penalty and its exact parameter gradients.

    x_hat interpolates real and fake rows with per-row Uniform(0,1) weights;
    the penalty is lam * mean((||grad_x D(x_hat)||_2 - 1)^2). Parameter
    gradients differentiate through the input-gradient computation: the
    adjoint of the per-row gradient g is pushed back through the delta
    recursion (forward pass adjoints pick up a second-derivative term).
    """
    real_batch = np.asarray(real_batch, dtype=np.float64)
    fake_batch = np.asarray(fake_batch, dtype=np.float64)
    if real_batch.shape != fake_batch.shape:
        raise NetError("real/fake batch shape mismatch")
    if lam < 0:
        raise NetError("lambda must be non-negative")
    n = real_batch.shape[0]
    if eps is None:
        eps = rng.uniform(size=(n, 1))
    x_hat = eps * real_batch + (1.0 - eps) * fake_batch

    _, cache = net.forward(x_hat)
    g, deltas, ms = net._delta_sweep(np.ones((n, 1)), cache)

    norms = np.sqrt((g * g).sum(axis=1))
    penalty = lam * float(((norms - 1.0) ** 2).mean())

    # adjoint of g: u_i = (2 lam / n) (||g_i|| - 1) g_i / ||g_i||, 0-guarded
    safe = np.where(norms > 0.0, norms, 1.0)
    coef = np.where(norms > 0.0, 2.0 * lam / n * (norms - 1.0) / safe, 0.0)
    u = coef[:, None] * g

    grads = net.zero_grads()
    L = net.n_layers

    # sweep the delta recursion in its own reverse order (delta_0 was
    # produced last): g = delta_0 @ W_0^T, delta_l = s'(a_l) * m_l,
    # m_l = delta_{l+1} @ W_{l+1}^T
    delta_bar = u @ net.weights[0]
    grads.weights[0] += u.T @ deltas[0]
    a_bar_direct = [None] * L
    for l in range(L):
        name = net.spec.activations[l]
        a = cache["pre"][l]
        h = cache["post"][l]
        m_bar = _act_deriv(name, a, h) * delta_bar
        a_bar_direct[l] = _act_deriv2(name, a, h) * ms[l] * delta_bar
        if l + 1 < L:
            grads.weights[l + 1] += m_bar.T @ deltas[l + 1]
            delta_bar = m_bar @ net.weights[l + 1]

    # adjoints of the forward pass: a_bar flows down through h_{l} -> a_{l+1}
    a_bar = a_bar_direct[L - 1]
    for l in range(L - 1, -1, -1):
        h_prev = cache["x"] if l == 0 else cache["post"][l - 1]
        grads.weights[l] += h_prev.T @ a_bar
        grads.biases[l] += a_bar.sum(axis=0)
        if l > 0:
            name = net.spec.activations[l - 1]
            h_bar = a_bar @ net.weights[l].T
            a_bar = a_bar_direct[l - 1] + _act_deriv(
                name, cache["pre"][l - 1], cache["post"][l - 1]
            ) * h_bar
    return penalty, grads


# ---------------------------------------------------------------------------
# Gumbel-softmax

def gumbel_softmax(
    logits: np.ndarray,
    tau: float,
    rng: np.random.Generator | None,
    hard: bool = False,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Rows of softmax((logits + G)/tau) with standard Gumbel noise G.

    `noise` overrides the sampled Gumbel draws (zeros give plain softmax).
    hard=True snaps each row to one-hot on the argmax; callers that need the
    straight-through gradient keep the soft rows themselves.
    """
    if tau <= 0:
        raise NetError("gumbel temperature must be positive")
    logits = np.asarray(logits, dtype=np.float64)
    if noise is None:
        noise = rng.gumbel(size=logits.shape)
    z = (logits + noise) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    soft = e / e.sum(axis=-1, keepdims=True)
    if not hard:
        return soft
    hard_rows = np.zeros_like(soft)
    idx = np.argmax(soft, axis=-1)
    np.put_along_axis(hard_rows, idx[..., None], 1.0, axis=-1)
    return hard_rows


def gumbel_softmax_backward(soft: np.ndarray, dout: np.ndarray, tau: float) -> np.ndarray:
    """Gradient w.r.t. logits given the soft output rows."""
    inner = (dout * soft).sum(axis=-1, keepdims=True)
    return (dout * soft - soft * inner) / tau


# ---------------------------------------------------------------------------
# Output heads

class OutputHeads:
    """Maps raw generator output to encoded space: tanh on alpha slots,
    Gumbel-softmax on every one-hot span. Spans must tile the vector."""

    def __init__(self, tanh_slots: list[int], onehot_spans: list[tuple[int, int]], width: int, tau: float = 0.2):
        covered = np.zeros(width, dtype=bool)
        for s in tanh_slots:
            covered[s] = True
        for start, w in onehot_spans:
            if covered[start : start + w].any():
                raise NetError("output head spans overlap")
            covered[start : start + w] = True
        if not covered.all():
            raise NetError("output heads do not cover every encoded slot")
        self.tanh_slots = list(tanh_slots)
        self.onehot_spans = list(onehot_spans)
        self.width = width
        self.tau = tau

    def apply(
        self,
        raw: np.ndarray,
        rng: np.random.Generator | None,
        hard: bool = False,
        noise: np.ndarray | None = None,
    ) -> tuple[np.ndarray, dict]:
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2 or raw.shape[1] != self.width:
            raise NetError("raw output width mismatch")
        out = np.empty_like(raw)
        slots = self.tanh_slots
        out[:, slots] = np.tanh(raw[:, slots])
        softs = {}
        for start, w in self.onehot_spans:
            span_noise = None if noise is None else noise[:, start : start + w]
            soft = gumbel_softmax(raw[:, start : start + w], self.tau, rng, hard=False, noise=span_noise)
            softs[(start, w)] = soft
            if hard:
                hard_rows = np.zeros_like(soft)
                idx = np.argmax(soft, axis=-1)
                np.put_along_axis(hard_rows, idx[..., None], 1.0, axis=-1)
                out[:, start : start + w] = hard_rows
            else:
                out[:, start : start + w] = soft
        cache = {"tanh_out": out[:, slots].copy(), "softs": softs}
        return out, cache

    def backward(self, cache: dict, dout: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. raw output; straight-through for hard spans."""
        draw = np.zeros_like(dout)
        t = cache["tanh_out"]
        draw[:, self.tanh_slots] = dout[:, self.tanh_slots] * (1.0 - t * t)
        for (start, w), soft in cache["softs"].items():
            draw[:, start : start + w] = gumbel_softmax_backward(
                soft, dout[:, start : start + w], self.tau
            )
        return draw


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or len(params) != len(state.m):
        raise NetError("params/grads/state length mismatch")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
