"""Generalized pre-activation ResNet with a dimension-changing zeroth block.

Every block ``i`` is a fully connected DNN built from weight matrices
``V[i][j]`` of shape ``(L_ij + 1, L_i,j+1)``; the last row of each matrix holds
the biases.  Block 0 maps the (augmented) network input to ``output_dim``;
blocks ``1..b`` act on a pre-activated copy of the running state and their
output is added back to it::

    kappa_1     = Phi_0([x, 1])
    kappa_{i+1} = kappa_i + Phi_i(psi(kappa_i))          i = 1..b
    y           = kappa_{b+1}

All parameters live in one flat vector ``theta``; each matrix occupies a
contiguous slice stored column-major.  The Jacobian of ``y`` with respect to
``theta`` is computed analytically in a single backward sweep over a cache
filled by the forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("tanh", "swish", "sigmoid", "identity")


class DimensionError(ValueError):
    """Raised when shapes of specs, parameters or inputs do not conform."""


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


def _check_kind(kind: str) -> None:
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_eval(kind: str, x):
    """Evaluate an activation elementwise (scalar or array input)."""
    if kind == "tanh":
        return np.tanh(x)
    if kind == "swish":
        return x * expit(x)
    if kind == "sigmoid":
        return expit(x)
    if kind == "identity":
        return np.asarray(x, dtype=float) * 1.0
    _check_kind(kind)


def activation_deriv(kind: str, x):
    """Exact derivative of :func:`activation_eval`."""
    if kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if kind == "swish":
        s = expit(x)
        return s + x * s * (1.0 - s)
    if kind == "sigmoid":
        s = expit(x)
        return s * (1.0 - s)
    if kind == "identity":
        return np.ones_like(np.asarray(x, dtype=float))
    _check_kind(kind)


def activation_eval_deriv(kind: str, x: np.ndarray):
    """``(act(x), act'(x))`` sharing the expensive part of the evaluation."""
    if kind == "tanh":
        t = np.tanh(x)
        return t, 1.0 - t * t
    if kind == "swish":
        s = expit(x)
        return x * s, s + x * s * (1.0 - s)
    if kind == "sigmoid":
        s = expit(x)
        return s, s * (1.0 - s)
    _check_kind(kind)
    return x * 1.0, np.ones_like(x)


def _augmented_jacobian(kind: str, pre: np.ndarray) -> np.ndarray:
    pre = np.asarray(pre, dtype=float)
    n = pre.shape[0]
    out = np.zeros((n + 1, n))
    out[np.arange(n), np.arange(n)] = activation_deriv(kind, pre)
    return out


def activation_jacobian(kind: str, pre_image: np.ndarray) -> np.ndarray:
    """Jacobian of ``v -> [act(v), 1]``: a diagonal stacked on a zero row."""
    return _augmented_jacobian(kind, pre_image)


def pre_activation_jacobian(kind: str, kappa: np.ndarray) -> np.ndarray:
    """Jacobian of the shortcut pre-activation ``kappa -> [act(kappa), 1]``."""
    return _augmented_jacobian(kind, kappa)


# ---------------------------------------------------------------------------
# Architecture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSpec:
    """One fully connected block.

    ``hidden_activation`` is used on every hidden layer.  When
    ``outer_activation`` is given it replaces the activation of the last
    hidden layer (the one feeding the block's linear output).
    """

    input_dim: int
    hidden_widths: tuple[int, ...]
    output_dim: int
    hidden_activation: str = "tanh"
    outer_activation: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if not self.hidden_widths:
            raise DimensionError("a block needs at least one hidden layer")
        if self.input_dim < 1 or self.output_dim < 1 or min(self.hidden_widths) < 1:
            raise DimensionError("layer widths must be positive")
        _check_kind(self.hidden_activation)
        if self.outer_activation is not None:
            _check_kind(self.outer_activation)

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)

    @property
    def widths(self) -> tuple[int, ...]:
        """``(L_0, L_1, ..., L_k, L_{k+1})``."""
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        w = self.widths
        return [(w[j] + 1, w[j + 1]) for j in range(self.depth + 1)]

    def layer_activation(self, j: int) -> str:
        """Activation applied to the output of layer ``j - 1`` (``j = 1..k``)."""
        if j == self.depth and self.outer_activation is not None:
            return self.outer_activation
        return self.hidden_activation

    @cached_property
    def activations(self) -> tuple[str, ...]:
        """``activations[j - 1] == layer_activation(j)``."""
        return tuple(self.layer_activation(j) for j in range(1, self.depth + 1))

    @cached_property
    def param_count(self) -> int:
        return sum(r * c for r, c in self.shapes)


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    output_dim: int
    blocks: tuple[BlockSpec, ...]
    shortcut_activation: str = "swish"

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        _check_kind(self.shortcut_activation)
        problems = []
        if not self.blocks:
            problems.append("network needs a zeroth block")
        else:
            b0 = self.blocks[0]
            if b0.input_dim != self.input_dim:
                problems.append(f"block 0 input_dim {b0.input_dim} != input_dim {self.input_dim}")
            if b0.output_dim != self.output_dim:
                problems.append(f"block 0 output_dim {b0.output_dim} != output_dim {self.output_dim}")
            for i, blk in enumerate(self.blocks[1:], start=1):
                if blk.input_dim != self.output_dim or blk.output_dim != self.output_dim:
                    problems.append(
                        f"residual block {i} must map {self.output_dim} -> {self.output_dim}, "
                        f"got {blk.input_dim} -> {blk.output_dim}"
                    )
        if problems:
            raise DimensionError("; ".join(problems))

    @cached_property
    def param_count(self) -> int:
        return sum(blk.param_count for blk in self.blocks)

    @property
    def num_residual_blocks(self) -> int:
        """``b``: the number of blocks after the zeroth one."""
        return len(self.blocks) - 1

    @classmethod
    def uniform(
        cls,
        input_dim: int,
        output_dim: int,
        width: int,
        depth: int,
        residual_blocks: int = 0,
        hidden_activation: str = "tanh",
        outer_activation: Optional[str] = None,
        shortcut_activation: str = "swish",
    ) -> "NetworkSpec":
        """Every block gets ``depth`` hidden layers of ``width`` neurons."""
        widths = (width,) * depth
        first = BlockSpec(input_dim, widths, output_dim, hidden_activation, outer_activation)
        rest = [
            BlockSpec(output_dim, widths, output_dim, hidden_activation, outer_activation)
            for _ in range(residual_blocks)
        ]
        return cls(input_dim, output_dim, (first, *rest), shortcut_activation)


def param_count(spec: NetworkSpec) -> int:
    return spec.param_count


# ---------------------------------------------------------------------------
# Parameter vector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamLayout:
    """Start offset and shape of every ``V[i][j]`` inside the flat vector."""

    offsets: tuple[tuple[tuple[int, tuple[int, int]], ...], ...]
    size: int

    @classmethod
    def of(cls, spec: NetworkSpec) -> "ParamLayout":
        pos = 0
        blocks = []
        for blk in spec.blocks:
            layers = []
            for shape in blk.shapes:
                layers.append((pos, shape))
                pos += shape[0] * shape[1]
            blocks.append(tuple(layers))
        return cls(tuple(blocks), pos)

    def block_range(self, i: int) -> tuple[int, int]:
        first = self.offsets[i][0][0]
        last_off, (r, c) = self.offsets[i][-1]
        return first, last_off + r * c


@dataclass(frozen=True)
class ParamVector:
    theta: np.ndarray
    layout: ParamLayout = field(repr=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or theta.shape[0] != self.layout.size:
            raise DimensionError(
                f"parameter vector has shape {theta.shape}, layout expects ({self.layout.size},)"
            )
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "ParamVector":
        layout = ParamLayout.of(spec)
        return cls(np.zeros(layout.size), layout)

    @classmethod
    def from_theta(cls, spec: NetworkSpec, theta) -> "ParamVector":
        return cls(np.asarray(theta, dtype=np.float64), ParamLayout.of(spec))


def vectorize(spec: NetworkSpec, matrices: Sequence[Sequence[np.ndarray]]) -> ParamVector:
    """Stack ``matrices[i][j]`` column-major into one flat vector."""
    layout = ParamLayout.of(spec)
    if len(matrices) != len(layout.offsets):
        raise DimensionError(f"expected {len(layout.offsets)} blocks, got {len(matrices)}")
    theta = np.empty(layout.size)
    for i, (blk_layout, mats) in enumerate(zip(layout.offsets, matrices)):
        if len(mats) != len(blk_layout):
            raise DimensionError(f"block {i}: expected {len(blk_layout)} matrices, got {len(mats)}")
        for j, ((off, shape), m) in enumerate(zip(blk_layout, mats)):
            m = np.asarray(m, dtype=np.float64)
            if m.shape != shape:
                raise DimensionError(f"V[{i}][{j}] has shape {m.shape}, expected {shape}")
            theta[off : off + m.size] = m.ravel(order="F")
    return ParamVector(theta, layout)


def devectorize(pv: ParamVector) -> list[list[np.ndarray]]:
    """Views of the weight matrices inside ``pv.theta`` (no copies)."""
    theta = pv.theta
    return [
        [theta[off : off + r * c].reshape((r, c), order="F") for off, (r, c) in blk]
        for blk in pv.layout.offsets
    ]


def init_params(
    spec: NetworkSpec,
    rng: np.random.Generator,
    scale: float = 0.1,
    max_norm: Optional[float] = None,
) -> ParamVector:
    """Uniform draw in ``[-scale, scale]``, shrunk radially to ``max_norm`` if larger."""
    layout = ParamLayout.of(spec)
    theta = rng.uniform(-scale, scale, size=layout.size)
    if max_norm is not None:
        norm = np.linalg.norm(theta)
        if norm > max_norm:
            theta *= max_norm / norm
    return ParamVector(theta, layout)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


@dataclass
class BlockCache:
    """Intermediates of one block evaluation.

    ``layer_inputs[j]`` is the (augmented) vector multiplied by ``V[j]``;
    ``pre_images[j]`` is the linear output of layer ``j`` and ``slopes[j]``
    the activation derivative evaluated at it (``j < k``).
    """

    layer_inputs: list[np.ndarray]
    pre_images: list[np.ndarray]
    slopes: list[np.ndarray]


@dataclass
class LayerCache:
    """Everything :func:`resnet_jacobian` needs from a forward pass."""

    theta: np.ndarray
    weights: list[list[np.ndarray]]
    block_inputs: list[np.ndarray]  # kappa_0 .. kappa_b (un-augmented)
    shortcut: list[Optional[np.ndarray]]  # psi(kappa_i), None for block 0
    blocks: list[BlockCache]
    output: np.ndarray


def block_forward(block: BlockSpec, weights: Sequence[np.ndarray], v: np.ndarray):
    """Evaluate one block on an augmented input ``v`` (last entry 1)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (block.input_dim + 1,):
        raise DimensionError(f"block input has shape {v.shape}, expected ({block.input_dim + 1},)")
    if len(weights) != block.depth + 1:
        raise DimensionError(f"block needs {block.depth + 1} weight matrices, got {len(weights)}")
    inputs = [v]
    pre = [weights[0].T @ v]
    slopes = []
    for j, kind in enumerate(block.activations, start=1):
        act, slope = activation_eval_deriv(kind, pre[-1])
        h = np.empty(act.shape[0] + 1)
        h[:-1] = act
        h[-1] = 1.0
        inputs.append(h)
        slopes.append(slope)
        pre.append(weights[j].T @ h)
    return pre[-1], BlockCache(inputs, pre, slopes)


def pre_activation(kind: str, kappa: np.ndarray) -> np.ndarray:
    """Shortcut map ``kappa -> [act(kappa), 1]``."""
    kappa = np.asarray(kappa, dtype=np.float64)
    out = np.empty(kappa.shape[0] + 1)
    out[:-1] = activation_eval(kind, kappa)
    out[-1] = 1.0
    return out


def _augment(x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0] + 1)
    out[:-1] = x
    out[-1] = 1.0
    return out


def resnet_forward(spec: NetworkSpec, pv: ParamVector, x: np.ndarray):
    """Network output ``y`` and the cache for :func:`resnet_jacobian`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.input_dim,):
        raise DimensionError(f"input has shape {x.shape}, expected ({spec.input_dim},)")
    if pv.layout.size != spec.param_count:
        raise DimensionError("parameter vector does not match network spec")
    weights = devectorize(pv)
    kappa, c0 = block_forward(spec.blocks[0], weights[0], _augment(x))
    kappas = [x]
    shortcut: list[Optional[np.ndarray]] = [None]
    caches = [c0]
    for i in range(1, len(spec.blocks)):
        kappas.append(kappa)
        s = pre_activation(spec.shortcut_activation, kappa)
        out, ci = block_forward(spec.blocks[i], weights[i], s)
        shortcut.append(s)
        caches.append(ci)
        kappa = kappa + out
    return kappa, LayerCache(pv.theta, weights, kappas, shortcut, caches, kappa)


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------


def block_backward(
    block: BlockSpec,
    weights: Sequence[np.ndarray],
    cache: BlockCache,
    upstream: np.ndarray,
    out: np.ndarray,
) -> np.ndarray:
    """Accumulate ``upstream @ dPhi/dtheta_block`` into ``out``; return ``upstream @ dPhi/dv``.

    ``out`` is the slab of the full Jacobian that belongs to this block.  Each
    layer slab is ``B (I kron x^T)`` with ``B`` the product of everything
    downstream of that layer and ``x`` the layer input, laid out column-major.
    """
    rows = upstream.shape[0]
    B = upstream
    pos = out.shape[1]
    for j in range(block.depth, -1, -1):
        x = cache.layer_inputs[j]
        size = x.shape[0] * B.shape[1]
        pos -= size
        # column c*len(x) + r  <->  B[:, c] * x[r]
        out[:, pos : pos + size] = (B[:, :, None] * x[None, None, :]).reshape(rows, size)
        BV = B @ weights[j].T
        if j > 0:
            # drop the bias column (its derivative is zero), scale by act'
            B = BV[:, :-1] * cache.slopes[j - 1]
        else:
            B = BV
    return B


def resnet_jacobian(spec: NetworkSpec, pv: ParamVector, x: np.ndarray, cache: LayerCache) -> np.ndarray:
    """``dy/dtheta`` of shape ``(output_dim, p)``, columns in ``pv`` order."""
    if cache.theta is not pv.theta and not np.array_equal(cache.theta, pv.theta):
        raise DimensionError("cache was produced with different parameters")
    x = np.asarray(x, dtype=np.float64)
    if not np.array_equal(cache.block_inputs[0], x):
        raise DimensionError("cache was produced for a different input")
    weights = cache.weights
    layout = pv.layout
    n_out = spec.output_dim
    jac = np.empty((n_out, layout.size))
    G = np.eye(n_out)
    for i in range(len(spec.blocks) - 1, 0, -1):
        a, b = layout.block_range(i)
        dv = block_backward(spec.blocks[i], weights[i], cache.blocks[i], G, jac[:, a:b])
        # d psi / d kappa drops the bias entry and scales by the shortcut derivative
        dpsi = activation_deriv(spec.shortcut_activation, cache.block_inputs[i])
        G = G + dv[:, :-1] * dpsi
    a, b = layout.block_range(0)
    block_backward(spec.blocks[0], weights[0], cache.blocks[0], G, jac[:, a:b])
    return jac


def resnet_eval(spec: NetworkSpec, pv: ParamVector, x: np.ndarray):
    """Convenience: ``(y, dy/dtheta)``."""
    y, cache = resnet_forward(spec, pv, x)
    return y, resnet_jacobian(spec, pv, x, cache)


def dnn_eval(block: BlockSpec, pv: ParamVector, x: np.ndarray):
    """Plain feedforward block (no residual path): ``(y, dy/dtheta)``."""
    (weights,) = devectorize(pv)
    y, cache = block_forward(block, weights, _augment(np.asarray(x, dtype=np.float64)))
    jac = np.empty((block.output_dim, pv.layout.size))
    block_backward(block, weights, cache, np.eye(block.output_dim), jac)
    return y, jac
