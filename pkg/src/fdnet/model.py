"""Linear residual network built from shared-weight finite-difference blocks.

A block maps a grid function u (length M) to

    u + sum_c mix_c * concat(g1, g2)_c + f_hat,

where g1 applies F learnable three-point stencils to u, g2 applies a second
group of stencils to g1, and f_hat is an optional learned source term
(column sums of a basis-by-grid weight matrix).  Each stencil ("filter")
carries 7 parameters: an interior 3-tap kernel plus 2-tap kernels for the
left and right boundary rows, so the stencil respects the grid edges instead
of padding.  A network is k such blocks applied in sequence with shared
weights.  Everything is linear in u and polynomial in the parameters, which
makes exact gradients and Hessian-vector products practical with plain
reverse-mode and forward-over-reverse recurrences; no autodiff framework is
involved.

Parameter vector layout (flat, in order):

    group1   F * 7        stencils applied to u, kernel layout
                          [a-, a0, a+, b0, b+, c-, c0]
    group2   F * F * 7    stencils applied to g1, indexed (out, in, tap)
    mix      2F           mixing weights, first F for g1, last F for g2
    forcing  n_basis * M  only when with_forcing, row-major
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "NetConfig",
    "FdNetParams",
    "Batch",
    "param_count",
    "init_params",
    "euler_embedding_params",
    "conv_group",
    "block_forward",
    "net_forward",
    "loss",
    "grad",
    "hvp",
    "LossModel",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters: filters F, blocks k, grid size M."""

    n_filters: int
    n_blocks: int = 1
    with_forcing: bool = False
    grid_points: int = 32
    n_basis: int = 10

    def __post_init__(self) -> None:
        if self.n_filters < 1:
            raise ValueError("n_filters must be at least 1")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be at least 1")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        if self.with_forcing and self.n_basis < 1:
            raise ValueError("n_basis must be at least 1")


def param_count(cfg: NetConfig) -> int:
    """Number of trainable parameters: 7F^2 + 9F, plus n_basis*M with forcing."""
    f = cfg.n_filters
    n = 7 * f * f + 9 * f
    if cfg.with_forcing:
        n += cfg.n_basis * cfg.grid_points
    return n


class Batch(NamedTuple):
    """Mini-batch of one-step training pairs, both of shape (B, M)."""

    inputs: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class FdNetParams:
    """Flat parameter vector together with the architecture it parameterizes."""

    cfg: NetConfig
    theta: np.ndarray

    def __post_init__(self) -> None:
        th = np.asarray(self.theta, dtype=float)
        if th.shape != (param_count(self.cfg),):
            raise ValueError(
                f"theta has {th.size} entries, expected {param_count(self.cfg)}"
            )
        object.__setattr__(self, "theta", th)

    @property
    def group1(self) -> np.ndarray:
        f = self.cfg.n_filters
        return self.theta[: 7 * f].reshape(f, 1, 7)

    @property
    def group2(self) -> np.ndarray:
        f = self.cfg.n_filters
        return self.theta[7 * f : 7 * f + 7 * f * f].reshape(f, f, 7)

    @property
    def mix(self) -> np.ndarray:
        f = self.cfg.n_filters
        off = 7 * f + 7 * f * f
        return self.theta[off : off + 2 * f]

    @property
    def forcing(self) -> np.ndarray | None:
        if not self.cfg.with_forcing:
            return None
        off = 7 * self.cfg.n_filters * (self.cfg.n_filters + 1) + 2 * self.cfg.n_filters
        return self.theta[off:].reshape(self.cfg.n_basis, self.cfg.grid_points)

    def with_theta(self, theta: np.ndarray) -> "FdNetParams":
        return FdNetParams(self.cfg, theta)


def init_params(cfg: NetConfig, seed: int) -> FdNetParams:
    """Uniform initialization, bound (3C)^(-1/2) per kernel group.

    C is the input channel count of the group (1 for group1, F for group2);
    boundary taps share the bound of their kernel.  Mixing weights use
    (2F)^(-1/2) and forcing weights n_basis^(-1/2).  Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    f = cfg.n_filters
    parts = [
        rng.uniform(-1.0, 1.0, 7 * f) * (3.0 * 1) ** -0.5,
        rng.uniform(-1.0, 1.0, 7 * f * f) * (3.0 * f) ** -0.5,
        rng.uniform(-1.0, 1.0, 2 * f) * (2.0 * f) ** -0.5,
    ]
    if cfg.with_forcing:
        parts.append(
            rng.uniform(-1.0, 1.0, cfg.n_basis * cfg.grid_points) * cfg.n_basis**-0.5
        )
    return FdNetParams(cfg, np.concatenate(parts))


def euler_embedding_params(cfg: NetConfig, delta: float) -> FdNetParams:
    """Parameters under which one block reproduces an explicit Euler step.

    Filter 0 of group1 carries the interior kernel delta * (1, -2, 1) with
    zero boundary kernels, mix selects that filter, and everything else is
    zero, so a block computes u + delta * (u_{m+1} - 2 u_m + u_{m-1}) on the
    interior and leaves the boundary points unchanged.
    """
    theta = np.zeros(param_count(cfg))
    params = FdNetParams(cfg, theta)
    params.group1[0, 0, 0:3] = (delta, -2.0 * delta, delta)
    params.mix[0] = 1.0
    return params


# -- stencil application -----------------------------------------------------
#
# Internally activations are kept channel-last, (B, M, C), and each stencil
# group is packed into three matmul weight matrices: interior (3C, F) acting
# on tap-major windows, and left/right boundary matrices (2C, F).


class _Weights(NamedTuple):
    w1i: np.ndarray
    w1l: np.ndarray
    w1r: np.ndarray
    w2i: np.ndarray
    w2l: np.ndarray
    w2r: np.ndarray
    mix1: np.ndarray
    mix2: np.ndarray
    f_sum: np.ndarray | None


def _pack_group(kernels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f_out, c, _ = kernels.shape
    wi = np.ascontiguousarray(kernels[:, :, 0:3].transpose(2, 1, 0)).reshape(3 * c, f_out)
    wl = np.ascontiguousarray(kernels[:, :, 3:5].transpose(2, 1, 0)).reshape(2 * c, f_out)
    wr = np.ascontiguousarray(kernels[:, :, 5:7].transpose(2, 1, 0)).reshape(2 * c, f_out)
    return wi, wl, wr


def _unpack_group(wi: np.ndarray, wl: np.ndarray, wr: np.ndarray) -> np.ndarray:
    f_out = wi.shape[1]
    c = wi.shape[0] // 3
    out = np.empty((f_out, c, 7))
    out[:, :, 0:3] = wi.reshape(3, c, f_out).transpose(2, 1, 0)
    out[:, :, 3:5] = wl.reshape(2, c, f_out).transpose(2, 1, 0)
    out[:, :, 5:7] = wr.reshape(2, c, f_out).transpose(2, 1, 0)
    return out


def _pack(params: FdNetParams) -> _Weights:
    f = params.cfg.n_filters
    w1i, w1l, w1r = _pack_group(params.group1)
    w2i, w2l, w2r = _pack_group(params.group2)
    forcing = params.forcing
    return _Weights(
        w1i, w1l, w1r, w2i, w2l, w2r,
        mix1=params.mix[:f].copy(),
        mix2=params.mix[f:].copy(),
        f_sum=None if forcing is None else forcing.sum(axis=0),
    )


def _win1(x: np.ndarray) -> np.ndarray:
    # (B, M) -> tap-major interior windows (B, M-2, 3)
    return np.stack((x[:, :-2], x[:, 1:-1], x[:, 2:]), axis=2)


def _winf(x: np.ndarray) -> np.ndarray:
    # (B, M, F) -> (B, M-2, 3F)
    return np.concatenate((x[:, :-2, :], x[:, 1:-1, :], x[:, 2:, :]), axis=2)


def _conv1(x: np.ndarray, xw: np.ndarray, wi, wl, wr) -> np.ndarray:
    b, m = x.shape
    out = np.empty((b, m, wi.shape[1]))
    out[:, 1:-1, :] = xw @ wi
    out[:, 0, :] = x[:, :2] @ wl
    out[:, -1, :] = x[:, -2:] @ wr
    return out


def _convf(g: np.ndarray, gw: np.ndarray, wi, wl, wr) -> np.ndarray:
    b, m, c = g.shape
    out = np.empty((b, m, wi.shape[1]))
    out[:, 1:-1, :] = gw @ wi
    out[:, 0, :] = g[:, :2, :].reshape(b, 2 * c) @ wl
    out[:, -1, :] = g[:, -2:, :].reshape(b, 2 * c) @ wr
    return out


def _adj_x1(ga: np.ndarray, wi, wl, wr) -> np.ndarray:
    # adjoint of _conv1 with respect to its (B, M) input
    b, m, _ = ga.shape
    xa = np.zeros((b, m))
    buf = ga[:, 1:-1, :] @ wi.T
    xa[:, :-2] += buf[:, :, 0]
    xa[:, 1:-1] += buf[:, :, 1]
    xa[:, 2:] += buf[:, :, 2]
    bl = ga[:, 0, :] @ wl.T
    xa[:, 0] += bl[:, 0]
    xa[:, 1] += bl[:, 1]
    br = ga[:, -1, :] @ wr.T
    xa[:, -2] += br[:, 0]
    xa[:, -1] += br[:, 1]
    return xa


def _adj_xf(ga: np.ndarray, wi, wl, wr) -> np.ndarray:
    # adjoint of _convf with respect to its (B, M, C) input
    b, m, _ = ga.shape
    c = wi.shape[0] // 3
    xa = np.zeros((b, m, c))
    buf = (ga[:, 1:-1, :] @ wi.T).reshape(b, m - 2, 3, c)
    xa[:, :-2, :] += buf[:, :, 0, :]
    xa[:, 1:-1, :] += buf[:, :, 1, :]
    xa[:, 2:, :] += buf[:, :, 2, :]
    bl = (ga[:, 0, :] @ wl.T).reshape(b, 2, c)
    xa[:, 0, :] += bl[:, 0, :]
    xa[:, 1, :] += bl[:, 1, :]
    br = (ga[:, -1, :] @ wr.T).reshape(b, 2, c)
    xa[:, -2, :] += br[:, 0, :]
    xa[:, -1, :] += br[:, 1, :]
    return xa


def _adj_w1(x: np.ndarray, xw: np.ndarray, ga: np.ndarray):
    wi_a = np.tensordot(xw, ga[:, 1:-1, :], axes=([0, 1], [0, 1]))
    wl_a = x[:, :2].T @ ga[:, 0, :]
    wr_a = x[:, -2:].T @ ga[:, -1, :]
    return wi_a, wl_a, wr_a


def _adj_wf(g: np.ndarray, gw: np.ndarray, ga: np.ndarray):
    b, _, c = g.shape
    wi_a = np.tensordot(gw, ga[:, 1:-1, :], axes=([0, 1], [0, 1]))
    wl_a = g[:, :2, :].reshape(b, 2 * c).T @ ga[:, 0, :]
    wr_a = g[:, -2:, :].reshape(b, 2 * c).T @ ga[:, -1, :]
    return wi_a, wl_a, wr_a


def conv_group(channels: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Apply a group of 7-parameter stencils to a stack of channels.

    ``channels`` has shape (C, M) or (B, C, M); ``kernels`` has shape
    (F_out, C, 7) laid out [a-, a0, a+, b0, b+, c-, c0].  Interior outputs
    sum the 3-tap kernels over channels; the first and last grid points use
    the dedicated 2-tap boundary kernels.  Returns (F_out, M) or (B, F_out, M).
    """
    x = np.asarray(channels, dtype=float)
    k = np.asarray(kernels, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or k.ndim != 3 or k.shape[1] != x.shape[1] or k.shape[2] != 7:
        raise ValueError("channels must be (B, C, M) and kernels (F_out, C, 7)")
    if x.shape[2] < 3:
        raise ValueError("need at least three grid points")
    wi, wl, wr = _pack_group(k)
    xl = np.ascontiguousarray(x.transpose(0, 2, 1))  # (B, M, C)
    out = _convf(xl, _winf(xl), wi, wl, wr).transpose(0, 2, 1)
    return out[0] if single else out


class _Trace(NamedTuple):
    u: np.ndarray
    uw: np.ndarray
    g1: np.ndarray
    g1w: np.ndarray
    g2: np.ndarray


def _forward(w: _Weights, u: np.ndarray, k: int, keep: bool):
    traces: list[_Trace] = []
    x = u
    for _ in range(k):
        xw = _win1(x)
        g1 = _conv1(x, xw, w.w1i, w.w1l, w.w1r)
        g1w = _winf(g1)
        g2 = _convf(g1, g1w, w.w2i, w.w2l, w.w2r)
        y = x + g1 @ w.mix1 + g2 @ w.mix2
        if w.f_sum is not None:
            y = y + w.f_sum
        if keep:
            traces.append(_Trace(x, xw, g1, g1w, g2))
        x = y
    return x, traces


def net_forward(u: np.ndarray, params: FdNetParams, n_blocks: int | None = None) -> np.ndarray:
    """Apply k shared-weight blocks to ``u`` of shape (M,) or (B, M)."""
    x = np.asarray(u, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None]
    if x.shape[1] != params.cfg.grid_points:
        raise ValueError(
            f"input has {x.shape[1]} grid points, expected {params.cfg.grid_points}"
        )
    k = params.cfg.n_blocks if n_blocks is None else n_blocks
    out, _ = _forward(_pack(params), x, k, keep=False)
    return out[0] if single else out


def block_forward(u: np.ndarray, params: FdNetParams) -> np.ndarray:
    """Apply a single block regardless of the configured depth."""
    return net_forward(u, params, n_blocks=1)


def _check_batch(params: FdNetParams, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(batch.inputs, dtype=float)
    t = np.asarray(batch.targets, dtype=float)
    if x.ndim != 2 or x.shape != t.shape:
        raise ValueError("batch inputs and targets must both be (B, M)")
    if x.shape[1] != params.cfg.grid_points:
        raise ValueError(
            f"batch has {x.shape[1]} grid points, expected {params.cfg.grid_points}"
        )
    return x, t


class LossModel:
    """Mini-batch MSE with gradient and exact Hessian-vector products.

    Fixing the parameter point and the batch once lets repeated ``hvp`` calls
    (the inner loop of a Newton-CG solve) reuse the forward activations and
    the reverse-sweep adjoints instead of recomputing them.
    """

    def __init__(self, params: FdNetParams, batch: Batch):
        x, targets = _check_batch(params, batch)
        self.params = params
        self.cfg = params.cfg
        self._w = _pack(params)
        self._k = params.cfg.n_blocks
        # overflow at extreme iterates must surface as non-finite values for
        # the optimizer to handle, not as warnings
        with np.errstate(over="ignore", invalid="ignore"):
            y, traces = _forward(self._w, x, self._k, keep=True)
            self._traces = traces
            resid = y - targets
            self._scale = 1.0 / resid.size
            self.loss = float(np.mean(resid * resid))
            self._a_in: list[np.ndarray] = [None] * self._k  # incoming adjoint per block
            self._g1a: list[np.ndarray] = [None] * self._k  # total g1 adjoint per block
            self.grad = self._backward(2.0 * self._scale * resid)

    # reverse sweep; caches per-block adjoints for later tangent sweeps
    def _backward(self, a: np.ndarray) -> np.ndarray:
        w, cfg = self._w, self.cfg
        f = cfg.n_filters
        w1i_a = np.zeros((3, f)); w1l_a = np.zeros((2, f)); w1r_a = np.zeros((2, f))
        w2i_a = np.zeros((3 * f, f)); w2l_a = np.zeros((2 * f, f)); w2r_a = np.zeros((2 * f, f))
        mix1_a = np.zeros(f); mix2_a = np.zeros(f)
        f_a = np.zeros(cfg.grid_points) if cfg.with_forcing else None
        for j in reversed(range(self._k)):
            tr = self._traces[j]
            self._a_in[j] = a
            if f_a is not None:
                f_a += a.sum(axis=0)
            mix1_a += np.tensordot(tr.g1, a, axes=([0, 1], [0, 1]))
            mix2_a += np.tensordot(tr.g2, a, axes=([0, 1], [0, 1]))
            g2a = a[:, :, None] * w.mix2
            di, dl, dr = _adj_wf(tr.g1, tr.g1w, g2a)
            w2i_a += di; w2l_a += dl; w2r_a += dr
            g1a = a[:, :, None] * w.mix1 + _adj_xf(g2a, w.w2i, w.w2l, w.w2r)
            self._g1a[j] = g1a
            di, dl, dr = _adj_w1(tr.u, tr.uw, g1a)
            w1i_a += di; w1l_a += dl; w1r_a += dr
            a = a + _adj_x1(g1a, w.w1i, w.w1l, w.w1r)
        return self._assemble(w1i_a, w1l_a, w1r_a, w2i_a, w2l_a, w2r_a, mix1_a, mix2_a, f_a)

    def _assemble(self, w1i_a, w1l_a, w1r_a, w2i_a, w2l_a, w2r_a, mix1_a, mix2_a, f_a):
        parts = [
            _unpack_group(w1i_a, w1l_a, w1r_a).ravel(),
            _unpack_group(w2i_a, w2l_a, w2r_a).ravel(),
            mix1_a,
            mix2_a,
        ]
        if f_a is not None:
            # every basis row sees the same column-sum sensitivity
            parts.append(np.tile(f_a, self.cfg.n_basis))
        return np.concatenate(parts)

    def hvp(self, v: np.ndarray) -> np.ndarray:
        """Exact Hessian-vector product via a tangent (forward-over-reverse) sweep."""
        v = np.asarray(v, dtype=float)
        if v.shape != self.params.theta.shape:
            raise ValueError("direction must match the parameter vector")
        with np.errstate(over="ignore", invalid="ignore"):
            return self._hvp_sweeps(v)

    def _hvp_sweeps(self, v: np.ndarray) -> np.ndarray:
        w, cfg = self._w, self.cfg
        f = cfg.n_filters
        dp = self.params.with_theta(v)  # same layout, tangent values
        dw = _pack(dp)

        # tangent forward sweep
        k = self._k
        dus = [np.zeros_like(self._traces[0].u)]
        dg1s: list[np.ndarray] = []; dg1ws: list[np.ndarray] = []; dg2s: list[np.ndarray] = []
        duws: list[np.ndarray] = []
        for j in range(k):
            tr = self._traces[j]
            du = dus[j]
            duw = _win1(du)
            dg1 = _conv1(du, duw, w.w1i, w.w1l, w.w1r) + _conv1(tr.u, tr.uw, dw.w1i, dw.w1l, dw.w1r)
            dg1w = _winf(dg1)
            dg2 = _convf(dg1, dg1w, w.w2i, w.w2l, w.w2r) + _convf(tr.g1, tr.g1w, dw.w2i, dw.w2l, dw.w2r)
            dy = du + dg1 @ w.mix1 + tr.g1 @ dw.mix1 + dg2 @ w.mix2 + tr.g2 @ dw.mix2
            if dw.f_sum is not None:
                dy = dy + dw.f_sum
            duws.append(duw); dg1s.append(dg1); dg1ws.append(dg1w); dg2s.append(dg2)
            dus.append(dy)

        # tangent reverse sweep, product rule around the cached adjoints
        da = 2.0 * self._scale * dus[k]
        w1i_t = np.zeros((3, f)); w1l_t = np.zeros((2, f)); w1r_t = np.zeros((2, f))
        w2i_t = np.zeros((3 * f, f)); w2l_t = np.zeros((2 * f, f)); w2r_t = np.zeros((2 * f, f))
        mix1_t = np.zeros(f); mix2_t = np.zeros(f)
        f_t = np.zeros(cfg.grid_points) if cfg.with_forcing else None
        for j in reversed(range(k)):
            tr = self._traces[j]
            a = self._a_in[j]
            g1a = self._g1a[j]
            du, duw, dg1, dg1w, dg2 = dus[j], duws[j], dg1s[j], dg1ws[j], dg2s[j]
            if f_t is not None:
                f_t += da.sum(axis=0)
            mix1_t += np.tensordot(dg1, a, axes=([0, 1], [0, 1]))
            mix1_t += np.tensordot(tr.g1, da, axes=([0, 1], [0, 1]))
            mix2_t += np.tensordot(dg2, a, axes=([0, 1], [0, 1]))
            mix2_t += np.tensordot(tr.g2, da, axes=([0, 1], [0, 1]))
            g2a = a[:, :, None] * w.mix2
            dg2a = da[:, :, None] * w.mix2 + a[:, :, None] * dw.mix2
            ti, tl, tr_ = _adj_wf(dg1, dg1w, g2a)
            w2i_t += ti; w2l_t += tl; w2r_t += tr_
            ti, tl, tr_ = _adj_wf(tr.g1, tr.g1w, dg2a)
            w2i_t += ti; w2l_t += tl; w2r_t += tr_
            dg1a = (
                da[:, :, None] * w.mix1
                + a[:, :, None] * dw.mix1
                + _adj_xf(dg2a, w.w2i, w.w2l, w.w2r)
                + _adj_xf(g2a, dw.w2i, dw.w2l, dw.w2r)
            )
            ti, tl, tr_ = _adj_w1(du, duw, g1a)
            w1i_t += ti; w1l_t += tl; w1r_t += tr_
            ti, tl, tr_ = _adj_w1(tr.u, tr.uw, dg1a)
            w1i_t += ti; w1l_t += tl; w1r_t += tr_
            da = da + _adj_x1(dg1a, w.w1i, w.w1l, w.w1r) + _adj_x1(g1a, dw.w1i, dw.w1l, dw.w1r)
        return self._assemble(w1i_t, w1l_t, w1r_t, w2i_t, w2l_t, w2r_t, mix1_t, mix2_t, f_t)


def loss(params: FdNetParams, batch: Batch) -> float:
    """Mean squared one-step residual, averaged over all B*M scalar entries."""
    x, targets = _check_batch(params, batch)
    with np.errstate(over="ignore", invalid="ignore"):
        y, _ = _forward(_pack(params), x, params.cfg.n_blocks, keep=False)
        resid = y - targets
        return float(np.mean(resid * resid))


def grad(params: FdNetParams, batch: Batch) -> np.ndarray:
    """Exact gradient of ``loss`` with respect to the flat parameter vector."""
    return LossModel(params, batch).grad


def hvp(params: FdNetParams, v: np.ndarray, batch: Batch) -> np.ndarray:
    """Exact Hessian-vector product of ``loss`` at ``params`` in direction ``v``."""
    return LossModel(params, batch).hvp(v)


# -- checkpoint I/O ----------------------------------------------------------


def save_checkpoint(
    directory: str | os.PathLike,
    params: FdNetParams,
    *,
    seed: int | None = None,
    iteration: int | None = None,
    dataset_fingerprint: str | None = None,
) -> None:
    """Write params.bin (little-endian float64) and a params.json sidecar."""
    os.makedirs(directory, exist_ok=True)
    cfg = params.cfg
    with open(os.path.join(directory, "params.bin"), "wb") as fh:
        fh.write(params.theta.astype("<f8").tobytes())
    meta = {
        "n_filters": cfg.n_filters,
        "n_blocks": cfg.n_blocks,
        "with_forcing": cfg.with_forcing,
        "grid_points": cfg.grid_points,
        "n_basis": cfg.n_basis,
        "param_count": param_count(cfg),
        "seed": seed,
        "iteration": iteration,
        "dataset_fingerprint": dataset_fingerprint,
    }
    with open(os.path.join(directory, "params.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def load_checkpoint(directory: str | os.PathLike) -> tuple[FdNetParams, dict]:
    """Read a checkpoint written by ``save_checkpoint``; validates the length."""
    with open(os.path.join(directory, "params.json")) as fh:
        meta = json.load(fh)
    cfg = NetConfig(
        n_filters=meta["n_filters"],
        n_blocks=meta["n_blocks"],
        with_forcing=meta["with_forcing"],
        grid_points=meta["grid_points"],
        n_basis=meta["n_basis"],
    )
    raw = np.fromfile(os.path.join(directory, "params.bin"), dtype="<f8")
    if raw.size != param_count(cfg):
        raise ValueError(
            f"params.bin holds {raw.size} values, expected {param_count(cfg)}"
        )
    return FdNetParams(cfg, raw.astype(float)), meta
