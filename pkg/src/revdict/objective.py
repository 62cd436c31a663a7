"""Training objectives and exact gradients for the definition model.

Two losses over the projected gloss vector y and the pretrained target v_c:

* cosine: 1 - cos(y, v_c)
* rank:   max(0, m - cos(y, v_c) + cos(y, v_r)) with a random confounder
          v_r; zero exactly when y is at least m closer (in cosine) to the
          target than to the confounder.

``backward`` runs backpropagation through the projection, the encoder mode,
and time, by hand; ``finite_diff_check`` is the central-difference harness
that keeps it honest.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .encoder import DefinitionModel, EncoderMode, LSTMParams, run_lstm, reverse_within_lengths
from .errors import NonFiniteLossError

MARGIN = 0.1


class LossKind(str, Enum):
    COSINE = "cosine"
    RANK = "rank"


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine of a zero-norm vector is undefined")
    return float(np.dot(u, v) / (nu * nv))


def cosine_loss(y: np.ndarray, target: np.ndarray) -> float:
    """1 - cos(y, target); 0 when aligned, 2 when opposite."""
    return 1.0 - cosine(y, target)


def rank_loss(
    y: np.ndarray, target: np.ndarray, confounder: np.ndarray, margin: float = MARGIN
) -> float:
    """Hinge on the cosine gap between target and confounder."""
    return max(0.0, margin - cosine(y, target) + cosine(y, confounder))


def sample_negative(n_candidates: int, correct_id: int, rng: np.random.Generator) -> int:
    """Uniform draw over candidate ids excluding ``correct_id``."""
    if n_candidates < 2:
        raise ValueError("need at least two candidates to sample a negative")
    if not 0 <= correct_id < n_candidates:
        raise ValueError(f"correct_id {correct_id} outside [0, {n_candidates})")
    drawn = int(rng.integers(n_candidates - 1))
    return drawn + 1 if drawn >= correct_id else drawn


@dataclass
class GradientSet:
    """Gradients shaped exactly like the model parameters."""

    embeddings: np.ndarray
    lstm: LSTMParams
    lstm_back: LSTMParams | None
    proj_weight: np.ndarray
    proj_bias: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        grads = {"emb": self.embeddings}
        for name in LSTMParams.FIELDS:
            grads[f"fwd.{name}"] = getattr(self.lstm, name)
        if self.lstm_back is not None:
            for name in LSTMParams.FIELDS:
                grads[f"bwd.{name}"] = getattr(self.lstm_back, name)
        grads["proj.w"] = self.proj_weight
        grads["proj.b"] = self.proj_bias
        return grads


def _mask_from_lengths(token_ids: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    return np.arange(token_ids.shape[1])[None, :] < lengths[:, None]


def _forward(model: DefinitionModel, token_ids: np.ndarray, lengths: np.ndarray):
    """Shared forward pass returning y plus everything backward needs."""
    x_seq = model.embeddings.matrix[token_ids]
    mask = _mask_from_lengths(token_ids, lengths)
    if np.any(lengths < 1):
        raise ValueError("cannot encode an all-pad sequence")
    rows = np.arange(token_ids.shape[0])
    trace = run_lstm(model.lstm, x_seq)

    back_trace = None
    x_rev = None
    if model.mode is EncoderMode.FINAL:
        pre = trace.h[rows, lengths - 1]
    elif model.mode is EncoderMode.AVERAGE:
        pre = (trace.h * mask[:, :, None]).sum(axis=1) / lengths[:, None]
    else:
        x_rev = reverse_within_lengths(x_seq, lengths)
        back_trace = run_lstm(model.lstm_back, x_rev)
        pre = np.concatenate(
            [trace.h[rows, lengths - 1], back_trace.h[rows, lengths - 1]], axis=1
        )

    p = pre @ model.projection.weight + model.projection.bias
    y = np.tanh(p)
    return y, (x_seq, x_rev, mask, rows, trace, back_trace, pre)


def _row_cosines(y: np.ndarray, other: np.ndarray, with_grad: bool = True):
    """Per-row cosine and (optionally) its gradient with respect to y."""
    ny = np.linalg.norm(y, axis=1)
    no = np.linalg.norm(other, axis=1)
    if np.any(ny == 0.0) or np.any(no == 0.0):
        raise ValueError("cosine of a zero-norm vector is undefined")
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        cos = np.einsum("bd,bd->b", y, other) / (ny * no)
        dcos = None
        if with_grad:
            dcos = other / (ny * no)[:, None] - (cos / ny**2)[:, None] * y
    if not np.all(np.isfinite(cos)):
        # checked here because a nan would slip through the rank hinge as 0
        raise NonFiniteLossError("non-finite cosine in loss")
    return cos, dcos


def _loss_and_dy(
    y: np.ndarray,
    targets: np.ndarray,
    loss_kind: LossKind,
    negatives: np.ndarray | None,
    margin: float,
    with_grad: bool = True,
):
    cos_c, dcos_c = _row_cosines(y, targets, with_grad)
    dy = None
    if loss_kind is LossKind.COSINE:
        per_row = 1.0 - cos_c
        if with_grad:
            dy = -dcos_c
    else:
        if negatives is None:
            raise ValueError("rank loss needs negative targets")
        cos_r, dcos_r = _row_cosines(y, negatives, with_grad)
        gap = margin - cos_c + cos_r
        active = gap > 0.0  # subgradient 0 at the kink
        per_row = np.where(active, gap, 0.0)
        if with_grad:
            dy = np.where(active[:, None], dcos_r - dcos_c, 0.0)
    loss = float(per_row.mean())
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"non-finite batch loss: {loss!r}")
    return loss, (dy / y.shape[0] if with_grad else None)


def batch_loss(
    model: DefinitionModel,
    token_ids: np.ndarray,
    lengths: np.ndarray,
    targets: np.ndarray,
    loss_kind: LossKind,
    negatives: np.ndarray | None = None,
    margin: float = MARGIN,
) -> float:
    """Mean loss over the batch (forward only).

    Runs the trace-free inference path; a unit test pins it to the exact
    outputs of the backward pass's forward.
    """
    y = model.encode_ids(np.asarray(token_ids), np.asarray(lengths))
    loss, _ = _loss_and_dy(y, targets, LossKind(loss_kind), negatives, margin, with_grad=False)
    return loss


def _lstm_backward(
    params: LSTMParams, x_seq: np.ndarray, trace, dh_inject: np.ndarray
) -> tuple[np.ndarray, LSTMParams]:
    """Backpropagation through time for one direction.

    ``dh_inject[:, t]`` is the loss gradient arriving directly at h_t (from
    state selection or averaging); returns gradients for the inputs and for
    every gate parameter.
    """
    batch, length, _ = x_seq.shape
    grads = LSTMParams.zeros(params.embed_dim, params.hidden)
    dx = np.zeros_like(x_seq)
    dh_next = np.zeros((batch, params.hidden))
    dc_next = np.zeros((batch, params.hidden))
    for t in reversed(range(length)):
        i, f, o, g = trace.i[:, t], trace.f[:, t], trace.o[:, t], trace.g[:, t]
        c, c_prev, h_prev = trace.c[:, t], trace.c_prev[:, t], trace.h_prev[:, t]
        tanh_c = np.tanh(c)

        dh = dh_inject[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c**2)
        dz_o = dh * tanh_c * o * (1.0 - o)
        dz_i = dc * g * i * (1.0 - i)
        dz_g = dc * i * (1.0 - g**2)
        dz_f = dc * c_prev * f * (1.0 - f)
        dc_next = dc * f

        x_t = x_seq[:, t]
        grads.w_i += x_t.T @ dz_i
        grads.w_f += x_t.T @ dz_f
        grads.w_o += x_t.T @ dz_o
        grads.w_g += x_t.T @ dz_g
        grads.u_i += h_prev.T @ dz_i
        grads.u_f += h_prev.T @ dz_f
        grads.u_o += h_prev.T @ dz_o
        grads.u_g += h_prev.T @ dz_g
        grads.b_i += dz_i.sum(axis=0)
        grads.b_f += dz_f.sum(axis=0)
        grads.b_o += dz_o.sum(axis=0)
        grads.b_g += dz_g.sum(axis=0)

        dx[:, t] = (
            dz_i @ params.w_i.T + dz_f @ params.w_f.T + dz_o @ params.w_o.T + dz_g @ params.w_g.T
        )
        dh_next = (
            dz_i @ params.u_i.T + dz_f @ params.u_f.T + dz_o @ params.u_o.T + dz_g @ params.u_g.T
        )
    return dx, grads


def backward(
    model: DefinitionModel,
    token_ids: np.ndarray,
    lengths: np.ndarray,
    targets: np.ndarray,
    loss_kind: LossKind,
    negatives: np.ndarray | None = None,
    margin: float = MARGIN,
) -> tuple[float, GradientSet]:
    """Mean batch loss and its exact gradient for every trainable parameter.

    Pad positions receive no gradient injection, so they contribute zero;
    the PAD embedding row is pinned to zero gradient explicitly as well.
    """
    token_ids = np.asarray(token_ids)
    lengths = np.asarray(lengths)
    y, (x_seq, x_rev, mask, rows, trace, back_trace, pre) = _forward(model, token_ids, lengths)
    loss, dy = _loss_and_dy(y, targets, LossKind(loss_kind), negatives, margin)

    # projection: y = tanh(pre @ W + b)
    dp = dy * (1.0 - y**2)
    d_proj_w = pre.T @ dp
    d_proj_b = dp.sum(axis=0)
    d_pre = dp @ model.projection.weight.T

    hidden = model.lstm.hidden
    batch, length = token_ids.shape
    dh_inject = np.zeros((batch, length, hidden))
    if model.mode is EncoderMode.FINAL:
        dh_inject[rows, lengths - 1] = d_pre
    elif model.mode is EncoderMode.AVERAGE:
        dh_inject[:] = (d_pre / lengths[:, None])[:, None, :] * mask[:, :, None]
    else:
        dh_inject[rows, lengths - 1] = d_pre[:, :hidden]

    dx, lstm_grads = _lstm_backward(model.lstm, x_seq, trace, dh_inject)

    back_grads = None
    if model.mode is EncoderMode.BIDIRECTIONAL:
        dh_back = np.zeros((batch, length, hidden))
        dh_back[rows, lengths - 1] = d_pre[:, hidden:]
        dx_rev, back_grads = _lstm_backward(model.lstm_back, x_rev, back_trace, dh_back)
        dx += reverse_within_lengths(dx_rev, lengths)

    d_emb = np.zeros_like(model.embeddings.matrix)
    np.add.at(d_emb, token_ids.ravel(), dx.reshape(-1, dx.shape[-1]))
    d_emb[model.embeddings.pad_id] = 0.0

    return loss, GradientSet(
        embeddings=d_emb,
        lstm=lstm_grads,
        lstm_back=back_grads,
        proj_weight=d_proj_w,
        proj_bias=d_proj_b,
    )


def finite_diff_check(
    model: DefinitionModel,
    token_ids: np.ndarray,
    lengths: np.ndarray,
    targets: np.ndarray,
    loss_kind: LossKind,
    negatives: np.ndarray | None = None,
    eps: float = 1e-4,
) -> float:
    """Max relative error between backward() and central differences.

    Perturbs every parameter entry in place; relative error per entry is
    |fd - grad| / max(|fd|, |grad|, 1e-8).
    """
    token_ids = np.asarray(token_ids)
    lengths = np.asarray(lengths)
    _, grads = backward(model, token_ids, lengths, targets, loss_kind, negatives)
    grad_dict = grads.as_dict()

    worst = 0.0
    for name, param in model.param_dict().items():
        grad = grad_dict[name]
        flat_param = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for j in range(flat_param.size):
            orig = flat_param[j]
            flat_param[j] = orig + eps
            up = batch_loss(model, token_ids, lengths, targets, loss_kind, negatives)
            flat_param[j] = orig - eps
            down = batch_loss(model, token_ids, lengths, targets, loss_kind, negatives)
            flat_param[j] = orig
            fd = (up - down) / (2.0 * eps)
            err = abs(fd - flat_grad[j]) / max(abs(fd), abs(flat_grad[j]), 1e-8)
            worst = max(worst, err)
    return worst
