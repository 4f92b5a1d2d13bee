"""Two-state sequence classifiers over per-second sensor columns.

Both variants share factored per-sensor Bernoulli emissions.  The
dynamic-naive-Bayes variant fixes the transition matrix to be
state-independent, which collapses posterior decoding to per-second
Bayes rule; the hidden-Markov variant keeps learned transitions and is
decoded with scaled forward-backward.

Nine-year tracks are ~2.8e8 seconds, so decoding never loops per
second in Python: the timeline is cut into runs of constant sensor
columns, boundary states propagate run-to-run with matrix powers, and
the per-second recursions inside runs execute jointly for all runs in
lockstep (total work stays O(T) numpy element operations).
"""

from __future__ import annotations

import math

import numpy as np

from ..features import ActivationMatrix, LabelTrack
from ..metrics import label_intervals

FORMAT_VERSION = 1
SMOOTHING = 1.0
VITERBI_MAX_SECONDS = 5_000_000


class SequenceModel:
    """Initial/transition/emission parameters for the two-state chain."""

    def __init__(
        self,
        variant: str,
        pi: np.ndarray,
        transitions: np.ndarray,
        emissions: np.ndarray,
        sensor_ids: tuple[int, ...],
    ):
        if variant not in ("dnb", "hmm"):
            raise ValueError("variant must be 'dnb' or 'hmm'")
        self.variant = variant
        self.pi = np.asarray(pi, dtype=float)
        self.transitions = np.asarray(transitions, dtype=float)
        self.emissions = np.asarray(emissions, dtype=float)
        self.sensor_ids = tuple(sensor_ids)
        if self.transitions.shape != (2, 2):
            raise ValueError("transition matrix must be 2x2")
        if self.emissions.shape != (2, len(self.sensor_ids)):
            raise ValueError("emissions must be 2 x number of sensors")

    def to_dict(self) -> dict:
        return {
            "model": "sequence",
            "version": FORMAT_VERSION,
            "variant": self.variant,
            "pi": self.pi.tolist(),
            "transitions": self.transitions.tolist(),
            "emissions": self.emissions.tolist(),
            "sensor_ids": list(self.sensor_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SequenceModel":
        return cls(
            data["variant"],
            np.array(data["pi"]),
            np.array(data["transitions"]),
            np.array(data["emissions"]),
            tuple(data["sensor_ids"]),
        )


def _overlap_seconds(runs: np.ndarray, intervals: np.ndarray) -> int:
    """Shared seconds between sensor runs and label intervals (as runs)."""
    total = 0
    i = j = 0
    while i < len(runs) and j < len(intervals):
        lo = max(runs[i, 0], intervals[j, 0])
        hi = min(runs[i, 1], intervals[j, 1])
        if lo <= hi:
            total += int(hi - lo + 1)
        if runs[i, 1] < intervals[j, 1]:
            i += 1
        else:
            j += 1
    return total


def fit_sequence(
    matrix: ActivationMatrix,
    labels: LabelTrack,
    variant: str,
    sensor_ids: tuple[int, ...] | None = None,
    smoothing: float = SMOOTHING,
) -> SequenceModel:
    """Supervised maximum-likelihood fit from labelled seconds.

    Transition and emission counts come straight from the label
    intervals and activation runs (additive ``smoothing`` applied), so
    fitting never expands the track.  Raises when only one class is
    present.
    """
    if labels.unit_seconds != 1:
        raise ValueError("sequence models train on one-second labels")
    if labels.length != matrix.total_seconds:
        raise ValueError("labels and matrix cover different horizons")
    if sensor_ids is None:
        sensor_ids = tuple(range(matrix.sensor_count))
    T = labels.length
    n1 = labels.positive_units
    n0 = T - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("training labels contain a single class")

    ivs = np.array(labels.intervals.intervals, dtype=np.int64).reshape(-1, 2)
    # Label index k is second k+1; transition counts read off the runs.
    n01 = int((ivs[:, 0] > 0).sum())
    n10 = int((ivs[:, 1] < T - 1).sum())
    n11 = int((ivs[:, 1] - ivs[:, 0]).sum())
    n00 = (T - 1) - n01 - n10 - n11

    s = smoothing
    if variant == "hmm":
        transitions = np.array(
            [
                [n00 + s, n01 + s],
                [n10 + s, n11 + s],
            ]
        )
        transitions /= transitions.sum(axis=1, keepdims=True)
    else:
        into0 = n00 + n10 + s
        into1 = n01 + n11 + s
        row = np.array([into0, into1]) / (into0 + into1)
        transitions = np.stack([row, row])

    first_label = 1 if (len(ivs) and ivs[0, 0] == 0) else 0
    pi = np.full(2, s)
    pi[first_label] += 1.0
    pi /= pi.sum()

    second_ivs = ivs + 1  # 1-based second runs
    emissions = np.empty((2, len(sensor_ids)))
    for k, sid in enumerate(sensor_ids):
        runs = matrix.runs[sid]
        active_total = matrix.active_seconds(sid)
        active_pos = _overlap_seconds(runs, second_ivs) if len(runs) else 0
        emissions[1, k] = (active_pos + s) / (n1 + 2 * s)
        emissions[0, k] = (active_total - active_pos + s) / (n0 + 2 * s)
    return SequenceModel(variant, pi, transitions, emissions, sensor_ids)


def _column_runs(matrix: ActivationMatrix, model: SequenceModel):
    """Constant-column runs and per-run scaled emission likelihoods.

    Returns (run start seconds, run lengths, e) with e[r] the per-state
    emission likelihood of the run's column, scaled to max 1.
    """
    kmap = {sid: k for k, sid in enumerate(model.sensor_ids)}
    bounds = matrix.column_change_seconds(list(model.sensor_ids))
    starts = bounds[:-1]
    lens = np.diff(bounds)
    R = len(starts)

    logb = np.log(model.emissions)
    log1mb = np.log1p(-model.emissions)
    base = log1mb.sum(axis=1)  # all-quiet column
    w = logb - log1mb

    delta = np.zeros((R + 1, 2))
    for sid in model.sensor_ids:
        runs = matrix.runs[sid]
        if not len(runs):
            continue
        ia = np.searchsorted(starts, runs[:, 0])
        ib = np.searchsorted(starts, runs[:, 1] + 1)
        for state in (0, 1):
            np.add.at(delta[:, state], ia, w[state, kmap[sid]])
            np.add.at(delta[:, state], ib, -w[state, kmap[sid]])
    loge = base[None, :] + np.cumsum(delta[:-1], axis=0)
    e = np.exp(loge - loge.max(axis=1, keepdims=True))
    return starts, lens, e


def _mat_power_apply_T(m: np.ndarray, power: int, v: np.ndarray) -> np.ndarray:
    """Normalised (m^T)^power v by squaring; scale-free."""
    result = v.copy()
    base = m.copy()
    p = power
    while p:
        if p & 1:
            result = base.T @ result
            result /= result.sum()
        base = base @ base
        base /= base.max()
        p >>= 1
    return result


def _mat_power_apply(m: np.ndarray, power: int, v: np.ndarray) -> np.ndarray:
    result = v.copy()
    base = m.copy()
    p = power
    while p:
        if p & 1:
            result = base @ result
            result /= result.sum()
        base = base @ base
        base /= base.max()
        p >>= 1
    return result


def predict_sequence(
    model: SequenceModel,
    matrix: ActivationMatrix,
    method: str = "posterior",
) -> LabelTrack:
    """Per-second labels: smoothed posterior argmax (ties to 0).

    ``method='viterbi'`` selects max-product decoding instead, limited
    to tracks short enough for its sequential backtrace.
    """
    expected = max(model.sensor_ids) + 1
    if matrix.sensor_count < expected:
        raise ValueError(
            f"model references sensor {expected - 1}, stream has {matrix.sensor_count}"
        )
    if method == "viterbi":
        return _predict_viterbi(model, matrix)
    if method != "posterior":
        raise ValueError("method must be 'posterior' or 'viterbi'")

    T = matrix.total_seconds
    starts, lens, e = _column_runs(matrix, model)
    R = len(starts)
    A = model.transitions

    if model.variant == "dnb":
        # State-independent transitions: the posterior is per-second
        # Bayes rule with the stationary prior, constant inside runs.
        prior = A[0]
        score1 = prior[1] * e[:, 1]
        score0 = prior[0] * e[:, 0]
        labels_runs = score1 > score0
        out = np.zeros(T, dtype=np.int8)
        for r in np.flatnonzero(labels_runs):
            out[starts[r] - 1 : starts[r] - 1 + lens[r]] = 1
        return LabelTrack(T, 1, label_intervals(out))

    M = A[None, :, :] * e[:, None, :]  # M[r][j, k] = A[j,k] e_r(k)

    # Boundary pass: alpha at each run's first second, then the
    # normalised alpha leaving the run.
    alpha_first = np.empty((R, 2))
    v = model.pi * e[0]
    v /= v.sum()
    alpha_first[0] = v
    v = _mat_power_apply_T(M[0], int(lens[0]) - 1, v)
    for r in range(1, R):
        av = M[r].T @ v
        av /= av.sum()
        alpha_first[r] = av
        v = _mat_power_apply_T(M[r], int(lens[r]) - 1, av) if lens[r] > 1 else av

    beta_last = np.empty((R, 2))
    bv = np.array([0.5, 0.5])
    beta_last[R - 1] = bv
    for r in range(R - 2, -1, -1):
        bv = _mat_power_apply(M[r + 1], int(lens[r + 1]), bv)
        beta_last[r] = bv

    # Jagged in-run passes, all runs in lockstep by step index.
    order = np.argsort(-lens, kind="stable")
    so_starts = starts[order]
    so_lens = lens[order]
    so_M = M[order]
    ratio = np.zeros(T, dtype=np.float32)

    cur = alpha_first[order]
    step = 0
    active = R
    max_len = int(so_lens[0]) if R else 0
    while step < max_len:
        active = int(np.searchsorted(-so_lens, -step, side="left"))
        if active == 0:
            break
        if step > 0:
            cur_a = np.einsum("rj,rjk->rk", cur[:active], so_M[:active])
            cur_a /= cur_a.sum(axis=1, keepdims=True)
            cur[:active] = cur_a
        pos = so_starts[:active] - 1 + step
        ratio[pos] = np.log(cur[:active, 1] / cur[:active, 0]).astype(np.float32)
        step += 1

    cur = beta_last[order]
    step = 0
    while step < max_len:
        active = int(np.searchsorted(-so_lens, -step, side="left"))
        if active == 0:
            break
        if step > 0:
            cur_b = np.einsum("rjk,rk->rj", so_M[:active], cur[:active])
            cur_b /= cur_b.sum(axis=1, keepdims=True)
            cur[:active] = cur_b
        pos = so_starts[:active] - 1 + (so_lens[:active] - 1) - step
        ratio[pos] += np.log(cur[:active, 1] / cur[:active, 0]).astype(np.float32)
        step += 1

    labels = (ratio > 0).astype(np.int8)
    return LabelTrack(T, 1, label_intervals(labels))


def _predict_viterbi(model: SequenceModel, matrix: ActivationMatrix) -> LabelTrack:
    T = matrix.total_seconds
    if T > VITERBI_MAX_SECONDS:
        raise ValueError(
            f"viterbi decoding is limited to {VITERBI_MAX_SECONDS} seconds; use posterior"
        )
    starts, lens, e = _column_runs(matrix, model)
    logA = np.log(model.transitions)
    loge = np.log(np.maximum(e, 1e-300))
    run_of_second = np.repeat(np.arange(len(starts)), lens)

    delta = np.log(model.pi) + loge[run_of_second[0]]
    ptr = np.zeros((T, 2), dtype=np.int8)
    for t in range(1, T):
        cand = delta[:, None] + logA
        ptr[t] = np.argmax(cand, axis=0)
        delta = cand[ptr[t], [0, 1]] + loge[run_of_second[t]]
    labels = np.zeros(T, dtype=np.int8)
    labels[T - 1] = int(np.argmax(delta))
    for t in range(T - 2, -1, -1):
        labels[t] = ptr[t + 1][labels[t + 1]]
    return LabelTrack(T, 1, label_intervals(labels))


def posterior_dense(model: SequenceModel, columns: np.ndarray) -> np.ndarray:
    """Reference scaled forward-backward over dense columns (S x T).

    Small inputs only; used for validation against exhaustive
    enumeration and for posterior-normalisation checks.
    """
    S, T = columns.shape
    if S != len(model.sensor_ids):
        raise ValueError("column count does not match model sensors")
    b = model.emissions
    e = np.empty((T, 2))
    for t in range(T):
        x = columns[:, t]
        e[t] = np.prod(np.where(x[None, :] == 1, b, 1 - b), axis=1)
    A = model.transitions
    alpha = np.empty((T, 2))
    scale = np.empty(T)
    alpha[0] = model.pi * e[0]
    scale[0] = alpha[0].sum()
    alpha[0] /= scale[0]
    for t in range(1, T):
        alpha[t] = (alpha[t - 1] @ A) * e[t]
        scale[t] = alpha[t].sum()
        alpha[t] /= scale[t]
    beta = np.empty((T, 2))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = A @ (e[t + 1] * beta[t + 1])
        beta[t] /= scale[t + 1]
    post = alpha * beta
    post /= post.sum(axis=1, keepdims=True)
    return post


def complete_loglik(
    model: SequenceModel, matrix: ActivationMatrix, labels: LabelTrack
) -> float:
    """Joint log-likelihood of the labelled training sequence."""
    T = labels.length
    ivs = np.array(labels.intervals.intervals, dtype=np.int64).reshape(-1, 2)
    n1 = labels.positive_units
    n0 = T - n1
    n01 = int((ivs[:, 0] > 0).sum())
    n10 = int((ivs[:, 1] < T - 1).sum())
    n11 = int((ivs[:, 1] - ivs[:, 0]).sum())
    n00 = (T - 1) - n01 - n10 - n11
    first_label = 1 if (len(ivs) and ivs[0, 0] == 0) else 0

    logA = np.log(model.transitions)
    ll = math.log(model.pi[first_label])
    ll += n00 * logA[0, 0] + n01 * logA[0, 1] + n10 * logA[1, 0] + n11 * logA[1, 1]
    second_ivs = ivs + 1
    for k, sid in enumerate(model.sensor_ids):
        runs = matrix.runs[sid]
        active_total = matrix.active_seconds(sid)
        active_pos = _overlap_seconds(runs, second_ivs) if len(runs) else 0
        active_neg = active_total - active_pos
        ll += active_pos * math.log(model.emissions[1, k])
        ll += (n1 - active_pos) * math.log1p(-model.emissions[1, k])
        ll += active_neg * math.log(model.emissions[0, k])
        ll += (n0 - active_neg) * math.log1p(-model.emissions[0, k])
    return ll
