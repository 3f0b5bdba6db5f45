"""Min-entropy, leakage and conditional min-entropy estimation.

Prior min-entropy comes from the most-common-value estimate with its 99%
upper confidence bound. Eve's posterior guessing probability is estimated as
one minus the hold-out error of black-box classifiers that predict Alice's
secret from Eve's observation: a frequentist plug-in classifier over binned
observations and a k-nearest-neighbour classifier with ``k = ln(n)``.

The secret may be handled as one symbol or split into equal segments (for
instance one quantized subband per segment). Segment estimates converge with
far fewer samples than whole-block estimates; the block figure is their sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InputError

MIN_PAIRS = 100
METHODS = ("frequentist", "nn", "combined")
Z_99 = 2.576


@dataclass(frozen=True)
class SecretObservationPair:
    secret: np.ndarray
    observation: np.ndarray


@dataclass(frozen=True)
class RiskEstimate:
    error: float
    method: str
    converged: bool
    curve: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class EntropyEstimate:
    min_entropy_bits_per_block: float
    leakage_bits: float
    cme_bits_per_block: float
    cme_per_bit: float
    estimator: str
    sample_count: int
    converged: bool
    block_length: int = 0
    segment_bits: int = 0


def _labels_from_rows(rows) -> np.ndarray:
    rows = np.asarray(rows)
    if rows.ndim == 1:
        rows = rows[:, None]
    _, inverse = np.unique(rows, axis=0, return_inverse=True)
    return inverse.reshape(-1)


def _as_rows(secrets):
    if isinstance(secrets, np.ndarray):
        return secrets
    secrets = list(secrets)
    if secrets and hasattr(secrets[0], "bits"):
        return np.stack([s.bits for s in secrets])
    return np.asarray(secrets)


def mcv_min_entropy(secrets) -> float:
    """Most-common-value min-entropy estimate, in bits per sample.

    ``p_u = min(1, p + 2.576 sqrt(p (1 - p) / (L - 1)))`` where ``p`` is the
    relative frequency of the modal sample; the estimate is ``-log2 p_u``.
    """
    rows = _as_rows(secrets)
    if rows.shape[0] < 2:
        raise InputError("the most-common-value estimate needs at least two samples")
    labels = _labels_from_rows(rows)
    return _mcv_from_labels(labels)


def _mcv_from_labels(labels) -> float:
    count = labels.size
    p_hat = np.bincount(labels).max() / count
    p_u = min(1.0, p_hat + Z_99 * math.sqrt(p_hat * (1 - p_hat) / (count - 1)))
    return -math.log2(p_u)


def _plugin_max_prob(labels) -> float:
    return np.bincount(labels).max() / labels.size


def _split(count, train_fraction, seed):
    order = np.random.default_rng(seed).permutation(count)
    n_train = int(round(train_fraction * count))
    if n_train < 1 or n_train >= count:
        raise InputError(f"train fraction {train_fraction} leaves an empty split")
    return order[:n_train], order[n_train:]


def _prefix_sizes(n_train, points):
    sizes = np.linspace(n_train / points, n_train, points).round().astype(int)
    return np.unique(np.clip(sizes, 1, n_train))


def _mode(labels):
    # most frequent label; ties go to the smallest label value
    return int(np.argmax(np.bincount(labels)))


def _frequentist_curve(train_lab, test_lab, train_obs, test_obs, sizes, bins):
    lo = train_obs.min(axis=0)
    span = train_obs.max(axis=0) - lo
    width = np.where(span > 0, span / bins, 1.0)

    def cell(obs):
        return np.clip(np.floor((obs - lo) / width), 0, bins - 1).astype(np.int64)

    cells = np.concatenate([cell(train_obs), cell(test_obs)])
    _, ids = np.unique(cells, axis=0, return_inverse=True)
    ids = ids.reshape(-1)
    n_ids = int(ids.max()) + 1
    train_ids, test_ids = ids[: len(train_obs)], ids[len(train_obs) :]
    segments = train_lab.shape[1]
    curve = np.empty((len(sizes), segments))
    for p, t in enumerate(sizes):
        for s in range(segments):
            lab = train_lab[:t, s]
            n_lab = int(max(lab.max(), test_lab[:, s].max())) + 1
            key = train_ids[:t] * n_lab + lab
            keys, counts = np.unique(key, return_counts=True)
            key_id, key_lab = keys // n_lab, keys % n_lab
            # per cell: highest count first, then smallest label
            order = np.lexsort((key_lab, -counts, key_id))
            first = np.ones(order.size, dtype=bool)
            first[1:] = key_id[order][1:] != key_id[order][:-1]
            majority = np.full(n_ids, _mode(lab), dtype=np.int64)
            majority[key_id[order][first]] = key_lab[order][first]
            pred = majority[test_ids]
            curve[p, s] = np.mean(pred != test_lab[:, s])
    return curve


def _sq_distances(a, b):
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def _knn_curve(train_lab, test_lab, train_obs, test_obs, sizes, chunk=256):
    segments = train_lab.shape[1]
    wrong = np.zeros((len(sizes), segments))
    for lo in range(0, len(test_obs), chunk):
        dist = _sq_distances(test_obs[lo : lo + chunk], train_obs)
        truth = test_lab[lo : lo + chunk]
        rows = np.arange(dist.shape[0])[:, None]
        for p, t in enumerate(sizes):
            k = min(t, max(1, int(math.log(t))))
            sub = dist[:, :t]
            if k < t:
                idx = np.argpartition(sub, k - 1, axis=1)[:, :k]
            else:
                idx = np.broadcast_to(np.arange(t), (sub.shape[0], t))
            # order neighbours by distance, then by training position
            order = np.lexsort((idx, sub[rows, idx]), axis=1)
            idx = idx[rows, order]
            labs = train_lab[idx]  # (chunk, k, segments)
            votes = (labs[:, :, None, :] == labs[:, None, :, :]).sum(axis=2)
            best = np.argmax(votes, axis=1)  # first maximum = nearest among tied labels
            pred = np.take_along_axis(labs, best[:, None, :], axis=1)[:, 0, :]
            wrong[p] += (pred != truth).sum(axis=0)
    return wrong / len(test_obs)


def _risk_curves(labels, observations, method, train_fraction, seed, bins, points):
    labels = np.asarray(labels)
    if labels.ndim == 1:
        labels = labels[:, None]
    observations = np.asarray(observations, dtype=float)
    if observations.ndim == 1:
        observations = observations[:, None]
    count = labels.shape[0]
    if observations.shape[0] != count:
        raise InputError(f"{count} secrets but {observations.shape[0]} observations")
    if count < MIN_PAIRS:
        raise ConvergenceError(f"need at least {MIN_PAIRS} pairs, got {count}")
    if not np.all(np.isfinite(observations)):
        raise InputError("observations contain non-finite values")
    train, test = _split(count, train_fraction, seed)
    sizes = _prefix_sizes(len(train), points)
    args = (labels[train], labels[test], observations[train], observations[test], sizes)
    curves = {}
    if method in ("frequentist", "combined"):
        curves["frequentist"] = _frequentist_curve(*args, bins)
    if method in ("nn", "combined"):
        curves["nn"] = _knn_curve(*args)
    if not curves:
        raise InputError(f"unknown method {method!r}; expected one of {METHODS}")
    return curves


def _converged(curve, window, delta):
    tail = curve[-window:]
    return bool(np.all(np.abs(tail - curve[-1]) <= delta))


def estimate_bayes_risk(
    labels,
    observations,
    method="combined",
    *,
    train_fraction=0.75,
    seed=0,
    bins=128,
    points=20,
    window=10,
    delta=0.01,
) -> RiskEstimate:
    """Hold-out Bayes-risk estimate for predicting ``labels`` from ``observations``.

    The classifiers are retrained on growing prefixes of the training split;
    the estimate counts as converged when the test error moved by at most
    ``delta`` over the last ``window`` prefixes. ``combined`` reports the
    smaller of the two errors.
    """
    labels = _labels_from_rows(labels)
    curves = _risk_curves(labels, observations, method, train_fraction, seed, bins, points)
    finals = {name: float(c[-1, 0]) for name, c in curves.items()}
    best = min(finals, key=lambda name: (finals[name], name))
    return RiskEstimate(
        error=finals[best],
        method=best if method != "combined" else "combined",
        converged=all(_converged(c[:, 0], window, delta) for c in curves.values()),
        curve=tuple(curves[best][:, 0]),
    )


def fbleau_bayes_risk(pairs, method="combined", **kwargs) -> float:
    """Bayes-risk estimate from a sequence of :class:`SecretObservationPair`."""
    pairs = list(pairs)
    if len(pairs) < MIN_PAIRS:
        raise ConvergenceError(f"need at least {MIN_PAIRS} pairs, got {len(pairs)}")
    secrets = np.stack([np.atleast_1d(np.asarray(p.secret)) for p in pairs])
    obs = np.stack([np.atleast_1d(np.asarray(p.observation, dtype=float)) for p in pairs])
    return estimate_bayes_risk(_labels_from_rows(secrets), obs, method, **kwargs).error


def segment_labels(bits, segment_bits) -> np.ndarray:
    """Integer label of every ``segment_bits``-wide slice of each block, ``(F, S)``."""
    bits = np.asarray(bits, dtype=np.int64)
    if segment_bits is None:
        return _labels_from_rows(bits)[:, None]
    if segment_bits < 1 or bits.shape[1] % segment_bits:
        raise InputError(f"block of {bits.shape[1]} bits cannot split into {segment_bits}-bit segments")
    if segment_bits > 62:
        raise InputError("segments wider than 62 bits are not supported")
    weights = 1 << np.arange(segment_bits - 1, -1, -1, dtype=np.int64)
    return bits.reshape(bits.shape[0], -1, segment_bits) @ weights


def conditional_min_entropy(
    secrets,
    observations,
    *,
    segment_bits=None,
    method="combined",
    max_bits=None,
    prior="mcv",
    train_fraction=0.75,
    seed=0,
    bins=128,
    points=20,
    window=10,
    delta=0.01,
) -> EntropyEstimate:
    """Conditional min-entropy of Alice's blocks given Eve's observations.

    Per segment: ``H`` is the prior min-entropy, ``P`` the classifier success
    rate, leakage ``max(0, log2 P - log2 p_max)`` and CME ``max(0, H - leakage)``.
    Block values are sums over segments; ``max_bits`` caps the block CME (the
    syndrome of a length-``n`` block with ``m`` public bits leaves at most
    ``n - m`` bits of uncertainty).
    """
    rows = _as_rows(secrets)
    if rows.ndim != 2:
        raise InputError("secrets must form a 2-D bit array")
    block_length = rows.shape[1]
    if prior not in ("mcv", "plugin"):
        raise InputError(f"unknown prior estimator {prior!r}")
    raw = segment_labels(rows, segment_bits)
    labels = np.column_stack([_labels_from_rows(raw[:, s]) for s in range(raw.shape[1])])
    curves = _risk_curves(labels, observations, method, train_fraction, seed, bins, points)
    final = np.min(np.stack([c[-1] for c in curves.values()]), axis=0)
    converged = all(
        _converged(c[:, s], window, delta) for c in curves.values() for s in range(labels.shape[1])
    )

    h_total = cme_total = 0.0
    for s in range(labels.shape[1]):
        seg = labels[:, s]
        p_max = _plugin_max_prob(seg)
        h = _mcv_from_labels(seg) if prior == "mcv" else -math.log2(p_max)
        success = 1.0 - final[s]
        leak = max(0.0, math.log2(success) - math.log2(p_max)) if success > 0 else 0.0
        h_total += h
        cme_total += max(0.0, h - leak)
    if max_bits is not None:
        cme_total = min(cme_total, float(max_bits))
    cme_total = min(cme_total, float(block_length))
    return EntropyEstimate(
        min_entropy_bits_per_block=h_total,
        leakage_bits=h_total - cme_total,
        cme_bits_per_block=cme_total,
        cme_per_bit=cme_total / block_length,
        estimator=method,
        sample_count=rows.shape[0],
        converged=converged,
        block_length=block_length,
        segment_bits=segment_bits or block_length,
    )


def apply_safety_margin(est: EntropyEstimate, margin: float = 0.1) -> float:
    """Per-bit CME budget after compressing ``margin`` more than estimated."""
    return (1.0 - margin) * est.cme_per_bit


def eve_observation(eve_powers, syndromes, mode="powers", eve_bits=None) -> np.ndarray:
    """Feature vector Eve conditions on: her measurements next to the public syndrome.

    ``mode="powers"`` uses her subband powers in dB, rescaled per frame to
    ``[0, 1]`` (the same normalization that drives the quantizer);
    ``mode="bits"`` uses her own quantized block instead.
    """
    syndromes = np.asarray(syndromes, dtype=float)
    if mode == "powers":
        db = 10 * np.log10(np.maximum(np.asarray(eve_powers, dtype=float), np.finfo(float).tiny))
        lo = db.min(axis=1, keepdims=True)
        span = db.max(axis=1, keepdims=True) - lo
        features = (db - lo) / np.where(span > 0, span, 1.0)
    elif mode == "bits":
        if eve_bits is None:
            raise InputError("mode='bits' needs Eve's quantized blocks")
        features = np.asarray(eve_bits, dtype=float)
    else:
        raise InputError(f"unknown observation mode {mode!r}")
    if features.shape[0] != syndromes.shape[0]:
        raise InputError("Eve's measurements and syndromes cover different frame counts")
    return np.hstack([features, syndromes])
