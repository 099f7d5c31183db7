"""SNR estimators and word error rate."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .signals import AudioSignal

SNR_CEILING_DB = 300.0


@dataclass(frozen=True)
class Transcript:
    words: tuple

    def __post_init__(self):
        words = tuple(self.words)
        for w in words:
            if not w or any(c.isspace() for c in w):
                raise ValueError(f"invalid token {w!r}")
        object.__setattr__(self, "words", words)

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.reference_length


_PUNCT = re.compile(r"[^\w\s']")


def tokenize(text: str) -> Transcript:
    """Lowercase, drop punctuation (keeping in-word apostrophes), split on whitespace."""
    cleaned = _PUNCT.sub(" ", text.lower())
    words = [w.strip("'") for w in cleaned.split()]
    return Transcript(tuple(w for w in words if w))


def align(reference, hypothesis) -> list[tuple[str, object, object]]:
    """Minimum-edit alignment as a list of ``(op, ref_word, hyp_word)``.

    ``op`` is one of ``"="``, ``"S"``, ``"D"``, ``"I"``. Among optimal paths a
    substitution is preferred over a deletion/insertion pair.
    """
    ref, hyp = list(reference), list(hypothesis)
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=int)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            d[i, j] = min(diag, d[i - 1, j] + 1, d[i, j - 1] + 1)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops.append(("=" if ref[i - 1] == hyp[j - 1] else "S", ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            ops.append(("D", ref[i - 1], None))
            i -= 1
        else:
            ops.append(("I", None, hyp[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def wer(reference: Transcript, hypothesis: Transcript) -> WerBreakdown:
    """Word error rate ``(S + D + I) / N`` over a minimum-edit alignment."""
    if len(reference.words) < 1:
        raise ValueError("N must be >= 1: the reference transcript is empty")
    ops = align(reference.words, hypothesis.words)
    counts = {"S": 0, "D": 0, "I": 0}
    for op, _, _ in ops:
        if op in counts:
            counts[op] += 1
    return WerBreakdown(counts["S"], counts["D"], counts["I"], len(reference.words))


def _same_shape(signal: AudioSignal, other: AudioSignal):
    if signal.sample_rate != other.sample_rate:
        raise ValueError(f"sample rates differ: {signal.sample_rate} vs {other.sample_rate}")
    if signal.samples.size != other.samples.size:
        raise ValueError(f"lengths differ: {signal.samples.size} vs {other.samples.size}")


def snr_reference(signal: AudioSignal, reference: AudioSignal) -> float:
    """Scale-invariant SNR of ``signal`` against a clean reference, in dB.

    The reference is first scaled by the least-squares gain that best explains
    the signal; whatever that scaled reference does not explain counts as
    noise. Exact (or exactly scaled) matches return ``SNR_CEILING_DB``; results
    are clipped to +-``SNR_CEILING_DB``.
    """
    _same_shape(signal, reference)
    r = reference.samples
    s = signal.samples
    rr = float(np.dot(r, r))
    if rr == 0.0:
        raise ValueError("reference is all zero")
    g = float(np.dot(s, r)) / rr
    target = g * r
    resid = float(np.sum((s - target) ** 2))
    power = float(np.dot(target, target))
    if resid == 0.0:
        return SNR_CEILING_DB
    if power == 0.0:
        return -SNR_CEILING_DB
    return float(np.clip(10.0 * np.log10(power / resid), -SNR_CEILING_DB, SNR_CEILING_DB))


def snr_segments(signal: AudioSignal, silence_mask) -> float:
    """Mean power over non-silent samples relative to silent ones, in dB."""
    mask = np.asarray(silence_mask, dtype=bool)
    if mask.shape != signal.samples.shape:
        raise ValueError(f"mask length {mask.size} != signal length {signal.samples.size}")
    if mask.all() or not mask.any():
        raise ValueError("both speech and silence segments must be non-empty")
    x = signal.samples
    speech = np.mean(x[~mask] ** 2)
    silence = np.mean(x[mask] ** 2)
    if silence == 0.0:
        return SNR_CEILING_DB
    if speech == 0.0:
        return -SNR_CEILING_DB
    return float(10.0 * np.log10(speech / silence))
