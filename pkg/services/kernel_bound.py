"""
Kernel margin bounds for near-miss premises.

Works over a surrogate kernel on token sequences: the fraction of
positions at which two (padded) sequences carry the same token. Its
explicit feature map is a positional one-hot vector scaled by 1/sqrt(L),
so K(a, a) = 1 and every feature vector has norm kappa = 1.

For two inputs with kernel cosine 1 - delta, any linear scorer with
weight norm B separates them by at most B * kappa * sqrt(2 * delta);
reaching a margin gamma needs B >= gamma / (kappa * sqrt(2 * delta)).
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .dag_core import Dag, discrimination_set
from .errors import InputError
from .premise_text import CiPolicy, render_premise

logger = logging.getLogger(__name__)

PAD_TOKEN = '<pad>'
NORM_TOLERANCE = 1e-12


def tokenize(text: str) -> list[str]:
    """Whitespace tokens, case-folded."""
    return [t.casefold() for t in text.split()]


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, 'tokens', tuple(self.tokens))
        if not self.tokens:
            raise InputError("A token sequence needs at least one token")

    @classmethod
    def from_text(cls, text: str) -> 'TokenSeq':
        return cls(tuple(tokenize(text)))

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, eq=False)
class FeatureVec:
    coordinates: np.ndarray
    norm_bound: float = 1.0

    def __post_init__(self):
        coords = np.asarray(self.coordinates, dtype=float)
        if coords.ndim != 1 or not np.all(np.isfinite(coords)):
            raise InputError("Feature coordinates must be a finite vector")
        if np.linalg.norm(coords) > self.norm_bound + NORM_TOLERANCE:
            raise InputError(f"Feature norm {np.linalg.norm(coords):.6f} exceeds kappa={self.norm_bound}")
        object.__setattr__(self, 'coordinates', coords)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coordinates))


@dataclass
class SimilarityReport:
    delta: float
    kernel_cosine: float
    margin_bound: float
    achieved_margin: float
    required_b: float

    def to_dict(self) -> dict:
        return {
            'delta': self.delta,
            'kernel_cosine': self.kernel_cosine,
            'margin_bound': self.margin_bound,
            'achieved_margin': self.achieved_margin,
            'required_b': self.required_b
        }


def pad_pair(a: TokenSeq, b: TokenSeq) -> tuple[tuple[str, ...], tuple[str, ...]]:
    length = max(a.length, b.length)
    return (a.tokens + (PAD_TOKEN,) * (length - a.length),
            b.tokens + (PAD_TOKEN,) * (length - b.length))


def surrogate_kernel(a: TokenSeq, b: TokenSeq) -> float:
    """Fraction of positions where the padded sequences agree."""
    left, right = pad_pair(a, b)
    return sum(x == y for x, y in zip(left, right)) / len(left)


def delta_similarity(a: TokenSeq, b: TokenSeq) -> float:
    """
    delta = 1 - K(a, b) / sqrt(K(a, a) * K(b, b)).

    Raises:
        InputError: If either self-kernel is zero
    """
    kaa, kbb = surrogate_kernel(a, a), surrogate_kernel(b, b)
    if kaa <= 0 or kbb <= 0:
        raise InputError("delta is undefined for a sequence with zero self-kernel")
    return min(1.0, max(0.0, 1.0 - surrogate_kernel(a, b) / math.sqrt(kaa * kbb)))


def common_prefix_length(a: TokenSeq, b: TokenSeq) -> int:
    left, right = pad_pair(a, b)
    for k, (x, y) in enumerate(zip(left, right)):
        if x != y:
            return k
    return len(left)


def prefix_delta_bound(a: TokenSeq, b: TokenSeq, c: float = 2.0) -> float:
    """c * (L - l) / L for the shared prefix length l."""
    length = max(a.length, b.length)
    return c * (length - common_prefix_length(a, b)) / length


def margin_bound(b_norm: float, kappa: float, delta: float) -> float:
    if min(b_norm, kappa, delta) < 0:
        raise InputError("margin_bound arguments must be non-negative")
    return b_norm * kappa * math.sqrt(2.0 * delta)


def required_b(gamma: float, kappa: float, delta: float) -> float:
    """Smallest weight norm reaching margin gamma; infinite when delta is 0."""
    if min(gamma, kappa, delta) < 0:
        raise InputError("required_b arguments must be non-negative")
    if gamma == 0:
        return 0.0
    if delta == 0 or kappa == 0:
        return math.inf
    return gamma / (kappa * math.sqrt(2.0 * delta))


def max_achievable_margin(phi_plus: FeatureVec, phi_minus: FeatureVec, b_norm: float) -> float:
    """B * ||phi_plus - phi_minus||, attained by w along the difference."""
    if phi_plus.coordinates.shape != phi_minus.coordinates.shape:
        raise InputError("Feature vectors differ in dimension")
    return b_norm * float(np.linalg.norm(phi_plus.coordinates - phi_minus.coordinates))


def feature_delta(phi_plus: FeatureVec, phi_minus: FeatureVec) -> float:
    """1 - cosine of the two feature vectors, in [0, 2]."""
    denom = phi_plus.norm * phi_minus.norm
    if denom == 0:
        raise InputError("delta is undefined for a zero feature vector")
    cosine = float(np.dot(phi_plus.coordinates, phi_minus.coordinates)) / denom
    return min(2.0, max(0.0, 1.0 - cosine))


def positional_features(seqs: Sequence[TokenSeq]) -> list[FeatureVec]:
    """
    Explicit feature map of the surrogate kernel over a shared vocabulary.

    One block per position, one coordinate per token, scaled by 1/sqrt(L)
    so that <phi(a), phi(b)> = K(a, b).
    """
    if not seqs:
        return []
    length = max(s.length for s in seqs)
    vocab = sorted({t for s in seqs for t in s.tokens} | {PAD_TOKEN})
    index = {t: k for k, t in enumerate(vocab)}
    scale = 1.0 / math.sqrt(length)
    features = []
    for s in seqs:
        padded = s.tokens + (PAD_TOKEN,) * (length - s.length)
        coords = np.zeros(length * len(vocab))
        coords[[pos * len(vocab) + index[t] for pos, t in enumerate(padded)]] = scale
        features.append(FeatureVec(coords, norm_bound=1.0))
    return features


def similarity_report(phi_plus: FeatureVec, phi_minus: FeatureVec, b_norm: float = 1.0,
                      gamma: float = 1.0) -> SimilarityReport:
    kappa = max(phi_plus.norm_bound, phi_minus.norm_bound)
    delta = feature_delta(phi_plus, phi_minus)
    return SimilarityReport(
        delta=delta,
        kernel_cosine=1.0 - delta,
        margin_bound=margin_bound(b_norm, kappa, delta),
        achieved_margin=max_achievable_margin(phi_plus, phi_minus, b_norm),
        required_b=required_b(gamma, kappa, delta)
    )


def sequence_report(a: TokenSeq, b: TokenSeq, b_norm: float = 1.0, gamma: float = 1.0) -> SimilarityReport:
    phi_a, phi_b = positional_features([a, b])
    return similarity_report(phi_a, phi_b, b_norm, gamma)


def interventional_rho(response_plus: TokenSeq, response_minus: TokenSeq) -> float:
    """1 - cosine of the two answer sequences; 1.0 for 'yes' vs 'no'."""
    return delta_similarity(response_plus, response_minus)


@dataclass
class NearMissPair:
    """Chain/fork pair embedded in d variables with their rendered sequences."""
    g_plus: Dag
    g_minus: Dag
    premise: str
    seq_plus: TokenSeq
    seq_minus: TokenSeq
    answer_plus: TokenSeq
    answer_minus: TokenSeq

    @property
    def delta(self) -> float:
        return delta_similarity(self.seq_plus, self.seq_minus)

    @property
    def rho(self) -> float:
        return interventional_rho(self.answer_plus, self.answer_minus)


def near_miss_factory(d: int) -> NearMissPair:
    """
    V1 -> V2 -> V3 versus V1 <- V2 -> V3, with V2 -> Vk for every k >= 4.

    Both graphs share one premise. Each sequence is the premise followed by
    a one-sentence reasoning step whose last word differs, so the pair
    differs in a single token out of L = Theta(d^2).
    """
    if d < 3:
        raise InputError(f"near_miss_factory needs d >= 3, got {d}")
    names = [f"V{k + 1}" for k in range(d)]
    shared = [(1, k) for k in range(3, d)]
    g_plus = Dag.from_edges(names, [(0, 1), (1, 2)] + shared)
    g_minus = Dag.from_edges(names, [(1, 0), (1, 2)] + shared)
    premise, _ = render_premise(g_plus, CiPolicy.MINIMAL)
    minus_premise, _ = render_premise(g_minus, CiPolicy.MINIMAL)
    if premise != minus_premise:
        raise InputError("Near-miss graphs rendered different premises")
    if not discrimination_set(g_plus, g_minus):
        raise InputError("Near-miss graphs are interventionally indistinguishable")
    step = "Under do(V1) the variable V3 {}"
    return NearMissPair(
        g_plus=g_plus,
        g_minus=g_minus,
        premise=premise,
        seq_plus=TokenSeq.from_text(f"{premise} {step.format('changes.')}"),
        seq_minus=TokenSeq.from_text(f"{premise} {step.format('stays.')}"),
        answer_plus=TokenSeq(('yes',)),
        answer_minus=TokenSeq(('no',))
    )


@dataclass
class KernelSweepRow:
    d: int
    length: int
    delta: float
    margin_bound: float
    required_b: float
    rho: float

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'L': self.length,
            'delta': self.delta,
            'margin_bound': self.margin_bound,
            'required_b': self.required_b,
            'rho': self.rho
        }


def sweep(d_values: Iterable[int], b_norm: float = 1.0, gamma: float = 1.0,
          kappa: Optional[float] = None) -> list[KernelSweepRow]:
    """Near-miss statistics for each d."""
    kappa = 1.0 if kappa is None else kappa
    rows = []
    for d in d_values:
        pair = near_miss_factory(d)
        delta = pair.delta
        rows.append(KernelSweepRow(
            d=d,
            length=max(pair.seq_plus.length, pair.seq_minus.length),
            delta=delta,
            margin_bound=margin_bound(b_norm, kappa, delta),
            required_b=required_b(gamma, kappa, delta),
            rho=pair.rho
        ))
        logger.debug(f"Kernel sweep d={d}: L={rows[-1].length}, delta={delta:.6f}")
    return rows
