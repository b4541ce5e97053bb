"""Waveform-accuracy indexes over a corpus of (true primary, measured) pairs.

Per pair, the error ratio is computed in both the sup norm and the 2-norm;
the corpus indexes are the worst case and the mean of each:

    e1 = max_k ||i1 - i2||_inf / ||i1||_inf      e2 = mean of the same ratio
    e3 = max_k ||i1 - i2||_2   / ||i1||_2        e4 = mean of the same ratio
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IndexReport:
    """Corpus-level error indexes; smaller is more accurate."""

    e1: float
    e2: float
    e3: float
    e4: float
    n_samples: int
    worst_case_id: str
    per_pair: tuple = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if not (self.e1 >= self.e2 >= 0 and self.e3 >= self.e4 >= 0):
            raise ValueError("index invariants violated (max >= mean >= 0)")

    def to_dict(self) -> dict:
        return {
            "e1": self.e1, "e2": self.e2, "e3": self.e3, "e4": self.e4,
            "n_samples": self.n_samples, "worst_case_id": self.worst_case_id,
            "per_pair": [dict(p) for p in self.per_pair],
        }


def _values(wave) -> np.ndarray:
    return np.asarray(getattr(wave, "values", wave), dtype=float)


def performance_indexes(pairs, ids=None) -> IndexReport:
    """Compute the four indexes over (primary, secondary) pairs.

    `pairs` holds equal-length waveform pairs (records or plain arrays);
    `ids` optionally names each pair for the audit trail. The worst-case id
    refers to the pair attaining e1 (the sup-norm worst case).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty corpus")
    if ids is None:
        ids = [str(i) for i in range(len(pairs))]
    if len(ids) != len(pairs):
        raise ValueError("ids and pairs lengths differ")

    inf_ratios = np.empty(len(pairs))
    two_ratios = np.empty(len(pairs))
    detail = []
    for i, (primary, secondary) in enumerate(pairs):
        p = _values(primary)
        s = _values(secondary)
        if p.shape != s.shape:
            raise ValueError(f"pair {ids[i]}: length mismatch {p.shape} vs {s.shape}")
        norm_inf = float(np.max(np.abs(p)))
        norm_two = float(np.linalg.norm(p))
        if norm_inf == 0.0 or norm_two == 0.0:
            raise ValueError(f"pair {ids[i]}: zero-norm primary")
        inf_ratios[i] = float(np.max(np.abs(p - s))) / norm_inf
        two_ratios[i] = float(np.linalg.norm(p - s)) / norm_two
        detail.append({"id": ids[i], "ratio_inf": inf_ratios[i],
                       "ratio_2": two_ratios[i]})

    return IndexReport(
        e1=float(inf_ratios.max()),
        e2=float(inf_ratios.mean()),
        e3=float(two_ratios.max()),
        e4=float(two_ratios.mean()),
        n_samples=len(pairs),
        worst_case_id=ids[int(np.argmax(inf_ratios))],
        per_pair=tuple(detail),
    )
