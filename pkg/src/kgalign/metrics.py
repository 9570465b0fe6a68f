"""Alignment quality metrics and diagnostics.

Precision counts correct matches over produced matches, recall over gold
matches, F1 is their harmonic mean. Ranking metrics (hits at k, mean
reciprocal rank) apply when full ranked candidate lists are available.
Edit-distance statistics over gold pairs and the precision of confident
correspondences support dataset and fusion diagnostics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .collective import AlignmentResult
from .errors import EvaluationError
from .names import levenshtein


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    hits: dict[int, float] = field(default_factory=dict)
    mrr: float | None = None
    mulse: int | None = None
    multe: int | None = None
    poc: float | None = None

    def to_text(self) -> str:
        lines = [
            f"precision\t{self.precision!r}",
            f"recall\t{self.recall!r}",
            f"f1\t{self.f1!r}",
        ]
        for k in sorted(self.hits):
            lines.append(f"hits@{k}\t{self.hits[k]!r}")
        for name in ("mrr", "mulse", "multe", "poc"):
            value = getattr(self, name)
            if value is not None:
                lines.append(f"{name}\t{value!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "hits": {str(k): v for k, v in self.hits.items()},
                "mrr": self.mrr,
                "mulse": self.mulse,
                "multe": self.multe,
                "poc": self.poc,
            },
            indent=2,
            sort_keys=True,
        )


def _pairs_of(pred) -> dict:
    if isinstance(pred, AlignmentResult):
        return pred.pairs
    return dict(pred)


def prf(pred, gold: Mapping) -> tuple[float, float, float]:
    """(precision, recall, f1) of predicted pairs against a gold mapping."""
    gold = dict(gold)
    if not gold:
        raise ValueError("gold mapping is empty")
    pairs = _pairs_of(pred)
    correct = sum(1 for s, t in pairs.items() if gold.get(s) == t)
    precision = correct / len(pairs) if pairs else 0.0
    recall = correct / len(gold)
    if precision == recall:  # keeps P = R = F1 an exact identity
        f1 = precision
    elif precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return precision, recall, f1


def hits_mrr(
    ranked: Mapping, gold: Mapping, ks: Sequence[int] = (1, 10)
) -> tuple[dict[int, float], float]:
    """Hits at each k and mean reciprocal rank of the gold target.

    Every gold source must have a ranked list that contains its gold target;
    anything less is an evaluation error, not a zero.
    """
    gold = dict(gold)
    if not gold:
        raise ValueError("gold mapping is empty")
    ranks = []
    for s, t in gold.items():
        if s not in ranked:
            raise EvaluationError(f"no ranked list for source {s!r}")
        lst = list(ranked[s])
        try:
            ranks.append(lst.index(t) + 1)
        except ValueError:
            raise EvaluationError(
                f"gold target {t!r} missing from the ranked list of {s!r}"
            ) from None
    n = len(ranks)
    hits = {int(k): sum(1 for r in ranks if r <= k) / n for k in ks}
    mrr = sum(1.0 / r for r in ranks) / n
    return hits, mrr


def _nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the ceil(q * n)-th smallest value."""
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n))
    return sorted_values[rank - 1]


def name_distance_stats(
    pairs: Sequence[tuple[int, int]],
    src_names: Sequence[str],
    tgt_names: Sequence[str],
) -> tuple[float, float, float, float]:
    """(average, median, p10, p90) of per-pair name edit distances.

    Percentiles use the nearest-rank rule, which stays on the observed
    integer distances.
    """
    if not pairs:
        raise ValueError("need at least one gold pair")
    dists = sorted(levenshtein(src_names[s], tgt_names[t]) for s, t in pairs)
    average = sum(dists) / len(dists)
    return (
        average,
        float(_nearest_rank(dists, 0.5)),
        float(_nearest_rank(dists, 0.1)),
        float(_nearest_rank(dists, 0.9)),
    )


def fusion_poc(corrs: Iterable, gold: Mapping) -> float | None:
    """Fraction of distinct confident correspondences that are gold pairs.

    Accepts correspondence objects or bare (source, target) tuples; returns
    None when there are no correspondences at all.
    """
    gold = dict(gold)
    cells = set()
    for c in corrs:
        if hasattr(c, "source"):
            cells.add((c.source, c.target))
        else:
            s, t = c
            cells.add((s, t))
    if not cells:
        return None
    correct = sum(1 for s, t in cells if gold.get(s) == t)
    return correct / len(cells)
