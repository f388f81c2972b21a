"""Effectiveness metrics for answers scored against labeled ground truth.

List answers (sets of impacted deliverables) get precision, recall and
F-measure.  Ranking answers get the normalized Kendall tau distance, the
fraction of item pairs the two orders disagree on.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .diagnostics import EmptyGroundTruth, NotAPermutation, TooShort


@dataclass(frozen=True)
class ListScore:
    precision: float
    recall: float
    f_measure: float
    eid_size: int
    aid_size: int
    intersection_size: int
    # precision is undefined for an empty estimate; it is reported as 0
    empty_estimate: bool = False

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RankScore:
    tau_distance: float
    discordant_pairs: int
    total_pairs: int

    def to_json(self) -> dict:
        return asdict(self)


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean, taken as 0 when both inputs are 0."""
    total = precision + recall
    return 0.0 if total == 0 else 2 * precision * recall / total


def score_list(eid: Iterable[str], aid: Iterable[str]) -> ListScore:
    """Score estimated impacted deliverables *eid* against the actual set *aid*."""
    estimate, actual = set(eid), set(aid)
    if not actual:
        raise EmptyGroundTruth("the ground-truth set is empty")
    hits = len(estimate & actual)
    precision = hits / len(estimate) if estimate else 0.0
    recall = hits / len(actual)
    return ListScore(precision, recall, f_measure(precision, recall),
                     len(estimate), len(actual), hits, empty_estimate=not estimate)


def _positions(ranking: Sequence[str], label: str) -> dict[str, int]:
    positions: dict[str, int] = {}
    for i, item in enumerate(ranking):
        if item in positions:
            raise NotAPermutation(f"{label} lists {item!r} more than once")
        positions[item] = i
    return positions


def score_ranking(estimate: Sequence[str], truth: Sequence[str]) -> RankScore:
    """Normalized Kendall tau distance between two orders of the same items."""
    est = _positions(estimate, "estimate")
    ref = _positions(truth, "truth")
    if est.keys() != ref.keys():
        missing = sorted(ref.keys() - est.keys())
        extra = sorted(est.keys() - ref.keys())
        raise NotAPermutation(f"estimate is not a permutation of truth (missing {missing}, extra {extra})")
    n = len(ref)
    if n < 2:
        raise TooShort(f"a ranking distance needs at least 2 items, got {n}")
    discordant = sum(1 for a, b in combinations(truth, 2) if est[a] > est[b])
    total = n * (n - 1) // 2
    return RankScore(discordant / total, discordant, total)


def read_ground_truth(text: str) -> list[str]:
    """Ids from a ``{"deliverables": [...]}`` or ``{"ranking": [...]}`` document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError("expected a JSON object")
    keys = [k for k in ("deliverables", "ranking") if k in data]
    if len(keys) != 1:
        raise ValueError('expected exactly one of "deliverables" or "ranking"')
    items = data[keys[0]]
    if not isinstance(items, list) or not all(isinstance(x, str) for x in items):
        raise ValueError(f'"{keys[0]}" must be a list of strings')
    return items
