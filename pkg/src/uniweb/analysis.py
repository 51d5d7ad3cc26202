"""Rankings, distribution tables, rank correlation, two-variable PCA and
anomaly screens over indicator values.

Ties are handled two ways on purpose: rankings break ties by entity id so
exports stay reproducible, while Spearman uses average ranks (the
statistical convention). PCA is the closed-form 2x2 eigenproblem; with
standardization on (the default) it works on the correlation matrix, so
rescaling either variable changes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ConsistencyError, ValidationError

DEFAULT_TOP_THRESHOLDS = (50, 100, 200, 500, 1000)
TIE_POLICY_ID_ORDER = "value desc, ties by entity id"


@dataclass(frozen=True)
class RankEntry:
    entity_id: str
    value: float
    position: int


@dataclass
class Ranking:
    key: str
    entries: list[RankEntry]
    tie_policy: str = TIE_POLICY_ID_ORDER

    def position_of(self) -> dict[str, int]:
        return {e.entity_id: e.position for e in self.entries}


@dataclass
class TopNDistribution:
    thresholds: tuple[int, ...]
    counts: dict[str, dict[int, int]]
    percentages: dict[str, dict[int, float]]
    group_items: dict[str, int]


@dataclass
class PcaResult:
    loadings: list[list[float]]  # rows = components, columns = (x, y)
    explained_variance: list[float]  # percentages, descending, sum 100
    scores: list[tuple[float, float]]
    standardized: bool


def rank_entities(values: Mapping[str, float], key: str = "value") -> Ranking:
    """Descending ranking with deterministic id-order tie-break."""
    offenders = sorted(
        e for e, v in values.items() if v is None or not math.isfinite(v)
    )
    if offenders:
        raise ValidationError(
            "cannot rank undefined values for: " + ", ".join(offenders)
        )
    ordered = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))
    entries = [
        RankEntry(entity_id=e, value=v, position=i)
        for i, (e, v) in enumerate(ordered, start=1)
    ]
    return Ranking(key=key, entries=entries)


def topn_distribution(
    ranking: Ranking,
    grouping: Mapping[str, str],
    item_counts: Mapping[str, int] | None = None,
    thresholds: Sequence[int] = DEFAULT_TOP_THRESHOLDS,
) -> TopNDistribution:
    """How many of each group's items sit inside the top-N cutoffs."""
    missing = sorted(e.entity_id for e in ranking.entries if e.entity_id not in grouping)
    if missing:
        raise ValidationError("ranked entities without a group: " + ", ".join(missing[:5]))
    groups = sorted(set(grouping[e.entity_id] for e in ranking.entries))
    if item_counts is None:
        item_counts = {}
        for e in ranking.entries:
            g = grouping[e.entity_id]
            item_counts[g] = item_counts.get(g, 0) + 1
    ranked_members: dict[str, int] = {}
    for e in ranking.entries:
        g = grouping[e.entity_id]
        ranked_members[g] = ranked_members.get(g, 0) + 1
    for g in groups:
        declared = item_counts.get(g, 0)
        if declared <= 0 and ranked_members.get(g, 0) > 0:
            raise ConsistencyError(
                f"group '{g}' declares no items but has ranked members"
            )

    thresholds = tuple(sorted(thresholds))
    counts = {g: {t: 0 for t in thresholds} for g in groups}
    for e in ranking.entries:
        g = grouping[e.entity_id]
        for t in thresholds:
            if e.position <= t:
                counts[g][t] += 1
    percentages = {
        g: {t: 100.0 * counts[g][t] / item_counts[g] for t in thresholds} for g in groups
    }
    return TopNDistribution(
        thresholds=thresholds,
        counts=counts,
        percentages=percentages,
        group_items={g: item_counts[g] for g in groups},
    )


def mean_rank_shift(r1: Ranking, r2: Ranking) -> float:
    """Mean absolute position difference over a shared entity set."""
    p1, p2 = r1.position_of(), r2.position_of()
    diff = set(p1).symmetric_difference(p2)
    if diff:
        raise ValidationError(
            "rankings cover different entities: " + ", ".join(sorted(diff)[:5])
        )
    if not p1:
        raise ValidationError("empty rankings")
    return sum(abs(p1[e] - p2[e]) for e in p1) / len(p1)


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # positions are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rho(x: Mapping[str, float], y: Mapping[str, float]) -> float | None:
    """Tie-corrected Spearman: Pearson correlation of average ranks.

    Returns None when either variable is constant (zero rank variance).
    """
    if set(x) != set(y):
        raise ValidationError("spearman_rho needs the same entity set in both variables")
    if len(x) < 3:
        raise ValidationError(f"spearman_rho needs >= 3 entities, got {len(x)}")
    entities = sorted(x)
    rx = _average_ranks([x[e] for e in entities])
    ry = _average_ranks([y[e] for e in entities])
    n = len(entities)
    mean_x = sum(rx) / n
    mean_y = sum(ry) / n
    sxx = sum((a - mean_x) ** 2 for a in rx)
    syy = sum((b - mean_y) ** 2 for b in ry)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = sum((a - mean_x) * (b - mean_y) for a, b in zip(rx, ry))
    return sxy / math.sqrt(sxx * syy)


def pca_two_vars(
    points: Sequence[tuple[float, float]], standardize: bool = True
) -> PcaResult:
    """Closed-form PCA of two variables.

    Eigenpairs of the correlation (standardize=True) or covariance matrix,
    solved with the 2x2 quadratic formula. Components are orthonormal, the
    first loading's leading nonzero entry is made positive, and explained
    variances are percentages summing to 100.
    """
    n = len(points)
    if n < 3:
        raise ValidationError(f"PCA needs >= 3 points, got {n}")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((v - mx) ** 2 for v in xs) / (n - 1)
    syy = sum((v - my) ** 2 for v in ys) / (n - 1)
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys)) / (n - 1)
    if sxx == 0.0 and syy == 0.0:
        raise ValidationError("PCA undefined: all points identical")
    if standardize:
        if sxx == 0.0 or syy == 0.0:
            raise ValidationError(
                "PCA with standardization needs nonzero variance in both variables"
            )
        a, b = 1.0, 1.0
        c = sxy / math.sqrt(sxx * syy)
    else:
        a, b, c = sxx, syy, sxy

    # Eigenvalues of [[a, c], [c, b]].
    half_trace = (a + b) / 2.0
    disc = math.sqrt(((a - b) / 2.0) ** 2 + c * c)
    lam1, lam2 = half_trace + disc, half_trace - disc
    lam2 = max(lam2, 0.0)

    if c != 0.0:
        v1 = (lam1 - b, c)
    else:
        v1 = (1.0, 0.0) if a >= b else (0.0, 1.0)
    norm = math.hypot(*v1)
    v1 = (v1[0] / norm, v1[1] / norm)
    if v1[0] < 0 or (v1[0] == 0.0 and v1[1] < 0):
        v1 = (-v1[0], -v1[1])
    v2 = (-v1[1], v1[0])  # orthonormal complement
    if v2[0] < 0 or (v2[0] == 0.0 and v2[1] < 0):
        v2 = (-v2[0], -v2[1])

    total = lam1 + lam2
    explained = [100.0 * lam1 / total, 100.0 * lam2 / total]

    scores = []
    for px, py in points:
        cx, cy = px - mx, py - my
        if standardize:
            cx /= math.sqrt(sxx)
            cy /= math.sqrt(syy)
        scores.append((cx * v1[0] + cy * v1[1], cx * v2[0] + cy * v2[1]))
    return PcaResult(
        loadings=[[v1[0], v1[1]], [v2[0], v2[1]]],
        explained_variance=explained,
        scores=scores,
        standardized=standardize,
    )


def detect_temporal_anomalies(
    series: Sequence[float | None], k: float = 5.0, floor: float = 10.0
) -> list[int]:
    """Positions whose value jumps k-fold above (or falls k-fold below) the
    median of the other measured waves; a zero median falls back to the
    absolute floor. Needs >= 3 measured waves."""
    measured = [(i, v) for i, v in enumerate(series) if v is not None]
    if len(measured) < 3:
        return []
    flags = []
    for i, value in measured:
        others = sorted(v for j, v in measured if j != i)
        mid = len(others) // 2
        if len(others) % 2:
            med = others[mid]
        else:
            med = (others[mid - 1] + others[mid]) / 2.0
        if med <= 0:
            if value > floor:
                flags.append(i)
        elif value > k * med or value < med / k:
            flags.append(i)
    return flags


def wif_anomaly_screen(
    wif_means: Mapping[str, float | None], threshold: float = 100.0
) -> list[tuple[str, float]]:
    """Entities whose mean WIF exceeds the screen threshold (sorted by id)."""
    return sorted(
        (e, v) for e, v in wif_means.items() if v is not None and v > threshold
    )
