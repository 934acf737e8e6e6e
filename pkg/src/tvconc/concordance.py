"""Concordance index ``c^n_q`` for time-varying risk scores.

For every ordered pair ``(i, j)``, ``i != j``, the pair is comparable when
``D_i = 1`` and ``T_i <= T_j``; it earns 1 when ``q(T_i|z_i) > q(T_i|z_j)``
and 1/2 when the scores are equal. All counts are exact integers; the index
is formed by a single division at the end.

Three evaluation strategies produce identical counts:

* grouped: few distinct covariate rows, any score, O(n * groups);
* Fenwick tree: time-constant scores, O(n log n);
* blockwise pairwise: anything else, O(n^2) vectorised.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .dataset import DISCRETE, SurvivalDataset
from .risk import RiskScore

#: largest number of distinct covariate rows handled by the grouped strategy
GROUPED_MAX = 64
#: element budget for one block of the pairwise strategy
_BLOCK_ELEMS = 1 << 22


class NoComparablePairs(ValueError):
    """The denominator of the index is zero."""


@dataclass(frozen=True)
class ConcordanceReport:
    n_strict_concordant: int
    n_tied_score: int
    n_comparable: int
    n_tied_time_comparable: int
    index: float = field(init=False)

    def __post_init__(self):
        if self.n_comparable <= 0:
            raise NoComparablePairs("no comparable pairs: the index is undefined")
        object.__setattr__(
            self, "index", (2 * self.n_strict_concordant + self.n_tied_score) / (2 * self.n_comparable))

    @property
    def numerator(self) -> float:
        return self.n_strict_concordant + 0.5 * self.n_tied_score

    def as_dict(self) -> dict:
        return asdict(self)


def _event_rows(data: SurvivalDataset, until):
    mask = data.event.copy()
    if until is not None:
        if until < 0:
            raise ValueError("until must be non-negative")
        mask &= data.time <= until
    return np.nonzero(mask)[0]


def _finite(values, label):
    if np.isnan(values).any():
        raise ValueError(f"risk score {label!r} returned NaN")
    return values


def _grouped(data, q, events, tied_events):
    time = data.time
    uniq, ginv = np.unique(data.covariates, axis=0, return_inverse=True)
    ginv = ginv.reshape(-1)
    et, tinv = np.unique(time[events], return_inverse=True)
    tinv = tinv.reshape(-1)
    table = _finite(q.table(et, uniq), q.label)
    G = uniq.shape[0]
    t_ev = time[events]
    at_risk = np.empty((events.size, G), dtype=np.int64)
    same_time = np.empty((events.size, G), dtype=np.int64)
    same_event = np.empty((events.size, G), dtype=np.int64)
    for g in range(G):
        tg = np.sort(time[ginv == g])
        eg = np.sort(time[(ginv == g) & data.event])
        lo = np.searchsorted(tg, t_ev, side="left")
        at_risk[:, g] = tg.size - lo
        same_time[:, g] = np.searchsorted(tg, t_ev, side="right") - lo
        same_event[:, g] = np.searchsorted(eg, t_ev, side="right") - np.searchsorted(eg, t_ev, side="left")
    rows = table[tinv]
    own = rows[np.arange(events.size), ginv[events]]
    if tied_events:
        # remove i itself from its own group
        self_count = np.zeros_like(at_risk)
        self_count[np.arange(events.size), ginv[events]] = 1
        counts = at_risk - self_count
        tied_time = same_time - self_count
    else:
        counts = at_risk - same_event
        tied_time = same_time - same_event
    strict = int((counts * (rows < own[:, None])).sum())
    tied = int((counts * (rows == own[:, None])).sum())
    return ConcordanceReport(strict, tied, int(counts.sum()), int(tied_time.sum()))


def _pairwise(data, q, events, tied_events):
    time, ev = data.time, data.event
    n = time.size
    uniq, ginv = np.unique(data.covariates, axis=0, return_inverse=True)
    ginv = ginv.reshape(-1)
    order = np.argsort(time[events], kind="stable")
    events = events[order]
    strict = tied = comp = tied_time = 0
    step = max(1, _BLOCK_ELEMS // max(n, 1))
    for lo in range(0, events.size, step):
        blk = events[lo:lo + step]
        et, tinv = np.unique(time[blk], return_inverse=True)
        scores = _finite(q.table(et, uniq), q.label)[tinv.reshape(-1)][:, ginv]
        own = scores[np.arange(blk.size), blk]
        ti = time[blk][:, None]
        mask = time[None, :] >= ti
        mask[np.arange(blk.size), blk] = False
        same = mask & (time[None, :] == ti)
        if not tied_events:
            drop = same & ev[None, :]
            mask &= ~drop
            same &= ~drop
        strict += int((mask & (scores < own[:, None])).sum())
        tied += int((mask & (scores == own[:, None])).sum())
        comp += int(mask.sum())
        tied_time += int(same.sum())
    return ConcordanceReport(strict, tied, comp, tied_time)


@njit(cache=True)
def _fenwick_counts(time, event, ranks, n_ranks, active, tied_events):
    """Dominance counts over records sorted by descending time."""
    n = time.size
    tree = np.zeros(n_ranks + 1, dtype=np.int64)
    inserted = 0
    strict = 0
    tied = 0
    comp = 0
    tied_time = 0
    start = 0
    while start < n:
        stop = start
        while stop < n and time[stop] == time[start]:
            stop += 1
        n_same = stop - start
        n_same_events = 0
        for k in range(start, stop):
            if event[k]:
                n_same_events += 1
        # with tied_events, all records at this time are at risk for each other;
        # otherwise events at this time are inserted only after querying
        for k in range(start, stop):
            if tied_events or not event[k]:
                r = ranks[k] + 1
                while r <= n_ranks:
                    tree[r] += 1
                    r += r & (-r)
                inserted += 1
        for k in range(start, stop):
            if not active[k]:
                continue
            below = 0
            r = ranks[k]
            while r > 0:
                below += tree[r]
                r -= r & (-r)
            upto = 0
            r = ranks[k] + 1
            while r > 0:
                upto += tree[r]
                r -= r & (-r)
            equal = upto - below
            if tied_events:
                equal -= 1
                comp += inserted - 1
                tied_time += n_same - 1
            else:
                comp += inserted
                tied_time += n_same - n_same_events
            strict += below
            tied += equal
        if not tied_events:
            for k in range(start, stop):
                if event[k]:
                    r = ranks[k] + 1
                    while r <= n_ranks:
                        tree[r] += 1
                        r += r & (-r)
                    inserted += 1
        start = stop
    return strict, tied, comp, tied_time


def concordance_fast(data: SurvivalDataset, scores, until: float | None = None,
                     tied_events: bool = True) -> ConcordanceReport:
    """Concordance for one time-constant score per record, in O(n log n).

    Records are swept in order of decreasing time while a Fenwick tree over
    score ranks counts the records still at risk below, at and above each
    event's score.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    if scores.size != len(data):
        raise ValueError("need exactly one score per record")
    _finite(scores, "scores")
    levels, ranks = np.unique(scores, return_inverse=True)
    order = np.argsort(-data.time, kind="stable")
    active = data.event.copy()
    if until is not None:
        active &= data.time <= until
    counts = _fenwick_counts(data.time[order], data.event[order], ranks.reshape(-1)[order].astype(np.int64),
                             levels.size, active[order], tied_events)
    return ConcordanceReport(*(int(c) for c in counts))


def concordance(data: SurvivalDataset, q: RiskScore, until: float | None = None,
                tied_events: bool = True) -> ConcordanceReport:
    """Concordance index of risk score ``q`` on ``data``.

    Parameters
    ----------
    data : SurvivalDataset
    q : RiskScore
    until : float, optional
        Only events at or before this time count (concordance using the
        information available up to ``until``).
    tied_events : bool
        When ``False`` pairs of events at the same time are dropped instead of
        being counted under both orderings.

    Raises
    ------
    NoComparablePairs
        If no pair is comparable.
    """
    if len(data) < 2:
        raise ValueError("need at least two records")
    events = _event_rows(data, until)
    if events.size == 0:
        raise NoComparablePairs("no events in range: the index is undefined")
    n_groups = np.unique(data.covariates, axis=0).shape[0]
    if n_groups <= GROUPED_MAX:
        return _grouped(data, q, events, tied_events)
    if q.time_constant:
        return concordance_fast(data, q.constant_values(data.covariates), until, tied_events)
    return _pairwise(data, q, events, tied_events)


def concordance_pairwise(data: SurvivalDataset, q: RiskScore, until: float | None = None,
                         tied_events: bool = True) -> ConcordanceReport:
    """Literal all-pairs evaluation; the reference for the faster strategies."""
    events = _event_rows(data, until)
    if events.size == 0:
        raise NoComparablePairs("no events in range: the index is undefined")
    return _pairwise(data, q, events, tied_events)


def concordance_over_time(data: SurvivalDataset, q: RiskScore, t: float) -> ConcordanceReport:
    """``c^n_q(t)``: only events observed by time ``t`` enter numerator and denominator."""
    return concordance(data, q, until=t)


@dataclass(frozen=True)
class TieAlgebraReport:
    """Counts comparing two scores with and without tied event times.

    ``a``, ``b`` are the numerators and ``c`` the denominator over pairs that
    are not tied events; ``c_tilde`` counts unordered pairs of events sharing
    a time, and ``w = c / (c + 2 c_tilde)``.
    """

    a: float
    b: float
    c: int
    c_tilde: int
    w: float
    index_included: tuple[float, float]
    index_excluded: tuple[float, float]
    ordering_preserved: bool
    contraction_error: float
    gap_error: float

    def holds(self, tol: float = 1e-12) -> bool:
        return self.ordering_preserved and self.contraction_error <= tol and self.gap_error <= tol

    def as_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds()
        return d


def tie_algebra_report(data: SurvivalDataset, q1: RiskScore, q2: RiskScore) -> TieAlgebraReport:
    """Effect of counting tied event times as comparable, for two scores.

    Including ties maps each index to ``w * a/c + (1 - w)/2``: orderings are
    kept while indices and their gaps contract towards 1/2 by ``w``.
    """
    if data.mode != DISCRETE:
        raise ValueError("tie algebra applies to discrete-time data")
    inc1, inc2 = concordance(data, q1), concordance(data, q2)
    try:
        exc1, exc2 = concordance(data, q1, tied_events=False), concordance(data, q2, tied_events=False)
    except NoComparablePairs:
        raise ValueError("c = 0: every comparable pair is a tied event pair") from None
    c = exc1.n_comparable
    twice_ct = inc1.n_comparable - c
    if twice_ct == 0:
        raise ValueError("c_tilde = 0: no tied event times")
    c_tilde = twice_ct // 2
    a, b = exc1.numerator, exc2.numerator
    w = c / (c + 2 * c_tilde)
    i1, i2 = inc1.index, inc2.index
    e1, e2 = exc1.index, exc2.index
    ordering = (np.sign(a - b) == np.sign(i1 - i2)) and (np.sign(e1 - e2) == np.sign(i1 - i2))
    contraction = max(abs(abs(i1 - 0.5) - w * abs(a / c - 0.5)),
                      abs(abs(i2 - 0.5) - w * abs(b / c - 0.5)))
    gap = abs(abs(i1 - i2) - w * abs(a - b) / c)
    return TieAlgebraReport(a, b, c, c_tilde, w, (i1, i2), (e1, e2), bool(ordering), contraction, gap)
