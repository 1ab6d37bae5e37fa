"""Structure learning: greedy score search, hybrid restricts, exact
posterior averaging, and bootstrap arc confidence.

Greedy moves operate on bitmask parent sets against a memoized family-score
table, so one dataset reduction serves every restart and every move
evaluation.  All randomness flows through counter-split seeds; results do
not depend on scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy import special

from .dag import Dag, SizeLimitError, VariableSet
from .data import Dataset, DiscreteDataset
from .discretize import DiscreteScoreCache
from .gaussian import GaussianScoreCache
from .rng import rng_from, split_seed

DataLike = Union[Dataset, DiscreteDataset]
Learner = Callable[[DataLike, np.random.SeedSequence], Dag]


class SingularCorrelationError(ValueError):
    """Correlation submatrix is not invertible."""


@dataclass(frozen=True)
class HcConfig:
    """Greedy search settings: restart count, perturbation length per
    restart, parent cap, and the seed all restarts derive from."""

    restarts: int = 10
    perturb: int = 5
    max_parents: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_parents < 1:
            raise ValueError("max_parents must be >= 1")
        if self.perturb < 0:
            raise ValueError("perturb must be >= 0")


def _score_cache(data: DataLike, max_parents: int):
    if isinstance(data, DiscreteDataset):
        return DiscreteScoreCache(data, max_parents)
    return GaussianScoreCache(data, max_parents)


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


class _GraphState:
    """Mutable bitmask DAG used inside the greedy loop."""

    __slots__ = ("p", "parents", "children")

    def __init__(self, p: int):
        self.p = p
        self.parents = [0] * p
        self.children = [0] * p

    def copy(self) -> "_GraphState":
        dup = _GraphState(self.p)
        dup.parents = list(self.parents)
        dup.children = list(self.children)
        return dup

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.parents[v] & (1 << u))

    def add(self, u: int, v: int) -> None:
        self.parents[v] |= 1 << u
        self.children[u] |= 1 << v

    def remove(self, u: int, v: int) -> None:
        self.parents[v] &= ~(1 << u)
        self.children[u] &= ~(1 << v)

    def reaches(self, start: int, target: int) -> bool:
        frontier = 1 << start
        seen = 0
        target_bit = 1 << target
        while frontier:
            node = (frontier & -frontier).bit_length() - 1
            frontier &= frontier - 1
            nxt = self.children[node] & ~seen
            if nxt & target_bit:
                return True
            seen |= nxt
            frontier |= nxt
        return False

    def to_dag(self, variables: VariableSet) -> Dag:
        edges = set()
        for v in range(self.p):
            mask = self.parents[v]
            while mask:
                u = (mask & -mask).bit_length() - 1
                mask &= mask - 1
                edges.add((u, v))
        return Dag(variables, frozenset(edges))


def _legal_moves(state: _GraphState, max_parents: int,
                 allowed: frozenset[tuple[int, int]] | None):
    """Yield (kind, u, v) for every legal add / delete / reverse."""
    p = state.p
    for u in range(p):
        for v in range(p):
            if u == v:
                continue
            if state.has_edge(u, v):
                yield ("delete", u, v)
                if (_popcount(state.parents[u]) < max_parents):
                    state.remove(u, v)
                    cyclic = state.reaches(u, v)
                    state.add(u, v)
                    if not cyclic:
                        yield ("reverse", u, v)
            elif not state.has_edge(v, u):
                if allowed is not None and (min(u, v), max(u, v)) not in allowed:
                    continue
                if _popcount(state.parents[v]) >= max_parents:
                    continue
                if not state.reaches(v, u):
                    yield ("add", u, v)


def _move_delta(state: _GraphState, scorer, kind: str, u: int, v: int) -> float:
    bit_u, bit_v = 1 << u, 1 << v
    if kind == "add":
        return scorer.family_score(v, state.parents[v] | bit_u) - \
            scorer.family_score(v, state.parents[v])
    if kind == "delete":
        return scorer.family_score(v, state.parents[v] & ~bit_u) - \
            scorer.family_score(v, state.parents[v])
    return (scorer.family_score(v, state.parents[v] & ~bit_u)
            - scorer.family_score(v, state.parents[v])
            + scorer.family_score(u, state.parents[u] | bit_v)
            - scorer.family_score(u, state.parents[u]))


def _apply(state: _GraphState, kind: str, u: int, v: int) -> None:
    if kind == "add":
        state.add(u, v)
    elif kind == "delete":
        state.remove(u, v)
    else:
        state.remove(u, v)
        state.add(v, u)


def _climb(state: _GraphState, scorer, max_parents: int,
           allowed: frozenset[tuple[int, int]] | None) -> float:
    """Greedy ascent in place; returns the final total score."""
    score = sum(scorer.family_score(v, state.parents[v]) for v in range(state.p))
    while True:
        best_delta = 0.0
        best_move = None
        for kind, u, v in _legal_moves(state, max_parents, allowed):
            delta = _move_delta(state, scorer, kind, u, v)
            if delta > best_delta + 1e-12:
                best_delta = delta
                best_move = (kind, u, v)
        if best_move is None:
            return score
        _apply(state, *best_move)
        score += best_delta


def _perturbed_start(p: int, moves: int, max_parents: int,
                     allowed: frozenset[tuple[int, int]] | None,
                     rng: np.random.Generator) -> _GraphState:
    state = _GraphState(p)
    for _ in range(moves):
        options = list(_legal_moves(state, max_parents, allowed))
        if not options:
            break
        _apply(state, *options[rng.integers(len(options))])
    return state


def hill_climb(data: DataLike, cfg: HcConfig,
               restrict: frozenset[tuple[int, int]] | None = None,
               seed=None) -> Dag:
    """Best DAG over random-restart greedy search.

    Each restart perturbs the empty graph with random legal edge operations
    and then repeatedly applies the single add / delete / reverse move with
    the largest positive score gain.  Only the families a move touches are
    rescored; everything else comes from the cache.  The restart with the
    highest final score wins, earliest restart on ties.
    """
    scorer = _score_cache(data, cfg.max_parents)
    p = scorer.p
    rng = rng_from(split_seed(cfg.seed, 0) if seed is None else seed)

    best_state = _GraphState(p)
    best_score = _climb(best_state, scorer, cfg.max_parents, restrict)
    for _ in range(cfg.restarts - 1):
        state = _perturbed_start(p, cfg.perturb, cfg.max_parents, restrict, rng)
        score = _climb(state, scorer, cfg.max_parents, restrict)
        if score > best_score + 1e-12:
            best_score = score
            best_state = state
    return best_state.to_dag(data.variables)


# ---------------------------------------------------------------------------
# conditional-independence restricts


def _partial_correlation(corr: np.ndarray, x: int, y: int,
                         given: tuple[int, ...]) -> float:
    if not given:
        return float(np.clip(corr[x, y], -1.0, 1.0))
    s = list(given)
    try:
        solved = np.linalg.solve(corr[np.ix_(s, s)], corr[np.ix_(s, [x, y])])
    except np.linalg.LinAlgError:
        raise SingularCorrelationError(
            f"correlation submatrix for {s} is singular") from None
    residual = corr[np.ix_([x, y], [x, y])] - corr[np.ix_([x, y], s)] @ solved
    var_x, var_y = residual[0, 0], residual[1, 1]
    if var_x <= 1e-15 or var_y <= 1e-15:
        # x or y fully explained by the conditioning set
        return 0.0
    return float(np.clip(residual[0, 1] / np.sqrt(var_x * var_y), -1.0, 1.0))


def _fisher_z_pvalue(corr: np.ndarray, n: int, x: int, y: int,
                     given: tuple[int, ...]) -> float:
    r = _partial_correlation(corr, x, y, given)
    r = min(max(r, -0.9999999999), 0.9999999999)
    df = n - len(given) - 3
    if df <= 0:
        return 1.0
    z = np.sqrt(df) * np.arctanh(r)
    return float(2.0 * special.ndtr(-abs(z)))


def _grow_shrink_blanket(corr: np.ndarray, n: int, target: int, p: int,
                         alpha: float) -> set[int]:
    blanket: list[int] = []
    changed = True
    while changed:
        changed = False
        for x in range(p):
            if x == target or x in blanket:
                continue
            if _fisher_z_pvalue(corr, n, x, target, tuple(blanket)) <= alpha:
                blanket.append(x)
                changed = True
    for x in list(blanket):
        rest = tuple(b for b in blanket if b != x)
        if _fisher_z_pvalue(corr, n, x, target, rest) > alpha:
            blanket.remove(x)
    return set(blanket)


def restrict_gs(data: Dataset, alpha: float = 0.05) -> frozenset[tuple[int, int]]:
    """Pairs allowed by per-node Grow-Shrink blanket estimation.

    Tests are Fisher-z on partial correlations; a pair survives only when
    each node lands in the other's blanket (symmetry in both directions).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0,1)")
    corr = np.corrcoef(data.rows, rowvar=False)
    p = data.rows.shape[1]
    n = data.n
    blankets = [_grow_shrink_blanket(corr, n, t, p, alpha) for t in range(p)]
    pairs = set()
    for a in range(p):
        for b in range(a + 1, p):
            if b in blankets[a] and a in blankets[b]:
                pairs.add((a, b))
    return frozenset(pairs)


def _subsets(items: tuple[int, ...]):
    for mask in range(1 << len(items)):
        yield tuple(items[i] for i in range(len(items)) if mask >> i & 1)


def _mmpc_parents_children(corr: np.ndarray, n: int, target: int, p: int,
                           alpha: float) -> set[int]:
    cpc: list[int] = []
    candidates = [x for x in range(p) if x != target]
    while True:
        best = None
        for x in candidates:
            if x in cpc:
                continue
            # weakest association over all conditioning subsets of cpc
            worst_p = max(_fisher_z_pvalue(corr, n, x, target, s)
                          for s in _subsets(tuple(cpc)))
            if best is None or worst_p < best[0]:
                best = (worst_p, x)
        if best is None or best[0] > alpha:
            break
        cpc.append(best[1])
    for x in list(cpc):
        rest = tuple(c for c in cpc if c != x)
        if any(_fisher_z_pvalue(corr, n, x, target, s) > alpha
               for s in _subsets(rest)):
            cpc.remove(x)
    return set(cpc)


def restrict_mmpc(data: Dataset, alpha: float = 0.05) -> frozenset[tuple[int, int]]:
    """Pairs allowed by the max-min parents-children heuristic: grow by the
    best worst-case association, prune backward, keep symmetric hits."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0,1)")
    corr = np.corrcoef(data.rows, rowvar=False)
    p = data.rows.shape[1]
    n = data.n
    sets = [_mmpc_parents_children(corr, n, t, p, alpha) for t in range(p)]
    pairs = set()
    for a in range(p):
        for b in range(a + 1, p):
            if b in sets[a] and a in sets[b]:
                pairs.add((a, b))
    return frozenset(pairs)


def hybrid_search(data: Dataset, alpha: float, cfg: HcConfig,
                  restrict: str = "gs", seed=None) -> Dag:
    """Greedy search confined to the pairs a constraint pass allows."""
    if restrict == "gs":
        allowed = restrict_gs(data, alpha)
    elif restrict == "mmpc":
        allowed = restrict_mmpc(data, alpha)
    else:
        raise ValueError("restrict must be 'gs' or 'mmpc'")
    return hill_climb(data, cfg, restrict=allowed, seed=seed)


# ---------------------------------------------------------------------------
# exact posterior averaging over all DAGs

MAX_EXACT_NODES = 16
MAX_EXACT_PARENTS = 5


def _family_weight_tables(data: Dataset, max_parents: int) -> list[np.ndarray]:
    """Per child: exp(family score - child max) for every parent mask.

    Extended precision: per-child shifting bounds each weight by 1 but a
    whole-DAG product can still be astronomically small when the children's
    best families are mutually cyclic, and the ratios must survive that.
    """
    cache = GaussianScoreCache(data, max_parents)
    p = cache.p
    tables = []
    for child in range(p):
        scores = np.full(1 << p, -np.inf, dtype=np.longdouble)
        child_bit = 1 << child
        for mask in range(1 << p):
            if mask & child_bit or _popcount(mask) > max_parents:
                continue
            scores[mask] = cache.family_score(child, mask)
        top = scores.max()
        tables.append(np.where(np.isfinite(scores), np.exp(scores - top),
                               np.longdouble(0.0)))
    return tables


def _zeta_transform(values: np.ndarray, p: int) -> np.ndarray:
    """Subset sums: out[U] = sum of values over all subsets of U."""
    out = values.copy()
    for i in range(p):
        bit = 1 << i
        for mask in range(1 << p):
            if mask & bit:
                out[mask] += out[mask ^ bit]
    return out


def _dag_weight_sum(acc: list[np.ndarray], p: int) -> float:
    """Total weight over all DAGs: inclusion-exclusion over sink layers.

    f(S) = sum over nonempty T of S of (-1)^(|T|+1) f(S-T) prod_{c in T}
    acc[c][S-T], where acc[c][U] already sums child c's family weights over
    parent sets inside U.
    """
    full = (1 << p) - 1
    f = np.zeros(1 << p, dtype=np.longdouble)
    f[0] = 1.0
    for s in range(1, 1 << p):
        total = 0.0
        # iterate nonempty subsets t of s
        t = s
        while t:
            rest = s ^ t
            prod = f[rest]
            if prod != 0.0:
                m = t
                while m:
                    c = (m & -m).bit_length() - 1
                    m &= m - 1
                    prod *= acc[c][rest]
                    if prod == 0.0:
                        break
                if _popcount(t) % 2 == 1:
                    total += prod
                else:
                    total -= prod
            t = (t - 1) & s
        f[s] = total
    return f[full]


@dataclass(frozen=True)
class ArcConfidence:
    """Edge beliefs per ordered pair.

    ``strength[a, b]`` is symmetric: how much support the pair has in
    either orientation.  ``direction[a, b]`` is, conditional on presence,
    the share pointing a -> b; rows with zero strength carry 0.5.
    """

    variables: VariableSet
    strength: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        p = len(self.variables)
        s = np.asarray(self.strength, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        if s.shape != (p, p) or d.shape != (p, p):
            raise ValueError("matrices must be p x p")
        if not np.allclose(s, s.T):
            raise ValueError("strength must be symmetric")
        object.__setattr__(self, "strength", s)
        object.__setattr__(self, "direction", d)

    def pair_strength(self, a: str, b: str) -> float:
        i, j = self.variables.index(a), self.variables.index(b)
        return float(self.strength[i, j])

    def pair_direction(self, a: str, b: str) -> float:
        i, j = self.variables.index(a), self.variables.index(b)
        return float(self.direction[i, j])

    def to_csv(self) -> str:
        buf = StringIO()
        writer = csv.writer(buf)
        writer.writerow(["from", "to", "strength", "direction"])
        names = self.variables.names
        for a in sorted(range(len(names)), key=lambda i: names[i]):
            for b in sorted(range(len(names)), key=lambda i: names[i]):
                if a == b:
                    continue
                writer.writerow([names[a], names[b],
                                 f"{self.strength[a, b]:.6f}",
                                 f"{self.direction[a, b]:.6f}"])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def _confidence_from_counts(variables: VariableSet, counts: np.ndarray,
                            total: float) -> ArcConfidence:
    either = counts + counts.T
    strength = either / total
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(either > 0, counts / np.where(either > 0, either, 1.0), 0.5)
    np.fill_diagonal(strength, 0.0)
    np.fill_diagonal(direction, 0.5)
    return ArcConfidence(variables, strength, direction)


def exact_map_edge_probabilities(data: Dataset,
                                 max_parents: int = MAX_EXACT_PARENTS) -> ArcConfidence:
    """Exact edge-inclusion probabilities under a uniform prior over DAGs.

    Family weights are exp of the Gaussian BIC family scores; the total and
    per-edge weight sums run the sink-layer inclusion-exclusion recursion,
    so every labeled DAG (parent sets capped) is counted exactly once.
    """
    p = data.rows.shape[1]
    if p > MAX_EXACT_NODES:
        raise SizeLimitError(f"exact averaging limited to {MAX_EXACT_NODES} variables")
    if max_parents > MAX_EXACT_PARENTS:
        raise SizeLimitError(f"max_parents limited to {MAX_EXACT_PARENTS}")
    weights = _family_weight_tables(data, max_parents)
    acc = [_zeta_transform(w, p) for w in weights]
    denom = _dag_weight_sum(acc, p)
    if denom <= 0:
        raise ArithmeticError("posterior mass underflowed; data too extreme")
    prob = np.zeros((p, p))
    for u in range(p):
        bit_u = 1 << u
        for v in range(p):
            if u == v:
                continue
            restricted = np.where(
                (np.arange(1 << p) & bit_u) > 0, weights[v], np.longdouble(0.0))
            acc_v = _zeta_transform(restricted, p)
            numer = _dag_weight_sum(acc[:v] + [acc_v] + acc[v + 1:], p)
            prob[u, v] = float(numer / denom)
    counts = prob  # already normalized: strength = P(u->v)+P(v->u)
    return _confidence_from_counts(data.variables, counts, 1.0)


def map_dag(data: DataLike, max_parents: int = MAX_EXACT_PARENTS) -> Dag:
    """Globally optimal DAG for the family scores, by best-sink dynamic
    programming over node subsets."""
    scorer = _score_cache(data, max_parents)
    p = scorer.p
    if p > MAX_EXACT_NODES:
        raise SizeLimitError(f"exact search limited to {MAX_EXACT_NODES} variables")
    full = (1 << p) - 1

    # best parent set per child within each candidate set
    best_score = [np.full(1 << p, -np.inf) for _ in range(p)]
    best_mask = [np.zeros(1 << p, dtype=np.int64) for _ in range(p)]
    for child in range(p):
        child_bit = 1 << child
        bs, bm = best_score[child], best_mask[child]
        for cand in range(1 << p):
            if cand & child_bit:
                continue
            if _popcount(cand) <= max_parents:
                bs[cand] = scorer.family_score(child, cand)
                bm[cand] = cand
            m = cand
            while m:
                i_bit = m & -m
                m ^= i_bit
                prev = cand ^ i_bit
                if bs[prev] > bs[cand]:
                    bs[cand] = bs[prev]
                    bm[cand] = bm[prev]

    total = np.full(1 << p, -np.inf)
    sink = np.full(1 << p, -1, dtype=np.int64)
    total[0] = 0.0
    for s in range(1, 1 << p):
        m = s
        while m:
            c_bit = m & -m
            m ^= c_bit
            c = c_bit.bit_length() - 1
            value = total[s ^ c_bit] + best_score[c][s ^ c_bit]
            if value > total[s]:
                total[s] = value
                sink[s] = c
    edges = set()
    s = full
    while s:
        c = int(sink[s])
        s ^= 1 << c
        mask = int(best_mask[c][s])
        while mask:
            u = (mask & -mask).bit_length() - 1
            mask &= mask - 1
            edges.add((u, c))
    return Dag(data.variables, frozenset(edges))


# ---------------------------------------------------------------------------
# bootstrap model averaging


def hc_learner(cfg: HcConfig) -> Learner:
    def learn(data: DataLike, seed) -> Dag:
        return hill_climb(data, cfg, seed=seed)
    return learn


def hybrid_learner(cfg: HcConfig, restrict: str = "gs", alpha: float = 0.05) -> Learner:
    def learn(data: DataLike, seed) -> Dag:
        return hybrid_search(data, alpha, cfg, restrict=restrict, seed=seed)
    return learn


def map_learner(max_parents: int = MAX_EXACT_PARENTS) -> Learner:
    def learn(data: DataLike, seed) -> Dag:
        return map_dag(data, max_parents)
    return learn


def bootstrap_average(data: DataLike, learner: Learner, boot_samples: int,
                      seed: int = 0) -> ArcConfidence:
    """Arc strengths and directions over structures learned on resamples.

    Each resample draws n rows with replacement under its own counter-split
    seed, so the tabulation is identical however the work is scheduled.
    """
    if boot_samples < 1:
        raise ValueError("boot_samples must be >= 1")
    p = len(data.variables)
    counts = np.zeros((p, p))
    n = data.n
    for i in range(boot_samples):
        resample_rng = rng_from(split_seed(seed, 1, i))
        idx = resample_rng.integers(0, n, size=n)
        learned = learner(data.take_rows(idx), split_seed(seed, 2, i))
        for u, v in learned.edges:
            counts[u, v] += 1.0
    return _confidence_from_counts(data.variables, counts, float(boot_samples))


@dataclass(frozen=True)
class AveragedNetwork:
    """Thresholded consensus DAG with the confidence table it came from."""

    dag: Dag
    threshold: float
    source: ArcConfidence
    flipped: frozenset[tuple[int, int]] = field(default_factory=frozenset)


def averaged_network(conf: ArcConfidence, threshold: float,
                     strict: bool = False) -> AveragedNetwork:
    """Keep pairs at or above the strength threshold, oriented by majority
    direction; edges that would close a cycle get flipped, weakest
    orientation first.

    Pairs are inserted in decreasing order of orientation confidence, so
    any flip needed to stay acyclic lands on the pair whose direction was
    closest to a coin toss.  For any pair at most one orientation can close
    a cycle, hence the result is always a DAG.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0,1]")
    p = len(conf.variables)
    kept = []
    for a in range(p):
        for b in range(a + 1, p):
            s = conf.strength[a, b]
            if (s > threshold) if strict else (s >= threshold):
                if s <= 0:
                    continue
                d = conf.direction[a, b]
                u, v = (a, b) if d >= 0.5 else (b, a)
                confidence = max(d, 1.0 - d)
                kept.append((confidence, conf.strength[a, b], u, v))
    kept.sort(key=lambda item: (-item[0], -item[1], item[2], item[3]))

    state = _GraphState(p)
    flipped = set()
    for _, _, u, v in kept:
        if state.reaches(v, u):
            state.add(v, u)
            flipped.add((u, v))
        else:
            state.add(u, v)
    return AveragedNetwork(state.to_dag(conf.variables), threshold, conf,
                           frozenset(flipped))
