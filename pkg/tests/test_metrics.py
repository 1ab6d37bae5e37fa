import itertools
from collections import deque

import pytest

from relqual.dag import Dag, VariableSet, enumerate_dags
from relqual.metrics import EXACT, OFF_BY_ONE, WORSE, VariableMismatchError, classify, diff

ABC = VariableSet(["A", "B", "C"])


def test_identical_dags():
    dag = Dag.from_names(ABC, [("A", "B")])
    d = diff(dag, dag)
    assert d.shd == 0 and classify(dag, dag) == EXACT


def test_single_reversal_is_off_by_one():
    truth = Dag.from_names(ABC, [("A", "B")])
    learned = Dag.from_names(ABC, [("B", "A")])
    d = diff(truth, learned)
    assert d.reversed == frozenset({(0, 1)})
    assert not d.extra and not d.missing
    assert classify(truth, learned) == OFF_BY_ONE


def test_extra_edge():
    truth = Dag.from_names(ABC, [("A", "B")])
    learned = Dag.from_names(ABC, [("A", "B"), ("A", "C")])
    d = diff(truth, learned)
    assert d.extra == frozenset({(0, 2)})
    assert d.shd == 1


def test_one_extra_one_missing_is_worse():
    truth = Dag.from_names(ABC, [("A", "B")])
    learned = Dag.from_names(ABC, [("A", "C")])
    assert diff(truth, learned).shd == 2
    assert classify(truth, learned) == WORSE


def test_variable_mismatch():
    other = Dag(VariableSet(["X", "Y", "Z"]))
    with pytest.raises(VariableMismatchError):
        diff(Dag(ABC), other)


def test_symmetry_of_shd():
    dags = list(enumerate_dags(3))
    for a, b in itertools.islice(itertools.combinations(dags, 2), 500):
        da, db = diff(a, b), diff(b, a)
        assert da.shd == db.shd
        assert da.extra == db.missing and da.missing == db.extra
        assert {frozenset(e) for e in da.reversed} == {frozenset(e) for e in db.reversed}


def _edit_graph(dags):
    """Adjacency over DAGs differing by one add / delete / reverse."""
    index = {d.edges: i for i, d in enumerate(dags)}
    neighbors = [set() for _ in dags]
    for i, d in enumerate(dags):
        nodes = range(len(d.variables))
        for u in nodes:
            for v in nodes:
                if u == v:
                    continue
                if (u, v) in d.edges:
                    for new in (d.edges - {(u, v)}, d.edges - {(u, v)} | {(v, u)}):
                        j = index.get(frozenset(new))
                        if j is not None:
                            neighbors[i].add(j)
                elif (v, u) not in d.edges:
                    j = index.get(frozenset(d.edges | {(u, v)}))
                    if j is not None:
                        neighbors[i].add(j)
    return index, neighbors


def test_shd_equals_bfs_edit_distance_all_three_node_pairs():
    dags = list(enumerate_dags(3))
    index, neighbors = _edit_graph(dags)
    for i, truth in enumerate(dags):
        dist = {i: 0}
        queue = deque([i])
        while queue:
            cur = queue.popleft()
            for nxt in neighbors[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        for j, learned in enumerate(dags):
            assert diff(truth, learned).shd == dist[j]


def test_shd_equals_bfs_edit_distance_sampled_four_node_pairs():
    import numpy as np

    dags = list(enumerate_dags(4))
    index, neighbors = _edit_graph(dags)
    rng = np.random.default_rng(0)
    sources = rng.choice(len(dags), size=12, replace=False)
    for i in sources:
        dist = {int(i): 0}
        queue = deque([int(i)])
        while queue:
            cur = queue.popleft()
            for nxt in neighbors[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        for j in rng.choice(len(dags), size=40, replace=False):
            assert diff(dags[int(i)], dags[int(j)]).shd == dist[int(j)]
