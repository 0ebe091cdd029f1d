"""Independent reference computations used by the tests.

Nothing here imports the package: these are slow, literal evaluations kept
separate from the optimized code paths they check.
"""

import math
import random


def entropy(probs):
    total = sum(probs)
    return -sum(p / total * math.log2(p / total) for p in probs if p > 0)


def map_equation(n, edges, labels):
    """q H(Q) + sum_i p_i H(P_i), evaluated term by term."""
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    two_w = sum(deg)
    if two_w == 0:
        return 0.0
    visit = [d / two_w for d in deg]
    modules = sorted(set(labels))
    exit_rate = {m: 0.0 for m in modules}
    for u, v in edges:
        if labels[u] != labels[v]:
            exit_rate[labels[u]] += 1 / two_w
            exit_rate[labels[v]] += 1 / two_w
    q = sum(exit_rate.values())
    index = q * entropy([exit_rate[m] for m in modules]) if q > 0 else 0.0
    module_len = 0.0
    for m in modules:
        members = [visit[a] for a in range(n) if labels[a] == m]
        p_m = exit_rate[m] + sum(members)
        if p_m > 0:
            module_len += p_m * entropy([exit_rate[m]] + members)
    return index + module_len


def set_partitions(n):
    """All partitions of range(n) as restricted-growth label tuples."""
    def rec(i, labels, top):
        if i == n:
            yield tuple(labels)
            return
        for m in range(top + 1):
            labels.append(m)
            yield from rec(i + 1, labels, max(top, m + 1))
            labels.pop()
    yield from rec(0, [], 0)


def best_partition(n, edges):
    return min((map_equation(n, edges, p), p) for p in set_partitions(n))


def first_appearance_uniform(c, steps, rng: random.Random):
    """Unlimited communities chosen uniformly: first step each one shows up."""
    first = {}
    for k in range(1, steps + 1):
        r = rng.randrange(c)
        first.setdefault(r, k)
        if len(first) == c:
            break
    return sorted(first.values())


def is_connected(n, edges):
    adj = {i: set() for i in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, stack = {0}, [0]
    while stack:
        for b in adj[stack.pop()]:
            if b not in seen:
                seen.add(b)
                stack.append(b)
    return len(seen) == n


def random_connected_graph(n, rng: random.Random):
    """Random connected simple graph: a random spanning tree plus extra edges."""
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges.add((min(u, v), max(u, v)))
    p = rng.uniform(0.0, 0.8)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    return sorted(edges)
