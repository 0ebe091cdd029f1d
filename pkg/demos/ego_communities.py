"""
Communities inside one ego network
==================================

Builds a small timestamped graph, cuts out the ego network of one user and
splits the alters into communities by minimizing the two-level map
equation codelength.
"""

import numpy as np

from egohomophily import build_graph, codelength, detect_communities, extract_ego_network

# ego 0 meets two friend circles over time; the circles touch through one edge
circle_a = [(1, 2), (1, 3), (2, 3), (3, 4), (1, 4), (2, 4)]
circle_b = [(5, 6), (5, 7), (6, 7)]
spokes = [(0, alter) for alter in range(1, 8)]
edges = circle_a + circle_b + [(4, 5)] + spokes
src, dst = np.array(edges).T
times = np.concatenate([np.full(len(circle_a) + len(circle_b) + 1, 100),
                        [10, 20, 60, 70, 30, 40, 50]])
g = build_graph(src, dst, times)

net = extract_ego_network(g, g.node_index(0))
# alters come back in the order they connected to the ego
print("appearance order:", g.node_ids[net.alters])

asg = detect_communities(net, seed=1)
for label, members in enumerate(asg.communities):
    print(f"community {label}: users {g.node_ids[net.alters[members]].tolist()}")
print(f"codelength {asg.codelength:.4f} bits")

# compare against putting every alter in one module
print(f"one module  {codelength(net.degree, net.edges, np.zeros(net.degree, int)):.4f} bits")
