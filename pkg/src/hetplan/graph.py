"""Typed task graph over current objects, goal objects, and constraints.

Connectivity: current nodes form a complete directed subgraph, goal nodes
likewise; each matched (current, goal) pair is linked in both directions as
two distinct edge types; every constraint node sends an edge to every
object node (current and goal). Self-loops are implicit in the attention
update and never stored.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import SceneError

EMBEDDING_DIM = 15

NODE_CURRENT = "current"
NODE_GOAL = "goal"
NODE_CONSTRAINT = "constraint"

CUR_CUR = "cur_cur"
GOAL_GOAL = "goal_goal"
CUR_TO_GOAL = "cur_to_goal"
GOAL_TO_CUR = "goal_to_cur"
CON_TO_CUR = "con_to_cur"
CON_TO_GOAL = "con_to_goal"

EDGE_TYPES = (CUR_CUR, GOAL_GOAL, CUR_TO_GOAL, GOAL_TO_CUR, CON_TO_CUR, CON_TO_GOAL)

_ENDPOINT_TYPES = {
    CUR_CUR: (NODE_CURRENT, NODE_CURRENT),
    GOAL_GOAL: (NODE_GOAL, NODE_GOAL),
    CUR_TO_GOAL: (NODE_CURRENT, NODE_GOAL),
    GOAL_TO_CUR: (NODE_GOAL, NODE_CURRENT),
    CON_TO_CUR: (NODE_CONSTRAINT, NODE_CURRENT),
    CON_TO_GOAL: (NODE_CONSTRAINT, NODE_GOAL),
}


@dataclass(frozen=True, eq=False)
class HetTaskGraph:
    node_types: tuple              # per-node type string
    embeddings: np.ndarray         # (n_nodes, 15)
    edges: dict                    # edge type -> (m, 2) int array of (src, dst)
    pairs: tuple                   # correspondence pairs (goal_idx, cur_idx)

    @property
    def n_nodes(self):
        return len(self.node_types)

    @property
    def n_current(self):
        return sum(1 for t in self.node_types if t == NODE_CURRENT)

    def nodes_of(self, node_type):
        return np.array([i for i, t in enumerate(self.node_types) if t == node_type],
                        dtype=np.intp)

    def validate(self):
        if self.embeddings.shape != (self.n_nodes, EMBEDDING_DIM):
            raise SceneError(f"embeddings shape {self.embeddings.shape} != "
                             f"({self.n_nodes}, {EMBEDDING_DIM})")
        for etype, arr in self.edges.items():
            want_src, want_dst = _ENDPOINT_TYPES[etype]
            for src, dst in arr:
                if self.node_types[src] != want_src or self.node_types[dst] != want_dst:
                    raise SceneError(
                        f"edge type {etype} endpoint types "
                        f"({self.node_types[src]}, {self.node_types[dst]}) invalid")
        return self


def build_graph(current_embeds, goal_embeds, constraint_embeds, correspondence):
    """Assemble the typed graph; node order is current, goal, constraint."""
    cur = np.asarray(current_embeds, dtype=np.float64)
    goal = np.asarray(goal_embeds, dtype=np.float64)
    con = (np.asarray(constraint_embeds, dtype=np.float64)
           if len(constraint_embeds) else np.zeros((0, EMBEDDING_DIM)))
    n = len(cur)
    if n < 1 or len(goal) != n:
        raise SceneError(f"need equal nonzero object counts, got {len(cur)} and {len(goal)}")
    pairs = correspondence.pairs
    if len(pairs) != n:
        raise SceneError(f"correspondence covers {len(pairs)} of {n} objects")
    k = len(con)
    node_types = ((NODE_CURRENT,) * n + (NODE_GOAL,) * n + (NODE_CONSTRAINT,) * k)
    embeddings = np.concatenate([cur, goal, con], axis=0)

    def complete(base):
        return [(base + i, base + j) for j in range(n) for i in range(n) if i != j]

    edges = {
        CUR_CUR: complete(0),
        GOAL_GOAL: complete(n),
        CUR_TO_GOAL: [(c, n + g) for g, c in pairs],
        GOAL_TO_CUR: [(n + g, c) for g, c in pairs],
        CON_TO_CUR: [(2 * n + c, i) for c in range(k) for i in range(n)],
        CON_TO_GOAL: [(2 * n + c, n + i) for c in range(k) for i in range(n)],
    }
    canon = {}
    for etype in EDGE_TYPES:
        arr = np.array(sorted(edges[etype], key=lambda e: (e[1], e[0])),
                       dtype=np.intp).reshape(-1, 2)
        canon[etype] = arr
    graph = HetTaskGraph(node_types=node_types, embeddings=embeddings,
                         edges=canon, pairs=tuple(pairs))
    return graph.validate()


def graph_to_dict(graph):
    return {
        "node_types": list(graph.node_types),
        "embeddings": [[float(v) for v in row] for row in graph.embeddings],
        "edges": {t: [[int(s), int(d)] for s, d in graph.edges[t]] for t in EDGE_TYPES},
        "pairs": [[int(g), int(c)] for g, c in graph.pairs],
    }


def graph_from_dict(d):
    edges = {t: np.asarray(d["edges"][t], dtype=np.intp).reshape(-1, 2)
             for t in EDGE_TYPES}
    return HetTaskGraph(
        node_types=tuple(d["node_types"]),
        embeddings=np.asarray(d["embeddings"], dtype=np.float64),
        edges=edges,
        pairs=tuple((int(g), int(c)) for g, c in d["pairs"])).validate()
