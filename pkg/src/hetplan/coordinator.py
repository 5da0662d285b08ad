"""Heterogeneous graph-attention coordinator.

Three stacked attention layers with one message function per edge type
(plus a self relation), followed by two MLP heads over current-node
features: a selection score and a push probability per current object.

Attention: for destination node i, every incoming typed edge contributes a
logit LeakyReLU(a_r^T [Th_r x_i || Th_r x_j]) and the self relation
contributes LeakyReLU(a_s^T [Th_s x_i || Th_s x_i]); one softmax per node
normalizes the full row, so coefficients attending to a node always sum
to 1, an isolated node reduces to x' = Th_self x, and tying all relation
parameters together reproduces a homogeneous graph-attention layer on the
union connectivity exactly. The ablation model is this tying, switched by
`shared_relations=True`.

Aggregation order is canonical (edge type, then destination, then source);
inference uses correctly-rounded per-node sums so relabeling objects
permutes the outputs bit-exactly.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import SceneError
from .graph import EDGE_TYPES
from .nn import autodiff as ad
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import Dense, glorot
from .nn.losses import bce_t, combined_t, huber_t
from .nn.optim import Adam
from .perception.descriptors import EMBEDDING_DIM
from .sim.primitives import PICK_PLACE, PUSH
from .validation import ParamsMixin, check_random_state

SELF_RELATION = "self"
LEAKY_SLOPE = 0.2
PUSH_THRESHOLD = 0.5

# fixed diagonal input scaling: shape-code dims pass through, cm locations
# are brought to unit order so attention logits start well-conditioned
INPUT_SCALE = np.array([1.0] * 12 + [0.05] * 3)


def gat_attention(x_i, neighbors, theta, att, slope=LEAKY_SLOPE):
    """Plain single-type attention row over neighbors plus self.

    Returns coefficients ordered (neighbors..., self); they sum to 1. An
    empty neighborhood yields the singleton row [1.0].
    """
    theta = np.asarray(theta, dtype=np.float64)
    att = np.asarray(att, dtype=np.float64)
    d = theta.shape[0]
    hi = theta @ np.asarray(x_i, dtype=np.float64)
    feats = [theta @ np.asarray(x_j, dtype=np.float64) for x_j in neighbors] + [hi]
    logits = np.array([att[:d] @ hi + att[d:] @ hj for hj in feats])
    logits = np.where(logits > 0, logits, slope * logits)
    e = np.exp(logits - logits.max())
    return e / e.sum()


@dataclass(frozen=True)
class Decision:
    select_scores: np.ndarray    # per current object, view order
    push_probs: np.ndarray
    target_index: int            # argmax of select_scores
    action: str                  # PUSH iff push_probs[target] > 0.5

    def __post_init__(self):
        assert self.target_index == int(np.argmax(self.select_scores))
        want = PUSH if self.push_probs[self.target_index] > PUSH_THRESHOLD else PICK_PLACE
        assert self.action == want


@dataclass(frozen=True, eq=False)
class Collated:
    embeddings: np.ndarray
    edge_src: dict
    edge_dst: dict
    n_nodes: int
    current_index: np.ndarray
    task_of_current: np.ndarray
    n_tasks: int


def collate(graphs):
    """Disjoint union of task graphs for one batched forward pass."""
    embeds = []
    src = {t: [] for t in EDGE_TYPES}
    dst = {t: [] for t in EDGE_TYPES}
    cur_index = []
    task_of = []
    offset = 0
    for t_idx, g in enumerate(graphs):
        embeds.append(g.embeddings)
        for etype in EDGE_TYPES:
            arr = g.edges[etype]
            if len(arr):
                src[etype].append(arr[:, 0] + offset)
                dst[etype].append(arr[:, 1] + offset)
        cur = g.nodes_of("current")
        cur_index.append(cur + offset)
        task_of.extend([t_idx] * len(cur))
        offset += g.n_nodes
    return Collated(
        embeddings=np.concatenate(embeds, axis=0),
        edge_src={t: (np.concatenate(v) if v else np.zeros(0, dtype=np.intp))
                  for t, v in src.items()},
        edge_dst={t: (np.concatenate(v) if v else np.zeros(0, dtype=np.intp))
                  for t, v in dst.items()},
        n_nodes=offset,
        current_index=np.concatenate(cur_index),
        task_of_current=np.asarray(task_of, dtype=np.intp),
        n_tasks=len(graphs))


class HetCoordinator(ParamsMixin):
    """Imitation-trained object/action selector (fit on expert-labeled
    task records, predict on task graphs)."""

    def __init__(self, hidden_dim=32, n_layers=3, shared_relations=False,
                 learning_rate=1e-3, batch_size=32, epochs=50,
                 action_weight=0.65, huber_delta=1.15, val_fraction=0.1,
                 seed=0):
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.shared_relations = shared_relations
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.action_weight = action_weight
        self.huber_delta = huber_delta
        self.val_fraction = val_fraction
        self.seed = seed
        self.fitted_ = None
        self.history_ = None
        self._layers = None

    # -- parameters ----------------------------------------------------------

    def _build(self, rng):
        self._layers = []
        d_in = EMBEDDING_DIM
        for l in range(self.n_layers):
            d_out = self.hidden_dim
            layer = {}
            if self.shared_relations:
                theta = ad.Parameter(f"layer{l}.shared.theta",
                                     glorot(rng, (d_out, d_in), d_in, d_out))
                att = ad.Parameter(f"layer{l}.shared.att",
                                   glorot(rng, (2 * d_out,), 2 * d_out, 1))
                for rel in EDGE_TYPES + (SELF_RELATION,):
                    layer[rel] = (theta, att)
            else:
                for rel in EDGE_TYPES + (SELF_RELATION,):
                    theta = ad.Parameter(f"layer{l}.{rel}.theta",
                                         glorot(rng, (d_out, d_in), d_in, d_out))
                    att = ad.Parameter(f"layer{l}.{rel}.att",
                                       glorot(rng, (2 * d_out,), 2 * d_out, 1))
                    layer[rel] = (theta, att)
            self._layers.append(layer)
            d_in = d_out
        self._head_object = [Dense("head_object.fc1", d_in, self.hidden_dim, rng),
                             Dense("head_object.fc2", self.hidden_dim, 1, rng)]
        self._head_action = [Dense("head_action.fc1", d_in, self.hidden_dim, rng),
                             Dense("head_action.fc2", self.hidden_dim, 1, rng)]

    def parameters(self):
        seen = {}
        for layer in self._layers:
            for theta, att in layer.values():
                seen[id(theta)] = theta
                seen[id(att)] = att
        for head in (self._head_object, self._head_action):
            for dense in head:
                for p in dense.parameters():
                    seen[id(p)] = p
        return list(seen.values())

    def _ensure_built(self):
        if self._layers is None:
            self._build(check_random_state(self.seed))

    # -- forward -------------------------------------------------------------

    def _het_layer(self, x, collated, layer, exact, diagnostics=None):
        n = collated.n_nodes
        d = self.hidden_dim
        logits_parts, msg_parts, seg_parts = [], [], []
        for rel in EDGE_TYPES:
            dst = collated.edge_dst[rel]
            if len(dst) == 0:
                continue
            src = collated.edge_src[rel]
            theta, att = layer[rel]
            h = ad.matmul(x, ad.transpose(theta))
            s_dst = ad.matmul(h, ad.reshape(ad.gather_rows(att, np.arange(d)), (d, 1)))
            s_src = ad.matmul(h, ad.reshape(ad.gather_rows(att, np.arange(d, 2 * d)), (d, 1)))
            logits_parts.append(ad.leaky_relu(
                ad.add(ad.gather_rows(s_dst, dst), ad.gather_rows(s_src, src)), LEAKY_SLOPE))
            msg_parts.append(ad.gather_rows(h, src))
            seg_parts.append(dst)
        theta_s, att_s = layer[SELF_RELATION]
        h_s = ad.matmul(x, ad.transpose(theta_s))
        s_dst = ad.matmul(h_s, ad.reshape(ad.gather_rows(att_s, np.arange(d)), (d, 1)))
        s_src = ad.matmul(h_s, ad.reshape(ad.gather_rows(att_s, np.arange(d, 2 * d)), (d, 1)))
        logits_parts.append(ad.leaky_relu(ad.add(s_dst, s_src), LEAKY_SLOPE))
        msg_parts.append(h_s)
        seg_parts.append(np.arange(n, dtype=np.intp))

        logits = ad.concat(logits_parts, axis=0)
        msgs = ad.concat(msg_parts, axis=0)
        seg = np.concatenate(seg_parts)
        shift = np.full((n, 1), -np.inf)
        np.maximum.at(shift, seg, logits.data)
        e = ad.exp(ad.sub(logits, ad.constant(shift[seg])))
        denom = ad.segment_sum(e, seg, n, exact=exact)
        alpha = ad.div(e, ad.gather_rows(denom, seg))
        if diagnostics is not None:
            diagnostics.append((alpha.data.copy(), seg.copy(), n))
        out = ad.segment_sum(ad.mul(alpha, msgs), seg, n, exact=exact)
        return out

    def _forward(self, collated, exact=False, diagnostics=None):
        x = ad.constant(collated.embeddings * INPUT_SCALE)
        for l, layer in enumerate(self._layers):
            x = self._het_layer(x, collated, layer, exact, diagnostics)
            if l < self.n_layers - 1:
                x = ad.elu(x)
        cur = ad.gather_rows(x, collated.current_index)
        fo1, fo2 = self._head_object
        fa1, fa2 = self._head_action
        select = ad.sigmoid(fo2(ad.elu(fo1(cur))))
        push = ad.sigmoid(fa2(ad.elu(fa1(cur))))
        return select, push

    # -- estimator surface ---------------------------------------------------

    def fit(self, records, log_path=None):
        """Imitation training on expert-labeled task records.

        Each record needs: graph (HetTaskGraph), first_labels, action_labels
        (arrays over the graph's current objects). A held-out fraction is
        scored each epoch (target agreement and action accuracy).
        """
        records = list(records)
        if not records:
            raise ValueError("empty dataset")
        rng = check_random_state(self.seed)
        self._build(rng)
        params = self.parameters()
        opt = Adam(params, lr=self.learning_rate)
        order = rng.permutation(len(records))
        n_val = int(round(len(records) * self.val_fraction))
        val_idx = order[:n_val]
        train_idx = order[n_val:]
        if len(train_idx) == 0:
            train_idx, val_idx = order, order[:0]
        history = []
        last_good = None
        for epoch in range(self.epochs):
            perm = rng.permutation(len(train_idx))
            epoch_loss = 0.0
            n_batches = 0
            for start in range(0, len(perm), self.batch_size):
                batch = [records[train_idx[i]] for i in perm[start:start + self.batch_size]]
                loss = self._batch_loss(batch)
                if not np.isfinite(loss.item()):
                    if last_good is not None:
                        for p, v in zip(params, last_good):
                            p.data = v
                    warnings.warn("coordinator training diverged; "
                                  "keeping last finite checkpoint")
                    self.fitted_ = True
                    self.history_ = history
                    return self
                opt.zero_grad()
                ad.backward(loss)
                opt.step()
                epoch_loss += loss.item()
                n_batches += 1
            last_good = [p.data.copy() for p in params]
            top1, action_acc = self._split_metrics([records[i] for i in val_idx])
            history.append({
                "epoch": epoch,
                "train_loss": epoch_loss / max(n_batches, 1),
                "val_object_top1": top1,
                "val_action_acc": action_acc,
            })
        self.fitted_ = True
        self.history_ = history
        if log_path is not None:
            with open(log_path, "w", newline="") as fh:
                writer = csv.DictWriter(
                    fh, fieldnames=["epoch", "train_loss", "val_object_top1", "val_action_acc"])
                writer.writeheader()
                for row in history:
                    writer.writerow({k: repr(v) if isinstance(v, float) else v
                                     for k, v in row.items()})
        return self

    def _batch_loss(self, batch):
        collated = collate([r["graph"] for r in batch])
        select, push = self._forward(collated)
        first = np.concatenate([np.asarray(r["first_labels"], dtype=np.float64)
                                for r in batch])[:, None]
        action = np.concatenate([np.asarray(r["action_labels"], dtype=np.float64)
                                 for r in batch])[:, None]
        counts = np.bincount(collated.task_of_current, minlength=collated.n_tasks)
        weights = (1.0 / (collated.n_tasks * counts))[collated.task_of_current][:, None]
        obj_loss = huber_t(select, first, delta=self.huber_delta, weights=weights)
        act_loss = bce_t(push, action, weights=weights)
        return combined_t(obj_loss, act_loss, self.action_weight)

    def _split_metrics(self, records):
        if not records:
            return float("nan"), float("nan")
        top1_hits = 0
        action_hits = 0
        action_total = 0
        collated = collate([r["graph"] for r in records])
        select, push = self._forward(collated)
        sel = select.data[:, 0]
        psh = push.data[:, 0]
        offset = 0
        for r in records:
            n = r["graph"].n_current
            first = np.asarray(r["first_labels"])
            action = np.asarray(r["action_labels"])
            s = sel[offset:offset + n]
            p = psh[offset:offset + n]
            if first.max() > 0 and int(np.argmax(s)) == int(np.argmax(first)):
                top1_hits += 1
            action_hits += int(np.sum((p > PUSH_THRESHOLD) == (action > 0.5)))
            action_total += n
            offset += n
        return top1_hits / len(records), action_hits / max(action_total, 1)

    def score(self, records):
        """(target top-1 agreement, action accuracy) on labeled records."""
        self._ensure_built()
        return self._split_metrics(list(records))

    def predict_scores(self, graph):
        """Per-object (selection score, push probability) for one graph."""
        self._ensure_built()
        if graph.n_current == 0:
            raise SceneError("graph has no current nodes")
        select, push = self._forward(collate([graph]), exact=True)
        return select.data[:, 0].copy(), push.data[:, 0].copy()

    def predict(self, graph):
        select, push = self.predict_scores(graph)
        target = int(np.argmax(select))
        action = PUSH if push[target] > PUSH_THRESHOLD else PICK_PLACE
        return Decision(select_scores=select, push_probs=push,
                        target_index=target, action=action)

    def attention_diagnostics(self, graph):
        """Per-layer (coefficients, destination ids, n_nodes) for one graph."""
        self._ensure_built()
        diags = []
        self._forward(collate([graph]), exact=True, diagnostics=diags)
        return diags

    # -- persistence ---------------------------------------------------------

    def save(self, path):
        self._ensure_built()
        params = {p.name: p.data for p in self.parameters()}
        save_checkpoint(path, "coordinator", params,
                        hyper=self.get_params(),
                        extra={"edge_types": list(EDGE_TYPES),
                               "embedding_dim": EMBEDDING_DIM,
                               "history": self.history_ or []})

    @classmethod
    def load(cls, path):
        header, params = load_checkpoint(path, expect_kind="coordinator")
        if tuple(header["extra"]["edge_types"]) != EDGE_TYPES:
            from .exceptions import CheckpointError
            raise CheckpointError("checkpoint edge types do not match this build")
        hyper = dict(header["hyper"])
        est = cls(**{k: hyper[k] for k in cls._param_names() if k in hyper})
        est._build(check_random_state(est.seed))
        for p in est.parameters():
            p.data = params[p.name]
        est.fitted_ = True
        est.history_ = header["extra"].get("history")
        return est
