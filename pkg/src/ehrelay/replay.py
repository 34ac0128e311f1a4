"""Prioritized experience replay over a sum tree.

Transitions are stored in a ring buffer of parallel arrays. A complete
binary tree (padded to a power of two, so every leaf sits at the same depth)
keeps priority^alpha at the leaves and subtree sums in the internal nodes;
stratified prefix-sum descent draws a minibatch in O(M log capacity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class Transition:
    """One experience record (s, a, r, s'); terminal marks episode ends."""

    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool = False


class SumTree:
    """Array-backed complete binary tree; parents hold the sum of their
    children, the root holds the total."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.depth = max(0, math.ceil(math.log2(capacity)))
        self.n_leaves = 1 << self.depth
        self.nodes = np.zeros(2 * self.n_leaves - 1)
        self._leaf0 = self.n_leaves - 1

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    def leaf_values(self, indices) -> np.ndarray:
        return self.nodes[self._leaf0 + np.asarray(indices)]

    def set(self, index: int, value: float) -> None:
        """Set one leaf and refresh the sums on its root path. Parents are
        recomputed from their children, so repeated updates cannot drift."""
        node = self._leaf0 + index
        self.nodes[node] = value
        while node > 0:
            node = (node - 1) >> 1
            left = 2 * node + 1
            self.nodes[node] = self.nodes[left] + self.nodes[left + 1]

    def set_batch(self, indices: np.ndarray, values: np.ndarray) -> None:
        nodes = self._leaf0 + np.asarray(indices)
        self.nodes[nodes] = values
        level = np.unique(nodes)
        while level[0] > 0:
            level = np.unique((level - 1) >> 1)
            left = 2 * level + 1
            self.nodes[level] = self.nodes[left] + self.nodes[left + 1]

    def descend(self, value: float) -> int:
        """Leaf index i such that value falls in leaf i's prefix-sum span."""
        return int(self.descend_batch(np.array([value]))[0])

    def descend_batch(self, values: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(values), dtype=np.int64)
        v = np.asarray(values, dtype=np.float64).copy()
        for _ in range(self.depth):
            left = 2 * idx + 1
            left_sum = self.nodes[left]
            go_left = v <= left_sum
            idx = np.where(go_left, left, left + 1)
            v = np.where(go_left, v, v - left_sum)
        return idx - self._leaf0

    def consistent(self, rel_tol: float = 1e-9) -> bool:
        parents = self.nodes[:self._leaf0]
        left = self.nodes[1:2 * self._leaf0:2]
        right = self.nodes[2:2 * self._leaf0 + 1:2]
        return bool(np.allclose(parents, left + right, rtol=rel_tol, atol=1e-12))


@dataclass
class SampleBatch:
    """A prioritized minibatch with its bookkeeping.

    `weights` are the importance-sampling weights normalized by the batch
    maximum; `raw_weights` are the unnormalized (1 / (capacity P_i))^beta
    values; `probs` are the sampling probabilities P_i.
    """

    indices: np.ndarray
    probs: np.ndarray
    weights: np.ndarray
    raw_weights: np.ndarray
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminals: np.ndarray

    @property
    def transitions(self) -> list:
        return [
            Transition(self.obs[i], int(self.actions[i]),
                       float(self.rewards[i]), self.next_obs[i],
                       bool(self.terminals[i]))
            for i in range(len(self.indices))
        ]


class PrioritizedReplay:
    """Ring-buffer replay memory with proportional prioritized sampling."""

    def __init__(self, capacity: int, validate: bool = False):
        self.capacity = capacity
        self.tree = SumTree(capacity)
        self.validate = validate
        self._raw = np.zeros(capacity)  # raw priorities p_i
        self._alpha = 1.0  # exponent currently baked into the tree leaves
        self._cursor = 0
        self._size = 0
        self._obs: Optional[np.ndarray] = None
        self._next_obs: Optional[np.ndarray] = None
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._terminals = np.zeros(capacity, dtype=bool)

    def __len__(self) -> int:
        return self._size

    def max_priority(self) -> float:
        """Largest raw priority currently stored; 1 for an empty memory."""
        if self._size == 0:
            return 1.0
        return float(self._raw[:self._size].max())

    def push(self, t: Transition) -> int:
        """Store a transition at the write cursor (overwriting the oldest
        when full) with the current maximum priority. Returns the slot."""
        if self._obs is None:
            dim = len(t.obs)
            self._obs = np.zeros((self.capacity, dim))
            self._next_obs = np.zeros((self.capacity, dim))
        i = self._cursor
        priority = self.max_priority()
        self._obs[i] = t.obs
        self._next_obs[i] = t.next_obs
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._terminals[i] = t.terminal
        self._raw[i] = priority
        self.tree.set(i, priority ** self._alpha)
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        if self.validate:
            assert self.tree.consistent()
        return i

    def _ensure_alpha(self, alpha: float) -> None:
        if alpha == self._alpha:
            return
        self._alpha = alpha
        vals = np.zeros(self.capacity)
        vals[:self._size] = self._raw[:self._size] ** alpha
        self.tree.set_batch(np.arange(self.capacity), vals)

    def sampling_probs(self, alpha: float) -> np.ndarray:
        """Closed-form P_i = p_i^alpha / sum_j p_j^alpha over stored slots."""
        powered = self._raw[:self._size] ** alpha
        return powered / powered.sum()

    def sample(self, m: int, alpha: float, beta: float,
               rng: np.random.Generator) -> SampleBatch:
        """Draw a stratified minibatch of m transitions.

        The prefix-sum interval [0, total) is split into m equal strata with
        one uniform draw each, so pooled draw frequencies match the
        proportional law while per-batch variance stays low.
        """
        if self._size < m:
            raise ValueError(f"memory holds {self._size} < {m} transitions")
        self._ensure_alpha(alpha)
        total = self.tree.total
        points = (np.arange(m) + rng.random(m)) * (total / m)
        leaves = self.tree.descend_batch(points)
        np.clip(leaves, 0, self._size - 1, out=leaves)
        probs = self.tree.leaf_values(leaves) / total
        raw_w = (1.0 / (self.capacity * probs)) ** beta
        weights = raw_w / raw_w.max()
        if self.validate:
            assert self.tree.consistent()
        return SampleBatch(
            indices=leaves,
            probs=probs,
            weights=weights,
            raw_weights=raw_w,
            obs=self._obs[leaves],
            actions=self._actions[leaves],
            rewards=self._rewards[leaves],
            next_obs=self._next_obs[leaves],
            terminals=self._terminals[leaves],
        )

    def update_priority(self, index: int, loss: float, zeta: float) -> None:
        """Reassign one leaf priority to |loss| + zeta (never zero, so every
        transition keeps a chance of being drawn)."""
        if not 0 <= index < self._size:
            raise IndexError(f"leaf {index} outside stored range")
        p = abs(loss) + zeta
        self._raw[index] = p
        self.tree.set(index, p ** self._alpha)
        if self.validate:
            assert self.tree.consistent()

    def update_priorities(self, indices: np.ndarray, losses: np.ndarray,
                          zeta: float) -> None:
        indices = np.asarray(indices)
        if indices.size and (indices.min() < 0 or indices.max() >= self._size):
            raise IndexError("leaf index outside stored range")
        p = np.abs(losses) + zeta
        self._raw[indices] = p
        self.tree.set_batch(indices, p ** self._alpha)
        if self.validate:
            assert self.tree.consistent()
