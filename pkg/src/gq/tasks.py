"""Deterministic desk-scale datasets for the trainer demo.

Three tasks: a 2-D two-Gaussians classification problem, scalar sine
regression, and an 8-step binary parity sequence task for the recurrent
topology.  Everything is a pure function of (kind, seed); train and eval
splits are disjoint.
"""

import numpy as np

from .errors import InvalidTask

TASKS = ("two-gaussians", "sine-regression", "parity-sequence")

PARITY_LENGTH = 8


def make_task(kind: str, seed: int):
    """Return ((train_x, train_y), (eval_x, eval_y)) for a task kind."""
    rng = np.random.default_rng(seed)
    if kind == "two-gaussians":
        return _two_gaussians(rng)
    if kind == "sine-regression":
        return _sine_regression(rng)
    if kind == "parity-sequence":
        return _parity_sequence(rng)
    raise InvalidTask(f"unknown task {kind!r} (expected one of {TASKS})")


def _two_gaussians(rng, n_train=512, n_eval=2048, spread=0.7):
    def draw(n):
        labels = rng.integers(0, 2, size=n)
        centers = np.where(labels[:, None] == 0, -1.0, 1.0)  # (-1,-1) vs (1,1)
        x = centers + rng.normal(0.0, spread, size=(n, 2))
        return x, labels
    return draw(n_train), draw(n_eval)


def _sine_regression(rng, n_train=512, n_eval=512):
    def draw(n):
        x = rng.uniform(-np.pi, np.pi, size=(n, 1))
        return x, np.sin(x[:, 0])
    return draw(n_train), draw(n_eval)


def _parity_sequence(rng, n_train=192, n_eval=64):
    # Sample distinct bit sequences without replacement so the splits are
    # disjoint by construction.
    total = 1 << PARITY_LENGTH
    order = rng.permutation(total)
    def expand(ids):
        bits = ((ids[:, None] >> np.arange(PARITY_LENGTH)) & 1).astype(np.float64)
        labels = bits.sum(axis=1).astype(np.int64) % 2  # XOR of the inputs
        return bits[:, :, None], labels
    return expand(order[:n_train]), expand(order[n_train : n_train + n_eval])
