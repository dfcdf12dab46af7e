import math
import numpy as np

from actor.actor_system import Actor
from actor.messages import ChildFailed, DrawShard, Message, ShardDrawn
from qwork.core import Operator

KET_ZERO = np.array([1.0, 0.0], dtype=complex)
KET_ONE = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
KET_Y_PLUS = np.array([1.0, 1j], dtype=complex) / math.sqrt(2.0)


def suite_rng(suite_seed: int, instance: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([suite_seed, instance]))


def projector(vector) -> Operator:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return Operator(np.outer(v, v.conj()))


def max_abs(a) -> float:
    return float(np.max(np.abs(a)))


class ShardRecorder(Actor):
    """Parent that asks one child for a shard and keeps whatever comes back."""

    def __init__(self, worker_class, shard: DrawShard):
        super().__init__()
        self.worker_class = worker_class
        self.shard = shard
        self.drawn: list[ShardDrawn] = []
        self.failures: list[ChildFailed] = []

    async def pre_start(self):
        ref = self.context.actor_of(self.worker_class, f"{self.actor_id}-child")
        ref.tell(self.shard)

    async def receive(self, msg: Message):
        if isinstance(msg, ShardDrawn):
            self.drawn.append(msg)
        elif isinstance(msg, ChildFailed):
            self.failures.append(msg)


class BrokenWorker(Actor):

    async def receive(self, msg: Message):
        if isinstance(msg, DrawShard):
            raise RuntimeError(f"cannot draw trials {msg.trial_start}..{msg.trial_stop}")
