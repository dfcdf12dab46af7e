"""
Seeded normal draws for Monte-Carlo trials.

Trial i of a run seeded with s reads its own Philox stream keyed by
SeedSequence([s, i]), and normals come from the inverse CDF. Shards are
therefore free to run in any order or in parallel: the assembled array
depends only on (seed, n_trials, k).
"""

import asyncio
import logging
import sys
import os

import numpy as np
from scipy.special import ndtri
from tqdm import tqdm

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from actor.actor_system import Actor, ActorSystem
from actor.messages import ChildFailed, DrawShard, Message, ShardDrawn
from qwork.errors import SamplingError

log = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64
_UNIFORM_BITS = 2 ** 53


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < SEED_LIMIT:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([check_seed(seed), int(trial)])))


def trial_normals(seed: int, trial: int, k: int) -> np.ndarray:
    rng = trial_generator(seed, trial)
    # midpoints of 2**53 equal bins keep u strictly inside (0, 1)
    u = (rng.integers(0, _UNIFORM_BITS, size=k).astype(float) + 0.5) / _UNIFORM_BITS
    return ndtri(u)


def draw_normals(seed: int, trial_start: int, trial_stop: int, k: int, progress: bool = False) -> np.ndarray:
    out = np.empty((trial_stop - trial_start, k))
    trials = range(trial_start, trial_stop)
    for row, trial in enumerate(tqdm(trials, desc="trials", disable=not progress, leave=False)):
        out[row] = trial_normals(seed, trial, k)
    return out


def shard_bounds(n_trials: int, n_shards: int) -> list[tuple[int, int]]:
    n_shards = max(1, min(n_shards, n_trials))
    edges = np.linspace(0, n_trials, n_shards + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


class ShardWorker(Actor):

    async def receive(self, msg: Message):
        if isinstance(msg, DrawShard):
            loop = asyncio.get_running_loop()
            normals = await loop.run_in_executor(
                None, draw_normals, msg.seed, msg.trial_start, msg.trial_stop, msg.k)
            self.context.parent.tell(ShardDrawn(trial_start=msg.trial_start, normals=normals))


class ShardCollector(Actor):

    def __init__(self, seed: int, n_trials: int, k: int, n_workers: int, done: asyncio.Future,
                 progress: bool = False):
        super().__init__()
        self.seed = seed
        self.n_trials = n_trials
        self.k = k
        self.bounds = shard_bounds(n_trials, n_workers)
        self.done = done
        self._shards: dict[int, np.ndarray] = {}
        self._bar = tqdm(total=n_trials, desc="trials", disable=not progress, leave=False)

    def _fail(self, reason: str):
        if not self.done.done():
            self.done.set_exception(SamplingError(reason))

    async def pre_start(self):
        try:
            for i, (start, stop) in enumerate(self.bounds):
                ref = self.context.actor_of(ShardWorker, f"{self.actor_id}-worker-{i}")
                ref.tell(DrawShard(seed=self.seed, trial_start=start, trial_stop=stop, k=self.k))
        except Exception as e:
            self._fail(f"could not dispatch shards: {e}")
            raise
        self.log.debug(f"Dispatched {len(self.bounds)} shards over {self.n_trials} trials")

    async def receive(self, msg: Message):
        try:
            self._collect(msg)
        except Exception as e:
            # no parent to report to
            self._fail(f"collector failed on {type(msg).__name__}: {e}")
            raise

    def _collect(self, msg: Message):
        if isinstance(msg, ShardDrawn):
            self._shards[msg.trial_start] = msg.normals
            self._bar.update(len(msg.normals))
            if len(self._shards) == len(self.bounds) and not self.done.done():
                self.done.set_result(np.concatenate([self._shards[s] for s, _ in self.bounds]))

        elif isinstance(msg, ChildFailed):
            self.log.error(f"Shard worker {msg.child_id} failed with {msg.error_type}: {msg.error}")
            self._fail(f"shard worker {msg.child_id} failed: {msg.error}")

    async def post_stop(self):
        self._bar.close()


async def draw_normals_sharded(seed: int, n_trials: int, k: int, n_workers: int,
                               progress: bool = False) -> np.ndarray:
    system = ActorSystem("sampling")
    done = asyncio.get_running_loop().create_future()
    system.actor_of(ShardCollector, "collector", seed=check_seed(seed), n_trials=n_trials, k=k,
                    n_workers=n_workers, done=done, progress=progress)
    try:
        return await done
    finally:
        await system.shutdown()


def standard_normals(seed: int, n_trials: int, k: int, n_workers: int = 1, progress: bool = False) -> np.ndarray:
    """(n_trials, k) standard normals; identical for every n_workers."""
    check_seed(seed)
    if n_trials < 1:
        raise SamplingError(f"n_trials must be positive, got {n_trials}")
    if k < 1:
        raise SamplingError(f"need at least one normal per trial, got k={k}")
    if n_workers <= 1 or n_trials == 1:
        return draw_normals(seed, 0, n_trials, k, progress)
    log.debug("sharding %d trials over %d workers", n_trials, n_workers)
    return asyncio.run(draw_normals_sharded(seed, n_trials, k, n_workers, progress))
