from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class Message:
    sender_id: Optional[str] = None


@dataclass
class DrawShard(Message):
    """Ask a worker for the normals of trials [trial_start, trial_stop)."""
    seed: int = 0
    trial_start: int = 0
    trial_stop: int = 0
    k: int = 1


@dataclass
class ShardDrawn(Message):
    trial_start: int = 0
    normals: Optional[np.ndarray] = None


@dataclass
class ChildFailed(Message):
    child_id: str = ""
    error: str = ""
    error_type: str = ""


@dataclass
class Shutdown(Message):
    pass
