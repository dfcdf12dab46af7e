import asyncio
import logging
from abc import ABC, abstractmethod
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Optional, Type

from .messages import ChildFailed, Message, Shutdown

_current_actor_id: ContextVar[Optional[str]] = ContextVar('current_actor_id', default=None)


@dataclass
class ActorRef:
    actor_id: str
    _system: 'ActorSystem'

    def tell(self, msg: Message, sender: Optional['ActorRef'] = None):
        if msg.sender_id is None:
            msg.sender_id = sender.actor_id if sender else _current_actor_id.get()
        self._system._deliver(self.actor_id, msg)


class Actor(ABC):
    def __init__(self):
        self.actor_id: str = ""
        self.context: Optional['ActorContext'] = None
        self._logger: Optional[logging.Logger] = None

    @property
    def log(self) -> logging.Logger:
        if not self._logger:
            self._logger = logging.getLogger(self.actor_id)
        return self._logger

    async def pre_start(self):
        pass

    async def post_stop(self):
        pass

    @abstractmethod
    async def receive(self, msg: Message):
        pass


class ActorContext:
    def __init__(self, system: 'ActorSystem', actor: Actor, parent: Optional[ActorRef] = None):
        self._system = system
        self._actor = actor
        self.parent = parent
        self.children: dict[str, ActorRef] = {}

    @property
    def self_ref(self) -> ActorRef:
        return ActorRef(self._actor.actor_id, self._system)

    def actor_of(self, actor_class: Type[Actor], actor_id: str, **kwargs) -> ActorRef:
        ref = self._system._spawn(actor_class, actor_id, self.self_ref, kwargs)
        self.children[actor_id] = ref
        return ref

    def stop(self, ref: ActorRef):
        self.children.pop(ref.actor_id, None)
        self._system.stop(ref.actor_id)


@dataclass
class _Cell:
    actor: Actor
    mailbox: asyncio.Queue = field(default_factory=asyncio.Queue)
    task: Optional[asyncio.Task] = None


class ActorSystem:
    """
    In-process actor runtime. Every actor owns an unbounded mailbox drained
    by one asyncio task, so messages from one sender arrive in send order.
    An actor whose receive raises reports ChildFailed to its parent and
    stops taking messages; there is no restart.
    """

    def __init__(self, name: str = "system"):
        self.name = name
        self._cells: dict[str, _Cell] = {}
        self._log = logging.getLogger(f"ActorSystem({name})")

    def __contains__(self, actor_id: str) -> bool:
        return actor_id in self._cells

    def actor(self, actor_id: str) -> Actor:
        return self._cells[actor_id].actor

    def actor_of(self, actor_class: Type[Actor], actor_id: str, **kwargs) -> ActorRef:
        return self._spawn(actor_class, actor_id, None, kwargs)

    def _spawn(self, actor_class: Type[Actor], actor_id: str, parent: Optional[ActorRef],
               kwargs: dict) -> ActorRef:
        if actor_id in self._cells:
            raise ValueError(f"actor id already in use: {actor_id}")

        actor = actor_class(**kwargs)
        actor.actor_id = actor_id
        actor.context = ActorContext(self, actor, parent)

        cell = _Cell(actor)
        self._cells[actor_id] = cell
        cell.task = asyncio.create_task(self._run(actor_id, cell))
        self._log.debug(f"Spawned {actor_id}" + (f" under {parent.actor_id}" if parent else ""))
        return ActorRef(actor_id, self)

    def stop(self, actor_id: str):
        if actor_id in self._cells:
            asyncio.create_task(self._stop(actor_id))

    async def _stop(self, actor_id: str):
        cell = self._cells.get(actor_id)
        if cell is None:
            return

        for child_id in list(cell.actor.context.children):
            await self._stop(child_id)

        if cell.task is not asyncio.current_task():
            cell.task.cancel()
            try:
                await cell.task
            except asyncio.CancelledError:
                pass

        await cell.actor.post_stop()
        self._cells.pop(actor_id, None)
        self._log.debug(f"Stopped {actor_id}")

    async def _run(self, actor_id: str, cell: _Cell):
        actor = cell.actor
        token = _current_actor_id.set(actor_id)
        try:
            await actor.pre_start()
            while True:
                msg = await cell.mailbox.get()
                if isinstance(msg, Shutdown):
                    break
                await actor.receive(msg)
        except asyncio.CancelledError:
            pass
        except Exception as e:
            self._log.error(f"Actor {actor_id} failed: {e}")
            parent = actor.context.parent
            if parent is not None:
                parent.tell(ChildFailed(child_id=actor_id, error=str(e), error_type=type(e).__name__),
                            sender=actor.context.self_ref)
        finally:
            _current_actor_id.reset(token)

    def _deliver(self, actor_id: str, msg: Message):
        cell = self._cells.get(actor_id)
        if cell is None:
            self._log.debug(f"Dropped {type(msg).__name__} for unknown actor {actor_id}")
            return
        cell.mailbox.put_nowait(msg)

    async def shutdown(self):
        self._log.debug("Shutting down")
        for actor_id in list(self._cells):
            await self._stop(actor_id)
