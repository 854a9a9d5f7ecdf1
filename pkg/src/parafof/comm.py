"""In-process communicator: a fixed set of rank threads exchanging messages.

Each rank runs in its own OS thread. Collectives synchronise on a shared
barrier and verify that every rank entered the *same* collective (mismatched
labels raise :class:`ProtocolError` on all ranks instead of deadlocking);
point-to-point messages travel through per-(src, dst) FIFO queues of bytes.
"""

from __future__ import annotations

import queue
import threading
from typing import Any, Callable

__all__ = ["ProtocolError", "InProcessComm", "make_comms", "run_on_ranks"]


class ProtocolError(RuntimeError):
    """A rank broke the exchange protocol (mismatched collective, timeout,
    or a peer aborted)."""


class _ClusterState:
    def __init__(self, size: int, timeout: float):
        self.size = size
        self.timeout = timeout
        self.barrier = threading.Barrier(size)
        self.slots: list[Any] = [None] * size
        self.labels: list[str | None] = [None] * size
        self.queues = {
            (src, dst): queue.SimpleQueue()
            for src in range(size)
            for dst in range(size)
        }


class InProcessComm:
    """One rank's endpoint. ``size`` ranks share one :class:`_ClusterState`."""

    def __init__(self, state: _ClusterState, rank: int):
        self._state = state
        self._rank = rank

    @property
    def rank(self) -> int:
        return self._rank

    @property
    def size(self) -> int:
        return self._state.size

    def _wait(self) -> None:
        try:
            self._state.barrier.wait(self._state.timeout)
        except threading.BrokenBarrierError as exc:
            raise ProtocolError(
                f"rank {self._rank}: collective aborted or timed out"
            ) from exc

    def _collect(self, label: str, value: Any) -> list[Any]:
        st = self._state
        st.labels[self._rank] = label
        st.slots[self._rank] = value
        self._wait()
        labels = list(st.labels)
        values = list(st.slots)
        if any(lab != label for lab in labels):
            # Every rank sees the same snapshot here, so every rank raises
            # this same error instead of racing into the next barrier.
            raise ProtocolError(
                f"rank {self._rank}: collective mismatch, "
                f"expected {label!r} everywhere but saw {labels}"
            )
        self._wait()  # everyone has read before slots are reused
        return values

    def abort(self) -> None:
        """Break every pending or future collective on all ranks."""
        self._state.barrier.abort()

    # -- collectives ----------------------------------------------------
    def barrier(self) -> None:
        self._collect("barrier", None)

    def allgather(self, value: Any, label: str = "allgather") -> list[Any]:
        """Every rank's ``value``, in rank order, identical on all ranks."""
        return self._collect(label, value)

    def scan_sum(self, value: int) -> int:
        """Inclusive prefix sum of ``value`` over ranks 0..self.rank."""
        contributions = self._collect("scan_sum", int(value))
        return sum(contributions[: self._rank + 1])

    # -- point to point -------------------------------------------------
    def send(self, dst: int, payload: bytes) -> None:
        """Queue ``payload`` for rank ``dst`` (non-blocking, FIFO per pair)."""
        if not 0 <= dst < self.size:
            raise ValueError(f"destination rank {dst} out of range")
        if not isinstance(payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")
        self._state.queues[(self._rank, dst)].put(bytes(payload))

    def recv(self, src: int) -> bytes:
        """Next payload from rank ``src``; ProtocolError on timeout."""
        if not 0 <= src < self.size:
            raise ValueError(f"source rank {src} out of range")
        try:
            return self._state.queues[(src, self._rank)].get(
                timeout=self._state.timeout
            )
        except queue.Empty as exc:
            raise ProtocolError(
                f"rank {self._rank}: timed out waiting for a message "
                f"from rank {src}"
            ) from exc


def make_comms(size: int, timeout: float = 30.0) -> list[InProcessComm]:
    """Endpoints for ``size`` ranks sharing one in-process cluster."""
    size = int(size)
    if size < 1:
        raise ValueError(f"rank count must be >= 1, got {size}")
    state = _ClusterState(size, float(timeout))
    return [InProcessComm(state, r) for r in range(size)]


def run_on_ranks(
    size: int,
    fn: Callable[..., Any],
    *args: Any,
    timeout: float = 30.0,
) -> list[Any]:
    """Run ``fn(comm, *args)`` on ``size`` rank threads; per-rank results.

    If any rank raises, the cluster is aborted (so peers blocked in
    collectives fail fast) and the first *primary* exception is re-raised —
    secondary :class:`ProtocolError` fallout from the abort is suppressed.
    """
    comms = make_comms(size, timeout)
    results: list[Any] = [None] * size
    errors: list[BaseException | None] = [None] * size

    def runner(r: int) -> None:
        try:
            results[r] = fn(comms[r], *args)
        except BaseException as exc:  # noqa: BLE001 - repropagated below
            errors[r] = exc
            comms[r].abort()

    threads = [
        threading.Thread(target=runner, args=(r,), name=f"rank-{r}")
        for r in range(size)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    raised = [e for e in errors if e is not None]
    primary = [e for e in raised if not isinstance(e, ProtocolError)]
    if primary:
        raise primary[0]
    # Among protocol errors, prefer one a rank detected itself (label
    # mismatch, recv timeout) over barrier fallout from a peer's abort.
    detected = [
        e
        for e in raised
        if not isinstance(e.__cause__, threading.BrokenBarrierError)
    ]
    if detected:
        raise detected[0]
    if raised:
        raise raised[0]
    return results
