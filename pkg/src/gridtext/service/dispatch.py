"""Master side: split scoring across workers, gather gradients, apply updates.

Scoring requests partition each prompt's candidate set into contiguous chunks,
one per healthy worker; the merged response is independent of the partition.
Updates shard the minibatch, average the returned gradients weighted by shard
size, and broadcast a single apply command so every replica stays
parameter-identical.
"""
from __future__ import annotations

import itertools
import socket
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from ..policy.backends import ScorerBackend
from ..policy.distribution import PolicyConfig
from ..training.losses import LossBatch, LossStats, PPOConfig, normalize_advantages
from ..training.ppo import replace_advantages
from . import protocol
from .protocol import decode_array, encode_array
from .worker import InProcessWorker


class DispatchError(RuntimeError):
    pass


class TornUpdateError(DispatchError):
    """Workers disagree after an apply; replicas are no longer identical."""


class WorkerHandle(Protocol):
    worker_id: str

    def request(self, message: dict, timeout: Optional[float] = None) -> dict: ...

    def close(self) -> None: ...


class RemoteWorker:
    """Persistent framed-TCP connection to one worker endpoint."""

    def __init__(self, address: tuple[str, int], worker_id: Optional[str] = None):
        self.address = address
        self.worker_id = worker_id or f"{address[0]}:{address[1]}"
        self._sock: Optional[socket.socket] = None
        self._lock = threading.Lock()

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection(self.address, timeout=10.0)
        return self._sock

    def request(self, message: dict, timeout: Optional[float] = None) -> dict:
        with self._lock:
            sock = self._connect()
            sock.settimeout(timeout)
            try:
                protocol.send_message(sock, message)
                reply = protocol.recv_message(sock)
            except (OSError, protocol.ProtocolError) as exc:
                self.close()
                raise DispatchError(f"worker {self.worker_id}: {exc}") from exc
            if reply is None:
                self.close()
                raise DispatchError(f"worker {self.worker_id}: connection closed")
            return reply

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None


@dataclass
class WorkerInfo:
    handle: WorkerHandle
    capabilities: tuple[str, ...] = ("score", "value", "update")
    healthy: bool = True

    @property
    def worker_id(self) -> str:
        return self.handle.worker_id


class WorkerRegistry:
    def __init__(self, workers: Sequence[WorkerHandle]):
        if not workers:
            raise ValueError("registry needs at least one worker")
        self.workers = [WorkerInfo(handle=w) for w in workers]
        self._lock = threading.Lock()

    @classmethod
    def in_process(cls, backends: Sequence[ScorerBackend]) -> "WorkerRegistry":
        return cls(
            [InProcessWorker(b, worker_id=f"inproc-{i}") for i, b in enumerate(backends)]
        )

    @classmethod
    def remote(cls, addresses: Sequence[tuple[str, int]]) -> "WorkerRegistry":
        return cls([RemoteWorker(a) for a in addresses])

    def healthy(self) -> list[WorkerInfo]:
        with self._lock:
            alive = [w for w in self.workers if w.healthy]
        if not alive:
            raise DispatchError("no healthy workers")
        return alive

    def mark_unhealthy(self, info: WorkerInfo) -> None:
        with self._lock:
            info.healthy = False

    def close(self) -> None:
        for info in self.workers:
            info.handle.close()


def even_slices(n_items: int, n_parts: int) -> list[tuple[int, int]]:
    """Contiguous (start, stop) chunks; first chunks take the remainder."""
    n_parts = max(1, min(n_parts, n_items))
    q, r = divmod(n_items, n_parts)
    slices = []
    start = 0
    for i in range(n_parts):
        stop = start + q + (1 if i < r else 0)
        slices.append((start, stop))
        start = stop
    return slices


@dataclass(frozen=True)
class ScoreRequest:
    request_id: str
    prompts: tuple[str, ...]
    candidates: tuple[tuple[str, ...], ...]  # display strings per prompt

    def __post_init__(self):
        if len(self.prompts) != len(self.candidates):
            raise ValueError("prompts and candidate lists must align")


@dataclass(frozen=True)
class ScoreResponse:
    request_id: str
    scores: tuple[tuple[float, ...], ...]
    values: Optional[tuple[float, ...]]


@dataclass(frozen=True)
class UpdateSummary:
    stats: LossStats
    digest: str
    num_shards: int
    grad_norm: float


class Dispatcher:
    def __init__(self, registry: WorkerRegistry, timeout: float = 60.0):
        self.registry = registry
        self.timeout = timeout
        self._pool = ThreadPoolExecutor(max_workers=16)
        self._ids = itertools.count()

    def close(self) -> None:
        self._pool.shutdown(wait=False)
        self.registry.close()

    def _next_id(self, tag: str) -> str:
        return f"{tag}-{next(self._ids)}"

    def _call(self, info: WorkerInfo, message: dict) -> dict:
        reply = info.handle.request(message, timeout=self.timeout)
        if not reply.get("ok"):
            raise DispatchError(
                f"worker {info.worker_id} failed: {reply.get('payload', {}).get('message')}"
            )
        return reply["payload"]

    def _call_with_retry(self, info: WorkerInfo, message: dict) -> dict:
        try:
            return self._call(info, message)
        except DispatchError:
            self.registry.mark_unhealthy(info)
            alternates = [w for w in self.registry.healthy() if w is not info]
            if not alternates:
                raise
            return self._call(alternates[0], message)

    # -- scoring ----------------------------------------------------------------
    def dispatch_score(
        self, request: ScoreRequest, with_values: bool = False
    ) -> ScoreResponse:
        workers = self.registry.healthy()
        n_prompts = len(request.prompts)
        per_prompt_slices = [
            even_slices(len(c), len(workers)) for c in request.candidates
        ]
        merged: list[list[Optional[float]]] = [
            [None] * len(c) for c in request.candidates
        ]
        values: Optional[list[float]] = None

        jobs: list[tuple[WorkerInfo, dict, list[tuple[int, int, int]]]] = []
        for w, info in enumerate(workers):
            prompt_ids, prompts, cands, indices = [], [], [], []
            rows: list[tuple[int, int, int]] = []  # (prompt idx, start, stop)
            for p in range(n_prompts):
                slices = per_prompt_slices[p]
                if w >= len(slices):
                    continue
                start, stop = slices[w]
                if start == stop:
                    continue
                prompt_ids.append(p)
                prompts.append(request.prompts[p])
                cands.append(list(request.candidates[p][start:stop]))
                indices.append(list(range(start, stop)))
                rows.append((p, start, stop))
            if not prompts:
                continue
            payload = {
                "prompts": prompts,
                "candidates": cands,
                "indices": indices,
                "total_candidates": max(len(c) for c in request.candidates),
                "with_values": with_values and w == 0,
            }
            message = protocol.request(
                self._next_id(request.request_id), protocol.SCORE, payload
            )
            jobs.append((info, message, rows))

        futures = [
            (self._pool.submit(self._call_with_retry, info, message), rows, message)
            for info, message, rows in jobs
        ]
        for future, rows, message in futures:
            try:
                payload = future.result(timeout=self.timeout)
            except Exception as exc:
                raise DispatchError(f"score dispatch failed: {exc}") from exc
            for row, (p, start, stop) in enumerate(rows):
                merged[p][start:stop] = payload["scores"][row]
            if message["payload"]["with_values"]:
                row_for_prompt = {p: i for i, (p, _, _) in enumerate(rows)}
                if len(row_for_prompt) != n_prompts:
                    raise DispatchError("value-carrying worker saw only part of the batch")
                values = [payload["values"][row_for_prompt[p]] for p in range(n_prompts)]

        if any(s is None for row in merged for s in row):
            raise DispatchError("partial score response")
        return ScoreResponse(
            request_id=request.request_id,
            scores=tuple(tuple(row) for row in merged),
            values=tuple(values) if values is not None else None,
        )

    # -- updates ---------------------------------------------------------------
    def dispatch_update(
        self,
        batch: LossBatch,
        ppo_config: PPOConfig,
        policy_config: PolicyConfig,
    ) -> UpdateSummary:
        workers = self.registry.healthy()
        if ppo_config.advantage_normalization:
            batch = replace_advantages(batch, normalize_advantages(batch.advantages))
        loss = {
            "clip_eps": ppo_config.clip_eps,
            "vf_coef": ppo_config.vf_coef,
            "entropy_coef": ppo_config.entropy_coef,
            "advantage_normalization": False,  # already normalized above
            "normalization": policy_config.normalization.value,
            "mode": policy_config.mode.value,
        }
        slices = even_slices(len(batch), len(workers))
        futures: list[tuple[Future, int]] = []
        for (start, stop), info in zip(slices, workers):
            idx = np.arange(start, stop)
            shard = batch.slice(idx)
            payload = {
                "shard": {
                    "prompts": shard.prompts,
                    "candidates": [[c.display for c in cands] for cands in shard.candidates],
                    "action_indices": [int(i) for i in shard.action_indices],
                    "old_logprobs": encode_array(shard.old_logprobs),
                    "advantages": encode_array(shard.advantages),
                    "returns": encode_array(shard.returns),
                },
                "loss": loss,
            }
            message = protocol.request(self._next_id("upd"), protocol.UPDATE_GRAD, payload)
            futures.append((self._pool.submit(self._call, info, message), stop - start))

        grads, weights, stats = [], [], []
        for future, weight in futures:
            try:
                payload = future.result(timeout=self.timeout)
            except Exception as exc:
                raise DispatchError(f"update shard failed; whole update aborted: {exc}") from exc
            grads.append(decode_array(payload["grad"]))
            weights.append(payload["weight"])
            stats.append(payload["stats"])
        total = sum(weights)
        grad = sum(w * g for w, g in zip(weights, grads)) / total
        agg = LossStats(
            policy_loss=sum(s["policy_loss"] * w for s, w in zip(stats, weights)) / total,
            value_loss=sum(s["value_loss"] * w for s, w in zip(stats, weights)) / total,
            entropy=sum(s["entropy"] * w for s, w in zip(stats, weights)) / total,
            total=sum(s["total"] * w for s, w in zip(stats, weights)) / total,
        )

        apply_payload = {
            "grad": encode_array(grad),
            "lr": ppo_config.lr,
            "max_grad_norm": ppo_config.max_grad_norm,
            "adam": {},
        }
        digests = []
        apply_futures = [
            self._pool.submit(
                self._call,
                info,
                protocol.request(self._next_id("apply"), protocol.APPLY, apply_payload),
            )
            for info in workers
        ]
        for future in apply_futures:
            try:
                digests.append(future.result(timeout=self.timeout)["digest"])
            except Exception as exc:
                raise TornUpdateError(f"apply failed on a worker: {exc}") from exc
        if len(set(digests)) != 1:
            raise TornUpdateError(f"workers diverged after apply: {digests}")
        return UpdateSummary(
            stats=agg,
            digest=digests[0],
            num_shards=len(grads),
            grad_norm=float(np.linalg.norm(grad)),
        )

    def values(self, prompts: Sequence[str]) -> np.ndarray:
        info = self.registry.healthy()[0]
        payload = self._call(
            info,
            protocol.request(self._next_id("val"), protocol.VALUE, {"prompts": list(prompts)}),
        )
        return np.asarray(payload["values"], dtype=np.float64)

    def param_digests(self) -> dict[str, str]:
        return {
            info.worker_id: self._call(
                info, protocol.request(self._next_id("dig"), protocol.PARAM_DIGEST)
            )["digest"]
            for info in self.registry.healthy()
        }


class DispatchScoreClient:
    """ScoreClient adapter for the PPO trainer."""

    def __init__(self, dispatcher: Dispatcher):
        self.dispatcher = dispatcher

    def score_matrix(self, prompts, candidate_lists):
        request = ScoreRequest(
            request_id="collect",
            prompts=tuple(prompts),
            candidates=tuple(tuple(c.display for c in cl) for cl in candidate_lists),
        )
        resp = self.dispatcher.dispatch_score(request, with_values=True)
        return np.array(resp.scores, dtype=np.float64), np.array(
            resp.values, dtype=np.float64
        )

    def values(self, prompts):
        return self.dispatcher.values(prompts)


class DispatchUpdateClient:
    """UpdateClient adapter for the PPO trainer."""

    def __init__(
        self,
        dispatcher: Dispatcher,
        ppo_config: PPOConfig,
        policy_config: PolicyConfig,
    ):
        self.dispatcher = dispatcher
        self.ppo_config = ppo_config
        self.policy_config = policy_config

    def update(self, batch: LossBatch) -> LossStats:
        return self.dispatcher.dispatch_update(
            batch, self.ppo_config, self.policy_config
        ).stats
