"""Worker side of the scoring service.

WorkerCore answers protocol messages against one backend; the TCP server and
the in-process worker both delegate to it, so a trainer sees the exact same
contract with or without sockets.
"""
from __future__ import annotations

import socket
import socketserver
import threading
from typing import Optional, Sequence

import numpy as np

from ..policy.backends import ScorerBackend
from ..policy.distribution import (
    CandidateAction,
    Normalization,
    PolicyConfig,
    ScoringMode,
)
from ..training.losses import LossBatch, PPOConfig, ppo_grad
from ..training.optim import Adam, AdamConfig, clip_grad_norm
from . import protocol
from .protocol import ProtocolError, decode_array, encode_array


class WorkerCore:
    """Stateful message handler: scoring, shard gradients, applied updates."""

    def __init__(self, backend: ScorerBackend):
        self.backend = backend
        self.optimizer: Optional[Adam] = None
        self._update_lock = threading.Lock()

    # -- helpers -------------------------------------------------------------
    def _candidates(self, displays: Sequence[str]) -> tuple[CandidateAction, ...]:
        return tuple(
            CandidateAction(d, self.backend.vocab.encode(d)) for d in displays
        )

    def _score_prompt(
        self, prompt: str, displays: Sequence[str], indices, total: Optional[int]
    ) -> list[float]:
        if self.backend.mode is ScoringMode.ACTION_HEADS:
            if total is None:
                total = len(displays)
            logits = self.backend.head_logits(prompt, total)
            if indices is None:
                indices = list(range(len(displays)))
            return [float(logits[i]) for i in indices]
        lp = self.backend.token_logprobs(prompt, self._candidates(displays))
        return [float(x) for x in lp]

    def _loss_configs(self, loss: dict) -> tuple[PPOConfig, PolicyConfig]:
        ppo = PPOConfig(
            clip_eps=loss.get("clip_eps", 0.2),
            vf_coef=loss.get("vf_coef", 0.5),
            entropy_coef=loss.get("entropy_coef", 0.01),
            advantage_normalization=loss.get("advantage_normalization", False),
        )
        policy = PolicyConfig(
            normalization=Normalization(loss.get("normalization", "max_temperature")),
            mode=ScoringMode(
                loss.get("mode", self.backend.mode.value)
            ),
        )
        return ppo, policy

    # -- message handlers ------------------------------------------------------
    def handle(self, message: dict) -> dict:
        msg_id = message.get("id") if isinstance(message, dict) else None
        msg_type = message.get("type") if isinstance(message, dict) else None
        try:
            if not isinstance(message, dict) or msg_type not in protocol.REQUEST_TYPES:
                raise ProtocolError(f"unknown message type {msg_type!r}")
            payload = message.get("payload") or {}
            handler = getattr(self, f"_on_{msg_type.lower()}")
            return protocol.response(msg_id, msg_type, handler(payload))
        except Exception as exc:  # errors go back over the wire, connection survives
            return protocol.error_response(msg_id, msg_type or "ERROR", str(exc))

    def _on_hello(self, payload: dict) -> dict:
        return {
            "capabilities": ["score", "value", "update"],
            "kind": self.backend.kind,
            "mode": self.backend.mode.value,
            "num_parameters": self.backend.num_parameters(),
            "manifest_hash": self.backend.manifest_hash(),
        }

    def _on_score(self, payload: dict) -> dict:
        prompts = payload.get("prompts") or []
        candidates = payload.get("candidates") or []
        if len(prompts) != len(candidates):
            raise ProtocolError("prompts and candidates must align")
        if not prompts or sum(len(c) for c in candidates) == 0:
            raise ProtocolError("nothing to score: empty candidate list")
        indices = payload.get("indices")
        total = payload.get("total_candidates")
        scores = [
            self._score_prompt(
                prompt,
                cands,
                indices[i] if indices is not None else None,
                total,
            )
            for i, (prompt, cands) in enumerate(zip(prompts, candidates))
        ]
        out: dict = {"scores": scores}
        if payload.get("with_values"):
            out["values"] = [float(v) for v in self.backend.values(prompts)]
        return out

    def _on_value(self, payload: dict) -> dict:
        prompts = payload.get("prompts") or []
        if not prompts:
            raise ProtocolError("no prompts")
        return {"values": [float(v) for v in self.backend.values(prompts)]}

    def _on_update_grad(self, payload: dict) -> dict:
        shard = payload["shard"]
        if payload.get("manifest_hash") not in (None, self.backend.manifest_hash()):
            raise ProtocolError("manifest hash mismatch: model differs from master's")
        ppo_config, policy_config = self._loss_configs(payload.get("loss") or {})
        batch = LossBatch(
            prompts=list(shard["prompts"]),
            candidates=[self._candidates(c) for c in shard["candidates"]],
            action_indices=np.asarray(shard["action_indices"], dtype=np.int64),
            old_logprobs=decode_array(shard["old_logprobs"]),
            advantages=decode_array(shard["advantages"]),
            returns=decode_array(shard["returns"]),
        )
        with self._update_lock:
            stats, grad = ppo_grad(
                batch,
                self.backend,
                ppo_config,
                policy_config,
                normalize=ppo_config.advantage_normalization,
            )
        return {
            "grad": encode_array(grad),
            "weight": len(batch),
            "stats": {
                "policy_loss": stats.policy_loss,
                "value_loss": stats.value_loss,
                "entropy": stats.entropy,
                "total": stats.total,
            },
        }

    def _on_apply(self, payload: dict) -> dict:
        grad = decode_array(payload["grad"])
        lr = float(payload["lr"])
        max_grad_norm = payload.get("max_grad_norm")
        adam_cfg = AdamConfig(**(payload.get("adam") or {}))
        with self._update_lock:
            if self.optimizer is None:
                self.optimizer = Adam(self.backend.num_parameters(), lr, adam_cfg)
            elif self.optimizer.lr != lr or self.optimizer.config != adam_cfg:
                raise ProtocolError("optimizer hyperparameters changed mid-run")
            if max_grad_norm is not None:
                grad, _ = clip_grad_norm(grad, float(max_grad_norm))
            params = self.optimizer.step(self.backend.parameters(), grad)
            self.backend.set_parameters(params)
            return {"digest": self.backend.param_digest(), "step": self.optimizer.t}

    def _on_param_digest(self, payload: dict) -> dict:
        return {
            "digest": self.backend.param_digest(),
            "num_parameters": self.backend.num_parameters(),
        }

    def _on_shutdown(self, payload: dict) -> dict:
        return {"stopping": True}


class InProcessWorker:
    """Same contract as a TCP worker, without sockets."""

    def __init__(self, backend: ScorerBackend, worker_id: str = "local"):
        self.worker_id = worker_id
        self.core = WorkerCore(backend)

    def request(self, message: dict, timeout: Optional[float] = None) -> dict:
        return self.core.handle(message)

    def close(self) -> None:
        pass


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        core: WorkerCore = self.server.core  # type: ignore[attr-defined]
        sock: socket.socket = self.request
        while True:
            try:
                message = protocol.recv_message(sock)
            except ProtocolError as exc:
                protocol.send_message(
                    sock, protocol.error_response(None, "ERROR", str(exc))
                )
                continue
            if message is None:
                return
            reply = core.handle(message)
            protocol.send_message(sock, reply)
            if message.get("type") == protocol.SHUTDOWN and reply.get("ok"):
                self.server.shutdown_event.set()  # type: ignore[attr-defined]
                return


class WorkerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, backend: ScorerBackend, address: tuple[str, int]):
        super().__init__(address, _Handler)
        self.core = WorkerCore(backend)
        self.shutdown_event = threading.Event()


def serve_worker(backend: ScorerBackend, listen_address: tuple[str, int]) -> None:
    """Serve one backend on a TCP endpoint until a SHUTDOWN message arrives."""
    server = WorkerServer(backend, listen_address)
    waiter = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05})
    waiter.start()
    try:
        server.shutdown_event.wait()
    finally:
        server.shutdown()
        waiter.join()
        server.server_close()
