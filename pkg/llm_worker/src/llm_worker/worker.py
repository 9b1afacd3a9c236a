"""Protocol message handling and the TCP serving loop."""
from __future__ import annotations

import socket
import socketserver
import threading
from typing import Optional

import numpy as np

from . import protocol
from .adapter import LMAdapter
from .protocol import ProtocolError, decode_array, encode_array
from .training import Adam, LossConfig, Shard, clip_grad_norm, ppo_shard_grad

# Gradients travel in single precision; the digest stays double precision so
# replica drift is still detectable.
GRAD_TRANSPORT_DTYPE = np.float32


class WorkerCore:
    def __init__(self, adapter: LMAdapter, trainable: bool = True):
        self.adapter = adapter
        self.trainable = trainable
        self.optimizer: Optional[Adam] = None
        self._update_lock = threading.Lock()

    def handle(self, message: dict) -> dict:
        msg_id = message.get("id") if isinstance(message, dict) else None
        msg_type = message.get("type") if isinstance(message, dict) else None
        try:
            if not isinstance(message, dict) or msg_type not in protocol.REQUEST_TYPES:
                raise ProtocolError(f"unknown message type {msg_type!r}")
            payload = message.get("payload") or {}
            handler = getattr(self, f"_on_{msg_type.lower()}")
            return protocol.response(msg_id, msg_type, handler(payload))
        except Exception as exc:
            return protocol.error_response(msg_id, msg_type or "ERROR", str(exc))

    def _on_hello(self, payload: dict) -> dict:
        capabilities = ["score", "value"] + (["update"] if self.trainable else [])
        return {
            "capabilities": capabilities,
            "kind": "causal_lm",
            "mode": "token_scoring",
            "num_parameters": self.adapter.num_parameters(),
            "manifest_hash": self.adapter.manifest_hash(),
        }

    def _on_score(self, payload: dict) -> dict:
        prompts = payload.get("prompts") or []
        candidates = payload.get("candidates") or []
        if len(prompts) != len(candidates):
            raise ProtocolError("prompts and candidates must align")
        if not prompts or sum(len(c) for c in candidates) == 0:
            raise ProtocolError("nothing to score: empty candidate list")
        scores = [
            [float(x) for x in self.adapter.score(prompt, cands)]
            for prompt, cands in zip(prompts, candidates)
        ]
        out: dict = {"scores": scores}
        if payload.get("with_values"):
            out["values"] = [float(v) for v in self.adapter.values(prompts)]
        return out

    def _on_value(self, payload: dict) -> dict:
        prompts = payload.get("prompts") or []
        if not prompts:
            raise ProtocolError("no prompts")
        return {"values": [float(v) for v in self.adapter.values(prompts)]}

    def _on_update_grad(self, payload: dict) -> dict:
        if not self.trainable:
            raise ProtocolError("worker is not trainable")
        if payload.get("manifest_hash") not in (None, self.adapter.manifest_hash()):
            raise ProtocolError("manifest hash mismatch: model differs from master's")
        loss = payload.get("loss") or {}
        if loss.get("mode", "token_scoring") != "token_scoring":
            raise ProtocolError("causal-LM workers score tokens; action_heads unsupported")
        config = LossConfig(
            clip_eps=loss.get("clip_eps", 0.2),
            vf_coef=loss.get("vf_coef", 0.5),
            entropy_coef=loss.get("entropy_coef", 0.01),
            normalization=loss.get("normalization", "max_temperature"),
            advantage_normalization=loss.get("advantage_normalization", False),
        )
        raw = payload["shard"]
        shard = Shard(
            prompts=list(raw["prompts"]),
            candidates=[list(c) for c in raw["candidates"]],
            action_indices=np.asarray(raw["action_indices"], dtype=np.int64),
            old_logprobs=decode_array(raw["old_logprobs"]),
            advantages=decode_array(raw["advantages"]),
            returns=decode_array(raw["returns"]),
        )
        with self._update_lock:
            grad, stats = ppo_shard_grad(self.adapter, shard, config)
        grad = grad.astype(GRAD_TRANSPORT_DTYPE).astype(np.float64)
        return {"grad": encode_array(grad), "weight": len(shard), "stats": stats}

    def _on_apply(self, payload: dict) -> dict:
        if not self.trainable:
            raise ProtocolError("worker is not trainable")
        grad = decode_array(payload["grad"])
        if grad.size != self.adapter.num_parameters():
            raise ProtocolError(
                f"gradient has {grad.size} entries, model has "
                f"{self.adapter.num_parameters()} parameters"
            )
        lr = float(payload.get("lr", 1e-6))
        adam_cfg = payload.get("adam") or {}
        eps = float(adam_cfg.get("eps", 1e-5))
        beta1 = float(adam_cfg.get("beta1", 0.9))
        beta2 = float(adam_cfg.get("beta2", 0.999))
        max_grad_norm = payload.get("max_grad_norm")
        with self._update_lock:
            if self.optimizer is None:
                self.optimizer = Adam(self.adapter.num_parameters(), lr, eps, beta1, beta2)
            elif not self.optimizer.matches(lr, eps, beta1, beta2):
                raise ProtocolError("optimizer hyperparameters changed mid-run")
            if max_grad_norm is not None:
                grad = clip_grad_norm(grad, float(max_grad_norm))
            params = self.optimizer.step(self.adapter.parameters_flat(), grad)
            self.adapter.set_parameters_flat(params)
            return {"digest": self.adapter.param_digest(), "step": self.optimizer.t}

    def _on_param_digest(self, payload: dict) -> dict:
        return {
            "digest": self.adapter.param_digest(),
            "num_parameters": self.adapter.num_parameters(),
        }

    def _on_shutdown(self, payload: dict) -> dict:
        return {"stopping": True}


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        core: WorkerCore = self.server.core  # type: ignore[attr-defined]
        sock: socket.socket = self.request
        while True:
            try:
                message = protocol.recv_message(sock)
            except ProtocolError as exc:
                protocol.send_message(sock, protocol.error_response(None, "ERROR", str(exc)))
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

    def __init__(self, adapter: LMAdapter, address: tuple[str, int], trainable: bool = True):
        super().__init__(address, _Handler)
        self.core = WorkerCore(adapter, trainable=trainable)
        self.shutdown_event = threading.Event()


def serve(adapter: LMAdapter, address: tuple[str, int], trainable: bool = True) -> None:
    server = WorkerServer(adapter, address, trainable=trainable)
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05})
    thread.start()
    try:
        server.shutdown_event.wait()
    finally:
        server.shutdown()
        thread.join()
        server.server_close()
