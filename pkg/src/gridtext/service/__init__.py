"""Master/worker dispatch for scoring and data-parallel updates."""

from . import protocol
from .dispatch import (
    DispatchError,
    DispatchScoreClient,
    DispatchUpdateClient,
    Dispatcher,
    RemoteWorker,
    ScoreRequest,
    ScoreResponse,
    TornUpdateError,
    UpdateSummary,
    WorkerInfo,
    WorkerRegistry,
    even_slices,
)
from .worker import InProcessWorker, WorkerCore, WorkerServer, serve_worker

__all__ = [
    "DispatchError",
    "DispatchScoreClient",
    "DispatchUpdateClient",
    "Dispatcher",
    "InProcessWorker",
    "RemoteWorker",
    "ScoreRequest",
    "ScoreResponse",
    "TornUpdateError",
    "UpdateSummary",
    "WorkerCore",
    "WorkerInfo",
    "WorkerRegistry",
    "WorkerServer",
    "even_slices",
    "protocol",
    "serve_worker",
]
