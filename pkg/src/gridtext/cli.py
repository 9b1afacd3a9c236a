"""Command-line entry point wiring environments, trainers, service, and eval."""
from __future__ import annotations

import argparse
import json
import pickle
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig, TASK_PRESETS, load_config, save_config
from .env.generate import generate_episode, mix_seed
from .env.render import render_ascii, trace_record
from .env.types import ActionSpace, EpisodeConfig, ProgressFlags
from .env.dynamics import step as env_step
from .evaluation import (
    ProbeSeries,
    default_probe_set,
    run_eval,
    run_generalization_suite,
    write_suite_report,
)
from .policy.backends import (
    ActionHeadsBackend,
    ScorerBackend,
    TokenScorerBackend,
)
from .policy.distribution import PolicyConfig, ScoringMode
from .policy.vocab import build_vocabulary
from .rollout import BotAgent, EpisodeRunner, PolicyAgent, RandomAgent
from .service.dispatch import (
    DispatchScoreClient,
    DispatchUpdateClient,
    Dispatcher,
    WorkerRegistry,
)
from .service.worker import serve_worker
from .text.describe import describe, goal_text
from .text.lexicon import build_actions, default_lexicon
from .training.bc import BCDataset, collect_bc_dataset, evaluate_bc_loss, train_bc
from .training.ppo import PPOTrainer


def write_episode_trace(path, env_config: EpisodeConfig, tasks: str, runner, agent, seed: int) -> None:
    """One header record, then one record per step (line-delimited JSON)."""
    records = []

    def on_step(view, index, outcome):
        records.append(
            trace_record(seed, outcome.steps_used, view.actions[index].display, outcome)
        )

    runner.run_episode(agent, seed, on_step=on_step)
    header = {
        "type": "header",
        "room_size": env_config.room_size,
        "num_distractors": env_config.num_distractors,
        "max_steps": env_config.max_steps,
        "action_space": env_config.action_space.value,
        "flip_turns": env_config.flip_turns,
        "seed": seed,
        "tasks": tasks,
    }
    with open(path, "w", encoding="utf-8") as fp:
        for record in [header, *records]:
            fp.write(json.dumps(record, sort_keys=True) + "\n")


def _prepare_run_dir(config: RunConfig) -> Path:
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    (run_dir / "reports").mkdir(exist_ok=True)
    save_config(config, run_dir / "config.yaml")
    return run_dir


def _metrics_writer(run_dir: Path):
    path = run_dir / "metrics.jsonl"

    def write(record: dict) -> None:
        with open(path, "a", encoding="utf-8") as fp:
            fp.write(json.dumps(record, sort_keys=True) + "\n")

    return write


def _build_backend(config: RunConfig, num_actions: int) -> ScorerBackend:
    vocab = build_vocabulary(default_lexicon())
    b = config.backend
    dims = dict(
        embed_dim=b.embed_dim,
        hidden_dim=b.hidden_dim,
        value_embed_dim=b.value_embed_dim,
        value_hidden_dim=b.value_hidden_dim,
        activation=b.activation,
        seed=b.seed,
    )
    if b.mode is ScoringMode.ACTION_HEADS:
        return ActionHeadsBackend(vocab, num_actions=num_actions, **dims)
    return TokenScorerBackend(vocab, **dims)


def _make_dispatcher(config: RunConfig, backend: ScorerBackend) -> Optional[Dispatcher]:
    svc = config.service
    if svc.addresses:
        addresses = []
        for addr in svc.addresses:
            host, _, port = addr.rpartition(":")
            addresses.append((host or "127.0.0.1", int(port)))
        registry = WorkerRegistry.remote(addresses)
        return Dispatcher(registry, timeout=svc.timeout_s)
    if svc.workers > 1:
        clones = [backend.clone() for _ in range(svc.workers)]
        return Dispatcher(WorkerRegistry.in_process(clones), timeout=svc.timeout_s)
    return None


def _agent_for(name: str, config: RunConfig, rng: np.random.Generator, greedy: bool):
    if name == "random":
        return RandomAgent(rng), None
    if name == "bot":
        return BotAgent(), None
    backend = ScorerBackend.load(name)
    policy_config = PolicyConfig(
        normalization=config.policy.normalization, mode=backend.mode
    )
    return PolicyAgent(backend, policy_config, rng, greedy=greedy), backend


# -- subcommands ----------------------------------------------------------------


def cmd_train_ppo(args) -> int:
    config = load_config(args.config)
    run_dir = _prepare_run_dir(config)
    env_config = config.resolved_env()
    lexicon = default_lexicon()
    actions = build_actions(lexicon, env_config.action_space)
    backend = _build_backend(config, len(actions))
    policy_config = replace(config.policy, mode=backend.mode)

    dispatcher = _make_dispatcher(config, backend)
    score_client = DispatchScoreClient(dispatcher) if dispatcher else None
    # the trainer normalizes advantages once per collected batch
    client_ppo = replace(config.ppo, advantage_normalization=False)
    update_client = (
        DispatchUpdateClient(dispatcher, client_ppo, policy_config) if dispatcher else None
    )

    probes = ProbeSeries(default_probe_set()) if args.probes else None

    def hook(update_index: int, bk: ScorerBackend) -> dict:
        return probes.record(update_index, bk, policy_config) if probes else {}

    trainer = PPOTrainer(
        env_config,
        backend,
        config.ppo,
        policy_config,
        lexicon=lexicon,
        master_seed=config.master_seed,
        score_client=score_client,
        update_client=update_client,
        adam_config=config.adam,
        update_hook=hook if probes else None,
        metrics_writer=_metrics_writer(run_dir),
    )

    ckpt_dir = run_dir / "checkpoints"
    state_path = ckpt_dir / "trainer-state.pkl"
    if args.resume and state_path.exists():
        with open(state_path, "rb") as fp:
            trainer.load_state_dict(pickle.load(fp))
        print(f"resumed at update {trainer.update_index} ({trainer.env_steps} steps)")

    def checkpoint() -> None:
        backend.save(ckpt_dir / f"backend-{trainer.update_index:06d}.npz")
        backend.save(ckpt_dir / "backend-latest.npz")
        with open(state_path, "wb") as fp:
            pickle.dump(trainer.state_dict(), fp)
        if probes:
            probes.save(run_dir / "reports" / "probes.jsonl")

    try:
        while trainer.env_steps < args.total_steps:
            record = trainer.run_update()
            print(
                f"update {record['update']}: steps={record['env_steps']} "
                f"sr={record['success_rate']:.3f} entropy={record['entropy']:.3f}"
            )
            if trainer.update_index % config.checkpoint_every == 0:
                checkpoint()
    except KeyboardInterrupt:
        print("interrupted; checkpointing")
        checkpoint()
        return 130
    finally:
        if dispatcher:
            dispatcher.close()
    checkpoint()
    return 0


def cmd_collect(args) -> int:
    config = load_config(args.config)
    env_config = config.resolved_env()
    backend = ScorerBackend.load(args.checkpoint) if args.checkpoint else None
    dataset = collect_bc_dataset(
        args.source,
        env_config,
        args.n,
        master_seed=config.master_seed,
        backend=backend,
        policy_config=config.policy,
    )
    dataset.save(args.out)
    print(f"wrote {len(dataset)} transitions to {args.out}")
    return 0


def cmd_train_bc(args) -> int:
    config = load_config(args.config)
    run_dir = _prepare_run_dir(config)
    env_config = config.resolved_env()
    lexicon = default_lexicon()
    actions = build_actions(lexicon, env_config.action_space)
    if args.dataset:
        dataset = BCDataset.load(args.dataset)
    else:
        n = args.collect_n or config.bc.dataset_size
        print(f"collecting {n} transitions from {args.source}")
        dataset = collect_bc_dataset(
            args.source, env_config, n, master_seed=config.master_seed
        )
    backend = _build_backend(config, len(actions))
    before = evaluate_bc_loss(dataset, backend)
    metrics = train_bc(
        dataset,
        backend,
        config.bc,
        adam_config=config.adam,
        master_seed=config.master_seed,
        metrics_writer=_metrics_writer(run_dir),
    )
    after = evaluate_bc_loss(dataset, backend)
    backend.save(run_dir / "checkpoints" / "backend-bc.npz")
    print(f"BC loss {before:.4f} -> {after:.4f} over {len(metrics)} epoch(s)")
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config)
    if args.task:
        config = replace(config, tasks=args.task)
    env_config = config.resolved_env()
    seeds = args.seeds or list(config.eval.seeds)
    rng = np.random.default_rng(mix_seed(config.master_seed, 0xE7A1))
    agent, backend = _agent_for(args.policy, config, rng, args.greedy)
    vocab = backend.vocab if backend else None
    report = run_eval(
        agent,
        env_config,
        args.episodes or config.eval.episodes,
        seeds,
        vocab=vocab,
    )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.out:
        report.save(args.out)
    if args.trace_out:
        runner = EpisodeRunner(env_config, vocab=vocab or build_vocabulary(default_lexicon()))
        write_episode_trace(
            args.trace_out, env_config, config.tasks, runner, agent,
            mix_seed(seeds[0], 0),
        )
        print(f"trace written to {args.trace_out}")
    return 0


def cmd_generalize(args) -> int:
    config = load_config(args.config)
    run_dir = _prepare_run_dir(config)
    env_config = config.resolved_env()
    seeds = args.seeds or list(config.eval.seeds)
    backend = None
    if args.policy not in ("random", "bot"):
        backend = ScorerBackend.load(args.policy)

    def agent_factory():
        rng = np.random.default_rng(mix_seed(config.master_seed, 0x6E4))
        if backend is not None:
            policy_config = PolicyConfig(
                normalization=config.policy.normalization, mode=backend.mode
            )
            return PolicyAgent(backend, policy_config, rng, greedy=args.greedy)
        return BotAgent() if args.policy == "bot" else RandomAgent(rng)

    results = run_generalization_suite(
        agent_factory,
        env_config,
        args.episodes or config.eval.episodes,
        seeds,
        vocab=backend.vocab if backend else None,
    )
    write_suite_report(results, run_dir / "reports")
    for name, r in results.items():
        delta = f" (delta {r.delta_vs_no_change:+.3f})" if r.delta_vs_no_change is not None else ""
        print(f"{name}: SR={r.report.overall_sr:.3f}{delta}")
    return 0


def cmd_probe(args) -> int:
    backend = ScorerBackend.load(args.checkpoint)
    config = load_config(args.config)
    policy_config = PolicyConfig(
        normalization=config.policy.normalization, mode=backend.mode
    )
    probes = (
        ProbeSeries(default_probe_set())
        if not args.probes
        else ProbeSeries(__import__("gridtext.evaluation.probes", fromlist=["ProbeSet"]).ProbeSet.load_dir(args.probes))
    )
    probes.record(0, backend, policy_config)
    if args.out:
        probes.save(args.out)
    for row in probes.rows:
        print(f"{row['probe']}\t{row['action']}\t{row['prob']:.4f}")
    return 0


def cmd_serve_worker(args) -> int:
    backend = ScorerBackend.load(args.checkpoint)
    host, _, port = args.listen.rpartition(":")
    print(f"serving {backend.kind} backend on {host or '0.0.0.0'}:{port}")
    serve_worker(backend, (host or "0.0.0.0", int(port)))
    return 0


def cmd_play(args) -> int:
    config = load_config(args.config)
    env_config = replace(config.resolved_env(), seed=args.seed)
    lexicon = default_lexicon()
    actions = build_actions(lexicon, env_config.action_space)
    state, task = generate_episode(env_config)
    progress = ProgressFlags()
    print(f"goal: {goal_text(task, lexicon)}")
    while True:
        print(render_ascii(state))
        for line in describe(state, lexicon).lines:
            print(f"  {line}")
        for i, action in enumerate(actions):
            print(f"  [{i + 1}] {action.display}")
        try:
            choice = input("action> ").strip()
        except EOFError:
            return 0
        if choice in ("q", "quit", ""):
            return 0
        try:
            index = int(choice) - 1
            action = actions[index]
        except (ValueError, IndexError):
            print("pick an action number")
            continue
        state, outcome, progress = env_step(state, task, action, env_config, progress)
        print(f"reward={outcome.reward:.4f} done={outcome.done} success={outcome.success}")
        if outcome.done:
            return 0


def cmd_replay(args) -> int:
    with open(args.trace, encoding="utf-8") as fp:
        lines = [json.loads(line) for line in fp if line.strip()]
    header = lines[0]
    if header.get("type") != "header":
        print("trace missing header record", file=sys.stderr)
        return 2
    env_config = EpisodeConfig(
        room_size=header["room_size"],
        num_distractors=header["num_distractors"],
        max_steps=header["max_steps"],
        action_space=ActionSpace(header["action_space"]),
        flip_turns=header["flip_turns"],
        seed=header["seed"],
        task_families=tuple(TASK_PRESETS[header["tasks"]]),
    )
    lexicon = default_lexicon()
    actions = {a.display: a for a in build_actions(lexicon, env_config.action_space)}
    state, task = generate_episode(env_config)
    progress = ProgressFlags()
    print(f"goal: {goal_text(task, lexicon)}")
    for record in lines[1:]:
        print(render_ascii(state))
        action = actions[record["action"]]
        state, outcome, progress = env_step(state, task, action, env_config, progress)
        print(
            f"step {outcome.steps_used}: {record['action']} -> reward={outcome.reward:.4f}"
        )
        if abs(outcome.reward - record["reward"]) > 1e-9 or outcome.done != record["done"]:
            print("trace mismatch: environment diverged", file=sys.stderr)
            return 3
    print(render_ascii(state))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridtext", description="textual gridworld RL toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="YAML run config")

    p = sub.add_parser("train-ppo", help="online PPO training")
    add_common(p)
    p.add_argument("--total-steps", type=int, required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--probes", action="store_true", help="record probe distributions")
    p.set_defaults(func=cmd_train_ppo)

    p = sub.add_parser("collect", help="collect a behavioral-cloning dataset")
    add_common(p)
    p.add_argument("--source", choices=["oracle_bot", "policy"], default="oracle_bot")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train-bc", help="behavioral cloning")
    add_common(p)
    p.add_argument("--dataset", default=None)
    p.add_argument("--source", choices=["oracle_bot", "policy"], default="oracle_bot")
    p.add_argument("--collect-n", type=int, default=None)
    p.set_defaults(func=cmd_train_bc)

    p = sub.add_parser("eval", help="success-rate evaluation")
    add_common(p)
    p.add_argument("--policy", required=True, help="random | bot | checkpoint path")
    p.add_argument("--task", choices=sorted(TASK_PRESETS), default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seeds", type=int, nargs="*", default=None)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--trace-out", default=None, help="log the first episode as a trace")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generalize", help="generalization suite")
    add_common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seeds", type=int, nargs="*", default=None)
    p.add_argument("--greedy", action="store_true")
    p.set_defaults(func=cmd_generalize)

    p = sub.add_parser("probe", help="score the probe set with a checkpoint")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--probes", default=None, help="directory of probe fixtures")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("serve-worker", help="serve a backend over TCP")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--listen", default="127.0.0.1:7051")
    p.set_defaults(func=cmd_serve_worker)

    p = sub.add_parser("play", help="interactive terminal episode (debugging)")
    add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("replay", help="re-render a logged episode trace")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
