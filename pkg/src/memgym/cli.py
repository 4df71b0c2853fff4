"""Command-line entry point: gen, run, eval, diagnose, evolve, report."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .arena import OracleAssistant, RandomAssistant, SimulatedUser, run_episode
from .backend.base import RetryPolicy
from .backend.live import OpenAICompatChat, OpenAICompatEmbedding
from .backend.world import scripted_embedding, scripted_world
from .config import Settings, load_settings
from .errors import CompatibilityError, MemGymError, StorageError, UsageError
from .evolve import FEEDBACK_MODES, run_evolution
from .genesis import DEFAULT_START_DATE, load_pool, run_pipeline, synthetic_pool
from .memory import AgentConfig, MemoryAgent
from .metrics import aggregate_report, diagnosis, merge_users, repeat_csv, repeat_summary, report_csv
from .model import (
    FORMAT_VERSION,
    VERSION_KEY,
    Blueprint,
    EpisodeTrace,
    ReportBundle,
    blueprint_id,
    dumps,
    loads,
)

log = logging.getLogger("memgym")

AGENTS = ("llm", "rag", "awe", "awi", "oracle", "random")


# --------------------------------------------------------------------------
# file helpers


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc


def read_doc(path: Path, cls):
    try:
        return loads(read_text(path), cls)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise StorageError(f"{path} is not a valid {cls.__name__} document: {exc}") from exc


def expand(paths: Iterable[str], filename: str) -> list[Path]:
    """Files as given; directories are searched recursively for ``filename``."""
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out += sorted(p.rglob(filename))
        elif p.is_file():
            out.append(p)
        else:
            raise StorageError(f"no such file or directory: {p}")
    if not out:
        raise UsageError(f"no {filename} files found in {list(paths)}")
    return out


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, command: str, args: argparse.Namespace, settings: Settings, started: str,
                   inputs: Sequence[str], outputs: Sequence[str], backends: dict, extra: dict | None = None):
    manifest = {
        VERSION_KEY: FORMAT_VERSION,
        "command": command,
        "argv": {k: v for k, v in vars(args).items() if k not in ("func", "command_line")},
        "command_line": list(getattr(args, "command_line", [])),
        "config": settings.to_dict(),
        "seed": getattr(args, "seed", None),
        "backends": backends,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "started": started,
        "finished": _now(),
        "package_version": __version__,
    }
    if extra:
        manifest.update(extra)
    write_atomic(out / "manifest.json", dumps(manifest))


# --------------------------------------------------------------------------
# backends


class IOLogger:
    """Wraps a chat backend and appends every prompt/response pair to a JSONL file."""

    def __init__(self, inner, path: Path):
        self.inner = inner
        self.path = Path(path)
        self.descriptor = inner.descriptor
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def complete(self, request):
        reply = self.inner.complete(request)
        row = {"tag": request.tag, "messages": [m.to_dict() for m in request.messages], "response": reply}
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return reply


def make_backends(settings: Settings, seed: int):
    """(chat, embedding, user simulator, retry policy) for the configured mode."""
    b = settings.backend
    retry = RetryPolicy(max_attempts=b.max_attempts)
    if b.mode == "scripted":
        world = scripted_world(seed)
        return world, scripted_embedding(seed), world, retry
    kwargs = {"timeout_s": b.timeout_s}
    if b.base_url:
        kwargs["base_url"] = b.base_url
    chat = OpenAICompatChat(b.chat_model, **kwargs)
    user = OpenAICompatChat(b.user_model, **kwargs) if b.user_model else chat
    return chat, OpenAICompatEmbedding(b.embed_model, **kwargs), user, retry


def _apply_backend_flag(settings: Settings, args) -> Settings:
    if getattr(args, "backend", None):
        settings.backend.mode = args.backend
    return settings


def _parallel(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    started = _now()
    settings = _apply_backend_flag(load_settings(args.config), args)
    cfg = settings.gen_config()
    out = Path(args.out)
    if args.personas:
        pool = load_pool(args.personas)
    else:
        if settings.backend.mode == "live":
            log.info("no --personas given; using the synthetic persona pool")
        pool = synthetic_pool(args.num_users, args.seed)
    records = pool[args.offset:args.offset + args.num_users]
    if len(records) < args.num_users:
        raise UsageError(f"persona pool has only {len(records)} records after offset {args.offset}")

    def one(record):
        chat, _, _, retry = make_backends(settings, args.seed)
        result = run_pipeline(record, cfg, chat, seed=args.seed, start_date=args.start_date, retry=retry)
        path = out / record["source_id"] / "blueprint.json"
        write_atomic(path, dumps(result.blueprint))
        return path, result.verifier_stats(), getattr(chat, "descriptor", "")

    results = _parallel(one, records, args.jobs)
    write_manifest(out, "gen", args, settings, started, [args.personas or "synthetic"],
                   [str(p) for p, _, _ in results], {"chat": results[0][2] if results else ""},
                   {"gen_config": cfg.to_dict(), "personas": [r["source_id"] for r in records],
                    "verifier": {str(p): s for p, s, _ in results}})
    print(f"wrote {len(results)} blueprints to {out}")
    return 0


# --------------------------------------------------------------------------
# run


def agent_config(settings: Settings, args) -> AgentConfig:
    kind = args.agent or settings.agent.get("kind", "awe")
    if kind in ("oracle", "random"):
        return None
    opts = {k: settings.agent[k] for k in ("freq", "ns", "topk", "token_budget") if k in settings.agent}
    for k in ("freq", "ns", "topk"):
        if getattr(args, k, None) is not None:
            opts[k] = getattr(args, k)
    return AgentConfig.default(kind, model=settings.backend.chat_model if settings.backend.mode == "live"
                               else "scripted", **opts)


def load_blueprints(paths: Sequence[str]) -> list[tuple[Path, Blueprint]]:
    return [(p, read_doc(p, Blueprint)) for p in expand(paths, "blueprint.json")]


def cmd_run(args) -> int:
    started = _now()
    settings = _apply_backend_flag(load_settings(args.config), args)
    out = Path(args.out)
    blueprints = load_blueprints(args.blueprints)
    kind = args.agent or settings.agent.get("kind", "awe")
    acfg = agent_config(settings, args)
    replays: dict[str, tuple[Path, EpisodeTrace]] = {}
    if args.mode == "offpolicy":
        if not args.replay:
            raise UsageError("--mode offpolicy requires --replay")
        for p in expand(args.replay, "trace.json"):
            trace = read_doc(p, EpisodeTrace)
            replays[trace.blueprint_ref] = (p, trace)
    elif args.replay:
        raise UsageError("--replay is only valid with --mode offpolicy")

    def one(item):
        path, bp = item
        ref = blueprint_id(bp)
        user_dir = out / (bp.persona.source_id or ref)
        chat, embed, user_backend, retry = make_backends(settings, args.seed)
        if args.log_io:
            chat = IOLogger(chat, user_dir / "io.jsonl")
            user_backend = chat if settings.backend.mode == "scripted" else IOLogger(user_backend,
                                                                                     user_dir / "io_user.jsonl")
        if acfg is None:
            assistant = OracleAssistant(bp, args.seed) if kind == "oracle" else RandomAssistant(bp, args.seed)
            params = {"kind": kind}
        else:
            assistant = MemoryAgent(acfg, chat, embed, retry, seed=args.seed)
            params = acfg.to_dict()
        replay, source = None, None
        if args.mode == "offpolicy":
            if ref not in replays:
                raise CompatibilityError(f"no replay trace for blueprint {ref}")
            source, replay = str(replays[ref][0]), replays[ref][1]
        trace = run_episode(bp, assistant, SimulatedUser(bp, user_backend, retry), seed=args.seed,
                            mode=args.mode, replay=replay, replay_source=source, agent_params=params)
        trace_path = user_dir / "trace.json"
        write_atomic(trace_path, dumps(trace))
        outputs = [trace_path]
        if args.dump_memory and hasattr(assistant, "dump_memory"):
            dump_path = user_dir / "memory.json"
            write_atomic(dump_path, dumps(assistant.dump_memory()))
            outputs.append(dump_path)
        return path, outputs, getattr(chat, "descriptor", "")

    results = _parallel(one, blueprints, args.jobs)
    write_manifest(out, "run", args, settings, started, [str(p) for p, _ in blueprints],
                   [str(o) for _, outs, _ in results for o in outs],
                   {"chat": results[0][2] if results else "", "agent": kind},
                   {"agent_config": acfg.to_dict() if acfg else {"kind": kind}})
    print(f"wrote {len(results)} traces to {out}")
    return 0


# --------------------------------------------------------------------------
# eval / diagnose


def _pair(traces: Sequence[str], blueprints: Sequence[str]):
    by_ref = {blueprint_id(bp): (p, bp) for p, bp in load_blueprints(blueprints)}
    pairs = []
    for tp in expand(traces, "trace.json"):
        trace = read_doc(tp, EpisodeTrace)
        if trace.blueprint_ref not in by_ref:
            raise CompatibilityError(f"{tp}: no blueprint with id {trace.blueprint_ref}")
        pairs.append((tp, trace, by_ref[trace.blueprint_ref][1]))
    pairs.sort(key=lambda x: x[1].blueprint_ref)
    return pairs


def emit_report(bundles: Sequence[ReportBundle], out: Path) -> list[Path]:
    """report.json (merged across users) and report.csv (one row per user and position)."""
    if not bundles:
        raise UsageError("no report bundles to emit")
    merged = merge_users(bundles)
    merged = ReportBundle(merged.per_position, (), merged.aggregate,
                          {**merged.metadata, "per_user": [b.to_dict() for b in bundles]})
    json_path, csv_path = out / "report.json", out / "report.csv"
    write_atomic(json_path, dumps(merged))
    write_atomic(csv_path, report_csv(bundles))
    return [json_path, csv_path]


def cmd_eval(args) -> int:
    started = _now()
    out = Path(args.out)
    pairs = _pair(args.traces, args.blueprints)
    bundles = [aggregate_report(trace, bp) for _, trace, bp in pairs]
    outputs = emit_report(bundles, out)
    write_manifest(out, "eval", args, Settings(), started, [str(p) for p, _, _ in pairs], outputs, {})
    agg = json.loads(read_text(outputs[0]))["aggregate"]
    print(json.dumps({k: agg[k] for k in ("overall", "random", "ub", "memory")}))
    return 0


def cmd_diagnose(args) -> int:
    started = _now()
    out = Path(args.out)
    pairs = _pair(args.traces, args.blueprints)
    docs = [diagnosis(trace, bp) for _, trace, bp in pairs]
    path = out / "diagnosis.json"
    write_atomic(path, dumps({VERSION_KEY: FORMAT_VERSION, "users": docs}))
    write_manifest(out, "diagnose", args, Settings(), started, [str(p) for p, _, _ in pairs], [path], {})
    print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------
# evolve


def cmd_evolve(args) -> int:
    started = _now()
    settings = _apply_backend_flag(load_settings(args.config), args)
    out = Path(args.out)
    blueprints = load_blueprints(args.blueprints)
    opts = {k: getattr(args, k) for k in ("freq", "ns") if getattr(args, k) is not None}
    acfg = AgentConfig.default("awi", **opts)
    chat, _, user_backend, retry = make_backends(settings, args.seed)
    outputs: list[Path] = []

    def save(result):
        k = result.cycle
        if k == 0:
            outputs.append(out / "prompt_v0.txt")
            write_atomic(outputs[-1], result.prompt.full_text)
        files = {
            f"prompt_v{k + 1}.txt": result.evolved.full_text,
            f"feedback_v{k}.json": dumps({VERSION_KEY: FORMAT_VERSION, "mode": args.feedback,
                                          "feedback": result.feedback.to_dict(),
                                          "changes": list(result.evolved.changes)}),
            f"report_v{k}.json": dumps(merge_users(result.reports)),
            f"recall_v{k}.json": dumps({VERSION_KEY: FORMAT_VERSION, "prompt_version": result.prompt.version,
                                        "per_user": result.recall,
                                        "mean": sum(result.recall) / len(result.recall)}),
        }
        for name, text in files.items():
            outputs.append(out / name)
            write_atomic(outputs[-1], text)

    run_evolution([bp for _, bp in blueprints], acfg, args.cycles, args.feedback, chat,
                  user_backend=user_backend, seed=args.seed, retry=retry, on_cycle=save)
    write_manifest(out, "evolve", args, settings, started, [str(p) for p, _ in blueprints], outputs,
                   {"chat": getattr(chat, "descriptor", "")}, {"agent_config": acfg.to_dict()})
    print(f"wrote {args.cycles} evolution cycles to {out}")
    return 0


# --------------------------------------------------------------------------
# report


def _load_report(path: Path) -> ReportBundle:
    return read_doc(path, ReportBundle)


def cmd_report(args) -> int:
    started = _now()
    out = Path(args.out)
    if args.repeat_dirs:
        runs = [_load_report(Path(d) / "report.json") for d in args.repeat_dirs]
        rows = repeat_summary(runs)
        outputs = [out / "summary.json", out / "summary.csv"]
        write_atomic(outputs[0], dumps({VERSION_KEY: FORMAT_VERSION, "n_runs": len(runs),
                                        "runs": list(args.repeat_dirs), "per_position": rows}))
        write_atomic(outputs[1], repeat_csv(rows))
        inputs = [str(Path(d) / "report.json") for d in args.repeat_dirs]
    elif args.reports:
        paths = expand(args.reports, "report.json")
        bundles = []
        for p in paths:
            bundle = _load_report(p)
            per_user = bundle.metadata.get("per_user")
            bundles += [ReportBundle.from_dict(u) for u in per_user] if per_user else [bundle]
        outputs = emit_report(bundles, out)
        inputs = [str(p) for p in paths]
    else:
        raise UsageError("report needs --repeat-dirs or --reports")
    write_manifest(out, "report", args, Settings(), started, inputs, outputs, {})
    print(f"wrote {', '.join(str(o) for o in outputs)}")
    return 0


# --------------------------------------------------------------------------
# parser and dispatch


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memgym", description="Long-horizon memory benchmark with simulated users.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, backend=True):
        p.add_argument("--out", required=True, help="output directory")
        if backend:
            p.add_argument("--config", help="preset name (base, extra) or INI file")
            p.add_argument("--backend", choices=("scripted", "live"), help="override the backend mode")
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p = sub.add_parser("gen", help="generate blueprints")
    common(p)
    p.add_argument("--num-users", type=int, default=1)
    p.add_argument("--personas", help="newline-delimited JSON persona pool")
    p.add_argument("--offset", type=int, default=0, help="first persona record to use")
    p.add_argument("--start-date", default=DEFAULT_START_DATE)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run episodes")
    common(p)
    p.add_argument("--blueprints", nargs="+", required=True, help="blueprint files or directories")
    p.add_argument("--agent", choices=AGENTS)
    p.add_argument("--freq", type=int)
    p.add_argument("--ns", type=int)
    p.add_argument("--topk", type=int)
    p.add_argument("--mode", choices=("onpolicy", "offpolicy"), default="onpolicy")
    p.add_argument("--replay", nargs="+", help="trace files or directories to replay")
    p.add_argument("--log-io", action="store_true", help="log every prompt/response pair")
    p.add_argument("--dump-memory", action="store_true", help="write the final memory store")
    p.set_defaults(func=cmd_run)

    for name, func, helptext in (("eval", cmd_eval, "score traces"), ("diagnose", cmd_diagnose, "failure attribution")):
        p = sub.add_parser(name, help=helptext)
        common(p, backend=False)
        p.add_argument("--traces", nargs="+", required=True)
        p.add_argument("--blueprints", nargs="+", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("evolve", help="evolve the in-context memory update prompt")
    common(p)
    p.add_argument("--blueprints", nargs="+", required=True)
    p.add_argument("--cycles", type=int, default=5)
    p.add_argument("--feedback", choices=FEEDBACK_MODES, default="complete")
    p.add_argument("--freq", type=int)
    p.add_argument("--ns", type=int)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("report", help="merge reports across users or repeated runs")
    common(p, backend=False)
    p.add_argument("--reports", nargs="+", help="report.json files or directories to merge across users")
    p.add_argument("--repeat-dirs", nargs="+", help="eval output directories of repeated runs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.command_line = argv
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except MemGymError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return StorageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
