"""Command-line entry point.

Subcommands: optimize, evaluate, assess, annotate, skilltree, replay, report.
Settings resolve as flags > ``--config`` JSON file > built-in defaults.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .analysis import DEFAULT_WEAKNESS_THRESHOLD, aaea_annotate, load_cmd
from .backend import (
    ROLES,
    AgentConfig,
    HttpBackend,
    RecordingBackend,
    ScriptedBackend,
    load_script,
)
from .corpus import FORMATS, bundled_corpus_path, load_questions, sample_questions
from .domain import LessonPlan, SkillTree, build_skill_tree, render_skill_tree_fragment
from .errors import PlanforgeError
from .evaluation import DEFAULT_QUESTIONS_PER_EVAL, ciddp_assess, eaee_evaluate, format_ciddp
from .optimization import OptimizeConfig, generate_initial_plan, oaeo_run
from .runlog import (
    BUNDLED_TABLES,
    RUN_FILE,
    bundled_table,
    load_score_table,
    read_run,
    record_digest,
    render_report,
    write_run_dir,
)

log = logging.getLogger("planforge")

DEFAULTS = {
    "backend": "scripted",
    "script": None,
    "record": None,
    "tree": None,
    "plan": None,
    "mistakes": None,
    "corpus": None,
    "format": "algebra",
    "out": "runs",
    "weakness_threshold": DEFAULT_WEAKNESS_THRESHOLD,
    "optimize": OptimizeConfig().to_dict(),
    "agents": {},
}
OPT_FLAGS = {"rounds": "rounds", "branching": "branching", "capacity": "capacity", "questions": "questions_per_eval",
             "seed": "seed"}
PATH_KEYS = ("script", "record", "tree", "plan", "mistakes", "corpus", "out")


def _data_path(name: str) -> str:
    return str(resources.files("planforge").joinpath(f"data/{name}"))


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


def _role_pairs(values: Optional[Sequence[str]], flag: str) -> dict[str, str]:
    out = {}
    for item in values or ():
        role, sep, value = item.partition("=")
        if not sep or role not in ROLES:
            raise ValueError(f"{flag} expects ROLE=VALUE with ROLE in {ROLES}, got {item!r}")
        out[role] = value
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        cfg_path = Path(args.config)
        cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
        for key in PATH_KEYS:
            if cfg.get(key):
                cfg[key] = str((cfg_path.parent / cfg[key]).resolve())
        settings["optimize"].update(cfg.pop("optimize", {}))
        settings["agents"].update(cfg.pop("agents", {}))
        unknown = set(cfg) - set(settings) - {"topic", "levels"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        settings.update(cfg)
    for key in ("backend", "script", "record", "tree", "plan", "mistakes", "corpus", "format", "out"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = str(Path(value).resolve()) if key in PATH_KEYS and key != "out" else value
    if getattr(args, "threshold", None) is not None:
        settings["weakness_threshold"] = args.threshold
    for flag, key in OPT_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            settings["optimize"][key] = value
    for role, model in _role_pairs(getattr(args, "model", None), "--model").items():
        settings["agents"].setdefault(role, {})["model_id"] = model
    for role, temp in _role_pairs(getattr(args, "temperature", None), "--temperature").items():
        settings["agents"].setdefault(role, {})["temperature"] = float(temp)
    if settings["backend"] == "scripted" and not settings["script"]:
        settings["script"] = _data_path("demo_script.json")
    return settings


def _agent_configs(settings: dict) -> dict[str, AgentConfig]:
    return {role: AgentConfig(role=role, **settings["agents"].get(role, {})) for role in ROLES}


def _make_backend(settings: dict):
    if settings["backend"] == "scripted":
        return ScriptedBackend(load_script(settings["script"]))
    backend = HttpBackend()
    if settings.get("record"):
        return RecordingBackend(backend, settings["record"])
    return backend


def _load_tree(settings: dict) -> SkillTree:
    if settings.get("tree"):
        data = json.loads(Path(settings["tree"]).read_text(encoding="utf-8"))
        if isinstance(data, dict) and "levels" in data and "abilities" not in data:
            return build_skill_tree(data.get("topic", "algebraic equations"), data["levels"], data.get("labels"))
        return SkillTree.from_dict(data)
    if settings.get("levels"):
        return build_skill_tree(settings.get("topic", "algebraic equations"), settings["levels"])
    return SkillTree.from_dict(json.loads(Path(_data_path("default_tree.json")).read_text(encoding="utf-8")))


def _load_plan(path) -> LessonPlan:
    return LessonPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_corpus(settings: dict):
    if settings.get("corpus"):
        return load_questions(settings["corpus"], settings["format"])
    return load_questions(bundled_corpus_path(settings["format"]), settings["format"])


def _sha256(path) -> Optional[str]:
    if not path:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _finish_recording(backend) -> None:
    if isinstance(backend, RecordingBackend):
        backend.save()
        log.info("recorded %d responses to %s", len(backend.entries), backend.path)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def execute_optimize(settings: dict):
    """Run the full loop from resolved settings; returns (queue, record)."""
    configs = _agent_configs(settings)
    backend = _make_backend(settings)
    tree = _load_tree(settings)
    opt = OptimizeConfig(**settings["optimize"])
    questions = _load_corpus(settings)
    cmd = load_cmd(settings.get("mistakes"))
    if settings.get("plan"):
        initial = _load_plan(settings["plan"])
    else:
        initial = generate_initial_plan(backend, configs["optimizer"], tree, settings.get("topic"))
    extra = {
        "backend": settings["backend"],
        "script_sha256": _sha256(settings["script"]) if settings["backend"] == "scripted" else None,
        "corpus_format": settings["format"],
        "corpus_size": len(questions),
        "mistakes_sha256": _sha256(settings.get("mistakes")),
        "agents": {role: configs[role].to_dict() for role in ROLES},
    }
    queue, record = oaeo_run(
        backend, configs, initial, tree, questions, cmd, opt,
        threshold=settings["weakness_threshold"], extra_config=extra,
    )
    _finish_recording(backend)
    return queue, record


def _new_run_dir(out: Path, digest: str, run_id: Optional[str]) -> Path:
    base = run_id or f"{time.strftime('%Y%m%dT%H%M%SZ', time.gmtime())}-{digest[:8]}"
    candidate, n = out / base, 1
    while candidate.exists():
        candidate, n = out / f"{base}-{n}", n + 1
    return candidate


def cmd_optimize(args, settings) -> int:
    _, record = execute_optimize(settings)
    digest = record_digest(record)
    run_dir = _new_run_dir(Path(settings["out"]), digest, args.run_id)
    meta = {"created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), "run_id": run_dir.name,
            "settings": settings}
    write_run_dir(record, run_dir, meta)
    best = record.final_queue[-1]
    print(f"run {run_dir.name}: best score {best[1]:.2f} (plan {best[0]})")
    print(f"digest {digest}")
    print(f"wrote {run_dir}")
    return 0


def cmd_evaluate(args, settings) -> int:
    configs = _agent_configs(settings)
    backend = _make_backend(settings)
    tree = _load_tree(settings)
    plan = _load_plan(settings["plan"])
    opt = settings["optimize"]
    t = args.questions if args.questions is not None else opt.get("questions_per_eval", DEFAULT_QUESTIONS_PER_EVAL)
    questions = sample_questions(_load_corpus(settings), t, opt.get("seed", 0))
    result = eaee_evaluate(backend, configs["evaluator"], plan, tree, questions)
    _finish_recording(backend)
    print(f"Post score: {result.post_score:.2f}")
    print("Per-question: " + ", ".join(f"{q.id}={s:g}" for q, s in zip(questions, result.per_question_scores)))
    print(f"Advantages: {result.advantages}")
    print(f"Disadvantages: {result.disadvantages}")
    return 0


def cmd_assess(args, settings) -> int:
    configs = _agent_configs(settings)
    backend = _make_backend(settings)
    score = ciddp_assess(backend, configs["judge"], _load_plan(settings["plan"]))
    _finish_recording(backend)
    print(format_ciddp(score))
    return 0


def cmd_annotate(args, settings) -> int:
    configs = _agent_configs(settings)
    backend = _make_backend(settings)
    plan = aaea_annotate(
        backend, configs["analyst"], _load_plan(settings["plan"]), load_cmd(settings.get("mistakes")),
        _load_tree(settings), settings["weakness_threshold"],
    )
    _finish_recording(backend)
    text = json.dumps(plan.to_dict(), indent=2, ensure_ascii=False)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(text)
    return 0


def cmd_skilltree(args, settings) -> int:
    tree = _load_tree(settings)
    print(json.dumps(tree.to_dict(), indent=2) if args.json else render_skill_tree_fragment(tree))
    return 0


def cmd_replay(args, settings) -> int:
    run_file = Path(args.run)
    if run_file.is_dir():
        run_file = run_file / RUN_FILE
    _, stored, meta = read_run(run_file)
    replay_settings = meta.get("settings")
    if not replay_settings:
        raise ValueError(f"{run_file} has no stored settings to replay")
    if args.script:
        replay_settings = dict(replay_settings, backend="scripted", script=str(Path(args.script).resolve()))
    _, record = execute_optimize(replay_settings)
    digest = record_digest(record)
    if digest == stored:
        print(f"replay OK: digest {digest}")
        return 0
    print(f"replay MISMATCH: stored {stored}, replayed {digest}", file=sys.stderr)
    return 1


def cmd_report(args, settings) -> int:
    tables = []
    for name in args.fixture or ():
        tables.append(bundled_table(name) if name in BUNDLED_TABLES else load_score_table(name))
    record = None
    if args.run:
        run_file = Path(args.run)
        record, _, _ = read_run(run_file / RUN_FILE if run_file.is_dir() else run_file)
    if record is None and not tables:
        raise ValueError("report needs --run and/or --fixture")
    text, csv_text = render_report(record, tables)
    print(text)
    if csv_text:
        if args.csv:
            Path(args.csv).write_text(csv_text, encoding="utf-8")
        else:
            print()
            print(csv_text, end="")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON settings file")
    p.add_argument("--backend", choices=("http", "scripted"))
    p.add_argument("--script", help="script file for the scripted backend")
    p.add_argument("--record", help="with --backend http, save responses to this script file")
    p.add_argument("--seed", type=int)
    p.add_argument("--tree", help="skill tree JSON file")
    p.add_argument("--mistakes", help="common mistakes database JSON file")
    p.add_argument("--corpus", help="question file")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--questions", type=int, help="test questions per evaluation (T)")
    p.add_argument("--threshold", type=float, help="mean level at or below which an ability counts as weak")
    p.add_argument("--model", action="append", metavar="ROLE=ID")
    p.add_argument("--temperature", action="append", metavar="ROLE=T")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the full optimization loop")
    _common(p)
    p.add_argument("--plan", help="initial plan JSON (generated when omitted)")
    p.add_argument("--rounds", type=int)
    p.add_argument("--branching", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--out", help="runs directory (default: runs)")
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="score one plan against sampled questions")
    _common(p)
    p.add_argument("--plan", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("assess", help="rubric-judge one plan")
    _common(p)
    p.add_argument("--plan", required=True)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("annotate", help="add error-prone points to one plan")
    _common(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("skilltree", help="validate and render a skill tree")
    _common(p)
    p.add_argument("--json", action="store_true", help="print the normalized JSON instead")
    p.set_defaults(func=cmd_skilltree)

    p = sub.add_parser("replay", help="re-run a stored run and compare digests")
    _common(p)
    p.add_argument("--run", required=True, help="run directory or run.json")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="render score tables and the optimization curve")
    _common(p)
    p.add_argument("--run", help="run directory or run.json")
    p.add_argument("--fixture", action="append", help=f"bundled table ({', '.join(BUNDLED_TABLES)}) or a JSON path")
    p.add_argument("--csv", help="write the curve CSV here instead of printing it")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve_settings(args)
        return args.func(args, settings)
    except (PlanforgeError, OSError, ValueError, KeyError) as exc:
        print(f"planforge: error: {exc}", file=sys.stderr)
        return 1


execute = main

if __name__ == "__main__":
    sys.exit(main())
