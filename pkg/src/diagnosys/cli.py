"""Operator entry point: console consultation, service launcher, KB tools,
and the evaluation and ablation runners.

Machine output (CSV) goes to stdout or the --out file untouched; logs and
error messages go to stderr, so piping a sweep into a file stays clean.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path
from typing import Optional

from .dialogue import Consultation
from .engine import EngineConfig
from .errors import DiagnosysError, NonFiniteValue
from .evaluation import (
    format_kfold_csv,
    format_kfold_summary,
    generate_cases,
    named_grid,
    run_ablation,
    run_kfold,
)
from .kb import (
    KnowledgeBase,
    default_kb_path,
    format_similarity_csv,
    load_knowledge_base,
    similarity_matrix,
    validate_kb,
)
from .llm import HttpChatProvider, LiveExtractor, LlmConfig

log = logging.getLogger("diagnosys.cli")

_ENGINE_KEYS = {f.name for f in dataclass_fields(EngineConfig)}
_LLM_KEYS = {f.name for f in dataclass_fields(LlmConfig)}


@dataclass
class CliConfig:
    kb_dir: Path
    config_file: Optional[Path]
    mode: str
    seed: int

    def __post_init__(self) -> None:
        if not self.kb_dir.is_dir():
            raise ValueError(f"KB directory does not exist: {self.kb_dir}")
        if self.mode not in ("offline", "live"):
            raise ValueError(f"mode must be offline or live, got {self.mode!r}")


def load_config_file(path: Path) -> tuple[EngineConfig, LlmConfig]:
    """Split one flat JSON object into engine and provider settings.

    Unknown keys are rejected outright rather than ignored: a typoed
    threshold that silently falls back to a default is worse than an error.
    """
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"config file must hold a JSON object: {path}")
    unknown = sorted(set(raw) - _ENGINE_KEYS - _LLM_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    engine = EngineConfig(**{k: v for k, v in raw.items() if k in _ENGINE_KEYS})
    llm = LlmConfig(**{k: v for k, v in raw.items() if k in _LLM_KEYS})
    return engine, llm


def _resolve(args: argparse.Namespace) -> tuple[CliConfig, EngineConfig, LlmConfig]:
    cli = CliConfig(kb_dir=Path(args.kb), config_file=args.config,
                    mode=args.mode, seed=args.seed)
    if cli.config_file is not None:
        engine, llm = load_config_file(cli.config_file)
    else:
        engine, llm = EngineConfig(), LlmConfig()
    if cli.mode == "live":
        if not os.environ.get(llm.token_env, ""):
            raise ValueError(
                f"live mode needs the {llm.token_env} environment variable")
        llm = LlmConfig(**{**{f.name: getattr(llm, f.name) for f in dataclass_fields(LlmConfig)},
                           "mode": "live"})
    return cli, engine, llm


def _make_consultation(cli: CliConfig, engine: EngineConfig,
                       llm: LlmConfig, kb: KnowledgeBase) -> Consultation:
    if cli.mode == "live":
        provider = HttpChatProvider(llm)
        from .engine import build_symptom_index

        index = build_symptom_index(kb)
        extractor = LiveExtractor(kb, index, provider, engine.sim_threshold)
        return Consultation(kb, index=index, config=engine, extractor=extractor)
    return Consultation(kb, config=engine)


# -- chat rendering ----------------------------------------------------------

def _print_hypotheses(snapshot: dict, out, limit: int = 5) -> None:
    print("  current picture:", file=out)
    shown = 0
    for h in snapshot["hypotheses"]:
        if h["eliminated"]:
            continue
        shown += 1
        bar = "#" * round(h["confidence"] * 20)
        print(f"    {shown}. {h['disease']:<34} {h['confidence']:.2f} {bar}",
              file=out)
        if shown >= limit:
            break
    ruled_out = [h["disease"] for h in snapshot["hypotheses"] if h["eliminated"]]
    if ruled_out:
        print(f"    ruled out: {', '.join(ruled_out)}", file=out)


def _prompt_line(prompt: str, stdin, out) -> Optional[str]:
    print(prompt, end="", flush=True, file=out)
    line = stdin.readline()
    if not line:
        return None
    return line.strip()


def cmd_chat(args: argparse.Namespace, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    out = stdout or sys.stdout
    cli, engine, llm = _resolve(args)
    kb = load_knowledge_base(cli.kb_dir)
    consult = _make_consultation(cli, engine, llm, kb)

    print("Hello. Tell me about the symptoms that are bothering you.", file=out)
    opening = _prompt_line("> ", stdin, out)
    if opening is None:
        return 0
    view = consult.open(opening)
    _print_hypotheses(view["snapshot"], out)

    while True:
        nxt = view["next"]
        kind = nxt["kind"]
        if kind == "question":
            q = nxt["question"]
            print(f"\n{q['prompt_text']} (yes/no/unsure)", file=out)
            print(f"  why: {q['justification']}", file=out)
            reply = _prompt_line("> ", stdin, out)
            if reply is None:
                return 0
            if reply.lower() in ("yes", "no", "unsure"):
                view = consult.answer(q["question_id"], reply.lower())
            elif reply:
                # anything else is treated as the patient volunteering detail
                view = consult.message(reply)
            else:
                continue
            _print_hypotheses(view["snapshot"], out)
        elif kind == "open":
            reply = _prompt_line("> ", stdin, out)
            if reply is None:
                return 0
            if not reply:
                continue
            view = consult.message(reply)
            _print_hypotheses(view["snapshot"], out)
        elif kind == "test":
            t = nxt["test"]
            print(f"\n{t['prompt_text']}", file=out)
            reply = _prompt_line("> ", stdin, out)
            if reply is None:
                return 0
            value: object = reply
            try:
                value = float(reply)
            except ValueError:
                pass
            try:
                view = consult.submit_test(t["test_id"], value)
            except NonFiniteValue:
                # a typo should not torpedo the whole consultation
                print("  please reply with a number, or 'unknown'", file=out)
                continue
            for outcome in view.get("outcomes", []):
                print(f"  {outcome['test_id']} -> {outcome['verdict']} "
                      f"for {outcome['disease']}", file=out)
            _print_hypotheses(view["snapshot"], out)
        elif kind == "risk":
            r = nxt["risk"]
            print(f"\n{r['prompt_text']} (yes/no/unsure)", file=out)
            reply = _prompt_line("> ", stdin, out)
            if reply is None:
                return 0
            answer = reply.lower() if reply.lower() in ("yes", "no", "unsure") else "unsure"
            view = consult.answer(r["question_id"], answer)
        else:  # report_ready
            report = consult.report()
            print("\n" + report.to_text(), file=out)
            return 0


# -- non-interactive commands ------------------------------------------------

def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    cli, engine, _ = _resolve(args)
    kb = load_knowledge_base(cli.kb_dir)
    origins = None
    if args.cors_origin:
        origins = list(args.cors_origin)
    app = create_app(kb=kb, config=engine, cors_origins=origins)
    log.info("serving on %s:%d (%d diseases)", args.host, args.port,
             len(kb.diseases))
    uvicorn.run(app, host=args.host, port=args.port, log_config=None)
    return 0


def cmd_kb_validate(args: argparse.Namespace) -> int:
    cli, _, _ = _resolve(args)
    kb = load_knowledge_base(cli.kb_dir)
    problems = validate_kb(kb)
    if problems:
        for p in problems:
            print(p)
        print(f"{len(problems)} problem(s) found")
        return 1
    print(f"{len(kb.diseases)} diseases OK")
    return 0


def cmd_kb_similarity(args: argparse.Namespace) -> int:
    cli, _, _ = _resolve(args)
    kb = load_knowledge_base(cli.kb_dir)
    names, matrix = similarity_matrix(kb)
    csv = format_similarity_csv(names, matrix)
    if args.out:
        Path(args.out).write_text(csv, encoding="utf-8")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(csv)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cli, engine, _ = _resolve(args)
    kb = load_knowledge_base(cli.kb_dir)
    cases = generate_cases(kb, per_disease=args.per_disease, seed=cli.seed,
                           min_symptoms=engine.min_symptoms)
    kfold = run_kfold(cases, kb, k=args.folds, config=engine, seed=cli.seed)
    print(format_kfold_summary(kfold))
    if args.out:
        Path(args.out).write_text(format_kfold_csv(kfold, engine),
                                  encoding="utf-8")
        log.info("wrote %s", args.out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cli, _, _ = _resolve(args)
    kb = load_knowledge_base(cli.kb_dir)
    grid = named_grid(args.grid)
    csv = run_ablation(grid, None, kb, per_disease=args.per_disease,
                       seed=cli.seed)
    if args.out:
        Path(args.out).write_text(csv, encoding="utf-8")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(csv)
    return 0


# -- argument wiring ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--kb", default=str(default_kb_path()),
                        help="KB directory (default: bundled)")
    shared.add_argument("--config", type=Path, default=None,
                        help="JSON config file (engine and provider keys)")
    shared.add_argument("--mode", choices=("offline", "live"), default="offline",
                        help="extraction mode (default: offline)")
    shared.add_argument("--seed", type=int, default=0,
                        help="seed for case generation (default: 0)")

    parser = argparse.ArgumentParser(
        prog="diagnosys",
        description="Conversational diagnostic engine: console chat, HTTP "
                    "service, KB tools, and evaluation runners.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_chat = sub.add_parser("chat", parents=[shared],
                            help="interactive console consultation")
    p_chat.set_defaults(func=cmd_chat)

    p_serve = sub.add_parser("serve", parents=[shared],
                             help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--cors-origin", action="append", default=None,
                         help="allowed UI origin (repeatable)")
    p_serve.set_defaults(func=cmd_serve)

    p_kb = sub.add_parser("kb", help="knowledge base tools")
    kb_sub = p_kb.add_subparsers(dest="kb_command", required=True)
    p_val = kb_sub.add_parser("validate", parents=[shared],
                              help="check structure, weights, and synonyms")
    p_val.set_defaults(func=cmd_kb_validate)
    p_sim = kb_sub.add_parser("similarity", parents=[shared],
                              help="write the profile-overlap matrix as CSV")
    p_sim.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p_sim.set_defaults(func=cmd_kb_similarity)

    p_eval = sub.add_parser("eval", parents=[shared],
                            help="k-fold evaluation on simulated patients")
    p_eval.add_argument("--folds", type=int, default=5)
    p_eval.add_argument("--per-disease", type=int, default=6,
                        help="simulated cases per disease (default: 6)")
    p_eval.add_argument("--out", default=None,
                        help="also write per-fold CSV here")
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablate", parents=[shared],
                           help="run a canned parameter sweep to CSV")
    p_abl.add_argument("--grid", required=True,
                       choices=("table5", "table6", "table7"))
    p_abl.add_argument("--per-disease", type=int, default=6)
    p_abl.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p_abl.set_defaults(func=cmd_ablate)

    return parser


def run_cli(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DiagnosysError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
