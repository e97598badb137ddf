"""Command line entry point: ingest, make-users, train, eval, chat, report.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .beliefnet import RDF_TYPE, TURN, EKG, Capsule, MalformedCapsule, Ontology, build_ikg, integrate, list_claims
from .d2q import Agent, CheckpointCorrupt
from .dataio import (
    IngestStats,
    RecordError,
    UnknownPredicate,
    hpd_ontology,
    ingest,
    load_mapping,
    predicate_counts,
    read_records,
    synth_kb,
    write_stats,
)
from .desires import PATTERNS, AbstractPattern, DesireInstance, generate_desires
from .encoder import simplify
from .metrics import MetricKind, evaluate, reward
from .namespaces import local_name
from .nquads import ParseError, read_nquads, write_nquads
from .quadstore import QuadStore
from .trainer import ConfigInvalid, ExperimentConfig, evaluate_policy, profile_knowledge, read_log_csv, run_experiment
from .usermodel import EmptyKnowledgeBase, UserKind, make_population, save_population

TEMPLATE_DIR = Path(__file__).with_name("templates")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgdesire", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="convert an attribute table (or synthetic data) to N-Quads")
    p.add_argument("--input", help="CSV or JSON-lines attribute records")
    p.add_argument("--mapping", help="JSON file mapping record fields to input columns")
    p.add_argument("--characters", type=int, default=50, help="synthetic characters when --input is absent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("make-users", help="derive a user population from a knowledge base")
    p.add_argument("--kb", help="N-Quads knowledge base (synthetic if absent)")
    p.add_argument("--characters", type=int, default=50)
    p.add_argument("--user-kind", action="append", dest="kinds", choices=[k.value for k in UserKind])
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="run a training experiment")
    _config_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="Q-value distributions and knowledge profile of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ekg", help="N-Quads eKG to evaluate (empty eKG if absent)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("chat", help="converse with a checkpoint as the knowledge source")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ekg", required=True, help="eKG file, loaded if present and saved on exit")
    p.add_argument("--intention", default="total-triples")

    p = sub.add_parser("report", help="turn a training log into analysis tables")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    return parser


def _config_flags(p):
    p.add_argument("--config", help="ExperimentConfig JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--intention")
    p.add_argument("--user-kind", action="append", dest="kinds", choices=[k.value for k in UserKind])
    p.add_argument("--kb", help="N-Quads knowledge base used for the users")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "ingest": cmd_ingest,
        "make-users": cmd_make_users,
        "train": cmd_train,
        "eval": cmd_eval,
        "chat": cmd_chat,
        "report": cmd_report,
    }[args.command]
    try:
        return handler(args) or 0
    except UsageError as exc:
        print(f"kgdesire: {exc}", file=sys.stderr)
        return 1
    except (DataError, ConfigInvalid, CheckpointCorrupt, ParseError, RecordError, UnknownPredicate,
            EmptyKnowledgeBase, OSError, ValueError, KeyError) as exc:
        print(f"kgdesire: {exc}", file=sys.stderr)
        return 2


def _kb(path, characters: int, seed: int) -> QuadStore:
    if path:
        return read_nquads(path)
    return synth_kb(characters, seed)


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.input:
        store, stats = ingest(read_records(args.input, load_mapping(args.mapping)))
    else:
        store = synth_kb(args.characters, args.seed)
        stats = IngestStats(claims=len(list_claims(store)), per_predicate=predicate_counts(store))
    write_nquads(store, out / "kb.nq")
    write_stats(stats, out / "stats.json")
    print(f"wrote {len(store)} quads to {out / 'kb.nq'}")
    return 0


def cmd_make_users(args) -> int:
    kb = _kb(args.kb, args.characters, args.seed)
    kinds = args.kinds or [k.value for k in UserKind]
    users = make_population(kb, kinds, args.instances, args.seed)
    manifest = save_population(users, kb, args.out)
    print(f"wrote {len(users)} users, manifest {manifest}")
    return 0


def load_config(args) -> ExperimentConfig:
    if args.config:
        if not Path(args.config).exists():
            raise DataError(f"config file not found: {args.config}")
        config = ExperimentConfig.load(args.config)
    else:
        config = ExperimentConfig()
    data = config.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.intention:
        data["intention"] = args.intention
    if args.kinds:
        data["user_kinds"] = args.kinds
    if args.kb:
        data["kb_path"] = args.kb
    return ExperimentConfig.from_dict(data)


def cmd_train(args) -> int:
    config = load_config(args)
    report = run_experiment(config, out_dir=args.out)
    print(f"{len(report.rows)} agent turns, {len(report.checkpoints)} checkpoints, "
          f"{report.elapsed:.1f}s; log at {Path(args.out) / 'log.csv'}")
    return 0


def _ontology_of(agent: Agent) -> Ontology:
    data = agent.checkpoint_meta.get("ontology")
    return Ontology.from_dict(data) if data else hpd_ontology()


def cmd_eval(args) -> int:
    agent = Agent.load(args.checkpoint)
    ontology = _ontology_of(agent)
    ekg = EKG(ontology, read_nquads(args.ekg)) if args.ekg else EKG(ontology)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    q = evaluate_policy(agent, ekg if args.ekg else None)
    (out / "qvalues.json").write_text(json.dumps(q.to_dict(), indent=2), encoding="utf-8")
    (out / "profile.json").write_text(json.dumps(profile_knowledge(ekg), indent=2), encoding="utf-8")
    print(f"wrote {out / 'qvalues.json'} and {out / 'profile.json'}")
    return 0


def _words(term) -> str:
    return local_name(term.value).replace("-", " ").replace("_", " ") if term.is_iri else term.value


def load_template(pattern: AbstractPattern) -> str:
    return (TEMPLATE_DIR / f"{pattern.label}.txt").read_text(encoding="utf-8").strip()


def render_prompt(desire: DesireInstance, ekg: EKG | None = None) -> str:
    """English prompt for a desire, from the per-pattern template file."""
    b = desire.bindings
    fields = {k: _words(v) for k, v in b.items()}
    fields.setdefault("subject", "")
    fields.setdefault("predicate", "")
    fields.setdefault("object", "")
    fields["predicate_name"] = fields["predicate"]
    fields["slot"] = desire.free_slot or "value"
    fields["gap_name"] = fields.get("gap_predicate", fields["slot"])
    fields["subject_type"] = fields["object_type"] = "thing"
    if ekg is not None:
        from .desires import entity_types

        for role in ("subject", "object"):
            if role in b:
                types = sorted(entity_types(ekg.store, b[role]))
                if types:
                    fields[f"{role}_type"] = local_name(types[0])
    return load_template(desire.pattern).format_map(fields)


def parse_reply(line: str, source: str = "human") -> Capsule:
    """``subject|predicate|object[|polarity[|certainty]]``."""
    parts = [p.strip() for p in line.split("|")]
    if len(parts) < 3 or len(parts) > 5 or not all(parts[:3]):
        raise MalformedCapsule("expected subject|predicate|object[|polarity[|certainty]]")
    polarity = parts[3] if len(parts) > 3 and parts[3] else "positive"
    certainty = parts[4] if len(parts) > 4 and parts[4] else "certain"
    return Capsule.create(source, "chat", parts[0], parts[1], parts[2], polarity, certainty)


def cmd_chat(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    agent = Agent.load(args.checkpoint)
    ontology = _ontology_of(agent)
    path = Path(args.ekg)
    ekg = EKG(ontology, read_nquads(path)) if path.exists() else EKG(ontology)
    metric = MetricKind.from_label(args.intention)
    chat = 1 + len(ekg.store.find(p=RDF_TYPE, o=TURN))

    def say(text):
        print(text, file=stdout, flush=True)

    say("Tell me something as subject|predicate|object|polarity|certainty (empty line or 'quit' ends).")
    turn = 1
    desire = None
    try:
        while True:
            line = stdin.readline()
            if not line or line.strip().lower() in ("", "quit", "exit"):
                break
            try:
                capsule = parse_reply(line)
            except MalformedCapsule as exc:
                say(f"Sorry, I could not read that: {exc}")
                if desire is not None:
                    say(f"({desire.pattern.label}) {render_prompt(desire, ekg)}")
                continue
            m_prev = evaluate(metric, ekg)
            ikg = build_ikg(capsule, chat=chat, turn=turn, ontology=ontology)
            integrate(ekg, ikg)
            m_next = evaluate(metric, ekg)
            if desire is not None:
                say(f"[{metric.label}: {m_prev:.4g} -> {m_next:.4g}, reward {reward(m_prev, m_next):+.4f}]")
            turn += 2
            desires = generate_desires(ekg, ikg)
            if not desires:
                desire = None
                say("Tell me more.")
                continue
            desire = agent.act(simplify(ekg), desires, greedy=True)
            say(f"({desire.pattern.label}) {render_prompt(desire, ekg)}")
    finally:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_nquads(ekg.store, path)
        say(f"saved eKG ({len(ekg)} quads) to {path}")
    return 0


def cmd_report(args) -> int:
    log = Path(args.log)
    if not log.exists():
        raise DataError(f"log not found: {log}")
    rows = read_log_csv(log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tables = report_tables(rows)
    summary = log.with_name("summary.json")
    if summary.exists():
        profiles = json.loads(summary.read_text(encoding="utf-8")).get("profiles", [])
        tables["profiles"] = profiles
    for name, table in tables.items():
        _write_table(out / f"{name}.csv", table)
    print(f"wrote {', '.join(sorted(tables))} to {out}")
    return 0


def report_tables(rows: list[dict]) -> dict[str, list[dict]]:
    """Reward curves, action counts and per-user cumulative rewards from log rows."""
    runs = sorted({r["run"] for r in rows})
    per_run = {run: [r for r in rows if r["run"] == run] for run in runs}
    steps = min((len(v) for v in per_run.values()), default=0)
    curve = []
    cumulative = 0.0
    for i in range(steps):
        mean = sum(per_run[run][i]["reward"] for run in runs) / len(runs)
        cumulative += mean
        curve.append({"step": i + 1, "mean_reward": mean, "cumulative_reward": cumulative})
    counts = {p.label: 0 for p in PATTERNS}
    for r in rows:
        counts[r["action"]] += 1
    users: dict[str, list[float]] = {}
    for r in rows:
        key = r["user_kind"]
        users.setdefault(key, []).append(r["reward"])
    return {
        "reward_curve": curve,
        "action_counts": [{"action": k, "count": v} for k, v in counts.items()],
        "user_comparison": [{"user_kind": k, "turns": len(v), "cumulative_reward": sum(v)}
                            for k, v in sorted(users.items())],
    }


def _write_table(path: Path, table: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        if not table:
            return
        writer = csv.DictWriter(fh, fieldnames=list(table[0]))
        writer.writeheader()
        writer.writerows(table)


if __name__ == "__main__":
    sys.exit(main())
