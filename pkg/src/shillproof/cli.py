"""Command-line front door: ``check``, ``reproduce``, ``suite`` and ``replay``.

Exit codes are stable:

* 0: success (and every ``--expect`` matched);
* 1: an expectation or replay mismatch;
* 2: a config, usage or stale-witness error;
* 3: a state-cap abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import suite
from .config import CHECKS, ConfigError, Instance, RunConfig, build_instance, config_hash, load_json
from .dist import DistributionError, fmt_rational
from .engine import (
    SHILL_PRIORS,
    SizeCapExceeded,
    Verdict,
    _jsonable,
    credibility_check,
    replay_strong,
    replay_weak,
    strong_sp_all,
    strong_sp_check,
    support_profiles,
    table_policy,
    trace,
    validate_menu,
    weak_sp_all,
    weak_sp_check,
    weak_witness_nodes,
)
from .mech import expected_revenue, validate

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"shillproof: {msg}", file=sys.stderr)


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _spec(arg: str):
    """A config-file path, or a built-in name when no such file exists."""
    return load_json(arg) if os.path.exists(arg) else arg


def parse_shill_sets(text: str) -> object:
    """``all``, ``1`` or ``0,1``; several sets separated by ``;``."""
    if text.strip() == "all":
        return "all"
    try:
        return [[int(x) for x in part.split(",") if x.strip()] for part in text.split(";") if part.strip()]
    except ValueError:
        raise ConfigError(f"bad --shill-set {text!r}") from None


def parse_range(text: str) -> list[int]:
    """``3..8`` (inclusive), ``5`` or ``3,5,8``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad range {text!r}") from None


# check ------------------------------------------------------------------


def _strong_for_set(auction, S, cap) -> Verdict:
    total = 0
    for prof in support_profiles(auction, frozenset(S)):
        v = strong_sp_check(auction, S, prof)
        total += v.states_enumerated
        if cap is not None and total > cap:
            raise SizeCapExceeded(f"strong-SP search exceeded {cap} states")
        if not v.holds:
            v.states_enumerated = total
            return v
    return Verdict(True, Fraction(0), None, total)


def run_check(inst: Instance, cfg: RunConfig) -> list[dict]:
    a = inst.auction
    n = a.n
    if cfg.shill_sets != "all":
        for S in cfg.shill_sets:
            if not S or any(not 0 <= s < n for s in S):
                raise ConfigError(f"shill set {S} is not a non-empty subset of bidders 0..{n - 1}")
    results = []
    for check in cfg.checks:
        if check in ("weak-sp", "strong-sp"):
            sets = ["all"] if cfg.shill_sets == "all" else cfg.shill_sets
            for S in sets:
                if check == "weak-sp":
                    v = (
                        weak_sp_all(a, cfg.state_cap, cfg.shill_prior)
                        if S == "all"
                        else weak_sp_check(a, S, cfg.state_cap, cfg.shill_prior)
                    )
                else:
                    v = strong_sp_all(a, cfg.state_cap) if S == "all" else _strong_for_set(a, S, cfg.state_cap)
                results.append({"check": check, "shills": S, "verdict": v.as_dict()})
        elif check == "credible":
            if not a.single_action:
                raise ConfigError("credibility is implemented for single-action auctions only")
            results.append({"check": check, "shills": None, "verdict": credibility_check(a, cfg.state_cap).as_dict()})
        elif check == "validate":
            v = validate_menu(a, cfg.state_cap)
            rep = validate(a.mech, a.last_mover())
            v.detail = {"mechanism": rep.as_dict()}
            results.append({"check": check, "shills": None, "verdict": v.as_dict()})
        elif check == "revenue":
            rev = expected_revenue(a.mech)
            results.append({"check": check, "shills": None, "revenue": fmt_rational(rev)})
    return results


def check_report(inst: Instance, cfg: RunConfig) -> dict:
    return {
        "config": inst.config,
        "config_hash": inst.config_hash,
        "auction": inst.auction.describe(),
        "shill_prior": cfg.shill_prior,
        "results": run_check(inst, cfg),
    }


def _holds(results: list[dict]) -> list[bool]:
    return [r["verdict"]["holds"] for r in results if "verdict" in r]


def _atoms(inst_or_auction, cell) -> str:
    a = inst_or_auction.auction if isinstance(inst_or_auction, Instance) else inst_or_auction
    return "{" + ",".join(fmt_rational(a.mech.atoms[k]) for k in cell) + "}"


def render_check_table(report: dict) -> str:
    lines = [f"auction {report['auction']['name']}  config {report['config_hash'][:12]}"]
    rows = [("check", "shills", "holds", "gap", "states")]
    for r in report["results"]:
        if "verdict" not in r:
            rows.append((r["check"], "-", "-", r["revenue"], "-"))
            continue
        v = r["verdict"]
        shills = "-" if r["shills"] is None else (r["shills"] if isinstance(r["shills"], str) else ",".join(map(str, r["shills"])))
        rows.append((r["check"], shills, "yes" if v["holds"] else "no", _show(v["gap"]), str(v["states_enumerated"])))
    widths = [max(len(row[k]) for row in rows) for k in range(5)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    for r in report["results"]:
        w = r.get("verdict", {}).get("witness")
        if not w:
            continue
        if "deviation_revenue" in w:
            where = f" at profile {w['profile']}" if "profile" in w else ""
            lines.append(
                f"  {r['check']} witness: shills {w.get('shills')}{where}: "
                f"deviation revenue {w['deviation_revenue']} vs truthful {w['truthful_revenue']}"
            )
        else:
            lines.append(f"  {r['check']} witness: {json.dumps(w, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def render_check_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "shills", "holds", "gap", "states", "revenue"])
    for r in report["results"]:
        v = r.get("verdict")
        shills = "" if r["shills"] is None else (r["shills"] if isinstance(r["shills"], str) else ",".join(map(str, r["shills"])))
        if v is None:
            w.writerow([r["check"], shills, "", "", "", r["revenue"]])
        else:
            w.writerow([r["check"], shills, v["holds"], v["gap"], v["states_enumerated"], ""])
    return buf.getvalue()


def cmd_check(args) -> int:
    if args.config:
        obj = load_json(args.config)
        if not isinstance(obj, dict):
            raise ConfigError("run config must be a JSON object")
        cfg = RunConfig.from_dict(obj)
    else:
        if not args.dist or not args.auction:
            raise ConfigError("check needs --config, or both --dist and --auction")
        cfg = RunConfig(_spec(args.dist), _spec(args.auction), args.bidders)
        if args.valfn:
            cfg.valfn = load_json(args.valfn) if os.path.exists(args.valfn) else {"kind": args.valfn}
    checks = list(args.check or []) + [c for c in CHECKS if getattr(args, c.replace("-", "_"), False)]
    if checks:
        cfg.checks = checks
    if args.shill_set:
        cfg.shill_sets = parse_shill_sets(args.shill_set)
    if args.shill_prior:
        cfg.shill_prior = args.shill_prior
    if args.state_cap is not None:
        cfg.state_cap = args.state_cap
    if args.expect:
        cfg.expect = args.expect
    fmt = "json" if args.json else "csv" if args.csv else cfg.output.get("format", "table")
    out = args.out or cfg.output.get("path")
    inst = cfg.instance()
    report = check_report(inst, cfg)
    if fmt == "json":
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    elif fmt == "csv":
        text = render_check_csv(report)
    else:
        text = render_check_table(report)
    _emit(text, out)
    if cfg.expect:
        holds = _holds(report["results"])
        ok = all(holds) if cfg.expect == "pass" else not all(holds)
        return EXIT_OK if ok else EXIT_MISMATCH
    return EXIT_OK


# reproduce / suite --------------------------------------------------------


def _tables_csv(report: suite.ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for name, rows in sorted(report.tables.items()):
        if not rows:
            continue
        rows = _jsonable(rows)
        keys = list(rows[0])
        w.writerow(["table"] + keys)
        for row in rows:
            w.writerow([name] + [row.get(k) for k in keys])
    return buf.getvalue()


def cmd_reproduce(args) -> int:
    options = {}
    if args.m:
        if args.id != "qratio":
            raise ConfigError("--m applies to the qratio scenario only")
        options["ms"] = tuple(parse_range(args.m))
        if min(options["ms"]) <= 2:
            raise ConfigError("--m values must exceed 2")
    if args.id not in suite.SCENARIOS:
        raise ConfigError(f"unknown scenario {args.id!r}; known: {', '.join(suite.SCENARIOS)}")
    rep = suite.reproduce(args.id, **options)
    if args.json:
        text = suite.report_json([rep])
    elif args.csv:
        text = _tables_csv(rep)
    else:
        text = suite.report_table([rep])
        for name, rows in sorted(rep.tables.items()):
            if args.id == "qratio":
                text += f"\n{name}\n" + _qratio_table(rows)
    _emit(text, args.out)
    return EXIT_OK if (rep.strict_ok if args.strict else rep.ok) else EXIT_MISMATCH


def _qratio_table(rows) -> str:
    cols = ("m", "reserve_value", "screen_value", "weak_sp", "ex_post_ic", "q_screening", "q_english", "ratio")
    body = [cols] + [tuple(str(_jsonable(r[c])) for c in cols) for r in rows]
    widths = [max(len(r[k]) for r in body) for k in range(len(cols))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in body) + "\n"


def cmd_suite(args) -> int:
    ids = args.filter or list(suite.SCENARIOS)
    unknown = [i for i in ids if i not in suite.SCENARIOS]
    if unknown:
        raise ConfigError(f"unknown scenario(s) {', '.join(unknown)}")
    reports = suite.run_suite(ids)
    text = suite.report_json(reports) if args.json else suite.report_table(reports)
    _emit(text, args.out)
    ok = all(r.strict_ok if args.strict else r.ok for r in reports)
    return EXIT_OK if ok else EXIT_MISMATCH


# replay -------------------------------------------------------------------


def _show(x) -> str:
    """Exact for small denominators, otherwise 12 significant digits."""
    x = Fraction(x)
    if x.denominator <= 1000:
        return fmt_rational(x)
    return "~" + format(float(x), ".12g")


def _fmt_state(auction, state) -> str:
    return "(" + ", ".join(_atoms(auction, s) for s in state) + ")"


def _replay_weak_lines(auction, w: dict, max_lines: int) -> list[str]:
    lines = []
    for node in weak_witness_nodes(auction, w, max_lines):
        pad = "  " * node["depth"]
        if node.get("terminal"):
            lines.append(f"{pad}end {_fmt_state(auction, node['state'])}: real revenue {_show(node['revenue'])} (prob {_show(node['prob'])})")
            continue
        menu = " | ".join(_atoms(auction, c) for c in node["cells"])
        if node["shill"]:
            tag = "deviates" if node["deviates"] else "as type 0"
            lines.append(f"{pad}bidder {node['mover']} (shill) menu {menu} -> picks {_atoms(auction, node['chosen'])} ({tag})")
        else:
            post = ", ".join(_show(p) for p in node["posterior"])
            lines.append(f"{pad}bidder {node['mover']} (real) menu {menu} posterior [{post}]")
    if len(lines) >= max_lines:
        lines.append(f"... truncated at {max_lines} nodes")
    return lines


def _replay_strong_lines(auction, w: dict) -> list[str]:
    choices = {(tuple(map(tuple, d["state"])), d["mover"]): tuple(d["cell"]) for d in w["deviations"]}
    tr = trace(auction, tuple(w["profile"]), w["shills"], table_policy(choices))
    lines = [f"profile {list(w['profile'])}, shills {w['shills']}"]
    for st in tr.steps:
        menu = " | ".join(_atoms(auction, c) for c in st.cells)
        who = "shill" if st.shill else "real"
        lines.append(f"  bidder {st.mover} ({who}) at {_fmt_state(auction, st.state)} menu {menu} -> {_atoms(auction, st.chosen)}")
    lines.append(f"  winner {tr.winner}, transfers [{', '.join(_show(t) for t in tr.transfers)}]")
    return lines


def cmd_replay(args) -> int:
    obj = load_json(args.witness)
    if not isinstance(obj, dict) or "config" not in obj or "config_hash" not in obj or "results" not in obj:
        raise ConfigError("not a witness report (needs config, config_hash and results)")
    if config_hash(obj["config"]) != obj["config_hash"]:
        _err("stale witness: the embedded config does not match its recorded hash")
        return EXIT_CONFIG
    cfg = obj["config"]
    inst = build_instance(cfg["distribution"], cfg["auction"], valfn=cfg.get("valfn"))
    if inst.config_hash != obj["config_hash"]:
        _err("stale witness: the config no longer rebuilds the recorded instance")
        return EXIT_CONFIG
    a = inst.auction
    status = EXIT_OK
    found = False
    out = []
    for r in obj["results"]:
        w = r.get("verdict", {}).get("witness")
        if not w:
            continue
        found = True
        recorded = Fraction(r["verdict"]["gap"])
        out.append(f"== {r['check']} witness ({a.name})")
        if r["check"] == "weak-sp":
            out += _replay_weak_lines(a, w, args.max_lines)
            gap = replay_weak(a, w)
        elif r["check"] == "strong-sp":
            out += _replay_strong_lines(a, w)
            gap = replay_strong(a, w)
        elif r["check"] == "credible":
            total = sum((a.mech.outcome(tuple(rep)).transfers[i] for i, rep in enumerate(w["reports"])), Fraction(0))
            for i, rep in enumerate(w["reports"]):
                out.append(f"  bidder {i} is shown {rep}")
            gap = total - Fraction(w["truthful_revenue"])
        else:
            out.append(f"  {json.dumps(w, sort_keys=True)}")
            continue
        dev = Fraction(w["deviation_revenue"]) if "deviation_revenue" in w else None
        truth = Fraction(w["truthful_revenue"]) if "truthful_revenue" in w else None
        if dev is not None:
            out.append(f"deviation revenue {_show(dev)} vs truthful {_show(truth)}")
        if gap != recorded:
            out.append(f"replayed gap {_show(gap)} differs from recorded {_show(recorded)}")
            status = EXIT_MISMATCH
        else:
            out.append(f"replayed gap {_show(gap)} matches")
    if not found:
        out.append("no witness exists: every recorded verdict holds")
    print("\n".join(out))
    return status


# entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shillproof", description="Exact shill-proofness checks for discrete-type auctions.")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="run checks on one distribution and auction")
    c.add_argument("--config", help="run config file (JSON)")
    c.add_argument("--dist", help="distribution file or built-in name (uniform3, F1, F2, Fm:5)")
    c.add_argument("--auction", help="auction file or built-in name (dutch, english, screening, ...)")
    c.add_argument("--bidders", "-n", type=int, help="number of bidders (default 2)")
    c.add_argument("--valfn", help="value-function file or kind (private, max-common)")
    c.add_argument("--check", action="append", choices=CHECKS, help="check to run; repeatable")
    for name in CHECKS:
        c.add_argument(f"--{name}", action="store_true", help=f"shorthand for --check {name}")
    c.add_argument("--shill-set", help="'all', '1', '0,1' or several separated by ';'")
    c.add_argument("--shill-prior", choices=SHILL_PRIORS)
    c.add_argument("--expect", choices=("pass", "fail"))
    fmt = c.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    c.add_argument("--out", help="write the report here instead of stdout")
    c.add_argument("--state-cap", type=int)
    c.add_argument("--seed", type=int, help="reserved; every check is exhaustive")
    c.set_defaults(fn=cmd_check)

    r = sub.add_parser("reproduce", help="run one named scenario")
    r.add_argument("id")
    r.add_argument("--m", help="qratio only: range such as 3..8")
    fmt = r.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    r.add_argument("--strict", action="store_true", help="treat known discrepancies as failures")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_reproduce)

    s = sub.add_parser("suite", help="run every scenario")
    s.add_argument("action", nargs="?", choices=("run",), default="run")
    s.add_argument("--filter", action="append", help="scenario id; repeatable")
    s.add_argument("--json", action="store_true")
    s.add_argument("--strict", action="store_true", help="treat known discrepancies as failures")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_suite)

    p_ = sub.add_parser("replay", help="re-execute the witnesses in a check report")
    p_.add_argument("witness")
    p_.add_argument("--max-lines", type=int, default=400)
    p_.set_defaults(fn=cmd_replay)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SizeCapExceeded as exc:
        _err(str(exc))
        return EXIT_CAP
    except (ConfigError, DistributionError) as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
