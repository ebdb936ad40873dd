"""Batch driver: formula in, JSON artifacts and a summary out.

The pipeline decides the formula in S4; for a non-theorem it unravels the
countermodel to a tree, compiles the tree into a template, realizes it and
runs every verification on the result.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .kripke import (
    BudgetExceeded,
    Countermodel,
    decide_s4,
    evaluate,
    frame_properties,
    model_to_dict,
    unravel,
)
from .modal import FormulaSyntaxError, modal_depth, parse_formula, to_box_form, to_text
from .names import CapExceeded, RankError
from .perms import Truncation, TruncationError
from .template import (
    build_template,
    check_pi_proxies,
    dot2_demo,
    realize,
    sibling_pairs,
    sibling_report,
    verify_pmorphism,
)

SCHEMA = "boxsym/1"


def dump(doc: dict) -> str:
    return json.dumps({"schema": SCHEMA, **doc}, sort_keys=True, indent=2) + "\n"


@dataclass
class PipelineReport:
    formula: str
    verdict: str  # "theorem" or "refuted"
    source: str = ""
    stages: dict = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "theorem" or all(self.checks.values())

    def artifacts(self) -> dict[str, str]:
        """File name -> JSON text. Timings stay out so reruns are byte-identical."""
        head = {"formula": self.formula, "input": self.source, "verdict": self.verdict,
                "checks": self.checks, "passed": self.passed}
        out = {"summary.json": dump(head)}
        for name, doc in self.stages.items():
            out[f"{name}.json"] = dump(doc)
        return out

    def summary(self) -> str:
        lines = [f"formula: {self.formula}", f"verdict: {self.verdict}"]
        for k, ok in self.checks.items():
            lines.append(f"  {k}: {'pass' if ok else 'FAIL'}")
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        lines.append("timings: " + ", ".join(f"{k}={v:.2f}s" for k, v in self.timings.items()))
        return "\n".join(lines)


def run_pipeline(formula_text: str, trunc: Truncation, out_dir: str | Path | None = None,
                 rank_cap: int = 3, budget: int = 200_000, corpus_size: int = 120) -> PipelineReport:
    clock = time.perf_counter()
    timings = {}

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    f = to_box_form(parse_formula(formula_text))
    result = decide_s4(f, budget=budget)
    lap("decide")
    text = to_text(f)
    if not isinstance(result, Countermodel):
        stages = {"decision": {"verdict": "theorem", "tableau_nodes": result.nodes}}
        rep = PipelineReport(text, "theorem", formula_text, stages, timings=timings)
        _write(rep, out_dir)
        return rep

    rep = PipelineReport(text, "refuted", source=formula_text, timings=timings)
    cm, world = result.model, result.world
    rep.stages["decision"] = {"verdict": "refuted", "tableau_nodes": result.nodes}
    rep.stages["countermodel"] = {"model": model_to_dict(cm, world), "world": world,
                                  "frame": frame_properties(cm.frame).as_dict()}
    depth = modal_depth(f)
    tree, paths = unravel(cm, world, depth)
    rep.checks["unravel_refutes"] = not evaluate(tree, 0, f)
    rep.stages["tree"] = {"model": model_to_dict(tree, 0), "depth": depth,
                          "paths": [list(p) for p in paths]}
    lap("unravel")

    td = build_template(tree.frame, tree.valuation, trunc)
    rep.stages["descriptor"] = td.to_dict()
    rm = realize(td)
    rep.stages["realized"] = rm.to_dict()
    rep.checks["realized_refutes"] = not evaluate(rm.model, td.root, f)
    props = frame_properties(rm.model.frame)
    rep.checks["realized_s4_frame"] = props.reflexive and props.transitive
    lap("template")

    pm = verify_pmorphism(rm, tree, [f], depth=max(2, depth))
    rep.stages["pmorphism"] = pm.to_dict()
    rep.checks["pmorphism"] = pm.passed
    pi = check_pi_proxies(td)
    rep.stages["pi_proxies"] = pi.to_dict()
    rep.checks["pi_proxies"] = pi.passed
    lap("verify")

    sib = []
    window = Truncation(td.signal_width, trunc.bit_depth)
    for d in sorted(set(td.depth)):
        if sibling_pairs(td, d):
            r = sibling_report(td, d, window, corpus_size=corpus_size, rank_cap=rank_cap)
            sib.append({"depth": d, **r.to_dict()})
            rep.checks[f"siblings_depth_{d}"] = r.passed
    rep.stages["siblings"] = {"reports": sib}
    lap("siblings")
    _write(rep, out_dir)
    return rep


def _write(rep: PipelineReport, out_dir):
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in rep.artifacts().items():
        (out / name).write_text(text)


# -- command line ----------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--coords", type=int, default=16, help="global coordinate count")
    common.add_argument("--bits", type=int, default=1, help="bits per coordinate")
    common.add_argument("--rank-cap", type=int, default=3, help="largest name rank accepted")
    common.add_argument("--budget", type=int, default=200_000, help="tableau node budget")
    common.add_argument("--out", default=None, help="directory for JSON artifacts")

    ap = argparse.ArgumentParser(prog="boxsym", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, help_ in [("decide", "decide S4 membership"),
                        ("countermodel", "print a minimized countermodel"),
                        ("template", "print the template descriptor of the unraveled countermodel"),
                        ("verify", "run every verification and print a summary"),
                        ("report", "run the pipeline and write all artifacts")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("formula")
    sub.add_parser("demo-dot2", parents=[common], help="refute .2 on the two-branch toy")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        trunc = Truncation(args.coords, args.bits)
        return _dispatch(args, trunc)
    except FormulaSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, CapExceeded, RankError, TruncationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _emit(doc: dict, out: str | None, filename: str):
    text = dump(doc)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / filename).write_text(text)
    sys.stdout.write(text)


def _dispatch(args, trunc: Truncation) -> int:
    if args.cmd == "demo-dot2":
        model, root, f = dot2_demo(trunc)
        props = frame_properties(model.frame).as_dict()
        holds = evaluate(model, root, f)
        _emit({"formula": to_text(f), "model": model_to_dict(model, root),
               "holds_at_root": holds, "frame": props}, args.out, "dot2.json")
        return 0 if not holds and not props["directed"] else 1

    f = to_box_form(parse_formula(args.formula))
    if args.cmd == "decide":
        r = decide_s4(f, budget=args.budget)
        verdict = "theorem" if r.is_theorem else "refuted"
        _emit({"formula": to_text(f), "verdict": verdict, "tableau_nodes": r.nodes},
              args.out, "decision.json")
        return 0
    if args.cmd == "countermodel":
        r = decide_s4(f, budget=args.budget)
        if r.is_theorem:
            _emit({"formula": to_text(f), "verdict": "theorem"}, args.out, "countermodel.json")
        else:
            _emit({"formula": to_text(f), "verdict": "refuted", "world": r.world,
                   "model": model_to_dict(r.model, r.world)}, args.out, "countermodel.json")
        return 0
    if args.cmd == "template":
        r = decide_s4(f, budget=args.budget)
        if r.is_theorem:
            _emit({"formula": to_text(f), "verdict": "theorem"}, args.out, "descriptor.json")
            return 0
        tree, _ = unravel(r.model, r.world, modal_depth(f))
        td = build_template(tree.frame, tree.valuation, trunc)
        _emit({"formula": to_text(f), "descriptor": td.to_dict()}, args.out, "descriptor.json")
        return 0

    rep = run_pipeline(args.formula, trunc, args.out if args.cmd == "report" else None,
                       rank_cap=args.rank_cap, budget=args.budget)
    print(rep.summary())
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
