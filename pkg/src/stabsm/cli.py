"""``stabsm`` command line: derive, verify, enumerate, sample, threshold, dual, report.

Exit codes: 0 ok, 1 usage, 2 model error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import oracle
from .channels import ChannelError, channel_for_code, p_from_mu
from .codes import CodeError, builtin
from .config import SCHEMA_VERSION, ConfigError, RunConfig, load
from .lattice import Torus
from .smgen import (
    CLASSICAL_MODELS,
    ModelError,
    classical_model_matrix,
    listing,
    preset_relations,
    reduce_species,
    replica_model,
)

log = logging.getLogger("stabsm")

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_VERIFY = 0, 1, 2, 3

ROW_FIELDS = ("schema", "model", "L", "beta", "p", "seed", "chain", "observable", "value", "error", "config_hash")

# coupling grids used by ``threshold`` when none is given
DEFAULT_GRIDS = {
    ("toric2d", "phase"): (0.41, 0.42, 0.43, 0.44, 0.45, 0.46, 0.47),
    ("toric2d", "bitflip"): (0.41, 0.42, 0.43, 0.44, 0.45, 0.46, 0.47),
    ("toric3d", "phase"): (0.20, 0.21, 0.22, 0.23, 0.24),
    ("toric3d", "bitflip"): (0.72, 0.74, 0.76, 0.78, 0.80),
    ("xcube", "phase"): (0.22, 0.24, 0.26, 0.28, 0.30),
    ("xcube", "bitflip"): (1.2, 1.25, 1.3, 1.35, 1.4),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--code")
    p.add_argument("--channel")
    p.add_argument("--p", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--beta", type=float, help="override couplings with K = beta/2 per term")
    p.add_argument("--grid", type=_floats, help="comma-separated beta grid")
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--thermalization", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--cap", type=int)
    p.add_argument("--reduce", action="store_true", default=None, help="apply the code's species relations")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stabsm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("derive", "print the canonical listing of a replica model"),
        ("verify", "run the oracle suite and print a JSON report"),
        ("enumerate", "exact partition function and Renyi entropy of a small model"),
        ("sample", "Metropolis run of one model at one coupling"),
        ("threshold", "Binder crossing or specific-heat peak over sizes"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "verify":
            p.add_argument("--golden", help="directory of golden listings to compare against")
    p = sub.add_parser("dual", help="Kramers-Wannier prefactor check of a classical model")
    _common(p)
    p.add_argument("--classical", choices=CLASSICAL_MODELS, required=True)
    p = sub.add_parser("report", help="summarize CSV rows written by sample or threshold")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_config(args) -> RunConfig:
    cfg = load(args.config) if getattr(args, "config", None) else RunConfig()
    over = {}
    for key in ("code", "channel", "p", "p2", "n", "L", "sizes", "seed", "sweeps", "thermalization", "out", "format", "cap", "reduce"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if getattr(args, "grid", None) is not None:
        over["betas"] = args.grid
    if getattr(args, "beta", None) is not None:
        over["betas"] = (args.beta,)
    return replace(cfg, **over)


def _model(cfg: RunConfig, L: int | None = None):
    code = builtin(cfg.code)
    chan = channel_for_code(cfg.channel, code, cfg.p, cfg.p2)
    model = replica_model(code, chan, L or cfg.L, cfg.n)
    if cfg.reduce:
        rel = preset_relations(cfg.code)
        if not rel:
            raise ModelError(f"{cfg.code} has no species relations to reduce by")
        model = reduce_species(model, rel)
    return model


def _emit(text: str, out: str) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in ROW_FIELDS})
    return buf.getvalue()


def _rows(records, cfg: RunConfig) -> list[dict]:
    h = cfg.hash()
    out = []
    for rec in records:
        for r in rec.rows():
            r.update(schema=SCHEMA_VERSION, p=cfg.p if rec.beta is None else "", config_hash=h)
            out.append(r)
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_derive(args, cfg: RunConfig) -> int:
    _emit(listing(_model(cfg)), cfg.out)
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig) -> int:
    from .validation import report, run_suite

    t0 = time.perf_counter()
    results = run_suite(cap=cfg.cap, golden=Path(args.golden) if args.golden else None)
    rep = report(results)
    rep["seconds"] = round(time.perf_counter() - t0, 3)
    rep["config_hash"] = cfg.hash()
    _emit(json.dumps(rep, indent=2), cfg.out)
    return EXIT_OK if rep["ok"] else EXIT_VERIFY


def cmd_enumerate(args, cfg: RunConfig) -> int:
    model = _model(cfg)
    if cfg.betas:
        model = model.with_couplings(cfg.betas[0])
    res = oracle.partition_exact(model)
    out = {
        "model": model.label,
        "L": cfg.L,
        "n": cfg.n,
        "p": cfg.p,
        "log_z": res.log_z,
        "log_moment": res.log_moment,
        "renyi": res.log_moment / (1 - cfg.n),
        "enumerated": res.n_enumerated,
        "symmetry_dim": res.symmetry_dim,
        "config_hash": cfg.hash(),
    }
    code = builtin(cfg.code)
    t = code.torus(cfg.L)
    if t.n_qubits <= cfg.cap and not cfg.betas and not cfg.reduce:
        rho = oracle.dense_rho(code, channel_for_code(cfg.channel, code, cfg.p, cfg.p2), t, cap=cfg.cap)
        out["dense_log_moment"] = oracle.dense_moment(rho, cfg.n)
    _emit(json.dumps(out, indent=2), cfg.out)
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    from .mc import MCError, MetropolisSampler
    from .mc.observables import ObservableError

    model = _model(cfg)
    beta = cfg.betas[0] if cfg.betas else None
    sampler = MetropolisSampler(
        beta=beta,
        sweeps=cfg.sweeps,
        thermalization=cfg.thermalization,
        interval=cfg.interval,
        seed=cfg.seed,
        n_bins=cfg.n_bins,
        observable=cfg.observable,
        start=cfg.start,
        pin_strength=cfg.pin_strength,
    )
    try:
        s = sampler.fit(model)
    except (MCError, ObservableError) as exc:
        raise UsageError(str(exc)) from exc
    rows = _rows([s.record_], cfg)
    if cfg.format == "json":
        _emit(json.dumps({"rows": rows, "acceptance": s.acceptance_}, indent=2), cfg.out)
    else:
        _emit(_rows_csv(rows), cfg.out)
    return EXIT_OK


def cmd_threshold(args, cfg: RunConfig) -> int:
    from .mc import MCError, estimate_beta_c
    from .mc.observables import ObservableError

    betas = cfg.betas or DEFAULT_GRIDS.get((cfg.code, cfg.channel))
    if not betas:
        raise UsageError(f"no default grid for {cfg.code}/{cfg.channel}; pass --grid")
    sizes = cfg.sizes or (4, 6)
    if len(sizes) < 2:
        raise UsageError("threshold needs at least two sizes")
    kw = dict(sweeps=cfg.sweeps, thermalization=cfg.thermalization, seed=cfg.seed, n_bins=cfg.n_bins, start=cfg.start)
    if cfg.observable != "auto":
        kw["observable"] = cfg.observable
    try:
        beta_c, err, est = estimate_beta_c(lambda L: _model(cfg, L), sizes, betas, **kw)
    except (MCError, ObservableError) as exc:
        raise UsageError(str(exc)) from exc
    records = getattr(est, "records_", [])
    summary = {
        "model": f"{cfg.code}/{cfg.channel}",
        "sizes": list(sizes),
        "betas": list(betas),
        "beta_c": beta_c,
        "beta_c_error": err,
        "p_c": p_from_mu(beta_c) if math.isfinite(beta_c) else None,
        "estimator": type(est).__name__,
        "diagnostics": getattr(est, "diagnostics_", ""),
        "config_hash": cfg.hash(),
    }
    rows = _rows(records, cfg)
    if cfg.format == "json":
        _emit(json.dumps({"summary": summary, "rows": rows}, indent=2), cfg.out)
    else:
        if cfg.out:
            _emit(_rows_csv(rows), cfg.out)
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_dual(args, cfg: RunConfig) -> int:
    S_c = classical_model_matrix(args.classical)
    d = S_c.d
    L = cfg.L if args.L is not None else {1: 6, 2: 4, 3: 2}[d]
    betas = cfg.betas or (0.2, 0.35, 0.6)
    chk = oracle.kw_verify(S_c, Torus((L,) * d, 1), betas)
    rep = {
        "classical": args.classical,
        "L": L,
        "betas": list(chk.betas),
        "log_prefactor": list(chk.log_prefactor),
        "predicted": chk.predicted,
        "spread": chk.spread,
        "constant": chk.constant(),
        "self_dual": args.classical == "ising2d",
        "dual_generators": chk.dual.n_generators,
        "config_hash": cfg.hash(),
    }
    _emit(json.dumps(rep, indent=2), cfg.out)
    return EXIT_OK if chk.constant() else EXIT_VERIFY


def cmd_report(args) -> int:
    rows = []
    for path in args.inputs:
        with open(path, newline="", encoding="utf-8") as fh:
            rows.extend(csv.DictReader(fh))
    versions = {r.get("schema") for r in rows}
    if len(versions) > 1 or (versions and versions != {str(SCHEMA_VERSION)}):
        raise UsageError(f"refusing to merge rows with schema versions {sorted(map(str, versions))}")
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["model"], r["L"], r["observable"]), []).append(r)
    summary = []
    for (model, L, obs), rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: (float(r["beta"] or "nan") if r["beta"] else math.inf, int(r["seed"])))
        summary.append(
            {
                "model": model,
                "L": int(L),
                "observable": obs,
                "beta": [float(r["beta"]) if r["beta"] else None for r in rs],
                "value": [float(r["value"]) for r in rs],
                "error": [float(r["error"]) for r in rs],
                "config_hashes": sorted({r["config_hash"] for r in rs}),
            }
        )
    _emit(json.dumps({"rows": len(rows), "series": summary}, indent=2), args.out or "")
    return EXIT_OK


COMMANDS = {
    "derive": cmd_derive,
    "verify": cmd_verify,
    "enumerate": cmd_enumerate,
    "sample": cmd_sample,
    "threshold": cmd_threshold,
    "dual": cmd_dual,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args)
        cfg = run_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"stabsm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, CodeError, ChannelError, oracle.OracleError) as exc:
        print(f"stabsm: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
