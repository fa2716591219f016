"""Command-line entry point: data generation, chains, profile sweeps, theory curves, metrics."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, Design, PriorSpec, load_csv, standardize
from .diagnostics import default_b_grid, mixing_report, profile_sweep, run_chain, run_field_chain
from .errors import BvgmError, ValidationError, ZeroVariance
from .gibbs import GammaUpdater
from .ising import GraphPrior, build_graph_prior_matrix, field_from_parts, linear_chain_adjacency, read_edge_list
from .rand import make_rng
from .simulate import (PRESETS, LinearSpec, generate_bsam, generate_linear, preset, selection_metrics,
                       squared_error, write_csv)
from .spline import build_bsam_design, bsam_tau_updater, estimate_functions
from .theory import theory_curve
from .wolff import ClusterStats

MANIFEST_SCHEMA = 1
log = logging.getLogger("bvgm")


@dataclass
class RunConfig:
    mode: str = "linear"  # linear | bsam | gamma_only
    data: str | None = None
    response: str = "y"
    field: str | None = None  # JSON with J and h, gamma_only mode
    prior: str = "horseshoe"
    algorithm: str = "single_site"
    flavor: str = "mh_antithetic"
    lam: float = 1.0
    b: float | None = 1.0
    b_grid: list | None = None
    iters: int = 6000
    burn_in: int = 2000
    seed: int = 0
    knots: int = 7
    intercept: bool = False
    graph: dict | None = None  # {"edges": path, "w0": 1, "delta_w": 0, "schedule": "fixed", "wrap": true}
    comembership: bool = False
    acf_lags: int = 100
    out: str = "bvgm_out"

    def validate(self) -> None:
        if self.mode not in ("linear", "bsam", "gamma_only"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.algorithm not in ("single_site", "cluster"):
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if not self.iters > self.burn_in >= 0:
            raise ValidationError("need iters > burn_in >= 0")
        src = self.field if self.mode == "gamma_only" else self.data
        if src is None or not Path(src).exists():
            raise ValidationError(f"input file {src!r} does not exist")
        if self.graph and self.graph.get("edges") and not Path(self.graph["edges"]).exists():
            raise ValidationError(f"edge list {self.graph['edges']!r} does not exist")

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        doc = json.loads(Path(path).read_text())
        doc = doc.get("config", doc)  # a manifest embeds its config
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def _grid(cfg: RunConfig) -> np.ndarray:
    g = cfg.b_grid
    if g is None:
        return default_b_grid()
    if isinstance(g, dict):
        return default_b_grid(int(g.get("n", 30)), float(g.get("lo", 1e-3)), float(g.get("hi", 1e4)))
    return np.asarray(g, dtype=float)


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _manifest(cfg: RunConfig, command: str) -> dict:
    import numba
    import scipy

    return {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config": dataclasses.asdict(cfg),
        "versions": {
            "bvgm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
    }


class _Problem:
    """Everything a chain needs, assembled once from a config."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.bases = None
        self.names: tuple[str, ...] = ()
        self.raw_X = None
        if cfg.mode == "gamma_only":
            doc = json.loads(Path(cfg.field).read_text())
            J = np.asarray(doc["J"], dtype=float)
            self.fixed_field = field_from_parts(J, np.asarray(doc["h"], dtype=float))
            self.p = J.shape[0]
            self.names = tuple(f"x{j + 1}" for j in range(self.p))
            return
        raw_X, raw_y, names = load_csv(cfg.data, cfg.response)
        self.names = names
        self.raw_X = raw_X
        self.data: Dataset = standardize(raw_X, raw_y, names)
        if cfg.mode == "bsam":
            # the spline lives on the original predictor scale
            self.bases, self.design = build_bsam_design(raw_X, cfg.knots)
        else:
            self.design = Design.linear(self.data.X)
        self.y = self.data.y
        self.p = self.design.p
        self.graph = None
        if cfg.graph:
            gcfg = cfg.graph
            if gcfg.get("edges"):
                A = read_edge_list(gcfg["edges"], names)
            else:
                A = linear_chain_adjacency(self.p, bool(gcfg.get("wrap", True)))
            self.graph = GraphPrior(A, float(gcfg.get("w0", 1.0)), float(gcfg.get("delta_w", 0.0)),
                                    gcfg.get("schedule", "fixed"), tuple(gcfg.get("groups", ())))

    def prior(self, b: float) -> PriorSpec:
        return PriorSpec(self.cfg.prior, float(b), self.cfg.lam, self.cfg.intercept)

    def updater(self, b: float, stats: ClusterStats | None = None) -> GammaUpdater:
        c = self.cfg
        W = mask = None
        if self.cfg.mode != "gamma_only" and self.graph is not None:
            W = build_graph_prior_matrix(self.graph, b)
            mask = self.graph.bond_mask()
        return GammaUpdater(c.algorithm, c.flavor, c.lam, W=W, mask=mask, stats=stats)

    def tau_update(self, prior: PriorSpec):
        return bsam_tau_updater(self.design, prior) if self.cfg.mode == "bsam" else None


def _mixing_rows(gamma_draws, L: int):
    try:
        rep = mixing_report(gamma_draws, min(L, len(gamma_draws) // 2))
    except ZeroVariance:
        return [["frozen", "nan"]]
    rows = [[t, _fmt(c)] for t, c in enumerate(rep.acf)]
    rows.append(["acf_abs_sum", _fmt(rep.acf_abs_sum)])
    rows.append(["exp_corr_time", _fmt(rep.exp_corr_time)])
    return rows


def cmd_run(cfg: RunConfig) -> Path:
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prob = _Problem(cfg)
    b = float(cfg.b)
    rng = make_rng(cfg.seed, 0)
    stats = ClusterStats(prob.p) if (cfg.algorithm == "cluster" and cfg.comembership) else None
    upd = prob.updater(b, stats)
    if cfg.mode == "gamma_only":
        G = run_field_chain(prob.fixed_field, upd, cfg.iters, cfg.burn_in, rng)
        probs = G.mean(axis=0)
        _write_rows(out / "state_summary.csv", ["predictor", "name", "probability"],
                    [[j + 1, prob.names[j], _fmt(probs[j])] for j in range(prob.p)])
    else:
        pr = prob.prior(b)
        res = run_chain(prob.design, prob.y, pr, upd, cfg.iters, cfg.burn_in, rng,
                        tau_update=prob.tau_update(pr), store_beta=cfg.mode == "bsam")
        G = res.gamma
        probs = res.probs
        rows = []
        tau = res.tau_mean if res.tau_mean.ndim == 1 else res.tau_mean.mean(axis=1)
        for j in range(prob.p):
            sl = prob.design.block(j)
            bm = res.beta_cond_mean[sl]
            rows.append([j + 1, prob.names[j], _fmt(probs[j]), _fmt(np.linalg.norm(bm) if bm.size > 1 else bm[0]), _fmt(tau[j])])
        rows.append(["phi", "", "", _fmt(res.phi.mean()), _fmt(res.phi.std())])
        _write_rows(out / "state_summary.csv", ["predictor", "name", "probability", "beta_cond_mean", "tau_mean"], rows)
        if cfg.mode == "bsam":
            est = estimate_functions(res.beta, res.gamma, prob.design, "conditional", x=prob.raw_X)
            frows = []
            for e in est:
                order = np.argsort(e.x, kind="stable")
                for i in order:
                    frows.append([e.predictor + 1, _fmt(e.x[i]), _fmt(e.f_hat[i]), _fmt(e.lo95[i]), _fmt(e.hi95[i])])
            _write_rows(out / "functions.csv", ["predictor", "x", "f_hat", "lo95", "hi95"], frows)
    _write_rows(out / "mixing.csv", ["t", "C"], _mixing_rows(G, cfg.acf_lags))
    if stats is not None:
        for kind, mat in (("aligned", stats.aligned_frequency()), ("anti", stats.anti_frequency())):
            _write_rows(out / f"comembership_{kind}.csv", list(prob.names), [[_fmt(v) for v in r] for r in mat])
    (out / "manifest.json").write_text(json.dumps(_manifest(cfg, "run"), indent=2, sort_keys=True) + "\n")
    return out


def cmd_sweep(cfg: RunConfig) -> Path:
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prob = _Problem(cfg)
    grid = _grid(cfg)
    if cfg.mode == "gamma_only":
        curve = profile_sweep(None, PriorSpec(cfg.prior, 1.0), prob.updater, grid,
                              cfg.iters, cfg.burn_in, cfg.seed, field_for=lambda b: prob.fixed_field)
    else:
        curve = profile_sweep((prob.design, prob.y), prob.prior(1.0), prob.updater, grid, cfg.iters, cfg.burn_in,
                              cfg.seed, tau_update_for=prob.tau_update)
    _write_rows(out / "profile.csv", ["b", "predictor", "probability"],
                [[_fmt(b), j + 1, _fmt(p)] for b, j, p in curve.rows()])
    (out / "manifest.json").write_text(json.dumps(_manifest(cfg, "sweep"), indent=2, sort_keys=True) + "\n")
    return out


# ------------------------------------------------------------------ parser


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip()) if s else ()


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip()) if s else ()


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    for name in ("mode", "data", "response", "field", "prior", "algorithm", "flavor", "lam", "b", "iters",
                 "burn_in", "seed", "knots", "out"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "b_grid", None):
        cfg.b_grid = list(_float_list(args.b_grid))
    if getattr(args, "comembership", False):
        cfg.comembership = True
    if getattr(args, "intercept", False):
        cfg.intercept = True
    if getattr(args, "edges", None) or getattr(args, "chain_prior", False):
        cfg.graph = dict(cfg.graph or {})
        if args.edges:
            cfg.graph["edges"] = args.edges
        if args.w0 is not None:
            cfg.graph["w0"] = args.w0
        if args.schedule:
            cfg.graph["schedule"] = args.schedule
    return cfg


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config or a manifest to replay")
    p.add_argument("--mode", choices=["linear", "bsam", "gamma_only"])
    p.add_argument("--data", help="CSV with a header row")
    p.add_argument("--response")
    p.add_argument("--field", help="JSON with J and h for gamma_only mode")
    p.add_argument("--prior", choices=["cauchy", "laplace", "horseshoe"])
    p.add_argument("--algorithm", choices=["single_site", "cluster"])
    p.add_argument("--flavor", choices=["gibbs", "mh_antithetic"])
    p.add_argument("--lam", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--b-grid", dest="b_grid", help="comma separated b values")
    p.add_argument("--iters", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--knots", type=int)
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--edges", help="edge list (names or 1-based indices) for a graph prior")
    p.add_argument("--chain-prior", dest="chain_prior", action="store_true", help="linear-chain graph prior")
    p.add_argument("--w0", type=float)
    p.add_argument("--schedule", choices=["fixed", "phi-of-log-b"])
    p.add_argument("--comembership", action="store_true")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bvgm", description="Bayesian variable selection with Ising-type indicator priors")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-linear", help="simulate a sparse linear-model dataset")
    g.add_argument("--preset", choices=[p.lower() for p in PRESETS] + list(PRESETS))
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--S", help="1-based true indices, comma separated")
    g.add_argument("--beta", help="coefficients for S, comma separated")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    gb = sub.add_parser("generate-bsam", help="simulate the additive-model dataset")
    gb.add_argument("--n", type=int, default=100)
    gb.add_argument("--p", type=int, default=10)
    gb.add_argument("--t", type=float, default=0.0)
    gb.add_argument("--seed", type=int, default=0)
    gb.add_argument("--amplitudes", default="1,1,1,1", help="multipliers for f1..f4 (e.g. 5,3,4,6)")
    gb.add_argument("--out", required=True)
    gb.add_argument("--truth-out", help="write the true f1..f4 values per row")

    for name, hlp in (("run", "one chain at a single b"), ("sweep", "profile curves over a b grid")):
        _add_run_args(sub.add_parser(name, help=hlp))

    t = sub.add_parser("theory", help="orthogonal-design selection probabilities")
    t.add_argument("--prior", choices=["cauchy", "laplace", "horseshoe"], required=True)
    t.add_argument("--a", default="0,2,4")
    t.add_argument("--b-grid", dest="b_grid", help="comma separated b values (default 30 log-spaced)")
    t.add_argument("--method", choices=["quadrature", "closed_form", "monte_carlo"], default="quadrature")
    t.add_argument("--out")

    m = sub.add_parser("metrics", help="selection error rates from a state summary")
    m.add_argument("--summary", required=True, help="state_summary.csv from a run")
    m.add_argument("--truth", required=True, help="1-based true indices, comma separated")
    m.add_argument("--cutoff", type=float, default=0.5)
    m.add_argument("--functions", help="functions.csv from an additive run")
    m.add_argument("--truth-functions", dest="truth_functions", help="truth CSV from generate-bsam")
    m.add_argument("--data", help="dataset CSV used for the run (needed with --functions)")
    return ap


def _generate_linear(args) -> None:
    if args.preset:
        spec = preset(args.preset, args.seed, args.n, args.p)
    else:
        if args.n is None or args.p is None:
            raise ValidationError("give --preset or both --n and --p")
        spec = LinearSpec(args.n, args.p, _int_list(args.S), _float_list(args.beta), args.seed)
    X, y = generate_linear(spec)
    write_csv(args.out, X, y)


def _generate_bsam(args) -> None:
    amp = np.asarray(_float_list(args.amplitudes))
    if amp.size != 4:
        raise ValidationError("--amplitudes needs four values")
    X, y, F = generate_bsam(args.n, args.p, args.t, args.seed)
    y = y + F @ (amp - 1.0)
    F = F * amp
    write_csv(args.out, X, y)
    if args.truth_out:
        _write_rows(Path(args.truth_out), ["f1", "f2", "f3", "f4"], [[_fmt(v) for v in r] for r in F])


def _theory(args) -> None:
    grid = np.asarray(_float_list(args.b_grid)) if args.b_grid else default_b_grid()
    rows = theory_curve(args.prior, _float_list(args.a), grid, args.method)
    body = [[k, _fmt(a), _fmt(b), _fmt(o), _fmt(p)] for k, a, b, o, p in rows]
    header = ["prior", "a", "b", "odds", "probability"]
    if args.out:
        _write_rows(Path(args.out), header, body)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)


def _metrics(args) -> None:
    with open(args.summary, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["predictor"].isdigit()]
    probs = np.array([float(r["probability"]) for r in rows])
    truth = [i - 1 for i in _int_list(args.truth)]
    m = selection_metrics(probs, truth, args.cutoff)
    out = {"fp_rate": m.fp_rate, "fn_rate": m.fn_rate, "ms": m.ms}
    if args.functions and args.truth_functions:
        with open(args.truth_functions, newline="") as fh:
            F = np.array([[float(v) for v in r] for r in list(csv.reader(fh))[1:]])
        raw_X, _, _ = load_csv(args.data, "y")
        with open(args.functions, newline="") as fh:
            fr = list(csv.DictReader(fh))
        for k in range(F.shape[1]):
            est = {float(r["x"]): float(r["f_hat"]) for r in fr if int(r["predictor"]) == k + 1}
            fhat = np.array([est[float(v)] for v in raw_X[:, k]])
            out[f"se_f{k + 1}"] = squared_error(F[:, k] - F[:, k].mean(), fhat)
    print(json.dumps(out, sort_keys=True))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "generate-linear":
            _generate_linear(args)
        elif args.command == "generate-bsam":
            _generate_bsam(args)
        elif args.command == "run":
            print(cmd_run(_config_from_args(args)))
        elif args.command == "sweep":
            print(cmd_sweep(_config_from_args(args)))
        elif args.command == "theory":
            _theory(args)
        elif args.command == "metrics":
            _metrics(args)
    except (BvgmError, ValueError, OSError) as exc:
        print(f"bvgm {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
