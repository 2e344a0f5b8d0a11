"""Command-line front end.

Every run prints its configuration first: as the ``config`` member in JSON
mode, and as a ``# config`` comment line in CSV mode. Floats use Python's
shortest round-trip ``repr``. The worker count never enters the output,
so runs are byte-identical for any ``--threads``.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import dynamics, geometry, koenigs, measure, nested
from .errors import BudgetError, GaugeDynError

EXIT_OK, EXIT_DOMAIN, EXIT_BUDGET, EXIT_USAGE = 0, 2, 3, 64

COMMANDS = (
    "fixpoint", "koenigs", "gauge", "equivalence", "pack",
    "distortion", "nested", "frostman", "product", "probe",
)


@dataclass
class RunConfig:
    command: str
    parameters: dict = field(default_factory=dict)
    output_format: str = "json"
    seed: int = 0
    threads: Optional[int] = None

    def echo(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "output_format": self.output_format,
            "seed": self.seed,
        }


@dataclass
class Result:
    scalars: dict
    rows: Optional[list[dict]] = None
    text: Optional[str] = None


def _num(v: Any) -> Any:
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    return v


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    lines = [",".join(keys)]
    for r in rows:
        lines.append(",".join(_cell(_num(r[k])) for k in keys))
    return "\n".join(lines) + "\n"


def _expmap(p: dict) -> dynamics.ExpMap:
    if p.get("lam") is not None:
        return dynamics.ExpMap.from_lambda(p["lam"])
    return dynamics.ExpMap.from_mu(p["mu"] if p.get("mu") is not None else 2.0)


def _beta(p: dict) -> float:
    m = _expmap(p)
    m._require_real()
    return m.beta


def cmd_fixpoint(cfg: RunConfig) -> Result:
    m = _expmap(cfg.parameters)
    m._require_real()
    return Result({
        "lambda": m.lam,
        "alpha": m.alpha,
        "beta": m.beta,
        "attraction_radius": m.attraction_radius,
        "postcritical_tail_length": len(m.postcritical_tail),
    })


def cmd_koenigs(cfg: RunConfig) -> Result:
    p = cfg.parameters
    ev = koenigs.KoenigsEvaluator(_beta(p), tol=p["tol"])
    rows = []
    for x in p["x"]:
        if p["coordinate"] == "lambda":
            val = ev.phi(x)
            arg = x - ev.mu
        else:
            val = ev.phi_tilde(x)
            arg = x
        n = koenigs.reduction_count(ev, arg) if arg >= ev.x0 else None
        rows.append({"x": float(x), "value": val, "reduction_count": n})
    return Result({"mu": ev.mu, "x0": ev.x0, "x1": ev.x1}, rows)


def cmd_gauge(cfg: RunConfig) -> Result:
    p = cfg.parameters
    g = koenigs.GaugeFunction(_beta(p), p["gamma"])
    rows = [{"t": float(t), "h": g(t), "log_h": g.log_value(t)} for t in p["t"]]
    scal = {"mu": g.mu, "gamma": g.gamma, "t_max": g.t_max}
    if p.get("tower_k") is not None:
        lam = g.mu * math.exp(-g.mu)
        x0 = p["x0"] if p.get("x0") is not None else 2.0 * g.mu
        tv = koenigs.tower_gauge(lam, g.gamma, p["tower_k"], x0)
        scal.update({"tower_level": tv.level, "tower_base": tv.base, "tower_log_value": tv.log_value})
    return Result(scal, rows)


def cmd_equivalence(cfg: RunConfig) -> Result:
    p = cfg.parameters
    ts = np.geomspace(p["tmin"], p["tmax"], p["points"])
    st = koenigs.equivalence_probe(p["mu1"], p["gamma1"], p["mu2"], p["gamma2"], ts, tail=p["tail"])
    rows = [
        {"t": float(t), "log_ratio": lr, "count_gap": cg}
        for t, lr, cg in zip(ts, st.log_ratios, st.count_gaps)
    ]
    return Result({
        "ratio_min": st.ratio_min,
        "ratio_max": st.ratio_max,
        "log_spread": st.log_spread,
        "drift_slope": st.drift_slope,
        "max_count_gap": st.max_count_gap,
    }, rows)


def cmd_pack(cfg: RunConfig) -> Result:
    p = cfg.parameters
    strip = dynamics.StripSpec(p["delta"])
    bound = geometry.packing_bound(p["delta"], p["delta_prime"])
    if p.get("trials"):
        inst = geometry.compliant_instances(p["trials"], cfg.seed)
    else:
        host = geometry.Box(complex(p["center_re"], p["center_im"]), p["side"], p["angle"])
        inst = [(host, p["r"])]
    rows = []
    for i, (host, r) in enumerate(inst):
        eps = r * p["margin_ratio"]
        pk = geometry.build_packing(host, strip, r, grid_margin=eps, c=p.get("c"))
        rows.append({
            "trial": i,
            "center_re": host.center.real,
            "center_im": host.center.imag,
            "side": host.side,
            "angle": host.angle,
            "r": r,
            "count": pk.count,
            "density": pk.density,
            "density_in_strip": pk.density_in_strip,
            "bound": bound,
            "ok": pk.density > bound,
        })
    return Result({
        "instances": len(rows),
        "min_density": min(r["density"] for r in rows),
        "bound": bound,
        "all_ok": all(r["ok"] for r in rows),
    }, rows)


def cmd_distortion(cfg: RunConfig) -> Result:
    p = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    n = p["samples"]
    rad = p["radius"] * np.sqrt(rng.random(n))
    z = rad * np.exp(2j * np.pi * rng.random(n))
    est = geometry.empirical_distortion(np.stack([z, np.exp(z)], axis=1), max_pairs=p["pairs"], seed=cfg.seed)
    single = geometry.distortion_bound_single(p["K"])
    return Result({
        "K": p["K"],
        "radius": p["radius"],
        "bound_single": single,
        "bound_composite": geometry.distortion_bound_composite(p["K"]),
        "c_f": est.c_f,
        "C_f": est.C_f,
        "D": est.D,
        "sample_pairs": est.sample_pairs,
        "within_bound": est.D <= single,
    })


def _family(cfg: RunConfig) -> nested.NestedFamily:
    p = cfg.parameters
    m = _expmap(p)
    strip = dynamics.StripSpec(p["delta"], m.arg_lambda)
    seed_box = geometry.Box(complex(p["seed_re"], p["seed_im"]), p["r"])
    return nested.construct(m, strip, seed_box, p["r"], p["depth"], threads=cfg.threads)


def cmd_nested(cfg: RunConfig) -> Result:
    nf = _family(cfg)
    rep = nested.verify_nesting(nf, density_samples=cfg.parameters["density_samples"], seed=cfg.seed)
    scal = {
        "cells_per_level": [nf.n_cells(k) for k in range(nf.depth + 1)],
        "containment_violations": rep.containment_violations,
        "diameter_violations": rep.diameter_violations,
        "measured_diameters": list(rep.measured_diameters),
        "d": list(rep.d),
        "sampled_density_min": list(rep.sampled_density_min),
        "sampled_density_mean": list(rep.sampled_density_mean),
        "delta_certificate": list(rep.delta_certificate),
        "escaping": rep.escaping,
        "non_escaping": rep.non_escaping,
        "ok": rep.ok,
    }
    return Result(scal, text="\n".join(nf.export_lines()) + "\n")


def cmd_frostman(cfg: RunConfig) -> Result:
    nf = _family(cfg)
    fm = nested.frostman_mass(nf)
    rows = []
    for k in range(nf.depth + 1):
        for a, tau in zip(nf.addresses(k), fm.levels[k]):
            rows.append({"level": k, "address": ".".join(map(str, a)) if a else "-", "mass": float(tau)})
    scal = {
        "totals": [fm.total(k) for k in range(nf.depth + 1)],
        "conservation_residual": fm.conservation_residual(),
    }
    if cfg.parameters.get("gamma") is not None:
        g = koenigs.GaugeFunction(nf.map.beta, cfg.parameters["gamma"])
        sc = nested.mass_ratio_scan(nf, fm, g, probes=cfg.parameters["probes"], seed=cfg.seed)
        scal.update({"max_ratio": sc.max_ratio, "argmax_point": sc.argmax_point, "argmax_radius": sc.argmax_radius})
    return Result(scal, rows)


def cmd_product(cfg: RunConfig) -> Result:
    p = cfg.parameters
    m = _expmap(p)
    m._require_real()
    logp = nested.divergence_product(m.lam, p["gamma"], p["eps"], p["kmax"])
    slope = nested.divergence_slope(m.beta, p["gamma"], p["eps"])
    rows = [{"k": k, "log_P": float(v)} for k, v in enumerate(logp)]
    return Result({
        "beta": m.beta,
        "slope": slope,
        "breakpoint_gamma": nested.breakpoint_gamma(m.beta, p["eps"]),
        "sign": int(np.sign(slope)),
    }, rows)


def cmd_probe(cfg: RunConfig) -> Result:
    p = cfg.parameters
    m = _expmap(p)
    if p.get("mu0") is not None:
        lam0 = p["mu0"] * math.exp(-p["mu0"])
    elif p.get("lambda0") is not None:
        lam0 = p["lambda0"]
    else:
        lam0 = m.lam
    region = geometry.Box(complex(p["region_re"], p["region_im"]), p["region_side"])
    reps = measure.dichotomy_probe(
        m, lam0, p["gamma"], region, levels=p["levels"], resolution=p.get("resolution"),
        factor=p["factor"], max_steps=p["max_steps"], sample_mode=p["sample_mode"],
        escape_re=p.get("escape_re"), threads=cfg.threads,
    )
    scal = {
        "reports": [
            {"gamma": r.gamma, "slope": r.slope, "trend": r.trend.value, "tail": r.tail,
             "counts": list(r.counts), "gauged_sums": list(r.gauged_sums), "resolutions": list(r.resolutions)}
            for r in reps
        ]
    }
    text = "".join(f"# gamma={r.gamma!r}\n" + r.to_csv() for r in reps)
    return Result(scal, text=text)


HANDLERS: dict[str, Callable[[RunConfig], Result]] = {
    "fixpoint": cmd_fixpoint,
    "koenigs": cmd_koenigs,
    "gauge": cmd_gauge,
    "equivalence": cmd_equivalence,
    "pack": cmd_pack,
    "distortion": cmd_distortion,
    "nested": cmd_nested,
    "frostman": cmd_frostman,
    "product": cmd_product,
    "probe": cmd_probe,
}


def render(cfg: RunConfig, res: Result) -> str:
    if cfg.output_format == "json":
        doc = {"config": cfg.echo(), "result": _num(res.scalars)}
        if res.rows is not None:
            doc["rows"] = _num(res.rows)
        return json.dumps(doc, sort_keys=False) + "\n"
    head = "# config " + json.dumps(cfg.echo(), sort_keys=False) + "\n"
    if res.text is not None:
        return head + res.text
    if res.rows is not None:
        return head + _csv(res.rows)
    return head + _csv([res.scalars])


def run(config: RunConfig, out=None, err=None) -> int:
    """Execute one command, writing data to ``out`` and diagnostics to ``err``."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    if config.command not in HANDLERS:
        err.write(f"unknown command {config.command!r}\n")
        return EXIT_USAGE
    try:
        res = HANDLERS[config.command](config)
    except BudgetError as e:
        err.write(f"budget error: {e}\n")
        return EXIT_BUDGET
    except (GaugeDynError, ValueError) as e:
        err.write(f"domain error: {e}\n")
        return EXIT_DOMAIN
    out.write(render(config, res))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_map(sp, default_mu=2.0):
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--mu", type=float, default=None,
                   help=f"multiplier; sets lambda = mu*exp(-mu) exactly (default {default_mu})")
    g.add_argument("--lambda", dest="lam", type=float, default=None, help="parameter lambda in (0, 1/e)")


def _add_family(sp):
    _add_map(sp)
    sp.add_argument("--delta", type=float, default=0.05, help="strip margin")
    sp.add_argument("--r", type=float, default=0.2, help="box side")
    sp.add_argument("--seed-re", type=float, default=3.1, help="real part of the seed box centre")
    sp.add_argument("--seed-im", type=float, default=0.0, help="imaginary part of the seed box centre")
    sp.add_argument("--depth", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gaugedyn", description="Exponential-family dynamics and gauge-function measure probes.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="output_format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0, help="RNG seed for sampled quantities")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: GAUGEDYN_THREADS or CPU count); output does not depend on it")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("fixpoint", parents=[common],
                        help="real fixed points alpha < 1 < beta of lambda*exp(z)")
    _add_map(sp)

    sp = sub.add_parser("koenigs", parents=[common],
                        help="Koenigs linearizer: phi(mu(e^x - 1)) = mu*phi(x), phi(0) = 0, phi'(0) = 1")
    _add_map(sp)
    sp.add_argument("--x", type=float, nargs="+", required=True)
    sp.add_argument("--coordinate", choices=("tilde", "lambda"), default="tilde",
                    help="tilde: phi_tilde(x); lambda: Phi_lambda(x) = phi_tilde(x - beta)")
    sp.add_argument("--tol", type=float, default=1e-12)

    sp = sub.add_parser("gauge", parents=[common], help="gauge h(t) = t^2 Phi(1/t)^gamma and its tower form")
    _add_map(sp)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--t", type=float, nargs="+", required=True)
    sp.add_argument("--tower-k", type=int, default=None, help="also report log (beta^k Phi(x0))^gamma")
    sp.add_argument("--x0", type=float, default=None, help="tower foot (default 2*beta)")

    sp = sub.add_parser("equivalence", parents=[common],
                        help="ratio of two gauges with mu1^gamma1 = mu2^gamma2 over a log grid")
    sp.add_argument("--mu1", type=float, default=2.0)
    sp.add_argument("--gamma1", type=float, default=1.0)
    sp.add_argument("--mu2", type=float, default=4.0)
    sp.add_argument("--gamma2", type=float, default=0.5)
    sp.add_argument("--tmin", type=float, default=1e-60)
    sp.add_argument("--tmax", type=float, default=1e-3)
    sp.add_argument("--points", type=int, default=200)
    sp.add_argument("--tail", type=int, default=100)

    sp = sub.add_parser("pack", parents=[common],
                        help="grid r-packing of a square intersected with the Julia strips; density bound 1/2 - delta/pi - delta'")
    sp.add_argument("--delta", type=float, default=0.3)
    sp.add_argument("--delta-prime", type=float, default=0.05)
    sp.add_argument("--r", type=float, default=0.1)
    sp.add_argument("--margin-ratio", type=float, default=1.0 / 64.0, help="grid slack as a fraction of r")
    sp.add_argument("--side", type=float, default=64.0)
    sp.add_argument("--center-re", type=float, default=0.0)
    sp.add_argument("--center-im", type=float, default=0.0)
    sp.add_argument("--angle", type=float, default=0.0)
    sp.add_argument("--c", type=float, default=None, help="required host side over r (default 64*max(1, 1/r))")
    sp.add_argument("--trials", type=int, default=None, help="random compliant hosts drawn with --seed")

    sp = sub.add_parser("distortion", parents=[common],
                        help="Koebe distortion bound ((K+1)/(K-3))^6 against exp sampled on a disc")
    sp.add_argument("--K", type=float, default=10.0)
    sp.add_argument("--radius", type=float, default=0.3)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--pairs", type=int, default=10000)

    sp = sub.add_parser("nested", parents=[common],
                        help="nested family of strip-packing preimages; JSON certificate report or CSV tree export")
    _add_family(sp)
    sp.add_argument("--density-samples", type=int, default=1024)

    sp = sub.add_parser("frostman", parents=[common],
                        help="mass distribution down the nested family and its ball-to-gauge ratios")
    _add_family(sp)
    sp.add_argument("--gamma", type=float, default=None, help="gauge exponent for the mass ratio scan")
    sp.add_argument("--probes", type=int, default=32)

    sp = sub.add_parser("product", parents=[common],
                        help="log of g(d_k) * prod Delta_j; its slope changes sign near gamma = log 2 / log beta")
    _add_map(sp)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--kmax", type=int, default=50)

    sp = sub.add_parser("probe", parents=[common],
                        help="gauged box counts of non-Fatou squares under refinement, with a trend per gamma")
    _add_map(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--mu0", type=float, default=None, help="gauge parameter as a multiplier (default: the map's)")
    g.add_argument("--lambda0", type=float, default=None, help="gauge parameter lambda0")
    sp.add_argument("--gamma", type=float, nargs="+", required=True)
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--factor", type=int, default=2)
    sp.add_argument("--max-steps", type=int, default=200)
    sp.add_argument("--sample-mode", choices=measure.SAMPLE_MODES, default="five")
    sp.add_argument("--escape-re", type=float, default=None)
    sp.add_argument("--resolution", type=float, default=None, help="first grid step (default: coarsest in the gauge domain)")
    sp.add_argument("--region-re", type=float, default=2.0)
    sp.add_argument("--region-im", type=float, default=0.0)
    sp.add_argument("--region-side", type=float, default=4.0)
    return ap


def parse_config(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    cmd = ns.pop("command")
    fmt = ns.pop("output_format")
    seed = ns.pop("seed")
    threads = ns.pop("threads")
    return RunConfig(cmd, ns, fmt, seed, threads)


def main(argv=None) -> int:
    cfg = parse_config(argv)
    return run(cfg)


def run_to_string(argv) -> tuple[int, str, str]:
    """Run with captured streams; returns ``(status, stdout, stderr)``."""
    out, err = io.StringIO(), io.StringIO()
    try:
        cfg = parse_config(argv)
    except SystemExit as e:
        return int(e.code or 0), "", ""
    code = run(cfg, out, err)
    return code, out.getvalue(), err.getvalue()
