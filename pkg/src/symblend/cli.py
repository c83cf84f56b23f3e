"""Experiment runner.

Usage: symblend [--config PATH] [--out DIR] [--seed U64] [--threads N]
                SUBCOMMAND [args] [--key=value ...]

Overrides are ``--key=value`` or ``--key value``; ``key`` is either
``section.key`` or a bare key looked up in the subcommand's section first and
then in the shared sections.  Every subcommand writes CSV/JSON under --out
and appends a record to manifest.json.  Errors are reported as one JSON line
on stderr; exit codes are 2 for a certificate mismatch, 3 for an infeasible
regime and 1 otherwise.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import time
from decimal import Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RegimeInfeasible

EXIT_MISMATCH = 2
EXIT_INFEASIBLE = 3

DEFAULTS = {
    "maps": {"kind": "twist", "beta": "golden", "tau": "1", "mu3": "0.05",
             "btilde": "0.3, 0.1", "eps": "", "N_target": "1000000"},
    "regime": {"chi": "0.05", "kappa": "0.005", "window_factor": "20", "eps0": "0.01",
               "q_max": "100000"},
    "r3bp": {"mu": "0.3", "zeta": "0.001", "G0": "2", "eps_model": "", "N_target": "10000000",
             "snap_depth": "2"},
    "cf": {"depth": "12"},
    "covering": {"grid_res": "201", "shrink": "0"},
    "manifolds": {"span": "1"},
    "cs-search": {"trials": "10", "length": "0.1"},
    "double-blender": {"perturbation": "0.001"},
    "transitivity": {"pairs": "10", "radius": "0.02", "oracle_cells": "0",
                     "oracle_max_len": "200"},
    "skew": {"delta": "0.001", "kernel_scale": "eps", "W": "8", "N": "2", "trials": "5",
             "radius": "0.02", "depths": "1,2,3,4,5,6", "lengths": "2,4,8,16"},
    "r3bp-integrate": {"x": "0.6", "y": "0.1", "beta": "0.3", "G": "1.5", "t_end": "1000",
                       "tol": "1e-11", "zeta": "0", "samples": "1001"},
    "r3bp-gap": {"G0_list": "3,4,5,6,7,8,9,10", "q_max": "1000"},
    "r3bp-drift": {"eps": "1e-6", "G_start": "10", "delta_G": "0.01", "budget": "1000000000",
                   "zeta": "0", "window": "100"},
    "sweep": {"experiment": "covering", "values": ""},
}
SHARED = ("regime", "maps", "r3bp", "skew")
SECTION_OF = {"skew-check": "skew", "skew-transitivity": "skew"}


# --------------------------------------------------------------------------
# configuration

class Config:
    """Sectioned string settings with exact-decimal numeric reading."""

    def __init__(self, path=None):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_dict(DEFAULTS)
        if path:
            with open(path) as fh:
                cp.read_file(fh)
        self.cp = cp

    def override(self, key: str, value: str, command: str):
        if "." in key:
            sec, k = key.split(".", 1)
        else:
            k = key.replace("-", "_")
            own = SECTION_OF.get(command, command)
            cands = [own] + [s for s in SHARED if s != own]
            sec = next((s for s in cands if self.cp.has_section(s) and self.cp.has_option(s, k)),
                       own)
        if not self.cp.has_section(sec):
            self.cp.add_section(sec)
        self.cp.set(sec, k, value)

    def str(self, sec, key) -> str:
        return self.cp.get(sec, key).strip()

    def num(self, sec, key) -> float:
        return float(Decimal(self.str(sec, key)))

    def int(self, sec, key) -> int:
        return int(Decimal(self.str(sec, key)))

    def ints(self, sec, key) -> list[int]:
        return [int(Decimal(v)) for v in self.str(sec, key).split(",") if v.strip()]

    def nums(self, sec, key) -> list[float]:
        return [float(Decimal(v)) for v in self.str(sec, key).split(",") if v.strip()]

    def snapshot(self) -> dict:
        return {s: dict(self.cp.items(s)) for s in self.cp.sections()}

    def section(self, sec) -> dict:
        return dict(self.cp.items(sec)) if self.cp.has_section(sec) else {}


def _rotation(text: str):
    from .arithmetic import RotationNumber
    if text == "golden":
        return RotationNumber.golden()
    if text.startswith("q:"):
        return RotationNumber.from_quotients([int(v) for v in text[2:].split(",")])
    return RotationNumber.from_value(text)


def build_maps(cfg: Config):
    """(t0, t1, parameter dict) from the [maps] (and [r3bp]) sections."""
    from .twist_maps import T0Spec, T1Spec, make_t0, make_t1
    kind = cfg.str("maps", "kind")
    if kind == "r3bp":
        from .r3bp import ifs_instantiation
        em = cfg.str("r3bp", "eps_model")
        inst = ifs_instantiation(cfg.num("r3bp", "mu"), cfg.num("r3bp", "zeta"),
                                 cfg.num("r3bp", "G0"), float(Decimal(em)) if em else None,
                                 chi=cfg.num("regime", "chi"),
                                 N_target=cfg.int("r3bp", "N_target"),
                                 snap_depth=cfg.int("r3bp", "snap_depth"))
        params = {"kind": "r3bp", "mu": inst.mu, "zeta": inst.zeta, "G0": inst.G0,
                  "eps": inst.eps_model, "tau": inst.info["tau"]}
        return inst.t0, inst.t1, params
    if kind != "twist":
        raise ValueError(f"unknown maps.kind {kind!r}")
    tau = cfg.num("maps", "tau")
    chi = cfg.num("regime", "chi")
    e = cfg.str("maps", "eps")
    eps = float(Decimal(e)) if e else chi * chi / (cfg.num("maps", "N_target") * tau) * (1 + 1e-9)
    t0 = make_t0(T0Spec(_rotation(cfg.str("maps", "beta")), tau, mu3=cfg.num("maps", "mu3")))
    t1 = make_t1(T1Spec(eps, tuple(cfg.nums("maps", "btilde"))))
    params = {"kind": "twist", "beta": t0.beta.value, "tau": tau, "mu3": t0.mu3, "eps": eps}
    return t0, t1, params


def build_regime(cfg: Config, t0=None, t1=None):
    from .normal_form import select_regime
    if t0 is None:
        t0, t1, _ = build_maps(cfg)
    return select_regime(cfg.num("regime", "chi"), cfg.num("regime", "kappa"), t0, t1,
                         window_factor=cfg.num("regime", "window_factor"),
                         eps0=cfg.num("regime", "eps0"), q_max=cfg.int("regime", "q_max"))


# --------------------------------------------------------------------------
# outputs

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


class Output:
    def __init__(self, out: Path, cfg: Config, seed: int, threads: int):
        self.out = out
        self.cfg = cfg
        self.seed = seed
        self.threads = threads
        out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, params: dict, header: list, rows):
        """CSV with the parameter tuple repeated on every row."""
        path = self.out / name
        keys = list(params)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys + list(header))
            lead = [_fmt(params[k]) for k in keys]
            for r in rows:
                w.writerow(lead + [_fmt(v) for v in r])
        self.files.append(name)
        return path

    def json(self, name: str, obj):
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n")
        self.files.append(name)
        return path

    def manifest(self, command: str, argv: list, results: dict, wall: float):
        path = self.out / "manifest.json"
        doc = json.loads(path.read_text()) if path.exists() else {"runs": []}
        doc["artifact_version"] = __version__
        doc["runs"].append({"command": command, "argv": argv, "seed": self.seed,
                            "threads": self.threads, "config": self.cfg.snapshot(),
                            "wall_time": wall, "outputs": self.files, "results": results})
        path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# --------------------------------------------------------------------------
# subcommands

def cmd_cf(cfg, out, rng, args):
    from .arithmetic import continued_fraction, convergents, diophantine_constant
    t0, _, params = build_maps(cfg)
    depth = cfg.int("cf", "depth")
    q = continued_fraction(t0.beta, depth)
    conv = convergents(q)
    out.csv("cf.csv", params, ["index", "quotient", "p", "q"],
            [(i + 1, a, p, qq) for i, (a, (p, qq)) in enumerate(zip(q, conv))])
    alpha = diophantine_constant(t0.beta, cfg.int("regime", "q_max"))
    return {"quotients": q, "alpha_hat": alpha}


def cmd_regime(cfg, out, rng, args):
    reg = build_regime(cfg)
    s = reg.summary()
    out.json("regime.json", s)
    out.csv("calN.csv", {"chi": reg.chi, "kappa": reg.kappa, "eps": reg.eps, "tau": reg.tau},
            ["n", "theta", "b", "working"],
            [(int(n), th, b, bool(i in set(reg.work.tolist())))
             for i, (n, th, b) in enumerate(zip(reg.calN, reg.theta, reg.b))])
    return s


def _regime_params(reg):
    return {"chi": reg.chi, "kappa": reg.kappa, "eps": reg.eps, "tau": reg.tau, "N": reg.N}


def cmd_covering(cfg, out, rng, args):
    from .blender import covering_check
    reg = build_regime(cfg)
    res = covering_check(reg, grid_res=cfg.int("covering", "grid_res"),
                         shrink=cfg.num("covering", "shrink"))
    out.csv("covering.csv", _regime_params(reg),
            ["grid_res", "shrink", "covered", "a_estimate", "min_margin", "family_size"],
            [(res.grid_res, cfg.num("covering", "shrink"), res.covered, res.a_estimate,
              res.min_margin, len(res.family))])
    return {"covered": res.covered, "a_estimate": res.a_estimate, "min_margin": res.min_margin}


def cmd_fixed_points(cfg, out, rng, args):
    from .blender import blender_indices, find_fixed_point
    reg = build_regime(cfg)
    rows = []
    for n in blender_indices(reg):
        p = find_fixed_point(reg, n=n)
        rows.append((p.n_index, reg.b_of(p.n_index), p.fixed_point[0], p.fixed_point[1],
                     p.eigenvalues[0], p.eigenvalues[1]))
    out.csv("fixed_points.csv", _regime_params(reg),
            ["n", "b_n", "xi", "eta", "lambda_s", "lambda_u"], rows)
    return {"fixed_points": [r[:4] for r in rows]}


def cmd_manifolds(cfg, out, rng, args):
    from .blender import blender_indices, find_fixed_point, graph_transform_manifold
    reg = build_regime(cfg)
    rows, summary = [], []
    for n in blender_indices(reg):
        p = find_fixed_point(reg, n=n)
        for kind in ("unstable", "stable"):
            g = graph_transform_manifold(p, kind, span=cfg.num("manifolds", "span"))
            for a, b in zip(g.grid, g.values):
                rows.append((p.n_index, kind, a, b))
            lg = p.log[kind]
            summary.append({"n": p.n_index, "kind": kind, "iterations": lg["iterations"],
                            "max_ratio": lg["max_ratio"], "bound": lg["bound"],
                            "lipschitz": g.lipschitz})
    out.csv("manifolds.csv", _regime_params(reg), ["n", "kind", "grid", "value"], rows)
    return {"graphs": summary}


def _double(cfg, reg):
    from .blender import build_double_blender
    return build_double_blender(reg)


def cmd_cs_search(cfg, out, rng, args):
    from .blender import GraphCurve, cs_blender_search
    reg = build_regime(cfg)
    db = _double(cfg, reg)
    L = cfg.num("cs-search", "length")
    rows = []
    for i in range(cfg.int("cs-search", "trials")):
        x0 = rng.uniform(-1.0, 1.0 - L)
        y0 = rng.uniform(-0.9, 0.9)
        c = GraphCurve.constant("s", x0, x0 + L, y0)
        res = cs_blender_search(c, reg, db.cs)
        rows.append((i, x0, y0, L, len(res.word), res.witness[0], res.witness[1],
                     res.witness_start[0], res.witness_start[1]))
    out.csv("cs_search.csv", _regime_params(reg),
            ["trial", "xi0", "eta0", "length", "word_length", "witness_xi", "witness_eta",
             "start_xi", "start_eta"], rows)
    return {"trials": len(rows), "max_word": max(r[4] for r in rows) if rows else 0}


def cmd_double_blender(cfg, out, rng, args):
    from .blender import reversibility_residual
    rows = []
    rel = cfg.num("double-blender", "perturbation")
    base = None
    for label, f_mu3, f_eps in (("base", 1.0, 1.0), ("mu3+", 1 + rel, 1.0),
                                ("eps+", 1.0, 1 + rel), ("both-", 1 - rel, 1 - rel)):
        sub = Config()
        sub.cp.read_dict(cfg.snapshot())
        t0, t1, params = build_maps(sub)
        if label != "base":
            if params["kind"] == "twist":
                sub.cp.set("maps", "mu3", repr(params["mu3"] * f_mu3))
                sub.cp.set("maps", "eps", repr(params["eps"] * f_eps))
            else:
                sub.cp.set("r3bp", "eps_model", repr(params["eps"] * f_eps))
            t0, t1, params = build_maps(sub)
        reg = build_regime(sub, t0, t1)
        db = _double(sub, reg)
        if base is None:
            base = (reg, db)
        rows.append((label, params.get("mu3", 0.0), params["eps"], db.angle, db.slope,
                     db.witness.phi, db.witness.J))
    reg, db = base
    resid = reversibility_residual(reg, int(reg.working_family()[0]))
    out.csv("double_blender.csv", {"chi": reg.chi, "kappa": reg.kappa, "tau": reg.tau},
            ["case", "mu3", "eps", "angle_deg", "slope", "witness_phi", "witness_J"], rows)
    return {"angle": db.angle, "slope": db.slope, "min_angle": min(r[3] for r in rows),
            "reversibility_residual": resid}


def _cert_doc(kind, cfg, cert_json):
    return {"kind": kind, "artifact_version": __version__,
            "maps": cfg.section("maps"), "r3bp": cfg.section("r3bp"),
            "regime": cfg.section("regime"), "skew": cfg.section("skew"),
            "certificate": cert_json}


def cmd_transitivity(cfg, out, rng, args):
    from .blender import Transitivity, random_balls, reachability_oracle
    from .errors import SymblendError
    reg = build_regime(cfg)
    tr = Transitivity(reg, double=_double(cfg, reg))
    radius = cfg.num("transitivity", "radius")
    cells = cfg.int("transitivity", "oracle_cells")
    oracle = reachability_oracle(reg, (cells, cells), cfg.int("transitivity", "oracle_max_len"),
                                 r_band=tr.r_band) if cells else None
    rows, ok = [], 0
    for i in range(cfg.int("transitivity", "pairs")):
        B1, B2 = random_balls(rng, 2, radius, tr.r_band)
        try:
            cert = tr.search(B1, B2)
        except SymblendError as e:
            rows.append((i, *B1.center, *B2.center, False, 0, "", type(e).__name__))
            continue
        ok += 1
        reach = oracle.reachable(cert.start, cert.end) if oracle else ""
        out.json(f"certificates/transitivity_{i:04d}.json",
                 _cert_doc("transitivity", cfg, cert.to_json()))
        rows.append((i, *B1.center, *B2.center, True, cert.length, reach, ""))
    out.csv("transitivity.csv", {**_regime_params(reg), "radius": radius, "r_band": tr.r_band},
            ["pair", "u1", "v1", "u2", "v2", "success", "word_length", "oracle_reachable",
             "error"], rows)
    return {"pairs": len(rows), "successes": ok}


def _skew_system(cfg, reg):
    from .skew_product import make_skew
    ks = cfg.str("skew", "kernel_scale")
    scale = reg.eps if ks == "eps" else float(Decimal(ks))
    return make_skew(reg.t0, reg.t1, cfg.num("skew", "delta"), kernel_scale=scale)


def cmd_skew_check(cfg, out, rng, args):
    from .skew_product import SymbolWindow, make_skew, window_sensitivity
    t0, t1, _ = build_maps(cfg)
    delta = cfg.num("skew", "delta")
    sys_ = make_skew(t0, t1, delta)
    depths = cfg.ints("skew", "depths")
    W = max(depths) + 2 + max(cfg.ints("skew", "lengths")) + sys_.depth
    w = SymbolWindow.random(rng, W)
    rows = []
    for d in depths:
        c0, c1 = window_sensitivity(sys_, w, w.flipped(d + 1), 1)
        rows.append(("depth", d, 1, c0, c1))
    vals = [r[3] for r in rows]
    slope = float(np.polyfit(depths, np.log(vals), 1)[0])
    d_fix = 2
    for n in cfg.ints("skew", "lengths"):
        c0, c1 = window_sensitivity(sys_, w, w.flipped(n + d_fix + 1), n)
        rows.append(("length", d_fix, n, c0, c1))
    out.csv("skew_check.csv", {"delta": delta, "depth_K": sys_.depth},
            ["sweep", "agreement_depth", "n", "c0_diff", "c1_diff"], rows)
    return {"slope": slope, "log_delta": math.log(delta) if delta > 0 else -math.inf}


def cmd_skew_transitivity(cfg, out, rng, args):
    from .blender import random_balls
    from .errors import SymblendError
    from .skew_product import SkewTransitivity, SymbolWindow, skew_context
    reg = build_regime(cfg)
    sys_ = _skew_system(cfg, reg)
    ctx = skew_context(sys_, reg)
    st = SkewTransitivity(sys_, ctx)
    W, N = cfg.int("skew", "W"), cfg.int("skew", "N")
    radius = cfg.num("skew", "radius")
    rows, ok = [], 0
    for i in range(cfg.int("skew", "trials")):
        wa, wb = SymbolWindow.random(rng, W), SymbolWindow.random(rng, W)
        ba, bb = random_balls(rng, 2, radius, ctx.r_band)
        try:
            cert = st.search(wa, ba, wb, bb, N)
        except SymblendError as e:
            rows.append((i, False, 0, type(e).__name__))
            continue
        ok += 1
        out.json(f"certificates/skew_{i:04d}.json", _cert_doc("skew", cfg, cert.to_json()))
        rows.append((i, True, cert.M, ""))
    out.csv("skew_transitivity.csv", {**_regime_params(reg), "delta": sys_.delta, "N": N},
            ["trial", "success", "M", "error"], rows)
    return {"trials": len(rows), "successes": ok}


def cmd_r3bp_integrate(cfg, out, rng, args):
    from .r3bp import McGeheeState, integrate, jacobi
    s = "r3bp-integrate"
    mu, zeta, tol = cfg.num("r3bp", "mu"), cfg.num(s, "zeta"), cfg.num(s, "tol")
    st = McGeheeState(cfg.num(s, "x"), cfg.num(s, "y"), cfg.num(s, "beta"), cfg.num(s, "G"))
    T = cfg.num(s, "t_end")
    tr = integrate(st, (0.0, T), tol, mu, zeta)
    ts = np.linspace(0.0, T, cfg.int(s, "samples"))
    Z = np.array([tr(t) for t in ts])
    out.csv("trajectory.csv", {"mu": mu, "zeta": zeta, "tol": tol},
            ["t", "x", "y", "beta", "G"], np.column_stack([ts, Z]))
    res = {"steps": len(tr.t), "final": tr.states[-1]}
    if zeta == 0.0:
        J = np.array([jacobi((*tr.states[i], tr.t[i]), mu) for i in range(len(tr.t))])
        res["jacobi_drift"] = float(np.abs(J - J[0]).max())
    return res


def cmd_r3bp_gap(cfg, out, rng, args):
    from .r3bp import b0b1_gap
    mu, zeta = cfg.num("r3bp", "mu"), cfg.num("r3bp", "zeta")
    rows = []
    for G0 in cfg.nums("r3bp-gap", "G0_list"):
        g = b0b1_gap(G0, zeta, mu, q_max=cfg.int("r3bp-gap", "q_max"))
        rows.append((G0, g.log_eps_hat, g.eps_hat, g.tau_hat, g.alpha_hat, g.log_ratio,
                     g.ratio, g.admissible))
    out.csv("gap.csv", {"mu": mu, "zeta": zeta, "mode": "asymptotic"},
            ["G0", "log_eps_hat", "eps_hat", "tau_hat", "alpha_hat", "log_ratio", "ratio",
             "admissible"], rows)
    return {"rows": len(rows)}


def cmd_r3bp_drift(cfg, out, rng, args):
    from .r3bp import drift_orbit, windowed_monotone_fraction
    s = "r3bp-drift"
    mu = cfg.num("r3bp", "mu")
    d = drift_orbit(mu, cfg.num(s, "eps"), cfg.num(s, "G_start"), cfg.num(s, "delta_G"),
                    budget=cfg.int(s, "budget"), zeta=cfg.num(s, "zeta"))
    out.csv("drift.csv", {"mu": mu, "eps": d.kick_amplitude, "mode": d.mode},
            ["kick_index", "phi", "G"], [(int(a), b, c) for a, b, c in d.trace])
    sign = 1.0 if d.delta_G_target >= 0 else -1.0
    return {"success": d.success, "kicks": d.kicks, "evaluations": d.evaluations,
            "delta_G": d.delta_G, "monotone_fraction":
                windowed_monotone_fraction(d.trace[:, 2], cfg.int(s, "window"), sign)}


class Mismatch(Exception):
    pass


def cmd_verify(cfg, out, rng, args):
    doc = json.loads(Path(args.target).read_text())
    sub = Config()
    for sec in ("maps", "r3bp", "regime", "skew"):
        for k, v in doc.get(sec, {}).items():
            sub.cp.set(sec, k, v)
    if doc["kind"] == "transitivity":
        from .blender import Certificate, verify_certificate
        t0, t1, _ = build_maps(sub)
        cert = Certificate.from_json(doc["certificate"])
        ok = verify_certificate(cert, t0, t1)
    elif doc["kind"] == "skew":
        from .skew_product import SkewCertificate, make_skew, verify_skew_certificate
        t0, t1, params = build_maps(sub)
        cert = SkewCertificate.from_json(doc["certificate"])
        sysd = cert.system or {}
        ks = sub.str("skew", "kernel_scale")
        scale = sysd.get("kernel_scale", params["eps"] if ks == "eps" else float(Decimal(ks)))
        sys_ = make_skew(t0, t1, float(sysd.get("delta", sub.num("skew", "delta"))),
                         kernel_scale=float(scale))
        ok = verify_skew_certificate(cert, sys_)
    else:
        raise ValueError(f"unknown certificate kind {doc['kind']!r}")
    if not ok:
        raise Mismatch(f"certificate {args.target} does not re-verify")
    return {"verified": True, "kind": doc["kind"]}


def cmd_sweep(cfg, out, rng, args):
    exp = cfg.str("sweep", "experiment")
    values = [v.strip() for v in cfg.str("sweep", "values").split(",") if v.strip()]
    if not values:
        raise ValueError("sweep needs --values=v1,v2,...")
    func = COMMANDS[exp]
    rows = []
    for v in values:
        sub = Config()
        sub.cp.read_dict(cfg.snapshot())
        sub.override(args.target, v, exp)
        sub_out = Output(out.out / f"sweep_{args.target}_{v}", sub, out.seed, out.threads)
        try:
            res = func(sub, sub_out, np.random.default_rng(out.seed), args)
            rows.append((v, "ok", json.dumps(res, sort_keys=True, default=_json_default)))
        except (RegimeInfeasible, ValueError) as e:
            rows.append((v, type(e).__name__, str(e)))
    out.csv(f"sweep_{args.target}.csv", {"experiment": exp, "param": args.target},
            ["value", "status", "result"], rows)
    return {"values": values}


COMMANDS = {
    "cf": cmd_cf, "regime": cmd_regime, "covering": cmd_covering,
    "fixed-points": cmd_fixed_points, "manifolds": cmd_manifolds, "cs-search": cmd_cs_search,
    "double-blender": cmd_double_blender, "transitivity": cmd_transitivity,
    "skew-check": cmd_skew_check, "skew-transitivity": cmd_skew_transitivity,
    "r3bp-integrate": cmd_r3bp_integrate, "r3bp-gap": cmd_r3bp_gap,
    "r3bp-drift": cmd_r3bp_drift, "verify": cmd_verify, "sweep": cmd_sweep,
}


# --------------------------------------------------------------------------
# entry point

def _parse(argv):
    p = argparse.ArgumentParser(prog="symblend", description="Blender experiments.")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("target", nargs="?", default=None,
                   help="certificate path for 'verify', parameter name for 'sweep'")
    args, extra = p.parse_known_args(argv)
    overrides = []
    i = 0
    while i < len(extra):
        a = extra[i]
        if not a.startswith("--"):
            p.error(f"unexpected argument {a!r}")
        if "=" in a:
            k, v = a[2:].split("=", 1)
        else:
            if i + 1 >= len(extra):
                p.error(f"missing value for {a}")
            k, v = a[2:], extra[i + 1]
            i += 1
        overrides.append((k, v))
        i += 1
    if args.command in ("verify", "sweep") and args.target is None:
        p.error(f"{args.command} needs a target")
    if not 0 <= args.seed < 2 ** 64:
        p.error("seed must be an unsigned 64-bit integer")
    return args, overrides


def _error(code, exc):
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, RegimeInfeasible) and exc.inequality:
        rec["inequality"] = exc.inequality
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args, overrides = _parse(argv)
    try:
        cfg = Config(args.config)
        for k, v in overrides:
            cfg.override(k, v, args.command)
        if args.threads > 1:
            try:
                import numba
                numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
            except (ImportError, ValueError):
                pass
        out = Output(Path(args.out), cfg, args.seed, args.threads)
        rng = np.random.default_rng(args.seed)
        t = time.perf_counter()
        res = COMMANDS[args.command](cfg, out, rng, args)
        out.manifest(args.command, argv, res, time.perf_counter() - t)
    except Mismatch as e:
        return _error(EXIT_MISMATCH, e)
    except RegimeInfeasible as e:
        return _error(EXIT_INFEASIBLE, e)
    except Exception as e:          # noqa: BLE001 - reported as a single record
        if os.environ.get("SYMBLEND_DEBUG"):
            raise
        return _error(1, e)
    sys.stdout.write(json.dumps({"command": args.command, "results": res}, sort_keys=True,
                                default=_json_default) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
