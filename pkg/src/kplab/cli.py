"""Command-line front door: dataset generation, identity/estimate
verification, experiment orchestration, and machine-readable results.

Exit codes: 0 = all tolerances met, 1 = a tolerance failed or a diagnostic
fired (structured cause in the JSON report), 2 = unusable configuration.
Reruns with identical config and seed produce byte-identical CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .data import (gaussian_datum, member_rng, random_band_field,
                   scattering_datum, sector_indicator_datum,
                   two_bump_lattice_datum)
from .decomposition import NormParams, lqlp_norm, sector_masses
from .errors import KplabError
from .estimates import (bilinear_mu_sweep, circle_measure_closed_form,
                        circle_measure_integral, phase_difference_roots,
                        random_measure_config, random_resonance_point,
                        resonance_identity_defect, sector_gamma_sweep,
                        strichartz_ratio)
from .illposedness import growth_sweep
from .reporting import config_hash, json_dumps, write_csv, write_json
from .scattering import asymptotic_state
from .solver import (DEFAULT_PROFILE, SimConfig, evolve, mass_series,
                     picard_iterate, slope_filtered_product, spectral_product,
                     slope_band_extent)
from .spectral import (GridSpec, read_snapshot, trilinear_pairing,
                       write_snapshot)

_VERIFY_CHECKS = ("resonance", "circle-measure", "g-rho", "strichartz",
                  "bilinear", "sector-bilinear", "tl-symmetry",
                  "partition-of-unity")


def _threads(args) -> int:
    if args.threads:
        return args.threads
    return int(os.environ.get("KPLAB_THREADS", "1"))


def _grid_from(cfgdict) -> GridSpec:
    gd = cfgdict.get("grid", {})
    return GridSpec(gd.get("modes_x", 64), gd.get("modes_y1", 32),
                    gd.get("modes_y2", 32),
                    gd.get("length_x", 8 * math.pi),
                    gd.get("length_y1", 8 * math.pi),
                    gd.get("length_y2", 8 * math.pi),
                    gd.get("dealias", True))


def _emit(args, name, payload):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{name}.json")
        write_json(path, payload)
        return path
    sys.stdout.write(json_dumps(payload))
    return None


# ----------------------------------------------------------------------
# make-data
# ----------------------------------------------------------------------

def cmd_make_data(args) -> int:
    grid = _grid_from(json.load(open(args.config)) if args.config else {})
    if args.kind == "gaussian":
        field = gaussian_datum(grid, amplitude=args.amplitude,
                               scale=args.width, center_xi=args.center_xi)
    elif args.kind == "sector":
        k = tuple(int(v) for v in args.k.split(","))
        field = sector_indicator_datum(grid, args.lam, k, args.amplitude)
    elif args.kind == "illposed":
        mu = args.mu
        lam = args.lam
        # dedicated fine-x grid hosting both bumps at resolution mu/4, lam*mu/4
        nx = args.illposed_modes_x
        dxi = mu / 4.0
        deta = lam * mu / 4.0
        grid = GridSpec(nx, 24, 24, 2 * math.pi / dxi,
                        2 * math.pi / deta, 2 * math.pi / deta)
        if (lam + mu) / dxi >= nx // 2 - 1:
            print(f"error: grid of {nx} x-modes cannot host xi up to {lam + mu}",
                  file=sys.stderr)
            return 2
        field = two_bump_lattice_datum(grid, mu, lam, args.p)
    elif args.kind == "random-band":
        rng = member_rng(args.seed, 0)
        field = random_band_field(grid, rng, args.band_lo, args.band_hi,
                                  eta_max=args.eta_max)
    else:
        print(f"error: unknown datum kind {args.kind!r}", file=sys.stderr)
        return 2
    write_snapshot(field, args.file)
    norms = {}
    for q, p in ((math.inf, args.p), (math.inf, 2.0), (2.0, 2.0)):
        label = f"q={'inf' if q == math.inf else q},p={p}"
        norms[label] = lqlp_norm(field, NormParams(q=q, p=p))
    payload = {"file": args.file, "kind": args.kind,
               "grid": {"shape": list(field.grid.shape)},
               "l2_norm": field.l2_norm(), "lqlp_norms": norms}
    _emit(args, "make-data", payload)
    return 0


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------

def _verify_resonance(args):
    rng = member_rng(args.seed, 0)
    worst = 0.0
    n = args.samples
    for _ in range(n):
        worst = max(worst, resonance_identity_defect(random_resonance_point(rng)))
    return worst <= 1e-9, {"samples": n, "max_defect": worst, "tol": 1e-9}


def _verify_circle(args):
    rng = member_rng(args.seed, 0)
    worst = 0.0
    for _ in range(args.configs):
        cfg = random_measure_config(rng)
        val, geo = circle_measure_integral(cfg)
        ref = circle_measure_closed_form(cfg)
        worst = max(worst, abs(val - ref) / ref)
    return worst <= 1e-6, {"configs": args.configs, "max_rel_defect": worst,
                           "tol": 1e-6}


def _verify_grho(args):
    rng = member_rng(args.seed, 0)
    worst_defect = 0.0
    max_roots = 0
    for _ in range(args.configs):
        xi1, xi2 = rng.uniform(-3, 3, 2)
        if abs(xi1 - xi2) < 0.1:
            continue
        rep = phase_difference_roots(xi1, xi2, rng.uniform(-2, 2, 2),
                                     rng.uniform(-2, 2, 2), rng.uniform(-20, 20))
        max_roots = max(max_roots, rep.count)
        if rep.count:
            worst_defect = max(worst_defect, float(np.max(rep.defects)))
    ok = max_roots <= 4 and worst_defect <= 1e-9
    return ok, {"configs": args.configs, "max_roots": max_roots,
                "max_derivative_defect": worst_defect, "tol": 1e-9}


def _verify_strichartz(args):
    grid = GridSpec(64, 32, 32, 8 * math.pi, 8 * math.pi, 8 * math.pi)
    u0 = gaussian_datum(grid, center_xi=1.5, width_xi=0.5, width_eta=0.5)
    from .spectral import scaling_transform
    base = strichartz_ratio(u0, 4, 4, T=4.0)
    rels = []
    for h in (0.5, 2.0):
        uh = scaling_transform(u0, h)
        rels.append(abs(strichartz_ratio(uh, 4, 4, T=4.0 / h ** 3) / base - 1))
    ok = max(rels) <= 0.05
    return ok, {"ratio": base, "dilation_rel_gaps": rels, "tol": 0.05}


def _verify_bilinear(args):
    grid = GridSpec(232, 64, 64, 32 * math.pi, 32 * math.pi, 32 * math.pi)
    mus = [0.25, 0.5, 1.0] if not args.mu_sweep else [0.125, 0.25, 0.5, 1.0]
    rep = bilinear_mu_sweep(mus, args.lam, args.ensemble, T=1.0, grid=grid,
                            seed=args.seed, threads=_threads(args))
    ok = 0.8 <= rep.slope <= 1.2
    return ok, {"mus": list(rep.xs), "values": list(rep.values),
                "slope": rep.slope, "band": [0.8, 1.2]}


def _verify_sector_bilinear(args):
    rep = sector_gamma_sweep([64, 128, 256, 512], mu=0.25, lam=2.0,
                             ensemble_size=args.ensemble, T=4.0, seed=args.seed)
    ok = 0.35 <= rep.slope <= 0.65
    return ok, {"areas": list(rep.xs), "values": list(rep.values),
                "slope": rep.slope, "band": [0.35, 0.65]}


def _verify_tl_symmetry(args):
    grid = GridSpec(16, 16, 16, 32 * math.pi, 4 * math.pi, 4 * math.pi)
    rng = member_rng(args.seed, 0)
    worst = 0.0
    scale = 0.0
    for _ in range(3):
        u = random_band_field(grid, rng, 0.0, 0.4, eta_max=1.5)
        v = random_band_field(grid, rng, 0.0, 0.4, eta_max=1.5)
        w = random_band_field(grid, rng, 0.0, 0.2, eta_max=1.5)
        for L in (1.0, 2.0, 4.0):
            a = trilinear_pairing(u, slope_filtered_product(v, w, L))
            b = trilinear_pairing(v, slope_filtered_product(u, w, L))
            c = trilinear_pairing(w, slope_filtered_product(u, v, L))
            worst = max(worst, abs(a - b), abs(a - c))
            scale = max(scale, abs(a))
    ok = worst <= 1e-10 * max(scale, 1.0)
    return ok, {"max_gap": worst, "scale": scale, "tol": 1e-10}


def _verify_partition(args):
    rng = member_rng(args.seed, 0)
    s = rng.uniform(-4000, 4000, (2, 2048))
    bands = DEFAULT_PROFILE.bands_for_extent(4000.0)
    tot = sum(DEFAULT_PROFILE.band_weight(L, s[0], s[1]) for L in bands)
    worst = float(np.max(np.abs(tot - 1.0)))
    grid = GridSpec(16, 16, 16, 32 * math.pi, 4 * math.pi, 4 * math.pi)
    u = random_band_field(grid, rng, 0.0, 0.4, eta_max=1.5)
    v = random_band_field(grid, rng, 0.0, 0.4, eta_max=1.5)
    acc = None
    for L in DEFAULT_PROFILE.bands_for_extent(slope_band_extent(grid)):
        f = slope_filtered_product(u, v, L)
        acc = f.coeff if acc is None else acc + f.coeff
    prod = spectral_product(u, v)
    gap = float(np.max(np.abs(acc - prod.coeff)))
    ok = worst <= 1e-12 and gap <= 1e-10 * max(float(np.max(np.abs(prod.coeff))), 1e-30)
    return ok, {"pointwise_defect": worst, "telescoping_gap": gap,
                "tols": [1e-12, 1e-10]}


def cmd_verify(args) -> int:
    table = {"resonance": _verify_resonance, "circle-measure": _verify_circle,
             "g-rho": _verify_grho, "strichartz": _verify_strichartz,
             "bilinear": _verify_bilinear, "sector-bilinear": _verify_sector_bilinear,
             "tl-symmetry": _verify_tl_symmetry, "partition-of-unity": _verify_partition}
    if args.check not in table:
        print(f"error: unknown check {args.check!r}; choose from {_VERIFY_CHECKS}",
              file=sys.stderr)
        return 2
    t0 = time.time()
    ok, detail = table[args.check](args)
    payload = {"check": args.check, "passed": bool(ok), "seed": args.seed,
               "wall_clock_s": round(time.time() - t0, 3), **detail}
    _emit(args, f"verify-{args.check}", payload)
    return 0 if ok else 1


# ----------------------------------------------------------------------
# run
# ----------------------------------------------------------------------

def _load_config(args) -> dict:
    if not args.config:
        return {}
    with open(args.config) as fh:
        return json.load(fh)


def _manifest(cfg, seed, t0, extra):
    return {"config": cfg, "config_hash": config_hash(cfg), "seed": seed,
            "versions": {"kplab": __version__, "numpy": np.__version__},
            "wall_clock_s": round(time.time() - t0, 3), **extra}


def cmd_run(args) -> int:
    cfg = _load_config(args)
    t0 = time.time()
    try:
        if args.experiment == "sim":
            grid = _grid_from(cfg)
            u0 = gaussian_datum(grid, amplitude=cfg.get("amplitude", 1e-3),
                                center_xi=cfg.get("center_xi", 1.5))
            sim = SimConfig(grid, cfg.get("dt", 0.01), cfg.get("T", 1.0),
                            cfg.get("samples_per_unit", 8))
            tr = evolve(u0, sim)
            ms = mass_series(tr)
            drift = float(np.max(np.abs(ms - ms[0])) / ms[0])
            payload = _manifest(cfg, args.seed, t0, {
                "times": list(tr.times), "mass_drift": drift,
                "mass_tol": 1e-6, "passed": drift <= 1e-6})
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                for i, s in enumerate(tr.states):
                    write_snapshot(s, os.path.join(args.out, f"state_{i:04d}.kp3f"))
            _emit(args, "run-sim", payload)
            return 0 if drift <= 1e-6 else 1

        if args.experiment == "picard":
            grid = _grid_from(cfg) if "grid" in cfg else GridSpec(
                24, 12, 12, 4 * math.pi, 4 * math.pi, 4 * math.pi)
            npar = NormParams()
            u0 = gaussian_datum(grid, amplitude=1.0, center_xi=1.0,
                                width_xi=0.4, width_eta=0.4)
            from .spectral import SpectralField
            u0 = SpectralField(grid, u0.coeff * (cfg.get("datum_norm", 1e-3)
                                                 / lqlp_norm(u0, npar)), True)
            sim = SimConfig(grid, cfg.get("dt", 1 / 64), cfg.get("T", 1.0),
                            cfg.get("samples_per_unit", 64))
            tr, rep = picard_iterate(u0, sim)
            ok = rep.converged and all(r <= 0.5 for r in rep.ratios)
            payload = _manifest(cfg, args.seed, t0, {
                "iterates": rep.iterates, "diffs": rep.diffs,
                "ratios": rep.ratios, "converged": rep.converged, "passed": ok})
            _emit(args, "run-picard", payload)
            return 0 if ok else 1

        if args.experiment == "scatter":
            grid = _grid_from(cfg) if "grid" in cfg else GridSpec(
                192, 24, 24, 32 * math.pi, 8 * math.pi, 8 * math.pi)
            npar = NormParams()
            rng = member_rng(args.seed, cfg.get("member", 0))
            u0 = scattering_datum(grid, rng, cfg.get("datum_norm", 1e-3), npar)
            sim = SimConfig(grid, cfg.get("dt", 1 / 16), cfg.get("T", 8.0), 1)
            tr = evolve(u0, sim)
            rep = asymptotic_state(tr, npar, strict=False)
            ok = rep.detected
            payload = _manifest(cfg, args.seed, t0, {
                "checkpoints": list(rep.sample_times),
                "cauchy_gaps": list(rep.cauchy_gaps),
                "residuals": list(rep.residuals), "detected": rep.detected,
                "passed": ok})
            if args.out and args.format == "csv":
                write_csv(os.path.join(args.out, "residuals.csv"),
                          ["t", "residual"],
                          list(zip(rep.sample_times, rep.residuals)))
            _emit(args, "run-scatter", payload)
            return 0 if ok else 1

        if args.experiment == "illposed-sweep":
            lams = [float(v) for v in (args.lams or "8,16,32,64").split(",")]
            rep = growth_sweep(lams, args.p)
            ok = abs(rep.slope - rep.predicted) <= 0.3 if args.p != 2.0 \
                else rep.slope <= 0.3
            payload = _manifest(cfg, args.seed, t0, {
                "lams": list(rep.lams), "mus": list(rep.mus),
                "norms": list(rep.norms), "slope": rep.slope,
                "predicted": rep.predicted, "quadrature_gaps": list(rep.gaps),
                "passed": bool(ok)})
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                write_csv(os.path.join(args.out, "growth.csv"),
                          ["lam", "mu", "p", "norm", "fitted_slope"],
                          [(l, m, args.p, n, rep.slope)
                           for l, m, n in zip(rep.lams, rep.mus, rep.norms)])
            _emit(args, "run-illposed-sweep", payload)
            return 0 if ok else 1

        if args.experiment == "norms":
            return cmd_norms(args)

        if args.experiment == "spaces-lab":
            from .function_spaces import (AnalyticDatum, divergent_sequence_check,
                                          sector_sum_decay, zero_mean_blowup)
            d = AnalyticDatum(kind="gaussian")
            tab = sector_sum_decay(d, cfg.get("p", 2.0))
            dich = zero_mean_blowup(d, cfg.get("p", 2.0))
            comb = divergent_sequence_check(
                [2.0 ** -a for a in (2, 4, 8, 16, 32, 40)], cfg.get("comb_p", 3.0))
            payload = _manifest(cfg, args.seed, t0, {
                "decay_lams": list(tab.lams), "decay_values": list(tab.values),
                "low_slope": tab.low_slope,
                "partial_slope": dich.partial_slope, "divergent": dich.divergent,
                "comb_norms": list(comb.norms),
                "comb_pairings": list(comb.pairings),
                "comb_growth_exponent": comb.growth_exponent,
                "passed": True})
            _emit(args, "run-spaces-lab", payload)
            return 0

        print(f"error: unknown experiment {args.experiment!r}", file=sys.stderr)
        return 2
    except KplabError as ex:
        payload = _manifest(cfg, args.seed, t0,
                            {"passed": False, "diagnostic": str(ex),
                             "cause": type(ex).__name__})
        _emit(args, f"run-{args.experiment}", payload)
        return 1


# ----------------------------------------------------------------------
# norms
# ----------------------------------------------------------------------

def cmd_norms(args) -> int:
    field = read_snapshot(args.file)
    npar = NormParams(q=args.q, p=args.p)
    records = [
        {"norm_name": "l2", "params": {}, "value": field.l2_norm()},
        {"norm_name": "lqlp", "params": {"q": args.q, "p": args.p},
         "value": lqlp_norm(field, npar)},
    ]
    payload = {"file": args.file, "records": records}
    if args.out and args.format == "csv":
        os.makedirs(args.out, exist_ok=True)
        masses = sector_masses(field)
        write_csv(os.path.join(args.out, "sector_masses.csv"),
                  ["lam", "k1", "k2", "mass"],
                  [(2.0 ** j, k1, k2, m) for (j, k1, k2), m in masses.items()])
    _emit(args, "norms", payload)
    return 0


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kplab", description=__doc__)
    ap.add_argument("--config", default=None, help="JSON config file")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--threads", type=int, default=0,
                    help="worker threads (default: KPLAB_THREADS or 1)")
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    sub = ap.add_subparsers(dest="verb", required=True)

    mk = sub.add_parser("make-data", help="generate a datum snapshot")
    mk.add_argument("kind", choices=("gaussian", "sector", "illposed", "random-band"))
    mk.add_argument("--file", default="datum.kp3f")
    mk.add_argument("--amplitude", type=float, default=1.0)
    mk.add_argument("--width", type=float, default=1.0)
    mk.add_argument("--center-xi", dest="center_xi", type=float, default=2.0)
    mk.add_argument("--lam", type=float, default=2.0)
    mk.add_argument("--k", default="0,0")
    mk.add_argument("--mu", type=float, default=1 / 64)
    mk.add_argument("--p", type=float, default=3.0)
    mk.add_argument("--band-lo", dest="band_lo", type=float, default=0.0)
    mk.add_argument("--band-hi", dest="band_hi", type=float, default=2.0)
    mk.add_argument("--eta-max", dest="eta_max", type=float, default=2.0)
    mk.add_argument("--illposed-modes-x", dest="illposed_modes_x", type=int,
                    default=8192)
    mk.set_defaults(func=cmd_make_data)

    vf = sub.add_parser("verify", help="run one identity/estimate check")
    vf.add_argument("check", choices=_VERIFY_CHECKS)
    vf.add_argument("--samples", type=int, default=10000)
    vf.add_argument("--configs", type=int, default=100)
    vf.add_argument("--lam", type=float, default=4.0)
    vf.add_argument("--ensemble", type=int, default=4)
    vf.add_argument("--mu-sweep", dest="mu_sweep", action="store_true")
    vf.set_defaults(func=cmd_verify)

    rn = sub.add_parser("run", help="run an experiment")
    rn.add_argument("experiment", choices=("sim", "picard", "scatter",
                                           "illposed-sweep", "norms", "spaces-lab"))
    rn.add_argument("--p", type=float, default=3.0)
    rn.add_argument("--lams", default=None)
    rn.add_argument("--file", default="datum.kp3f")
    rn.add_argument("--q", type=float, default=math.inf)
    rn.set_defaults(func=cmd_run)

    nm = sub.add_parser("norms", help="norm report for a snapshot")
    nm.add_argument("file")
    nm.add_argument("--q", type=float, default=math.inf)
    nm.add_argument("--p", type=float, default=1.5)
    nm.set_defaults(func=cmd_norms)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except KplabError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except FileNotFoundError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
