"""Batch command line interface.

Subcommands: ``simulate | periodic | stability | convergence |
norms-selftest``, driven by an INI config file (flat, sectioned, matrices as
row-major whitespace-separated lists).  Outputs are CSV files with 17
significant digits plus machine-readable JSON run reports.

Exit codes: 0 success; 2 config error; 3 integration diagnostic; 4 no orbit
found; 5 orbit violates a structural requirement; 6 pencil/oracle
disagreement; 7 convergence study collapsed.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from .core import GridFunction, HistoryFunction, ParamError, Segment, validate_params
from .integrator import integrate
from .linearization import LinearizedMaps, gamma_exponent, hit_time_exponent
from .maps import poincare_decay, project_E
from .norms import NormSettings, appendix_probe, fractional_norm, lp_norm
from .periodic import OrbitError, PeriodicOrbit, find_periodic_orbit, verify_orbit
from .spectrum import (SpectrumError, build_pencil, dense_eigenvalues,
                       eigenpair_residual, find_eigenvalues, stability_verdict)

EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_NO_ORBIT = 4
EXIT_ASSUMPTION = 5
EXIT_SPECTRUM = 6
EXIT_CONVERGENCE = 7

FMT = "%.17g"


class ConfigError(Exception):
    pass


def _vector(text, n):
    vals = [float(tok) for tok in text.replace(",", " ").split()]
    if len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {len(vals)}: {text!r}")
    return np.array(vals)


def _matrix(text, n):
    vals = [float(tok) for tok in text.replace(",", " ").split()]
    if len(vals) != n * n:
        raise ConfigError(f"expected {n * n} numbers (row-major), got {len(vals)}")
    return np.array(vals).reshape(n, n)


def load_config(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if "system" not in cp:
        raise ConfigError("config needs a [system] section")
    sect = cp["system"]
    try:
        n = sect.getint("N")
        params = validate_params(
            N=n,
            A=_matrix(sect.get("A"), n),
            B=_matrix(sect.get("B"), n),
            k=_vector(sect.get("k"), n),
            M=_vector(sect.get("M"), n),
            alpha=sect.getfloat("alpha"),
            beta=sect.getfloat("beta"),
            T=sect.getfloat("T"),
            p=sect.getfloat("p", 1.5),
            s=sect.getfloat("s", 0.5),
            sigma=sect.getfloat("sigma", sect.getfloat("T") / 3.0),
        )
    except ParamError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad [system] section: {exc}")
    return cp, params


def _numerics(cp):
    sect = cp["numerics"] if "numerics" in cp else {}
    get = lambda key, dv: float(sect.get(key, dv)) if sect else dv
    return {
        "n": int(get("n", 256)),
        "tol_orbit": get("tol_orbit", 1e-10),
        "tol_transversal": get("tol_transversal", 1e-6),
        "lambda_min": get("lambda_min", 0.05),
        "margin": get("margin", 0.05),
    }


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(FMT % v for v in row) + "\n")


def _write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON-serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# orbit (de)serialization


def _grid_to_json(gf: GridFunction):
    return [{"ts": seg.ts.tolist(), "vals": seg.vals.tolist()}
            for seg in gf.segments]


def _grid_from_json(payload):
    return GridFunction([Segment(np.asarray(seg["ts"]), np.asarray(seg["vals"]))
                         for seg in payload])


def save_orbit(path, orbit: PeriodicOrbit):
    p = orbit.params
    payload = {
        "T": orbit.T,
        "x_alpha": orbit.x_alpha,
        "x_beta": orbit.x_beta,
        "dphi_jump": orbit.dphi_jump,
        "transversality": orbit.transversality,
        "params": {
            "N": p.N, "A": p.A, "B": p.B, "k": p.k, "M": p.M,
            "alpha": p.alpha, "beta": p.beta, "T": p.T, "p": p.p,
            "s": p.s, "sigma": p.sigma,
        },
        "phi_alpha": _grid_to_json(orbit.phi_alpha),
        "phi_beta": _grid_to_json(orbit.phi_beta),
    }
    _write_json(path, payload)


def load_orbit(path) -> PeriodicOrbit:
    with open(path) as fh:
        payload = json.load(fh)
    pp = payload["params"]
    params = validate_params(**pp)
    return PeriodicOrbit(
        params=params,
        x_alpha=np.asarray(payload["x_alpha"]),
        x_beta=np.asarray(payload["x_beta"]),
        T=float(payload["T"]),
        phi_alpha=_grid_from_json(payload["phi_alpha"]),
        phi_beta=_grid_from_json(payload["phi_beta"]),
        dphi_jump=np.asarray(payload["dphi_jump"]),
        transversality=float(payload["transversality"]),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cp, params, out_dir, grid):
    sect = cp["simulate"] if "simulate" in cp else {}
    horizon = float(sect.get("horizon", 0.0)) if sect else 0.0
    if horizon <= 0:
        print("simulate: config needs [simulate] horizon > 0", file=sys.stderr)
        return EXIT_CONFIG
    hist_kind = sect.get("history", "constant")
    if hist_kind == "orbit":
        orbit = find_periodic_orbit(params)
        hist = orbit.hist_alpha
        params = orbit.params
    else:
        value = _vector(sect.get("history_value", "0.0"), params.N) \
            if sect.get("history_value") else np.zeros(params.N)
        hist = HistoryFunction.constant(value, params.delay)
        if sect.get("x0"):
            hist = HistoryFunction(hist.phi, _vector(sect.get("x0"), params.N))
    traj = integrate(params, hist, horizon=horizon, n=grid)
    ts, vals, relay = traj.sample()
    rows = np.column_stack([ts, vals, relay])
    _write_csv(Path(out_dir) / "trajectory.csv",
               ["t"] + [f"u{i + 1}" for i in range(params.N)] + ["relay"], rows)
    _write_csv(Path(out_dir) / "switchings.csv", ["t_switch"],
               [[t] for t in traj.switching_times])
    report = {
        "switching_times": list(traj.switching_times),
        "t_end": traj.t_end,
        "grazing": traj.grazing,
        "accumulation_suspected": traj.accumulation_suspected,
    }
    _write_json(Path(out_dir) / "simulate_report.json", report)
    print(f"simulate: {len(traj.switching_times)} switchings on (0, {horizon:g}]")
    if traj.grazing or traj.accumulation_suspected:
        print("simulate: diagnostic flag raised "
              f"(grazing={traj.grazing}, accumulation={traj.accumulation_suspected})",
              file=sys.stderr)
        return EXIT_INTEGRATION
    return 0


def cmd_periodic(cp, params, out_dir, grid):
    num = _numerics(cp)
    sect = cp["periodic"] if "periodic" in cp else {}
    guess = None
    if sect and sect.get("guess_x") and sect.get("guess_T"):
        guess = (_vector(sect.get("guess_x"), params.N), float(sect.get("guess_T")))
    try:
        orbit = find_periodic_orbit(params, guess=guess, n=grid,
                                    tol_orbit=num["tol_orbit"],
                                    tol_transversal=num["tol_transversal"])
    except OrbitError as exc:
        if exc.report is not None:
            _write_json(Path(out_dir) / "periodic_report.json", {
                "found": True, "ok": False, "failures": exc.report.failures,
            })
            print(f"periodic: orbit found but violates requirements: {exc}",
                  file=sys.stderr)
            return EXIT_ASSUMPTION
        print(f"periodic: no orbit found: {exc}", file=sys.stderr)
        return EXIT_NO_ORBIT
    save_orbit(Path(out_dir) / "orbit.json", orbit)
    rep = orbit.report
    report = {
        "found": True,
        "ok": rep.ok,
        "T": orbit.T,
        "x_alpha": orbit.x_alpha,
        "transversality": orbit.transversality,
        "dphi_jump": orbit.dphi_jump,
        "checklist": {
            "item1_section_residual": rep.section_residual,
            "item2_switch_count_ok": rep.switch_count_ok,
            "item2_placement_residual": rep.switch_placement_residual,
            "item3_antisymmetry_residual": rep.antisymmetry_residual,
            "item4_transversality": rep.transversality,
            "item4_ok": rep.transversality_ok,
            "symmetry_relation_residual": rep.symmetry_relation_residual,
            "periodmap_residual": rep.periodmap_residual,
        },
        "failures": rep.failures,
    }
    _write_json(Path(out_dir) / "periodic_report.json", report)
    print(f"periodic: T = {orbit.T:.12g}, transversality = "
          f"{orbit.transversality:.6g}, checks {'pass' if rep.ok else 'FAIL'}")
    return 0 if rep.ok else EXIT_ASSUMPTION


def cmd_stability(cp, params, out_dir, grid, orbit_path=None):
    num = _numerics(cp)
    sect = cp["stability"] if "stability" in cp else {}
    if orbit_path:
        orbit = load_orbit(orbit_path)
        report = verify_orbit(orbit, n=grid)
        if not report.ok:
            print("stability: orbit file fails verification", file=sys.stderr)
            return EXIT_ASSUMPTION
    else:
        try:
            orbit = find_periodic_orbit(params, n=grid)
        except OrbitError as exc:
            print(f"stability: {exc}", file=sys.stderr)
            return EXIT_NO_ORBIT
    lin = LinearizedMaps(orbit, n=grid)
    model = build_pencil(lin)
    radius = float(sect.get("radius")) if sect and sect.get("radius") else None
    try:
        pairs, winding_total = find_eigenvalues(
            model, lambda_min=num["lambda_min"], radius=radius)
    except SpectrumError as exc:
        print(f"stability: eigenvalue search failed: {exc}", file=sys.stderr)
        return EXIT_SPECTRUM
    dense_g = int(sect.get("dense_grid", 96)) if sect else 96
    dev = dense_eigenvalues(lin, g=dense_g, lambda_min=num["lambda_min"])
    n_pencil = sum(p.multiplicity for p in pairs)
    match_tol = 1e-4
    worst = 0.0
    for p in pairs:
        d = min(abs(p.lam - z) for z in dev) if len(dev) else np.inf
        worst = max(worst, d)
    agree = (n_pencil == len(dev)) and worst <= match_tol
    verdict = stability_verdict(model, pairs, lambda_min=num["lambda_min"],
                                margin=num["margin"])
    eig_rows = []
    for p in pairs:
        eig_rows.append({
            "re": p.lam.real, "im": p.lam.imag, "abs": abs(p.lam),
            "multiplicity": p.multiplicity,
            "residual": eigenpair_residual(model, p),
        })
    report = {
        "verdict": verdict.kind,
        "spectral_radius": verdict.spectral_radius,
        "lambda_min": num["lambda_min"],
        "margin": num["margin"],
        "eigenvalues": eig_rows,
        "winding_total": winding_total,
        "dense_oracle": {
            "grid": dense_g,
            "count": len(dev),
            "worst_match_distance": worst,
            "agree": bool(agree),
        },
    }
    if sect and sect.getboolean("decay_table", fallback=False):
        T = orbit.T
        nu = GridFunction.from_callable(
            lambda t: np.stack([np.sin(t)] * params.N, axis=1), -2 * T, 0.0)
        dists = poincare_decay(orbit, orbit.params, nu, eps=1e-4, count=20,
                               n=grid)
        report["decay_table"] = dists
    _write_json(Path(out_dir) / "stability_report.json", report)
    print(f"stability: verdict = {verdict.kind} "
          f"(r = {verdict.spectral_radius:.6g}; {n_pencil} eigenvalues, "
          f"dense oracle {'agrees' if agree else 'DISAGREES'})")
    return 0 if agree else EXIT_SPECTRUM


def cmd_convergence(cp, params, out_dir, grid, seed, orbit_path=None):
    sect = cp["convergence"] if "convergence" in cp else {}
    n_dirs = int(sect.get("directions", 3)) if sect else 3
    eps_text = sect.get("epsilons", "1e-2 1e-3 1e-4 1e-5") if sect \
        else "1e-2 1e-3 1e-4 1e-5"
    epsilons = [float(tok) for tok in eps_text.split()]
    if seed is None:
        seed = int(sect.get("seed", 1234)) if sect else 1234
    if orbit_path:
        orbit = load_orbit(orbit_path)
    else:
        try:
            orbit = find_periodic_orbit(params, n=grid)
        except OrbitError as exc:
            print(f"convergence: {exc}", file=sys.stderr)
            return EXIT_NO_ORBIT
    lin = LinearizedMaps(orbit, n=grid)
    gamma = gamma_exponent(params.p, params.s)
    ht_exp = hit_time_exponent(params.p)
    rng = np.random.default_rng(seed)
    T = orbit.T
    results = []
    collapsed = 0
    for d in range(n_dirs):
        c = rng.normal(size=(3, params.N))
        nu = GridFunction.from_callable(
            lambda t: (c[0] * np.sin(np.outer(t, np.ones(params.N)))
                       + c[1] * np.cos(np.outer(2 * t, np.ones(params.N)))
                       + c[2]), -2 * T, 0.0)
        z = rng.normal(size=params.N1)
        entry = {"direction": d}
        try:
            fit, resid, notes = lin.check_three_map_derivative(nu, z, epsilons)
            entry["triple_slope"] = fit.slope
            entry["triple_r2"] = fit.r_squared
            entry["triple_pass"] = bool(fit.slope >= gamma - 0.1)
            entry["notes"] = notes
        except Exception as exc:
            entry["error"] = str(exc)
            collapsed += 1
        y = rng.normal(size=params.N)
        fit_ht, _ = lin.hit_time_order(nu, y, sorted(set(epsilons)
                                                     | {3e-3, 3e-4}))
        entry["hit_time_slope"] = fit_ht.slope
        entry["hit_time_pass"] = bool(fit_ht.slope >= ht_exp - 0.1)
        results.append(entry)
    report = {
        "gamma": gamma,
        "hit_time_exponent": ht_exp,
        "seed": seed,
        "epsilons": epsilons,
        "directions": results,
    }
    _write_json(Path(out_dir) / "convergence_report.json", report)
    ok = all(r.get("triple_pass") and r.get("hit_time_pass") for r in results
             if "error" not in r)
    n_ok = sum(1 for r in results if "error" not in r)
    print(f"convergence: gamma = {gamma:.6g}; {n_ok}/{n_dirs} directions "
          f"measured, all pass: {ok}")
    if collapsed == n_dirs:
        return EXIT_CONVERGENCE
    return 0 if ok else EXIT_CONVERGENCE


def cmd_norms_selftest(cp, params, out_dir):
    p, s = params.p, params.s
    lines = []
    ok = True

    J_exact = (2.0 / ((p - s * p) * (p - s * p + 1))) ** (1.0 / p) \
        + (1.0 / (p + 1.0)) ** (1.0 / p)
    J = fractional_norm(lambda t: t, (0.0, 1.0), p, s)
    err = abs(J - J_exact)
    ok &= err < 1e-4
    lines.append(f"linear fractional norm: err {err:.2e} "
                 f"{'PASS' if err < 1e-4 else 'FAIL'}")

    fit1, _ = appendix_probe("A1", np.sin, (0.0, 1.0),
                             [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], p, s,
                             fprime=np.cos)
    bound1 = 1.0 + 1.0 / p - 0.05
    ok &= fit1.slope >= bound1
    lines.append(f"A1 order {fit1.slope:.3f} >= {bound1:.3f} "
                 f"{'PASS' if fit1.slope >= bound1 else 'FAIL'}")

    f2 = lambda t: np.abs(t) ** 0.6
    fit2, _ = appendix_probe("A2", f2, (-0.5, 0.5),
                             [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], p, s,
                             breakpoints=[0.0])
    ok &= fit2.slope >= s - 0.05
    lines.append(f"A2 order {fit2.slope:.3f} >= {s - 0.05:.3f} "
                 f"{'PASS' if fit2.slope >= s - 0.05 else 'FAIL'}")

    f6 = lambda t: np.abs(1.0 - t) ** 0.1
    fit6, _ = appendix_probe("A6", f6, (0.0, 1.0),
                             [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], p, s)
    ok &= fit6.slope >= s - 0.05
    lines.append(f"A6 order {fit6.slope:.3f} >= {s - 0.05:.3f} "
                 f"{'PASS' if fit6.slope >= s - 0.05 else 'FAIL'}")

    for line in lines:
        print("norms-selftest:", line)
    _write_json(Path(out_dir) / "norms_selftest.json",
                {"lines": lines, "ok": bool(ok)})
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="relaydelay",
        description="Relay hysteresis-delay systems: simulation, periodic "
                    "orbits, and spectral stability analysis.")
    parser.add_argument("command",
                        choices=["simulate", "periodic", "stability",
                                 "convergence", "norms-selftest"])
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--orbit", help="orbit JSON file (stability/convergence)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--grid", type=int, default=256,
                        help="history nodes per window of length T")
    args = parser.parse_args(argv)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cp, params = load_config(args.config)
    except (ConfigError, ParamError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "simulate":
            return cmd_simulate(cp, params, out_dir, args.grid)
        if args.command == "periodic":
            return cmd_periodic(cp, params, out_dir, args.grid)
        if args.command == "stability":
            return cmd_stability(cp, params, out_dir, args.grid, args.orbit)
        if args.command == "convergence":
            return cmd_convergence(cp, params, out_dir, args.grid, args.seed,
                                   args.orbit)
        if args.command == "norms-selftest":
            return cmd_norms_selftest(cp, params, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
