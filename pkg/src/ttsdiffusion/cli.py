"""Command-line runner: ``ttsdiffusion <subcommand> --config FILE [--out DIR]``.

Every subcommand writes its JSON/CSV outputs plus ``manifest.json`` (config
hash, versions, wall time).  Failures write ``error.json`` and exit nonzero;
configuration errors exit with status 2.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
import math
from pathlib import Path
import sys
import time
import traceback

import numpy as np

from . import config as cfgmod
from .io import (canonical_json, config_hash, trajectory_record, trajectory_to_csv, versions,
                 write_csv, write_json)

SUBCOMMANDS = ("simulate", "homoclinic", "splitting", "melnikov", "condition", "ergodize",
               "chain", "sweep")


class Context:
    def __init__(self, cfg, out: Path, chash: str, mode: str, seed: int, workers: int):
        self.cfg, self.out, self.chash = cfg, out, chash
        self.mode, self.seed, self.workers = mode, seed, workers
        self.files = []

    def want(self, fmt):
        return fmt in self.cfg.output.formats

    def json(self, name, obj):
        if self.want("json"):
            self.files.append(write_json(self.out / name, obj, self.chash).name)

    def csv(self, name, header, rows):
        if self.want("csv"):
            self.files.append(write_csv(self.out / name, header, rows, self.chash).name)


# -- subcommands -----------------------------------------------------------------

def cmd_simulate(ctx: Context):
    from .system import FullState, integrate_full
    cfg = ctx.cfg
    p, f = cfgmod.system_params(cfg), cfgmod.perturbation(cfg)
    s = cfg.simulate
    n = p.n
    phi0 = np.zeros(n) if s.phi0 is None else np.asarray(s.phi0, float)
    I0 = np.zeros(n) if s.I0 is None else np.asarray(s.I0, float)
    traj = integrate_full(p, f, FullState(phi0, I0, s.q0, s.p0), tuple(s.t_span), s.tol,
                          n_samples=s.n_samples)
    if ctx.want("csv"):
        ctx.files.append(trajectory_to_csv(traj, ctx.out / "trajectory.csv", ctx.chash).name)
    ctx.json("trajectory.json", dict(trajectory_record(traj), params=p.to_dict()))


def cmd_homoclinic(ctx: Context):
    from .homoclinic import solve_k_bump, solve_one_bump_pi, solve_one_bump_psi
    cfg = ctx.cfg
    p, f, st = cfgmod.system_params(cfg), cfgmod.perturbation(cfg), cfgmod.bvp_settings(cfg)
    h = cfg.homoclinic
    A = np.zeros(p.n) if h.A is None else np.asarray(h.A, float)
    if h.variant == "pi":
        sol = solve_one_bump_pi(p, f, A, h.theta, st)
    elif h.variant == "psi":
        sol = solve_one_bump_psi(p, f, A, h.theta, st)
    else:
        sol = solve_k_bump(p, f, A, h.thetas, st)
    ctx.json("homoclinic.json", dict(sol.to_dict(), action=sol.action(), settings=st.to_dict()))
    if ctx.want("csv"):
        rows = np.column_stack([sol.grid, sol.q_values, sol.p_values])
        ctx.csv("homoclinic.csv", ["t", "q", "p"], rows.tolist())


def cmd_splitting(ctx: Context):
    from .splitting import fourier_fast_angle
    cfg = ctx.cfg
    p, f, st = cfgmod.system_params(cfg), cfgmod.perturbation(cfg), cfgmod.bvp_settings(cfg)
    rep = fourier_fast_angle(p, f, np.asarray(cfg.splitting.A2, float), cfg.splitting.M, st)
    ctx.json("splitting.json", rep.to_dict())
    if ctx.want("csv"):
        M = rep.samples.shape[1]
        A2 = np.atleast_2d(rep.A2_grid)
        rows = [[2 * math.pi * j / M, *A2[i], rep.samples[i, j]]
                for i in range(len(A2)) for j in range(M)]
        header = ["A1"] + [f"A{d + 2}" for d in range(A2.shape[1])] + ["G_tilde"]
        ctx.csv("splitting.csv", header, rows)


def cmd_melnikov(ctx: Context):
    from .splitting import (melnikov_cosine_closed_form, melnikov_cosine_quadrature,
                            sech2_cos_transform)
    m = ctx.cfg.melnikov
    rows = []
    for w in m.omegas:
        closed = melnikov_cosine_closed_form(w, m.A) if m.closed_form else float("nan")
        qv = melnikov_cosine_quadrature(w, m.A, m.t_max)
        rows.append([w, m.A, closed, qv, abs(closed - qv), float(sech2_cos_transform(w))])
    ctx.csv("melnikov.csv", ["omega", "A", "closed_form", "quadrature", "abs_diff", "transform"], rows)
    ctx.json("melnikov.json", dict(schema="ttsdiffusion.melnikov/1", rows=rows,
                                   max_abs_diff=max(r[4] for r in rows),
                                   limit_w0=float(sech2_cos_transform(0.0))))


def _condition_params(cfg, params):
    from .condition import ConditionParams, lemma33_parameters
    c = cfg.condition
    base = lemma33_parameters(params)
    return ConditionParams(rho=c.rho if c.rho is not None else base.rho,
                           sigma=c.sigma if c.sigma is not None else base.sigma,
                           delta1=c.delta1 if c.delta1 is not None else base.delta1,
                           delta2=c.delta2 if c.delta2 is not None else base.delta2,
                           delta3=c.delta3 if c.delta3 is not None else base.delta3,
                           l_const=(c.l1, c.l2))


def cmd_condition(ctx: Context):
    from .condition import ConditionGrids, J_profile, lemma33_basis, verify_condition
    from .splitting import build_surrogate
    cfg = ctx.cfg
    p, f, st = cfgmod.system_params(cfg), cfgmod.perturbation(cfg), cfgmod.bvp_settings(cfg)
    c = cfg.condition
    Gt = build_surrogate(p, f, "psi", st, M=c.M, seed=ctx.seed)
    basis = lemma33_basis(p)
    cp = _condition_params(cfg, p)
    cert = verify_condition(Gt, basis, cp, ConditionGrids(c.a1_n, c.x_n))
    ctx.json("condition.json", dict(cert.to_dict(tables=True), surrogate_check=Gt.check_error,
                                    system=p.to_dict()))
    if c.profile:
        a2 = np.linspace(-cp.rho, cp.rho, 81)
        prof = J_profile(Gt, basis, cp, a2, grid_n=c.a1_n)
        ctx.csv("condition_profile.csv", ["a2", "J", "argmax_a1"], prof.tolist())


def cmd_ergodize(ctx: Context):
    from .condition import lemma33_basis, lemma33_parameters
    from .ergodization import ergodization_time, estimate_gamma, probe_points, select_epochs
    from .system import frequency_vector
    cfg = ctx.cfg
    p = cfgmod.system_params(cfg)
    e = cfg.ergodize
    fv = frequency_vector(p)
    dio = estimate_gamma(fv.omega, e.tau, e.K_max)
    basis = lemma33_basis(p)
    sigma = e.sigma if e.sigma is not None else lemma33_parameters(p).sigma
    flow = basis.Omega[:, 0] if e.flow == "omega1" else fv.omega
    ergo = ergodization_time(flow, sigma, probe_points(p.n, e.probe_m, seed=ctx.seed),
                             omega_norm=fv.norm, gamma=dio.gamma, tau=e.tau)
    sch = select_epochs(basis.Omega[:, 0], sigma, e.k, e.min_gap, basis.Omega[:, 1:],
                        spacing_extra=ergo.T_e)
    ctx.json("ergodize.json", dict(schema="ttsdiffusion.ergodize/1", diophantine=dio.to_dict(),
                                   T_e=ergo.T_e, sigma=sigma, C_bar=ergo.bound_ratio,
                                   n_probes=ergo.n_probes, schedule=sch.to_dict(),
                                   schedule_check=sch.check(basis.Omega, sigma)))
    header = ["eta"] + [f"c_{j + 2}" for j in range(p.n - 1)]
    ctx.csv("epochs.csv", header, sch.table().tolist())
    print(canonical_json(dict(etas=sch.etas, chis=sch.chis)), end="")


def _pipeline_settings(cfg, tau, K_max, probe_m=9, k_cap=200):
    from .condition import ConditionGrids
    from .shadowing import PipelineSettings
    c = cfg.condition
    return PipelineSettings(tau=tau, K_max=K_max, M=c.M, probe_m=probe_m,
                            grids=ConditionGrids(c.a1_n, c.x_n), k_cap=k_cap,
                            bvp=cfgmod.bvp_settings(cfg))


def cmd_chain(ctx: Context):
    from .condition import lemma33_parameters
    from .shadowing import (OptSettings, build_chain_problem, maximize_chain, problem_summary,
                            reconstruct_orbit)
    cfg = ctx.cfg
    p, f = cfgmod.system_params(cfg), cfgmod.perturbation(cfg)
    ch = cfg.chain
    cp = lemma33_parameters(p)
    dI = ch.dI
    if dI is None:
        d = cp.delta3 if ch.direction == "omega3" else cp.delta2
        dI = (ch.k_target - 0.5) * d / (8 * cp.rho)
    ps = _pipeline_settings(cfg, ch.tau, ch.K_max, ch.probe_m, ch.k_cap)
    problem = build_chain_problem(p, f, dI, direction=ch.direction, ps=ps)
    opt = OptSettings(grad_tol=ch.grad_tol)
    crit = maximize_chain(problem, ctx.mode, opt, require_condition=(ch.direction == "omega3"))
    out = dict(schema="ttsdiffusion.chain/1", problem=problem_summary(problem),
               dI=dI, critical_point=crit.to_dict(), condition=problem.meta["cert"].to_dict(False))
    if crit.interior:
        run = reconstruct_orbit(problem, crit, ch.eta, reintegrate=ch.reintegrate)
        out["run"] = run.to_dict()
        if ctx.want("csv"):
            ctx.files.append(trajectory_to_csv(run.trajectory, ctx.out / "trajectory.csv",
                                               ctx.chash).name)
    ctx.json("chain.json", out)
    if not crit.interior:
        raise RuntimeError(f"maximiser not interior: {crit.violations}")


def cmd_sweep(ctx: Context):
    from .condition import lemma33_parameters
    from .shadowing import MuRule, OptSettings, sweep_epsilon
    from .system import SystemParams
    cfg = ctx.cfg
    p, f = cfgmod.system_params(cfg), cfgmod.perturbation(cfg)
    sw = cfg.sweep
    rule = MuRule(sw.mu_c, sw.mu_exponent)
    dI = sw.dI
    if dI is None:
        e0 = max(sw.eps)
        cp = lemma33_parameters(SystemParams(eps=e0, a=p.a, beta=p.beta, mu=rule(e0, p.a)))
        dI = (sw.k_first - 0.5) * cp.delta3 / (8 * cp.rho)
    ps = _pipeline_settings(cfg, sw.tau, sw.K_max)
    kw = dict(mu_rule=rule, eta=sw.eta, gamma_floor=sw.gamma_floor, ps=ps, opt=OptSettings())
    if ctx.workers > 1:
        with ProcessPoolExecutor(ctx.workers) as pool:
            res = sweep_epsilon(p, f, sw.eps, dI, map_fn=pool.map, **kw)
    else:
        res = sweep_epsilon(p, f, sw.eps, dI, **kw)
    rows = []
    done = []
    for r in res.rows:
        if r["status"] == "ok":
            done.append(r)
        slope = _slope([(d["eps"], d["T_d"]) for d in done])
        rows.append([r["eps"], r["mu"], r["a"], r.get("k"), r.get("T_d"), r.get("bound_Td"),
                     slope, r["status"]])
    ctx.csv("sweep.csv", ["eps", "mu", "a", "k", "T_d", "bound_Td", "slope_so_far", "status"], rows)
    ctx.json("sweep.json", dict(schema="ttsdiffusion.sweep/1", dI=dI, **res.to_dict()))


def _slope(pts):
    if len(pts) < 2:
        return None
    x = np.log([1 / e for e, _ in pts])
    y = np.log([t for _, t in pts])
    return float(np.polyfit(x, y, 1)[0])


COMMANDS = dict(simulate=cmd_simulate, homoclinic=cmd_homoclinic, splitting=cmd_splitting,
                melnikov=cmd_melnikov, condition=cmd_condition, ergodize=cmd_ergodize,
                chain=cmd_chain, sweep=cmd_sweep)


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ttsdiffusion",
                                 description="Arnold diffusion experiments for a priori unstable systems")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="YAML experiment config")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--mode", choices=("exact", "fast"), default="fast")
    ap.add_argument("--seed", type=int, default=0)
    return ap


def run_subcommand(name: str, cfg, out: Path, mode="fast", seed=0, workers=1) -> int:
    chash = config_hash(dict(config=cfg.to_dict(), mode=mode, seed=seed))
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, out, chash, mode, seed, workers)
    t0 = time.perf_counter()
    status, err = 0, None
    try:
        COMMANDS[name](ctx)
    except Exception as exc:
        status = 1
        err = dict(error=type(exc).__name__, message=str(exc), subcommand=name,
                   traceback=traceback.format_exc().splitlines()[-3:])
        write_json(out / "error.json", err, chash)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    manifest = dict(schema="ttsdiffusion.manifest/1", subcommand=name, config_hash=chash,
                    versions=versions(), wall_time=time.perf_counter() - t0, mode=mode,
                    seed=seed, workers=workers, files=ctx.files, status=status)
    (out / "manifest.json").write_text(canonical_json(manifest))
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_json(Path(args.out) / "error.json",
                       dict(error="ConfigError", message=str(exc),
                            field=getattr(exc, "path", None)))
        return 2
    out = Path(args.out) if args.out else Path(cfg.output.dir)
    return run_subcommand(args.subcommand, cfg, out, args.mode, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
