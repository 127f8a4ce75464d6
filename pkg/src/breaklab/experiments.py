"""Scenario orchestration: distortion convergence and singularity experiments.

Both experiments are deterministic functions of their config; CSV cells are
written with repr() so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circle import arc_length, frac
from .conjugacy import (
    PsiBracketEvaluator,
    build_conjugacy_psi,
    match_measure_condition,
    quotient_profile,
)
from .crossratio import cross_ratio, distortion_chain
from .errors import BreaklabError
from .maps import (
    OneBreakMoebius,
    PHomeomorphism,
    TwoBreakMoebius,
    c1_moebius_twist,
    conjugate_map,
)
from .partition import DEFAULT_X0
from .quadruples import check_conditions_C, construct_test_quadruple
from .rotation import GOLDEN_MEAN, NAMED_TARGETS, rotation_data, tune_to_target_rho

__all__ = [
    "DistortionConfig", "SingularityConfig", "run_distortion_experiment",
    "run_singularity_experiment", "case_target", "DEFAULT_DISTORTION",
    "DEFAULT_SINGULARITY",
]


def case_target(f: PHomeomorphism, case: str, b_active: bool,
                break_a: float, break_b: float) -> float:
    """Limit value of the q_n-distortion for the given construction case.

    Left cases converge to the product of the jump ratios the iterates
    actually cross; mirrored right cases give the reciprocal.
    """
    t = f.jump_ratio_at(break_a)
    if b_active:
        t *= f.jump_ratio_at(break_b)
    return t if case.endswith("left") else 1.0 / t


@dataclass
class DistortionConfig:
    name: str = "distortion"
    f1: TwoBreakMoebius = field(
        default_factory=lambda: TwoBreakMoebius(a=0.2, b=0.7,
                                                sigma_a=2.0, sigma_b=1.0))
    f2_family: TwoBreakMoebius = field(
        default_factory=lambda: TwoBreakMoebius(a=0.13, b=0.6,
                                                sigma_a=3.0, sigma_b=1.0))
    target: str = "golden"
    levels: tuple = (5, 7, 9, 11)
    eps_ladder: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    r1: float | None = None      # None -> 40 exp(5 v1)
    x0: float = DEFAULT_X0
    tune_tol: float = 2e-14
    n_measure: int = 10 ** 5
    psi_steps: int = 10 ** 8
    h_twist: tuple = (0.37, 0.81, 1.7)
    seed: int = 0


@dataclass
class SingularityConfig:
    name: str = "singularity"
    pair: str = "main"           # main | rigidity | identity
    f1: TwoBreakMoebius = field(
        default_factory=lambda: TwoBreakMoebius(a=0.2, b=0.7,
                                                sigma_a=2.0, sigma_b=1.0))
    f2_family: TwoBreakMoebius = field(
        default_factory=lambda: TwoBreakMoebius(a=0.13, b=0.6, sigma_a=3.0,
                                                sigma_b=1.0 / 3.0))
    rigidity_b1: float = 0.25
    rigidity_b2: float = 0.6
    rigidity_sigma: float = 2.0
    target: str = "golden"
    n_orbit: int = 10 ** 5
    scales: tuple = (2.0 ** -8, 2.0 ** -10, 2.0 ** -12, 2.0 ** -14)
    eps_indices: tuple = (0.5, 0.1, 0.02)
    tune_tol: float = 2e-14
    seed: int = 0


DEFAULT_DISTORTION = DistortionConfig()
DEFAULT_SINGULARITY = SingularityConfig()


def _target_of(name: str):
    try:
        return NAMED_TARGETS[name]
    except KeyError:
        raise BreaklabError(f"unknown rotation target {name!r}; "
                            f"known: {sorted(NAMED_TARGETS)}")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, (str, int)) else repr(float(x))
                        for x in row])


def build_matched_pair(cfg: DistortionConfig):
    """(f1, f2, match report) with equal rotation numbers and matched
    invariant mass of the break arcs."""
    target = _target_of(cfg.target)
    f1 = tune_to_target_rho(cfg.f1, target, tol=cfg.tune_tol)
    f2, rep = match_measure_condition(
        f1, cfg.f1.a, cfg.f1.b, cfg.f2_family, target,
        N=cfg.n_measure, tune_tol=cfg.tune_tol)
    return f1, f2, rep


def run_distortion_experiment(cfg: DistortionConfig, outdir) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    target = _target_of(cfg.target)
    f1, f2, match_rep = build_matched_pair(cfg)
    _, cf = rotation_data(f1)
    v1 = f1.total_variation_log_df()
    r1 = cfg.r1 if cfg.r1 is not None else 40.0 * math.exp(5.0 * v1)
    a1, b1 = cfg.f1.a, cfg.f1.b
    a2, b2 = f2.descriptor.a, f2.descriptor.b

    scenarios = {}
    for n in cfg.levels:
        for eps in cfg.eps_ladder:
            scenarios[(n, eps)] = construct_test_quadruple(
                f1, n, eps, x0=cfg.x0, break_a=a1, break_b=b1)

    # one lockstep pass serves every scenario's psi values
    targets = []
    traj_cache = {}
    for key, sc in scenarios.items():
        qn = cf.q[sc.n]
        factors, traj = distortion_chain(sc.lifts, f1, qn)
        traj_cache[key] = (factors, traj)
        targets.extend(frac(t) for t in sc.lifts)
        targets.extend(frac(t) for t in traj[-1])
    ev = PsiBracketEvaluator(f1, a1, f2, a2, n_steps=cfg.psi_steps)
    psi_vals, psi_unc = ev.values(np.array(targets))
    psi_at = dict(zip(targets, zip(psi_vals, psi_unc)))

    # closed-form conjugate pair for the independent identity check
    h = c1_moebius_twist(*cfg.h_twist)
    f2h = conjugate_map(f1, h)

    dist_rows, detail_rows, cond_rows, ident_rows = [], [], [], []
    for (n, eps), sc in sorted(scenarios.items()):
        qn = cf.q[n]
        factors, traj = traj_cache[(n, eps)]
        dist1 = cross_ratio(traj[-1]) / cross_ratio(traj[0])
        decomp1 = float(np.prod(factors))
        dev = np.abs(factors - 1.0)
        special = {sc.l_index} | ({sc.p_index} if sc.b_active else set())
        off = [d for i, d in enumerate(dev) if i not in special]
        offstep_max = max(off) if off else 0.0

        rep_src = check_conditions_C(sc.quadruple, sc.x0, r1, eps)
        rep_img = check_conditions_C(traj[-1], sc.x0, r1, eps)

        zpts = [frac(t) for t in sc.lifts]
        ypts = [frac(t) for t in traj[-1]]
        w = [psi_at[p][0] for p in zpts]
        w_unc = max(psi_at[p][1] for p in zpts)
        psi_y = [psi_at[p][0] for p in ypts]
        psi_y_unc = max(psi_at[p][1] for p in ypts)
        w_lifts = _lift4(w)
        factors2, traj2 = distortion_chain(w_lifts, f2, qn)
        dist2 = cross_ratio(traj2[-1]) / cross_ratio(traj2[0])
        decomp2 = float(np.prod(factors2))

        target1 = case_target(f1, sc.case, sc.b_active, a1, b1)
        target2 = case_target(f2, sc.case, sc.b_active, a2, b2)
        resid1 = abs(dist1 - target1)
        resid2 = abs(dist2 - target2)

        # Eq.(12) chain: psi-distortion ratio vs map-distortion ratio
        dist_z_psi = cross_ratio(w_lifts) / cross_ratio(sc.lifts)
        dist_y_psi_ind = cross_ratio(_lift4(psi_y)) / cross_ratio(traj[-1])
        eq12_independent = abs((dist_y_psi_ind / dist_z_psi)
                               / (dist2 / dist1) - 1.0)
        dist_y_psi_sub = cross_ratio(traj2[-1]) / cross_ratio(traj[-1])
        eq12_substituted = abs((dist_y_psi_sub / dist_z_psi)
                               / (dist2 / dist1) - 1.0)

        # independent identity residual on the closed-form conjugate pair
        wh = [h(z) for z in zpts]
        factors2h, traj2h = distortion_chain(_lift4(wh), f2h, qn)
        dist2h = cross_ratio(traj2h[-1]) / cross_ratio(traj2h[0])
        dist_z_h = cross_ratio(_lift4(wh)) / cross_ratio(sc.lifts)
        dist_y_h = cross_ratio(_lift4([h(y) for y in ypts])) / cross_ratio(traj[-1])
        ident = abs((dist_y_h / dist_z_h) / (dist2h / dist1) - 1.0)

        dist_rows.append([n, eps, sc.case, dist1, dist2, target1, target2,
                          resid1, resid2])
        detail_rows.append([n, eps, sc.case, int(sc.b_active), sc.l_index,
                            sc.p_index, abs(decomp1 - dist1),
                            abs(decomp2 - dist2), offstep_max, w_unc,
                            psi_y_unc, eq12_independent, eq12_substituted,
                            sc.window_length])
        for tag, rep in (("source", rep_src), ("image", rep_img)):
            cond_rows.append([n, eps, tag, int(rep.all_pass), rep.l12,
                              rep.l23, rep.l34, rep.max_dist_x0,
                              rep.margin_a_low, rep.margin_a_high,
                              rep.margin_b_low, rep.margin_b_high,
                              rep.margin_c])
        ident_rows.append([n, eps, ident])

    _write_csv(outdir / "distortion.csv",
               ["n", "eps", "case", "dist_f1", "dist_f2", "target1",
                "target2", "resid1", "resid2"], dist_rows)
    _write_csv(outdir / "details.csv",
               ["n", "eps", "case", "b_active", "l", "p", "decomp_err_f1",
                "decomp_err_f2", "offstep_max", "psi_unc_z", "psi_unc_y",
                "eq12_independent", "eq12_substituted", "window_length"],
               detail_rows)
    _write_csv(outdir / "conditions.csv",
               ["n", "eps", "quadruple", "pass", "l12", "l23", "l34",
                "max_dist_x0", "margin_a_low", "margin_a_high",
                "margin_b_low", "margin_b_high", "margin_c"], cond_rows)
    _write_csv(outdir / "identity.csv", ["n", "eps", "eq12_residual"],
               ident_rows)

    summary = {
        "scenario": cfg.name,
        "target": cfg.target,
        "v1": v1,
        "r1": r1,
        "sigma_products": {"f1": f1.jump_ratio_product(),
                           "f2": f2.jump_ratio_product()},
        "measure_match": match_rep,
        "conditions_all_pass": all(r[3] == 1 for r in cond_rows),
        "max_decomposition_error": max(max(r[6], r[7]) for r in detail_rows),
        "max_identity_residual": max(r[2] for r in ident_rows),
        "residuals_monotone_at_top_level": _monotone_at_level(
            dist_rows, max(cfg.levels)),
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _lift4(points):
    """Lifted vector of 4 circle points in circular order from the first."""
    base = points[0]
    out = [base]
    for p in points[1:]:
        out.append(base + arc_length(base, p))
    lifts = np.array(out)
    if np.any(np.diff(lifts) <= 0):
        raise BreaklabError(f"psi image of quadruple lost its order: {points}")
    return lifts


def _monotone_at_level(dist_rows, level):
    rows = [(r[1], r[7], r[8]) for r in dist_rows if r[0] == level]
    rows.sort(key=lambda r: -r[0])  # eps decreasing
    r1s = [r[1] for r in rows]
    r2s = [r[2] for r in rows]
    dec = lambda s: all(b < a for a, b in zip(s, s[1:]))
    return {"f1": dec(r1s), "f2": dec(r2s)}


def run_singularity_experiment(cfg: SingularityConfig, outdir) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    target = _target_of(cfg.target)

    if cfg.pair == "main":
        f1 = tune_to_target_rho(cfg.f1, target, tol=cfg.tune_tol)
        f2, match_rep = match_measure_condition(
            f1, cfg.f1.a, cfg.f1.b, cfg.f2_family, target,
            N=cfg.n_orbit, tune_tol=cfg.tune_tol)
        anchor1, anchor2 = cfg.f1.a, f2.descriptor.a
    elif cfg.pair == "rigidity":
        f1 = tune_to_target_rho(
            OneBreakMoebius(b=cfg.rigidity_b1, sigma=cfg.rigidity_sigma),
            target, tol=cfg.tune_tol)
        f2 = tune_to_target_rho(
            OneBreakMoebius(b=cfg.rigidity_b2, sigma=cfg.rigidity_sigma),
            target, tol=cfg.tune_tol)
        match_rep = None
        anchor1, anchor2 = cfg.rigidity_b1, cfg.rigidity_b2
    elif cfg.pair == "identity":
        f1 = tune_to_target_rho(cfg.f1, target, tol=cfg.tune_tol)
        f2 = f1
        match_rep = None
        anchor1 = anchor2 = cfg.f1.a
    else:
        raise BreaklabError(f"unknown pair kind {cfg.pair!r}")

    psi = build_conjugacy_psi(f1, f2, cfg.n_orbit, anchor1, anchor2)
    residual = psi.conjugacy_residual(f1, f2)
    psi.to_csv(outdir / "psi.csv")

    index_rows = []
    profiles = {}
    for h in cfg.scales:
        prof = quotient_profile(psi, h)
        profiles[h] = prof
        prof.to_csv(outdir / f"profile_h_2e{int(round(math.log2(h)))}.csv")
        for eps in cfg.eps_indices:
            index_rows.append([h, eps, prof.singularity_index(eps)])
    _write_csv(outdir / "indices.csv", ["h", "eps", "singularity_index"],
               index_rows)

    idx = {(h, e): v for h, e, v in index_rows}
    scales = sorted(cfg.scales, reverse=True)  # coarse -> fine
    series_01 = [idx[(h, 0.1)] for h in scales]
    series_002 = [idx[(h, 0.02)] for h in scales]
    verdicts = {
        "kind": "MAIN" if cfg.pair == "main" else "CONTROL",
        "index_0.1_series": series_01,
        "index_0.02_series": series_002,
        "index_0.1_strictly_increasing": all(
            b > a for a, b in zip(series_01, series_01[1:])),
        "index_0.1_final_above_0.5": series_01[-1] > 0.5,
        "index_0.1_all_zero": all(v == 0.0 for v in series_01),
        "index_0.02_max": max(series_002),
        "conjugacy_residual": residual,
    }
    summary = {
        "scenario": cfg.name,
        "pair": cfg.pair,
        "target": cfg.target,
        "n_orbit": cfg.n_orbit,
        "sigma_products": {"f1": f1.jump_ratio_product(),
                           "f2": f2.jump_ratio_product()},
        "measure_match": match_rep,
        "verdicts": verdicts,
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
