"""Parameter sweeps and rate/threshold verification: Tikhonov rates,
activity thresholds, noise rules, Lavrentiev bounds, coincidence detection
and joint total-error studies."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .admissible import AdmissibleSet, feasibility, slater
from .errors import (InvalidRule, LambdaExceedsSlaterCap, NoTransition)
from .grid import GridFunction, wnorm
from .manufacture import ManufacturedInstance, add_noise
from .solver import RegularizedProblem, Solution, solve

CSV_COLUMNS = ("alpha", "lambda", "delta", "err_u", "err_Su", "margin_lo",
               "margin_up", "margin_state", "n_active_lo", "n_active_up",
               "n_active_state", "iters", "seconds")

RATE_FLOOR_FACTOR = 100.0  # fit only where err_u >= 100 * tol


@dataclass
class SweepRecord:
    alpha: float
    lam: float
    delta: float
    err_u: float
    err_Su: float
    margin_lo: float
    margin_up: float
    margin_state: float
    n_active_lo: int
    n_active_up: int
    n_active_state: int
    iters: int
    seconds: float


@dataclass
class RateFit:
    slope: float
    intercept: float
    alpha_min: float
    alpha_max: float
    fit_residual: float
    n_points: int


def _record(prob: RegularizedProblem, sol: Solution, inst: ManufacturedInstance,
            delta: float, seconds: float) -> SweepRecord:
    g = prob.op.grid
    rep = feasibility(sol.u, prob.aset)
    return SweepRecord(
        alpha=prob.alpha, lam=prob.aset.lam, delta=delta,
        err_u=wnorm(g, sol.u.values - inst.u_bar.values),
        err_Su=wnorm(g, sol.y.values - inst.y_d.values),
        margin_lo=rep.margin_lower, margin_up=rep.margin_upper,
        margin_state=rep.margin_state,
        n_active_lo=len(sol.active_lower), n_active_up=len(sol.active_upper),
        n_active_state=len(sol.active_state),
        iters=sol.iterations, seconds=seconds)


def fit_rate(alphas: Sequence[float], errors: Sequence[float],
             tol: float) -> Optional[RateFit]:
    """Least-squares slope of log err vs log alpha over the honest window."""
    a = np.asarray(alphas, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e >= RATE_FLOOR_FACTOR * tol
    if keep.sum() < 4:
        return None
    la, le = np.log(a[keep]), np.log(e[keep])
    A = np.column_stack([la, np.ones_like(la)])
    coef, res, *_ = np.linalg.lstsq(A, le, rcond=None)
    fit_res = float(np.sqrt(res[0])) if res.size else 0.0
    return RateFit(slope=float(coef[0]), intercept=float(coef[1]),
                   alpha_min=float(a[keep].min()), alpha_max=float(a[keep].max()),
                   fit_residual=fit_res, n_points=int(keep.sum()))


def sweep_alpha(inst: ManufacturedInstance, alpha_list: Sequence[float],
                tol: float = 1e-8) -> dict:
    """Tikhonov sweep at lam = 0 with per-record bound checks and a rate fit."""
    alphas = list(alpha_list)
    if len(alphas) < 4 or any(a <= 0 for a in alphas) or \
            any(alphas[i] <= alphas[i + 1] for i in range(len(alphas) - 1)):
        raise ValueError("alpha_list must be >= 4 positive values, descending")
    aset = inst.aset.with_lambda(0.0)
    records: List[SweepRecord] = []
    checks = []
    sols: List[Tuple[float, Solution]] = []
    warm = None
    for a in alphas:
        prob = RegularizedProblem(inst.aset.op, inst.y_d, aset, a)
        t0 = time.perf_counter()
        sol = solve(prob, tol=tol, u0=warm)
        dt = time.perf_counter() - t0
        warm = sol.u
        rec = _record(prob, sol, inst, 0.0, dt)
        records.append(rec)
        sols.append((a, sol))
        b1 = rec.err_u <= np.sqrt(a) * inst.w_norm \
            + inst.residual_norm / np.sqrt(a) + 10 * tol
        b2 = rec.err_Su <= 2 * a * inst.w_norm + inst.residual_norm + 10 * tol
        checks.append((bool(b1), bool(b2)))
    fit = fit_rate([r.alpha for r in records], [r.err_u for r in records], tol)
    return {"records": records, "fit": fit, "bound_checks": checks,
            "solutions": sols}


def _clean(rec: SweepRecord, tau: float) -> bool:
    no_active = rec.n_active_lo == 0 and rec.n_active_up == 0 \
        and rec.n_active_state == 0
    margins_ok = min(rec.margin_lo, rec.margin_up, rec.margin_state) > 0.5 * tau
    return no_active and margins_ok


def activity_transition(inst: ManufacturedInstance, alpha_list: Sequence[float],
                        tau: float, tol: float = 1e-8) -> dict:
    """Largest alpha in the (descending) list below which all solutions have
    empty active sets and margins above tau/2.  Returns alpha0 = inf when
    every list element is clean; raises NoTransition when the smallest one
    is not."""
    out = sweep_alpha(inst, alpha_list, tol=tol)
    records = out["records"]
    flags = [_clean(r, tau) for r in records]
    if not flags[-1]:
        raise NoTransition(
            f"constraints still active/tight at alpha = {records[-1].alpha:g}")
    if all(flags):
        return {"alpha0": np.inf, "records": records, "clean": flags}
    last_dirty = max(i for i, f in enumerate(flags) if not f)
    return {"alpha0": records[last_dirty].alpha, "records": records,
            "clean": flags}


def noise_study(inst: ManufacturedInstance, delta_list: Sequence[float],
                s: float = 2.0 / 3.0, c: float = 1.0, tol: float = 1e-8,
                seed: int = 1) -> dict:
    """Solve with noisy data at alpha(delta) = c * delta^s and check the
    noisy-data error bounds; report the delta below which all constraints
    are inactive (None if never)."""
    if not 0.0 < s < 1.0:
        raise InvalidRule(f"exponent s must be in (0, 1), got {s}")
    deltas = sorted(delta_list, reverse=True)
    positive = [d for d in deltas if d > 0]
    alpha_floor = c * min(positive) ** s if positive else 1e-6
    aset = inst.aset.with_lambda(0.0)
    records, checks = [], []
    warm = None
    for i, d in enumerate(deltas):
        alpha = c * d**s if d > 0 else alpha_floor
        noisy = add_noise(inst.y_d, d, seed + i)
        prob = RegularizedProblem(inst.aset.op, noisy.y_delta, aset, alpha)
        t0 = time.perf_counter()
        sol = solve(prob, tol=tol, u0=warm)
        dt = time.perf_counter() - t0
        warm = sol.u
        rec = _record(prob, sol, inst, d, dt)
        # err_Su in the record is measured against the noisy data; the bound
        # from the noisy-data theorem compares against the exact data
        err_su_exact = wnorm(inst.y_d.grid, sol.y.values - inst.y_d.values)
        rec.err_Su = err_su_exact
        records.append(rec)
        b1 = rec.err_u <= np.sqrt(alpha) * inst.w_norm + d / np.sqrt(alpha) \
            + 10 * tol
        b2 = err_su_exact <= 2 * alpha * inst.w_norm + d + 10 * tol
        checks.append((bool(b1), bool(b2)))
    inactive = [r.n_active_lo == 0 and r.n_active_up == 0
                and r.n_active_state == 0 for r in records]
    delta0 = None
    if inactive[-1]:
        dirty = [i for i, f in enumerate(inactive) if not f]
        delta0 = np.inf if not dirty else records[max(dirty)].delta
    return {"records": records, "bound_checks": checks, "delta0": delta0}


def lavrentiev_sweep(inst: ManufacturedInstance, alpha: float,
                     lam_list: Sequence[float], sign: str,
                     u_hat: GridFunction, tol: float = 1e-8) -> dict:
    """Compare u_alpha^lam against u_alpha^0 across lam; fit the constant of
    the lam/alpha error bound and detect the coincidence threshold."""
    sl = slater(inst.aset.with_lambda(0.0), u_hat)
    lams = sorted(lam_list, reverse=True)
    if sign == "plus" and lams and lams[0] > sl["lam_max"]:
        raise LambdaExceedsSlaterCap(
            f"lam = {lams[0]:g} exceeds tau/||u_hat||_inf = {sl['lam_max']:g}")
    op, y_d = inst.aset.op, inst.y_d
    base_set = inst.aset.with_lambda(0.0)
    base = solve(RegularizedProblem(op, y_d, base_set, alpha), tol=tol)
    g = op.grid
    records, errors, plus_feasible, minus_violation = [], [], [], []
    warm = base.u
    for lam in lams:
        aset = inst.aset.with_lambda(lam, sign)
        prob = RegularizedProblem(op, y_d, aset, alpha)
        t0 = time.perf_counter()
        sol = solve(prob, tol=tol, u0=warm)
        dt = time.perf_counter() - t0
        warm = sol.u
        records.append(_record(prob, sol, inst, 0.0, dt))
        errors.append(wnorm(g, sol.u.values - base.u.values))
        rep0 = feasibility(sol.u, base_set)
        if sign == "plus":
            plus_feasible.append(bool(rep0.feasible))
        else:
            idx = inst.aset.state.region.indices
            cap = lam * float(np.max(np.abs(sol.u.values[idx])))
            viol = max(0.0, -rep0.margin_state)
            minus_violation.append(bool(viol <= cap + 10 * tol))
    scaled = [e * alpha / lam for e, lam in zip(errors, lams) if lam > 0]
    c_fit = max(scaled) if scaled else 0.0
    lam_coincide = 0.0
    if inst.margins.margin_state > 0:
        # largest lam such that it and every smaller lam coincide with lam = 0
        flags = [e <= 10 * tol for e in errors]
        if flags and flags[-1]:
            dirty = [i for i, f in enumerate(flags) if not f]
            lam_coincide = lams[max(dirty) + 1] if dirty else lams[0]
    return {"records": records, "errors": errors, "c_fit": c_fit,
            "c_scaled": scaled, "lam_coincide": lam_coincide,
            "slater": sl, "base": base,
            "plus_feasible": plus_feasible, "minus_violation": minus_violation}


def total_error_study(inst: ManufacturedInstance, alpha_list: Sequence[float],
                      lam_cap: float, sign: str = "plus",
                      tol: float = 1e-8) -> dict:
    """Joint sweep with lam = min(lam_cap, alpha) per alpha; fits the total
    error order and checks the triangle split against the lam = 0 solve."""
    alphas = list(alpha_list)
    op, y_d = inst.aset.op, inst.y_d
    records, triangle = [], []
    warm = warm0 = None
    for a in alphas:
        lam = min(lam_cap, a)
        prob = RegularizedProblem(op, y_d, inst.aset.with_lambda(lam, sign), a)
        prob0 = RegularizedProblem(op, y_d, inst.aset.with_lambda(0.0), a)
        t0 = time.perf_counter()
        sol = solve(prob, tol=tol, u0=warm)
        dt = time.perf_counter() - t0
        sol0 = solve(prob0, tol=tol, u0=warm0)
        warm, warm0 = sol.u, sol0.u
        records.append(_record(prob, sol, inst, 0.0, dt))
        g = op.grid
        lhs = wnorm(g, inst.u_bar.values - sol.u.values)
        rhs = wnorm(g, inst.u_bar.values - sol0.u.values) \
            + wnorm(g, sol0.u.values - sol.u.values)
        triangle.append(bool(lhs <= rhs + 10 * tol))
    fit = fit_rate([r.alpha for r in records], [r.err_u for r in records], tol)
    return {"records": records, "fit": fit, "triangle_checks": triangle}


def alpha_continuity_check(op, y_d: GridFunction, aset: AdmissibleSet,
                           pairs: Sequence[Tuple[float, float]],
                           tol: float = 1e-8) -> List[bool]:
    """Check ||u_beta - u_alpha|| <= (|alpha-beta|/beta) ||u_alpha|| + 20 tol."""
    out = []
    for a, b in pairs:
        ua = solve(RegularizedProblem(op, y_d, aset, a), tol=tol).u
        ub = solve(RegularizedProblem(op, y_d, aset, b), tol=tol).u
        lhs = wnorm(op.grid, ub.values - ua.values)
        out.append(bool(lhs <= abs(a - b) / b * ua.norm() + 20 * tol))
    return out


def records_to_csv(records: Sequence[SweepRecord],
                   deterministic: bool = True) -> str:
    """Fixed-column CSV with 17 significant digits and LF line endings.

    deterministic=True zeroes the wall-time column so repeated runs are
    byte-identical; measured timings live in the JSON report instead.
    """
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        seconds = 0.0 if deterministic else r.seconds
        vals = (r.alpha, r.lam, r.delta, r.err_u, r.err_Su, r.margin_lo,
                r.margin_up, r.margin_state, float(r.n_active_lo),
                float(r.n_active_up), float(r.n_active_state),
                float(r.iters), seconds)
        lines.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + "\n"
