"""Constant-step time integrators for split systems u' = Lu + N(t, u).

Implemented schemes:

  IMEXP_RK1   u_{n+1} = u_n + h (I - hL)^{-1} F(u_n)
  IMEXP_RK2   stage  U = u_n + (h/2) w,  w = (I - h/2 L)^{-1} F(u_n)
              update u_{n+1} = u_n + h w + 2h phi_2(hL) (N(U) - N(u_n))
  HIMEXP2J    as IMEXP_RK2 with phi_2(h J_n),  J_n v = Lv + N'(u_n)v
  HIMEXP2N    as IMEXP_RK2 with phi_2(h N'_n)
  SBDF2       (3I - 2hL) U_{n+1} = 4 u_n - u_{n-1}
                                   + 2h (2 N(t_n, u_n) - N(t_{n-1}, u_{n-1}))

The linear solves run through restarted GMRES against the scheme's shifted
operator, assembled once per run together with its optional IC(0)
preconditioner.  All phi_2 products go through the adaptive Krylov engine
regardless of problem size, so work counters stay comparable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import krylov
from .krylov import (ConvergenceError, GmresConfig, KrylovConfig,
                     LinearOperator, gmres_solve, ichol_zero_fill,
                     phi_times_vector)
from .sparse_ops import max_norm, shift_identity

BLOWUP_THRESHOLD = 1e10


class BlowUpError(RuntimeError):
    """State exceeded the blow-up threshold; distinct from solver failure."""

    def __init__(self, message, t=None, step=None):
        super().__init__(message)
        self.t = t
        self.step = step


class IntegratorKind(str, Enum):
    IMEXP_RK1 = "imexprk1"
    IMEXP_RK2 = "imexprk2"
    HIMEXP2J = "himexp2j"
    HIMEXP2N = "himexp2n"
    SBDF2 = "sbdf2"


SECOND_ORDER_KINDS = (IntegratorKind.IMEXP_RK2, IntegratorKind.HIMEXP2J,
                      IntegratorKind.HIMEXP2N, IntegratorKind.SBDF2)


@dataclass
class IntegratorConfig:
    kind: IntegratorKind
    h: float
    t_end: float
    t0: float = 0.0
    gmres: GmresConfig = field(default_factory=GmresConfig)
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    use_preconditioner: bool = False
    sbdf_startup: str = "imexprk2"  # or "imex_euler"

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size must be positive")
        steps = (self.t_end - self.t0) / self.h
        if self.t_end < self.t0 or abs(steps - round(steps)) > 1e-8 * max(1, steps):
            raise ValueError("(t_end - t0)/h must be a nonnegative integer")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.h))


@dataclass
class StepContext:
    u: np.ndarray
    t: float
    u_prev: Optional[np.ndarray] = None  # SBDF2 only
    t_prev: Optional[float] = None


@dataclass
class RunStats:
    steps: int = 0
    spmv_count: int = 0
    gmres_iters_total: int = 0
    krylov_matvecs_total: int = 0
    n_evals: int = 0
    jv_evals: int = 0
    wall_time: float = 0.0

    @property
    def total_work(self) -> int:
        return self.spmv_count + self.gmres_iters_total + self.krylov_matvecs_total


class _SpmvCell:
    """List-like cell backing LinearOperator counters with RunStats."""

    def __init__(self, stats: RunStats):
        self.stats = stats

    def __getitem__(self, i):
        return self.stats.spmv_count

    def __setitem__(self, i, v):
        self.stats.spmv_count = v


class _Workspace:
    """Per-run shifted operator, preconditioner, and counters."""

    def __init__(self, sys, cfg: IntegratorConfig, stats: RunStats):
        self.sys = sys
        self.cfg = cfg
        self.stats = stats
        counter = _SpmvCell(stats)
        self._counter = counter
        self.L_op = LinearOperator.from_sparse(sys.L, counter=counter)

        h = cfg.h
        kind = cfg.kind
        if kind == IntegratorKind.IMEXP_RK1:
            alpha, self.rhs_scale = h, 1.0
        elif kind == IntegratorKind.SBDF2:
            # 3I - 2hL = 3 (I - (2h/3) L); solve with b/3
            alpha, self.rhs_scale = 2.0 * h / 3.0, 1.0 / 3.0
        else:
            alpha, self.rhs_scale = 0.5 * h, 1.0
        self.shift = shift_identity(sys.L, alpha)
        self.shift_op = LinearOperator.from_sparse(self.shift, counter=counter)
        self.gmres_cfg = cfg.gmres
        if cfg.use_preconditioner:
            try:
                factor = ichol_zero_fill(self.shift)
            except krylov.FactorizationError:
                factor = None  # fall back to unpreconditioned GMRES
            self.gmres_cfg = GmresConfig(tol=cfg.gmres.tol,
                                         restart=cfg.gmres.restart,
                                         max_iters=cfg.gmres.max_iters,
                                         preconditioner=factor)
        self.warm = None  # previous linear-solve solution for warm starts

    def eval_N(self, t, u):
        self.stats.n_evals += 1
        return self.sys.N(t, u)

    def eval_F(self, t, u, n_of_u=None):
        if n_of_u is None:
            n_of_u = self.eval_N(t, u)
        return self.L_op(u) + n_of_u

    def solve(self, b, x0=None):
        if not np.all(np.isfinite(b)):
            # overflow in N(u) means the state is exploding, not the solver
            raise BlowUpError("non-finite right-hand side (state overflow)")
        x, iters, _ = gmres_solve(self.shift_op, b * self.rhs_scale, x0=x0,
                                  cfg=self.gmres_cfg)
        self.stats.gmres_iters_total += iters
        self.warm = x
        return x

    def phi2(self, op_kind, u_n, d):
        h = self.cfg.h
        if op_kind == "L":
            op = self.L_op
        elif op_kind == "J":
            def apply_J(v):
                self.stats.jv_evals += 1
                return self.L_op(v) + self.sys.jv(u_n, v)
            op = LinearOperator(self.sys.dim, apply_J)
        else:  # "Nprime"
            def apply_Np(v):
                self.stats.jv_evals += 1
                return self.sys.jv(u_n, v)
            op = LinearOperator(self.sys.dim, apply_Np)
        if not np.all(np.isfinite(d)):
            raise BlowUpError("non-finite stage defect (state overflow)")
        outcome = phi_times_vector(op, 2, d, h, self.cfg.krylov)
        self.stats.krylov_matvecs_total += outcome.total_matvecs
        return outcome.result


def _make_workspace(sys, cfg, stats=None):
    return _Workspace(sys, cfg, stats if stats is not None else RunStats())


def step_imexprk1(ctx: StepContext, sys, cfg: IntegratorConfig, ws=None):
    ws = ws or _make_workspace(sys, cfg)
    f = ws.eval_F(ctx.t, ctx.u)
    x = ws.solve(f, x0=ws.warm)
    return ctx.u + cfg.h * x


def _step_rk2_family(ctx, sys, cfg, ws, op_kind):
    h = cfg.h
    n0 = ws.eval_N(ctx.t, ctx.u)
    f = ws.eval_F(ctx.t, ctx.u, n_of_u=n0)
    w = ws.solve(f, x0=ws.warm)
    u_stage = ctx.u + 0.5 * h * w
    d = ws.eval_N(ctx.t + 0.5 * h, u_stage) - n0
    return ctx.u + h * w + 2.0 * h * ws.phi2(op_kind, ctx.u, d)


def step_imexprk2(ctx, sys, cfg, ws=None):
    return _step_rk2_family(ctx, sys, cfg, ws or _make_workspace(sys, cfg), "L")


def step_himexp2j(ctx, sys, cfg, ws=None):
    return _step_rk2_family(ctx, sys, cfg, ws or _make_workspace(sys, cfg), "J")


def step_himexp2n(ctx, sys, cfg, ws=None):
    return _step_rk2_family(ctx, sys, cfg, ws or _make_workspace(sys, cfg), "Nprime")


def step_sbdf2(ctx, sys, cfg, ws=None):
    if ctx.u_prev is None:
        raise ValueError("SBDF2 step requires the previous state in the context")
    ws = ws or _make_workspace(sys, cfg)
    h = cfg.h
    rhs = (4.0 * ctx.u - ctx.u_prev
           + 2.0 * h * (2.0 * ws.eval_N(ctx.t, ctx.u)
                        - ws.eval_N(ctx.t_prev, ctx.u_prev)))
    return ws.solve(rhs, x0=ctx.u)


_STEPPERS = {
    IntegratorKind.IMEXP_RK1: step_imexprk1,
    IntegratorKind.IMEXP_RK2: step_imexprk2,
    IntegratorKind.HIMEXP2J: step_himexp2j,
    IntegratorKind.HIMEXP2N: step_himexp2n,
}


def _check_state(u, t, step):
    if not np.all(np.isfinite(u)) or max_norm(u) > BLOWUP_THRESHOLD:
        raise BlowUpError(f"blow-up detected at t={t:.6g} (step {step})",
                          t=t, step=step)


def integrate(sys, cfg: IntegratorConfig, u0: np.ndarray):
    """Advance u0 over exactly (t_end - t0)/h constant steps.

    Returns (final state, RunStats).  Raises BlowUpError on instability and
    ConvergenceError on solver failure; the two are distinct so stability
    scans can tell them apart.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (sys.dim,):
        raise ValueError("initial state length does not match system dimension")
    stats = RunStats()
    start = time.perf_counter()
    ws = _Workspace(sys, cfg, stats)
    u = u0.copy()
    t = cfg.t0
    u_prev = None
    t_prev = None
    try:
        for step in range(cfg.n_steps):
            if cfg.kind == IntegratorKind.SBDF2:
                if u_prev is None:
                    u_next = _sbdf2_startup(u, t, sys, cfg, ws)
                else:
                    ctx = StepContext(u=u, t=t, u_prev=u_prev, t_prev=t_prev)
                    u_next = step_sbdf2(ctx, sys, cfg, ws)
            else:
                ctx = StepContext(u=u, t=t)
                u_next = _STEPPERS[cfg.kind](ctx, sys, cfg, ws)
            u_prev, t_prev = u, t
            u, t = u_next, cfg.t0 + (step + 1) * cfg.h
            stats.steps += 1
            _check_state(u, t, step + 1)
    finally:
        stats.wall_time = time.perf_counter() - start
    return u, stats


def _sbdf2_startup(u, t, sys, cfg, ws):
    """First SBDF2 step bootstrapped with a one-step self-starting scheme."""
    sub = IntegratorConfig(
        kind=(IntegratorKind.IMEXP_RK2 if cfg.sbdf_startup == "imexprk2"
              else IntegratorKind.IMEXP_RK1),
        h=cfg.h, t0=t, t_end=t + cfg.h, gmres=cfg.gmres, krylov=cfg.krylov,
        use_preconditioner=cfg.use_preconditioner)
    sub_ws = _Workspace(sys, sub, ws.stats)
    ctx = StepContext(u=u, t=t)
    if sub.kind == IntegratorKind.IMEXP_RK2:
        return step_imexprk2(ctx, sys, sub, sub_ws)
    return step_imexprk1(ctx, sys, sub, sub_ws)
