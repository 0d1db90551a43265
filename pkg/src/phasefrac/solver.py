"""Time stepping: Newmark kinematics, Newton momentum solve, staggered passes.

One `Simulation` owns the mesh data, material, constraints and persistent
integration-point state.  Each time step alternates a Newton solve of the
momentum system (phase field frozen) with a linear solve of the phase-field
system (driving-force history refreshed from the converged eigenstrains),
up to ``max_passes``, then commits: history update, Newmark rates, record.

Newton reuses the last LU factorization as long as the residual keeps
contracting and refactorizes otherwise, so elastic stretches of a run cost
one factorization while fracturing steps fall back to full Newton.  All
decisions depend only on computed values, keeping reruns bit-identical.
"""

import time as _time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    Constraints,
    ElementData,
    IPBatch,
    SystemVectors,
    assemble_vector,
    momentum_batch,
    phasefield_batch,
)
from .constitutive import MaterialParams


class SolverError(RuntimeError):
    pass


class NewtonFailure(RuntimeError):
    pass


@dataclass
class SolverConfig:
    newmark_beta: float = 0.5625
    newmark_gamma: float = 1.0
    max_passes: int = 5
    newton_tol: float = 1e-8
    newton_max_iter: int = 25
    stagger_tol: float = 1e-6
    dt: Optional[float] = None
    n_steps: int = 0
    cutback_factor: float = 0.5
    max_cutbacks: int = 8
    reuse_lu: bool = True

    def __post_init__(self):
        for name in ("newton_tol", "stagger_tol", "cutback_factor"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class StepRecord:
    step: int
    time: float
    applied: float
    reaction: float
    passes: int
    newton_iters: int
    crack_length: float = 0.0


def newmark_update(u_new, u_old, v_old, a_old, dt, beta, gamma):
    """New rates from the displacement update (standard Newmark relations)."""
    a_new = (u_new - u_old - dt * v_old - dt * dt * (0.5 - beta) * a_old) / (beta * dt * dt)
    v_new = v_old + dt * ((1.0 - gamma) * a_old + gamma * a_new)
    return v_new, a_new


def linear_solve(A, b: np.ndarray) -> np.ndarray:
    """Sparse direct solve with a residual contract of 1e-10 relative."""
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError(
            f"sparse factorization failed ({exc}); the operator is likely singular "
            "- check that the boundary conditions remove all rigid modes"
        )
    x = lu.solve(b)
    bn = np.linalg.norm(b)
    if bn > 0.0:
        rel = np.linalg.norm(A @ x - b) / bn
        if not np.isfinite(rel) or rel > 1e-10:
            raise SolverError(f"direct solve residual {rel:.3e} exceeds 1e-10")
    return x


@dataclass
class Monitors:
    """Run-level invariant tracking, updated at every commit."""

    phi_min: float = 0.0
    phi_max: float = 0.0
    history_decrease: float = 0.0  # most negative committed history increment
    surface_margin: float = -np.inf  # max of (projection - strength - kappa_t K lam)
    tr_eta_min: float = np.inf
    newton_iters_total: int = 0
    passes_total: int = 0
    cutbacks_total: int = 0


class Simulation:
    """Coupled displacement / phase-field time stepping on one mesh."""

    def __init__(
        self,
        eldata: ElementData,
        params: MaterialParams,
        config: SolverConfig,
        constraints: Constraints,
        f_ext: Optional[np.ndarray] = None,
        bc_update: Optional[Callable[[Constraints, float], float]] = None,
        reaction_set: Optional[tuple] = None,
    ):
        self.eldata = eldata
        self.params = params
        self.config = config
        self.constraints = constraints
        self.f_ext = np.zeros(eldata.dofmap.n_udof) if f_ext is None else f_ext
        self.bc_update = bc_update
        self.reaction_set = reaction_set

        self.state = SystemVectors.zeros(eldata.dofmap)
        nel, nip = eldata.n_elements, eldata.nip
        self.history = np.zeros((nel, nip))
        self.warm = np.zeros((nel, nip, 2))
        self.time = 0.0
        self.step_count = 0
        self.records: List[StepRecord] = []
        self.monitors = Monitors()
        self.last_ip: Optional[IPBatch] = None

        self._lu = None
        self._lu_age = 0
        self._phi_lu = None
        self._phi_F = None
        self._step_ref = 0.0

    # -- linear algebra helpers -------------------------------------------

    def _free(self):
        return self.eldata.reduced_pattern(self.constraints.free_mask)

    def _factorize(self, K_ff):
        self._lu = spla.splu(sp.csc_matrix(K_ff), permc_spec="MMD_AT_PLUS_A")
        self._lu_age = 0

    # -- momentum Newton ---------------------------------------------------

    def newton_displacement(self, dt: Optional[float]):
        """Solve the momentum system at fixed phase field.

        Returns (ip_results, iterations).  Iterations counts linear solves;
        a purely elastic increment needs one.
        """
        cfg = self.config
        pattern, free_idx, _ = self._free()
        st = self.state
        prev_rn = None
        for it in range(cfg.newton_max_iter + 1):
            if dt is not None:
                v, a = newmark_update(
                    st.u, self._u_old, self._v_old, self._a_old, dt, cfg.newmark_beta, cfg.newmark_gamma
                )
            else:
                v = np.zeros_like(st.u)
                a = np.zeros_like(st.u)
            Ke, re, ip = momentum_batch(
                self.eldata, self.params, st.u, v, a, st.phi, dt, cfg.newmark_beta, cfg.newmark_gamma
            )
            r = assemble_vector(self.eldata, re) - self.f_ext
            rf = r[free_idx]
            rn = float(np.linalg.norm(rf))
            if it == 0:
                ref = max(rn, float(np.linalg.norm(self.f_ext[free_idx])), self._step_ref)
                self._step_ref = max(self._step_ref, ref)
            if rn <= cfg.newton_tol * max(self._step_ref, 1e-300) or rn == 0.0:
                st.v, st.a = v, a
                self._last_residual = r
                return ip, it
            if it == cfg.newton_max_iter:
                raise NewtonFailure(f"momentum Newton stalled at residual {rn:.3e} (ref {self._step_ref:.3e})")

            stalled = prev_rn is not None and rn > 0.5 * prev_rn
            if self._lu is None or not cfg.reuse_lu or stalled or self._lu_age > 40:
                K_ff = pattern.assemble(Ke)
                self._factorize(K_ff)
            du = self._lu.solve(-rf)
            if not np.all(np.isfinite(du)):
                raise NewtonFailure("non-finite Newton update")
            self._lu_age += 1
            st.u[free_idx] += du
            prev_rn = rn
        raise NewtonFailure("unreachable")

    # -- phase field ---------------------------------------------------------

    def solve_phasefield(self, F_ip: np.ndarray) -> np.ndarray:
        """Linear SPD solve of the phase-field system for given driving force."""
        if (
            self._phi_lu is not None
            and self._phi_F is not None
            and np.array_equal(F_ip, self._phi_F)
        ):
            lu = self._phi_lu
            A = None
        else:
            A, self._phi_b = phasefield_batch(self.eldata, self.params, F_ip)
            try:
                lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise SolverError(f"phase-field factorization failed: {exc}")
            self._phi_lu = lu
            self._phi_F = F_ip.copy()
        phi = lu.solve(self._phi_b)
        # tiny quadratic-interpolation undershoots are clipped; overshoots
        # above one would indicate a genuine bug and are left visible
        np.clip(phi, 0.0, None, out=phi)
        return phi

    # -- staggered step ------------------------------------------------------

    def _commit_monitors(self, ip: IPBatch, F_new: np.ndarray):
        from .constitutive import batch_surface_check

        m = self.monitors
        m.phi_min = min(m.phi_min, float(self.state.phi.min()))
        m.phi_max = max(m.phi_max, float(self.state.phi.max()))
        m.history_decrease = min(m.history_decrease, float((F_new - self.history).min()))
        margin, tr_eta = batch_surface_check(
            ip.eps.reshape(-1, 6),
            ip.sigma.reshape(-1, 6),
            ip.lam.reshape(-1, 2),
            ip.phi.reshape(-1),
            self.params,
        )
        m.surface_margin = max(m.surface_margin, margin)
        m.tr_eta_min = min(m.tr_eta_min, tr_eta)

    def step(self, dt: float, applied: float) -> StepRecord:
        """One staggered time step at already-applied boundary values."""
        cfg = self.config
        st = self.state
        self._u_old = st.u.copy()
        self._v_old = st.v.copy()
        self._a_old = st.a.copy()
        self._step_ref = 0.0

        phi_prev = st.phi.copy()
        u_prev = None
        total_iters = 0
        passes = 0
        ip = None
        F_trial = self.history
        for p in range(1, cfg.max_passes + 1):
            passes = p
            ip, iters = self.newton_displacement(dt)
            total_iters += iters
            F_trial = np.maximum(self.history, ip.driving_force)
            phi_new = self.solve_phasefield(F_trial)
            dphi = float(np.max(np.abs(phi_new - phi_prev)))
            phi_scale = max(float(np.max(np.abs(phi_new))), 1e-6)
            phi_ok = dphi <= cfg.stagger_tol * phi_scale
            if u_prev is not None:
                du = float(np.max(np.abs(st.u - u_prev)))
                u_scale = max(float(np.max(np.abs(st.u))), 1e-30)
                u_ok = du <= cfg.stagger_tol * u_scale
            else:
                u_ok = phi_ok  # first pass: unchanged phi implies unchanged u next pass
            phi_prev = phi_new
            u_prev = st.u.copy()
            st.phi = phi_new
            if phi_ok and u_ok:
                break

        # commit
        self._commit_monitors(ip, F_trial)
        self.history = F_trial
        self.warm = ip.lam.copy()
        st.v, st.a = newmark_update(
            st.u, self._u_old, self._v_old, self._a_old, dt, cfg.newmark_beta, cfg.newmark_gamma
        )
        self.time += dt
        self.step_count += 1
        self.monitors.newton_iters_total += total_iters
        self.monitors.passes_total += passes

        reaction = 0.0
        if self.reaction_set is not None:
            reaction = self.constraints.reaction(self._last_residual + self.f_ext, *self.reaction_set)
        rec = StepRecord(self.step_count, self.time, applied, reaction, passes, total_iters)
        self.records.append(rec)
        return rec

    def advance(self, dt: float):
        """Advance one nominal step with cutback on Newton failure."""
        target = self.time + dt
        dt_try = dt
        cuts = 0
        out = []
        while self.time < target - 1e-12 * dt:
            dt_try = min(dt_try, target - self.time)
            applied = self.bc_update(self.constraints, self.time + dt_try) if self.bc_update else 0.0
            self.constraints.apply_values(self.state.u)
            u_save = self.state.u.copy()
            phi_save = self.state.phi.copy()
            try:
                out.append(self.step(dt_try, applied))
            except NewtonFailure:
                self.state.u = u_save
                self.state.phi = phi_save
                self._lu = None
                cuts += 1
                self.monitors.cutbacks_total += 1
                if cuts > self.config.max_cutbacks:
                    raise SolverError(
                        f"step at t={self.time:.6g} failed after {self.config.max_cutbacks} cutbacks"
                    )
                dt_try *= self.config.cutback_factor
        return out

    def initialize_acceleration(self):
        """Consistent initial acceleration M a0 = f_ext - F_int(0)."""
        Ke, re, _ = momentum_batch(
            self.eldata, self.params, self.state.u, self.state.v, self.state.a, self.state.phi, None
        )
        r = assemble_vector(self.eldata, re) - self.f_ext
        M = self.eldata.u_pattern.assemble(self.eldata.Me)
        pattern, free_idx, _ = self._free()
        if len(free_idx) == self.eldata.dofmap.n_udof:
            self.state.a = linear_solve(M, -r)
        else:
            Mff = M[free_idx][:, free_idx]
            self.state.a[free_idx] = linear_solve(Mff, -r[free_idx])
