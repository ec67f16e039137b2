"""Homogeneous self-dual interior-point method with Nesterov-Todd scaling.

The solver works on the dual of :class:`~qkdfk.sdp.problem.SdpProblem`, written
as a cone program in the multipliers ``y``::

    minimize  cᵀy   subject to   h − G y = s ⪰ 0

with ``G y = σ Σ_j y_j A_j``, ``h = σ C`` and ``c = −σ b`` (``σ = +1`` for a
minimize primal, ``−1`` for maximize). The cone dual variable ``z`` is the
primal ``X``. Sign-restricted multipliers and 1×1 blocks form one
nonnegative-orthant cone; complex Hermitian blocks are embedded as real
symmetric blocks of twice the size.

Each iteration solves the Newton system of the self-dual embedding through
the Schur complement ``H_ij = Σ_k ⟨G_ik, Q_k G_jk Q_k⟩`` (one dense
Cholesky), with a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg

from qkdfk.sdp.problem import SdpProblem, SdpSolution, Sense, SolveStatus

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
STEP_FRACTION = 0.99
INFEASIBLE_RATIO = 1e-9
NEAR_OPTIMAL_TOL = 1e-5


def _embed(m: npt.NDArray) -> npt.NDArray[np.floating]:
    """Real symmetric image ``[[Re, −Im], [Im, Re]]`` of a Hermitian matrix."""
    re, im = np.real(m), np.imag(m)
    return np.block([[re, -im], [im, re]])


def _compress(m: npt.NDArray[np.floating], n: int) -> npt.NDArray[np.complexfloating]:
    """Hermitian ``X`` with ``Tr(A X) = ⟨embed(A), m⟩`` for every Hermitian ``A``."""
    return m[:n, :n] + m[n:, n:] + 1j * (m[n:, :n] - m[:n, n:])


def _sym(m: npt.NDArray) -> npt.NDArray:
    return (m + m.T) / 2


@dataclass
class _PsdCone:
    name: str
    dim: int
    is_complex: bool
    index: npt.NDArray[np.int_]
    F: npt.NDArray[np.floating]
    """Coefficients ``G_jk`` for ``j in index``, shape ``(p, n, n)``."""

    h: npt.NDArray[np.floating]

    @property
    def size(self) -> int:
        return self.h.shape[0]

    def apply(self, x: npt.NDArray) -> npt.NDArray:
        if self.index.size == 0:
            return np.zeros_like(self.h)
        return np.tensordot(x[self.index], self.F, axes=1)

    def adjoint_into(self, out: npt.NDArray, u: npt.NDArray) -> None:
        if self.index.size:
            np.add.at(out, self.index, self.F.reshape(self.index.size, -1) @ u.reshape(-1))


@dataclass
class _ConeData:
    psd: list[_PsdCone]
    lp_G: npt.NDArray[np.floating]
    lp_h: npt.NDArray[np.floating]
    lp_blocks: dict[str, int]
    """Row of the orthant cone holding each 1×1 block."""

    c: npt.NDArray[np.floating]

    @property
    def degree(self) -> int:
        return sum(p.size for p in self.psd) + self.lp_h.size


def _cone_data(problem: SdpProblem) -> _ConeData:
    sigma = 1.0 if problem.sense is Sense.MINIMIZE else -1.0
    m = problem.num_constraints
    c = -sigma * problem.rhs()
    per_block: dict[str, list[tuple[int, npt.NDArray]]] = {b.name: [] for b in problem.blocks}
    for j, con in enumerate(problem.constraints):
        for name, a in con.coefficients.items():
            per_block[name].append((j, a))

    psd: list[_PsdCone] = []
    lp_rows: list[npt.NDArray] = []
    lp_h: list[float] = []
    lp_blocks: dict[str, int] = {}
    for b in problem.blocks:
        cmat = problem.objective.get(b.name, np.zeros((b.dim, b.dim)))
        entries = per_block[b.name]
        if b.dim == 1:
            row = np.zeros(m)
            for j, a in entries:
                row[j] += sigma * float(np.real(a[0, 0]))
            lp_blocks[b.name] = len(lp_rows)
            lp_rows.append(row)
            lp_h.append(sigma * float(np.real(cmat[0, 0])))
            continue
        is_complex = np.iscomplexobj(cmat) or any(np.iscomplexobj(a) for _, a in entries)
        conv = _embed if is_complex else np.real
        size = 2 * b.dim if is_complex else b.dim
        index = np.array([j for j, _ in entries], dtype=int)
        F = (
            np.stack([sigma * conv(a) for _, a in entries])
            if entries
            else np.zeros((0, size, size))
        )
        psd.append(_PsdCone(b.name, b.dim, is_complex, index, F, sigma * conv(cmat)))

    for j in range(m):
        sign = problem.multiplier_sign(j)
        if sign:
            row = np.zeros(m)
            row[j] = -float(sign)
            lp_rows.append(row)
            lp_h.append(0.0)
    lp_G = np.array(lp_rows) if lp_rows else np.zeros((0, m))
    return _ConeData(psd, lp_G, np.array(lp_h, dtype=float), lp_blocks, c)


@dataclass
class _Scaling:
    R: list[npt.NDArray]
    Rinv: list[npt.NDArray]
    Q: list[npt.NDArray]
    lam: list[npt.NDArray]
    lp_R: npt.NDArray
    lp_Q: npt.NDArray
    lp_lam: npt.NDArray


class InteriorPointSolver:
    """Dense primal-dual path-following solver for :class:`SdpProblem`.

    ``solve`` never raises on convergence trouble; the returned status says
    what happened.
    """

    def __init__(
        self,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        scale: bool = True,
    ) -> None:
        if tol <= 0:
            raise ValueError(f"Solver tolerance must be positive, got {tol}")
        if max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {max_iter}")
        self.tol = tol
        self.max_iter = max_iter
        self.scale = scale

    # ------------------------------------------------------------------
    # Linear maps
    # ------------------------------------------------------------------

    def _G(self, x: npt.NDArray) -> tuple[list[npt.NDArray], npt.NDArray]:
        return [p.apply(x) for p in self._data.psd], self._data.lp_G @ x

    def _GT(self, u: list[npt.NDArray], u_lp: npt.NDArray) -> npt.NDArray:
        out = self._data.lp_G.T @ u_lp
        for cone, uk in zip(self._data.psd, u):
            cone.adjoint_into(out, uk)
        return out

    @staticmethod
    def _inner(
        a: list[npt.NDArray], a_lp: npt.NDArray, b: list[npt.NDArray], b_lp: npt.NDArray
    ) -> float:
        return float(sum(np.vdot(x, y) for x, y in zip(a, b)) + a_lp @ b_lp)

    def _Qmap(
        self, w: _Scaling, u: list[npt.NDArray], u_lp: npt.NDArray
    ) -> tuple[list, npt.NDArray]:
        return [q @ uk @ q for q, uk in zip(w.Q, u)], w.lp_Q * u_lp

    # ------------------------------------------------------------------
    # Scaling and Newton system
    # ------------------------------------------------------------------

    def _scaling(self, s: list, z: list, s_lp: npt.NDArray, z_lp: npt.NDArray) -> _Scaling:
        R, Rinv, Q, lam = [], [], [], []
        for sk, zk in zip(s, z):
            ls = np.linalg.cholesky(sk)
            lz = np.linalg.cholesky(zk)
            _, lk, vt = np.linalg.svd(lz.T @ ls)
            rk = (ls @ vt.T) / np.sqrt(lk)
            ls_inv = scipy.linalg.solve_triangular(ls, np.eye(ls.shape[0]), lower=True)
            rinv = (vt * np.sqrt(lk)[:, None]) @ ls_inv
            R.append(rk)
            Rinv.append(rinv)
            Q.append(_sym(rinv.T @ rinv))
            lam.append(lk)
        # orthant: W = sqrt(s/z) is applied once per side, so Q·u·Q is (z/s)·u
        lp_R = (s_lp / z_lp) ** 0.25
        return _Scaling(R, Rinv, Q, lam, lp_R, z_lp / s_lp, np.sqrt(s_lp * z_lp))

    def _schur(self, w: _Scaling) -> tuple[npt.NDArray, bool]:
        m = self._data.c.size
        H = self._data.lp_G.T @ (w.lp_Q[:, None] * self._data.lp_G)
        for cone, q in zip(self._data.psd, w.Q):
            p = cone.index.size
            if p == 0:
                continue
            qf = q[None, :, :] @ cone.F @ q[None, :, :]
            sub = cone.F.reshape(p, -1) @ qf.reshape(p, -1).T
            H[np.ix_(cone.index, cone.index)] += sub
        H = _sym(H)
        try:
            return scipy.linalg.cho_factor(H), True
        except np.linalg.LinAlgError:
            reg = 1e-13 * max(1.0, float(np.max(np.abs(np.diag(H)))))
            try:
                return scipy.linalg.cho_factor(H + reg * np.eye(m)), True
            except np.linalg.LinAlgError:
                return H, False

    # ------------------------------------------------------------------

    def solve(self, problem: SdpProblem) -> SdpSolution:
        self._data = data = _cone_data(problem)
        m = data.c.size
        c = data.c.copy()
        h = [p.h.copy() for p in data.psd]
        h_lp = data.lp_h.copy()

        beta_h = beta_c = 1.0
        if self.scale:
            beta_h = max(1.0, max((np.max(np.abs(x)) for x in h), default=0.0),
                         float(np.max(np.abs(h_lp), initial=0.0)))
            beta_c = max(1.0, float(np.max(np.abs(c), initial=0.0)))
            h = [x / beta_h for x in h]
            h_lp = h_lp / beta_h
            c = c / beta_c

        res_x0 = max(1.0, float(np.linalg.norm(c)))
        res_z0 = max(1.0, math.sqrt(sum(np.sum(x * x) for x in h) + h_lp @ h_lp))
        nu = data.degree

        x = np.zeros(m)
        s = [np.eye(p.size) for p in data.psd]
        z = [np.eye(p.size) for p in data.psd]
        s_lp = np.ones(h_lp.size)
        z_lp = np.ones(h_lp.size)
        tau = kappa = 1.0

        status = SolveStatus.NUMERICAL_FAILURE
        message = ""
        it = 0
        pres = dres = rel_gap = math.inf
        for it in range(self.max_iter + 1):
            gx, gx_lp = self._G(x)
            rx = self._GT(z, z_lp) + c * tau
            rz = [sk + gk - hk * tau for sk, gk, hk in zip(s, gx, h)]
            rz_lp = s_lp + gx_lp - h_lp * tau
            cx = float(c @ x)
            hz = self._inner(h, h_lp, z, z_lp)
            rt = kappa + cx + hz
            gap = self._inner(s, s_lp, z, z_lp)
            mu = (gap + tau * kappa) / (nu + 1)

            nrx = float(np.linalg.norm(rx))
            nrz = math.sqrt(sum(np.sum(r * r) for r in rz) + rz_lp @ rz_lp)
            pres = nrz / tau / res_z0
            dres = nrx / tau / res_x0
            pcost, dcost = cx / tau, -hz / tau
            rel_gap = abs(pcost - dcost) / (1.0 + abs(pcost))
            logger.debug(
                "it %3d  pcost % .8e  dcost % .8e  gap %.2e  pres %.2e  dres %.2e  k/t %.2e",
                it, pcost, dcost, gap / tau**2, pres, dres, kappa / tau,
            )
            if pres <= self.tol and dres <= self.tol and rel_gap <= self.tol:
                status = SolveStatus.OPTIMAL
                break
            # certificates use the tau-free residuals G^T z and s + G x
            hrx = float(np.linalg.norm(self._GT(z, z_lp)))
            hrz = math.sqrt(
                sum(np.sum((sk + gk) ** 2) for sk, gk in zip(s, gx))
                + float(np.sum((s_lp + gx_lp) ** 2))
            )
            if hz < 0 and hrx / res_x0 / -hz <= self.tol:
                status = SolveStatus.INFEASIBLE
                message = "dual program infeasible (primal certificate)"
                break
            if cx < 0 and hrz / res_z0 / -cx <= self.tol:
                status, message = SolveStatus.INFEASIBLE, "primal program infeasible (dual ray)"
                break
            if tau / kappa < INFEASIBLE_RATIO:
                status, message = SolveStatus.INFEASIBLE, f"tau/kappa fell below {INFEASIBLE_RATIO}"
                break
            if it == self.max_iter:
                break

            try:
                w = self._scaling(s, z, s_lp, z_lp)
            except np.linalg.LinAlgError:
                message = "iterate left the cone interior"
                break
            factor, ok = self._schur(w)
            if not ok:
                message = "Schur complement is singular"
                break

            qh, qh_lp = self._Qmap(w, h, h_lp)
            dx1 = scipy.linalg.cho_solve(factor, self._GT(qh, qh_lp) - c)
            g1, g1_lp = self._G(dx1)
            dz1, dz1_lp = self._Qmap(w, [a - b for a, b in zip(g1, h)], g1_lp - h_lp)
            denom_base = -kappa / tau + float(c @ dx1) + self._inner(h, h_lp, dz1, dz1_lp)

            def direction(eta: float, r5: list, r5_lp: npt.NDArray, r6: float) -> tuple:
                t = [2.0 * r / (lk[:, None] + lk[None, :]) for r, lk in zip(r5, w.lam)]
                t_lp = r5_lp / w.lp_lam
                t0 = [(1 - eta) * rk + rr @ tk @ rr.T for rk, rr, tk in zip(rz, w.R, t)]
                t0_lp = (1 - eta) * rz_lp + w.lp_R**2 * t_lp
                q0, q0_lp = self._Qmap(w, t0, t0_lp)
                dx0 = scipy.linalg.cho_solve(factor, -(1 - eta) * rx - self._GT(q0, q0_lp))
                g0, g0_lp = self._G(dx0)
                dz0, dz0_lp = self._Qmap(w, [a + b for a, b in zip(g0, t0)], g0_lp + t0_lp)
                num = -(1 - eta) * rt - r6 / tau - float(c @ dx0)
                num -= self._inner(h, h_lp, dz0, dz0_lp)
                dtau = num / denom_base
                dx = dx0 + dtau * dx1
                dz = [_sym(a + dtau * b) for a, b in zip(dz0, dz1)]
                dz_lp = dz0_lp + dtau * dz1_lp
                gd, gd_lp = self._G(dx)
                ds = [_sym(-(1 - eta) * rk - gk + hk * dtau) for rk, gk, hk in zip(rz, gd, h)]
                ds_lp = -(1 - eta) * rz_lp - gd_lp + h_lp * dtau
                dkappa = (r6 - kappa * dtau) / tau
                return dx, ds, ds_lp, dz, dz_lp, dtau, dkappa

            def scaled(ds: list, ds_lp: npt.NDArray, dz: list, dz_lp: npt.NDArray) -> tuple:
                sh = [_sym(ri @ d @ ri.T) for ri, d in zip(w.Rinv, ds)]
                zh = [_sym(rr.T @ d @ rr) for rr, d in zip(w.R, dz)]
                return sh, ds_lp / w.lp_R**2, zh, dz_lp * w.lp_R**2

            def max_step(sh: list, sh_lp: npt.NDArray, zh: list, zh_lp: npt.NDArray,
                         dtau: float, dkappa: float) -> float:
                ratios = [0.0]
                for lk, a, b in zip(w.lam, sh, zh):
                    inv = 1.0 / np.sqrt(lk)
                    for d in (a, b):
                        scaled = inv[:, None] * d * inv[None, :]
                        ratios.append(-float(np.linalg.eigvalsh(scaled)[0]))
                if sh_lp.size:
                    ratios.append(float(np.max(-sh_lp / w.lp_lam)))
                    ratios.append(float(np.max(-zh_lp / w.lp_lam)))
                ratios.append(-dtau / tau)
                ratios.append(-dkappa / kappa)
                worst = max(ratios)
                return math.inf if worst <= 0 else 1.0 / worst

            # predictor
            r5a = [-np.diag(lk**2) for lk in w.lam]
            r5a_lp = -(w.lp_lam**2)
            _, dsa, dsa_lp, dza, dza_lp, dtaua, dkappaa = direction(0.0, r5a, r5a_lp, -tau * kappa)
            sha, sha_lp, zha, zha_lp = scaled(dsa, dsa_lp, dza, dza_lp)
            alpha_a = min(1.0, max_step(sha, sha_lp, zha, zha_lp, dtaua, dkappaa))
            sigma = (1.0 - alpha_a) ** 3

            # corrector
            r5 = [
                -np.diag(lk**2) + sigma * mu * np.eye(lk.size) - (a @ b + b @ a) / 2
                for lk, a, b in zip(w.lam, sha, zha)
            ]
            r5_lp = -(w.lp_lam**2) + sigma * mu - sha_lp * zha_lp
            r6 = -tau * kappa + sigma * mu - dtaua * dkappaa
            dx, ds, ds_lp, dz, dz_lp, dtau, dkappa = direction(sigma, r5, r5_lp, r6)
            sh, sh_lp, zh, zh_lp = scaled(ds, ds_lp, dz, dz_lp)
            alpha = min(1.0, STEP_FRACTION * max_step(sh, sh_lp, zh, zh_lp, dtau, dkappa))
            if alpha < 1e-12:
                message = "step length collapsed"
                break

            x = x + alpha * dx
            s = [_sym(a + alpha * b) for a, b in zip(s, ds)]
            z = [_sym(a + alpha * b) for a, b in zip(z, dz)]
            s_lp = s_lp + alpha * ds_lp
            z_lp = z_lp + alpha * dz_lp
            tau += alpha * dtau
            kappa += alpha * dkappa

        if status is SolveStatus.NUMERICAL_FAILURE and max(pres, dres, rel_gap) <= NEAR_OPTIMAL_TOL:
            status = SolveStatus.NEAR_OPTIMAL
            logger.warning(
                "SDP %s stopped near-optimal after %d iterations (%s)",
                problem.name or "<unnamed>", it, message or "iteration limit",
            )
        elif status is SolveStatus.NUMERICAL_FAILURE and not message:
            message = f"no convergence in {self.max_iter} iterations"

        y = x / tau * beta_h
        primal: dict[str, npt.NDArray] = {}
        for cone, zk in zip(data.psd, z):
            xk = zk / tau * beta_c
            primal[cone.name] = _compress(xk, cone.dim) if cone.is_complex else xk
        for name, row in data.lp_blocks.items():
            primal[name] = np.array([[z_lp[row] / tau * beta_c]])

        slacks = problem.dual_slacks(y)
        dual_res = max(
            [max(0.0, -float(np.linalg.eigvalsh(sk)[0])) for sk in slacks.values()]
            + [max(0.0, -problem.multiplier_sign(j) * y[j]) for j in range(m)]
        )
        return SdpSolution(
            primal_blocks=primal,
            dual_multipliers=y,
            primal_value=problem.primal_objective(primal),
            dual_value=problem.dual_objective(y),
            status=status,
            iterations=it,
            primal_residual=problem.primal_violation(primal),
            dual_residual=dual_res,
            message=message,
        )


def solve(
    problem: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> SdpSolution:
    """Solve ``problem`` with :class:`InteriorPointSolver`."""
    solution = InteriorPointSolver(tol=tol, max_iter=max_iter).solve(problem)
    logger.debug(
        "SDP %s: %s in %d iterations, primal %.10g dual %.10g",
        problem.name or "<unnamed>", solution.status.value, solution.iterations,
        solution.primal_value, solution.dual_value,
    )
    return solution

