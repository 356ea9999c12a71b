"""Complex linear algebra kernels: resolvent norms, LU solves, GMRES, field of values."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

DEFAULT_SEED = 20240501
DENSE_LIMIT = 2000
SINGULAR_RTOL = 1e-14
SPARSE_LU_MIN = 200
STALL_WINDOW = 10


class SingularMatrixError(ArithmeticError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


def _as_dense(A) -> np.ndarray:
    if sp.issparse(A):
        return A.toarray().astype(complex)
    return np.asarray(A, dtype=complex)


def _as_csc(A) -> sp.csc_matrix:
    return sp.csc_matrix(A, dtype=complex)


# ---------------------------------------------------------------------------
# LU


class LUFactor:
    """Sparse LU with partial pivoting (SuperLU)."""

    def __init__(self, A):
        A = _as_csc(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("LU needs a square matrix")
        self.shape = A.shape
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        u = self._lu.U.diagonal()
        if np.any(u == 0):
            raise SingularMatrixError("exactly singular pivot")

    def solve(self, rhs: np.ndarray, trans: str = "N") -> np.ndarray:
        return self._lu.solve(np.asarray(rhs, dtype=complex), trans=trans)


def lu_factor(A) -> LUFactor:
    return LUFactor(A)


def lu_solve(handle: LUFactor, rhs: np.ndarray, trans: str = "N") -> np.ndarray:
    return handle.solve(rhs, trans=trans)


# ---------------------------------------------------------------------------
# largest eigenvalue of a Hermitian positive operator, Lanczos with full
# reorthogonalisation


def lanczos_max(apply: Callable[[np.ndarray], np.ndarray], n: int, seed: int = DEFAULT_SEED,
                tol: float = 1e-10, maxiter: int = 300) -> tuple[float, bool]:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    m = min(maxiter, n)
    V = np.empty((m + 1, n), dtype=complex)
    V[0] = v
    alpha = np.zeros(m)
    beta = np.zeros(m)
    theta = 0.0
    history = []
    for k in range(m):
        w = apply(V[k])
        if not np.all(np.isfinite(w)):
            return math.inf, True
        alpha[k] = np.vdot(V[k], w).real
        w = w - alpha[k] * V[k] - (beta[k - 1] * V[k - 1] if k else 0)
        basis = V[:k + 1]
        w -= basis.T @ (basis.conj() @ w)
        w -= basis.T @ (basis.conj() @ w)
        b = np.linalg.norm(w)
        T = np.diag(alpha[:k + 1]) + np.diag(beta[:k], 1) + np.diag(beta[:k], -1)
        evals, evecs = np.linalg.eigh(T)
        theta = evals[-1]
        history.append(theta)
        if b * abs(evecs[-1, -1]) <= tol * theta or b <= 1e-300 or k + 1 == n:
            return theta, True
        # clustered top eigenvalues: the Ritz value settles long before the vector
        if k >= STALL_WINDOW and theta - history[-STALL_WINDOW - 1] <= tol * theta:
            return theta, True
        beta[k] = b
        V[k + 1] = w / b
    return theta, False


# ---------------------------------------------------------------------------
# operators whose pseudospectra we compute


class ShiftOperator:
    """The matrix C = A, or C = A B^{-1} when ``B`` is given.

    Shifted smallest singular values sigma_min(zI - C) are evaluated by dense
    SVD for tiny problems, by a complex Schur form plus inverse Lanczos for
    moderate ones, and by one sparse LU per shift above ``dense_limit``.
    """

    def __init__(self, A, B=None, dense_limit: int = DENSE_LIMIT, seed: int = DEFAULT_SEED):
        self.A = A
        self.B = B
        self.n = A.shape[0]
        if B is not None and B.shape != A.shape:
            raise ValueError("A and B must have the same shape")
        self.dense_limit = dense_limit
        self.seed = seed
        self._lock = threading.Lock()
        self._dense = None
        self._schur = None
        self._fro = None
        self._local = threading.local()
        self._Bcsc = _as_csc(B) if B is not None and sp.issparse(B) else None

    @property
    def is_dense(self) -> bool:
        return self.n <= self.dense_limit

    def dense(self) -> np.ndarray:
        with self._lock:
            if self._dense is None:
                A = _as_dense(self.A)
                if self.B is None:
                    self._dense = A
                else:
                    B = _as_dense(self.B)
                    try:
                        lu = sla.lu_factor(B)
                    except sla.LinAlgError as exc:
                        raise SingularMatrixError(str(exc)) from exc
                    if np.any(np.diag(lu[0]) == 0):
                        raise SingularMatrixError("preconditioner is singular")
                    # A B^{-1} = (B^{-T} A^T)^T
                    self._dense = sla.lu_solve(lu, A.T, trans=1).T.copy()
            return self._dense

    def schur(self) -> tuple[np.ndarray, np.ndarray]:
        C = self.dense()
        with self._lock:
            if self._schur is None:
                T, Z = sla.schur(C, output="complex")
                self._schur = (np.asfortranarray(T), Z)
            return self._schur

    def fro_norm(self) -> float:
        with self._lock:
            if self._fro is not None:
                return self._fro
        if self.B is None:
            val = float(spla.norm(self.A) if sp.issparse(self.A) else np.linalg.norm(self.A))
        elif self.is_dense or self._Bcsc is None:
            val = float(np.linalg.norm(self.dense()))
        else:
            # randomised estimate: E|C x|^2 = |C|_F^2 for standard complex x
            rng = np.random.default_rng(self.seed)
            lu = LUFactor(self._Bcsc)
            acc = 0.0
            for _ in range(4):
                x = (rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)) / math.sqrt(2)
                acc += np.linalg.norm(self.A @ lu.solve(x)) ** 2
            val = math.sqrt(acc / 4)
        with self._lock:
            self._fro = val
        return val

    def _blu(self) -> LUFactor:
        with self._lock:
            if getattr(self, "_b_lu", None) is None:
                self._b_lu = LUFactor(self._Bcsc if self._Bcsc is not None else self.B)
            return self._b_lu

    def _b_csr(self):
        with self._lock:
            if getattr(self, "_b_pair", None) is None:
                Bc = self._Bcsc.tocsr()
                self._b_pair = (Bc, Bc.conj().T.tocsr())
            return self._b_pair

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self.B is None:
            return self.A @ x
        if self._dense is not None:
            return self._dense @ x
        return self.A @ self._blu().solve(x)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        if self.B is None:
            return self.A.conj().T @ x
        if self._dense is not None:
            return self._dense.conj().T @ x
        return self._blu().solve(self.A.conj().T @ x, trans="H")

    # -- smallest singular value of zI - C -------------------------------

    def sigma_min(self, z: complex, method: str = "auto", tol: float = 1e-8,
                  maxiter: int = 1000) -> float:
        if method == "auto":
            method = self.default_method()
        if method == "svd":
            s = np.linalg.svd(z * np.eye(self.n) - self.dense(), compute_uv=False)[-1]
        elif method == "schur":
            s = self._sigma_schur(z, tol, maxiter)
        elif method == "lu":
            s = self._sigma_lu(z, tol, maxiter)
        else:
            raise ValueError(f"unknown method {method!r}")
        if s < SINGULAR_RTOL * self.fro_norm():
            return 0.0
        return float(s)

    def default_method(self) -> str:
        if self.n <= 64:
            return "svd"
        # per-shift sparse LU beats the O(n^2) triangular solves of the Schur
        # route on finite element matrices
        if sp.issparse(self.A) and self.n > SPARSE_LU_MIN:
            return "lu"
        return "schur" if self.is_dense else "lu"

    def _sigma_schur(self, z, tol, maxiter) -> float:
        T, _ = self.schur()
        n = self.n
        work = getattr(self._local, "work", None)
        if work is None:
            work = np.asfortranarray(-T)
            self._local.work = work
        d = np.diag_indices(n)
        work[d] = z - T[d]
        if np.min(np.abs(work[d])) <= SINGULAR_RTOL * self.fro_norm():
            return 0.0

        def apply(v):
            y, info = lapack.ztrtrs(work, v, lower=0, trans=2)
            x, info2 = lapack.ztrtrs(work, y, lower=0, trans=0)
            if info or info2:
                return np.full(n, np.inf, dtype=complex)
            return x

        lam, ok = lanczos_max(apply, n, self.seed, tol, maxiter)
        if not ok:
            raise ConvergenceError(f"inverse Lanczos did not converge at z={z}", 1.0 / math.sqrt(lam))
        return 0.0 if lam == math.inf else 1.0 / math.sqrt(lam)

    def _sigma_lu(self, z, tol, maxiter) -> float:
        if self.B is None:
            S = z * sp.identity(self.n, dtype=complex, format="csc") - _as_csc(self.A)
        else:
            S = z * self._Bcsc - _as_csc(self.A)
        try:
            lu = LUFactor(S)
        except SingularMatrixError:
            return 0.0
        if self.B is None:
            def apply(v):
                return lu.solve(lu.solve(v, trans="H"))
        else:
            Bc, Bh = self._b_csr()

            def apply(v):
                return Bc @ lu.solve(lu.solve(Bh @ v, trans="H"))
        lam, ok = lanczos_max(apply, self.n, self.seed, tol, maxiter)
        if not ok:
            raise ConvergenceError(f"inverse Lanczos did not converge at z={z}", 1.0 / math.sqrt(lam))
        return 0.0 if lam == math.inf else 1.0 / math.sqrt(lam)

    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.schur()[0]).copy()


def as_operator(op) -> ShiftOperator:
    if isinstance(op, ShiftOperator):
        return op
    if isinstance(op, PreconditionedOperator):
        return op.shift_operator()
    return ShiftOperator(op)


@dataclass
class ResolventQuery:
    z: complex
    op: object  # matrix, ShiftOperator or PreconditionedOperator


def smallest_singular_value(q: ResolventQuery, method: str = "auto") -> float:
    """sigma_min(zI - C); 0.0 when the shifted matrix is numerically singular."""
    return as_operator(q.op).sigma_min(q.z, method=method)


def resolvent_norm(q: ResolventQuery, method: str = "auto") -> float:
    """|(zI - C)^{-1}|_2, or math.inf at (numerical) eigenvalues."""
    s = smallest_singular_value(q, method)
    return math.inf if s == 0.0 else 1.0 / s


# ---------------------------------------------------------------------------
# GMRES


@dataclass
class GmresRun:
    residual_history: np.ndarray
    iterations: int
    converged: bool
    solution: np.ndarray


def _givens(a: complex, b: complex) -> tuple[float, complex, complex]:
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, np.conj(b) / abs(b), abs(b)
    r = math.hypot(abs(a), abs(b))
    phase = a / abs(a)
    return abs(a) / r, phase * np.conj(b) / r, phase * r


def gmres(apply, b: np.ndarray, tol: float = 1e-6, maxiter: int = 1000) -> GmresRun:
    """Full (unrestarted) GMRES from a zero initial guess.

    Arnoldi by modified Gram-Schmidt with a second pass when the new vector
    keeps a component > 1e-8 along the basis; the Hessenberg least-squares
    problem is updated with complex Givens rotations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if maxiter < 1:
        raise ValueError("maxiter must be >= 1")
    matvec = apply if callable(apply) else (lambda x, A=apply: A @ x)
    b = np.asarray(b, dtype=complex)
    n = b.shape[0]
    beta = np.linalg.norm(b)
    if beta == 0:
        return GmresRun(np.array([0.0]), 0, True, np.zeros(n, dtype=complex))
    m = min(maxiter, n)
    V = np.zeros((m + 1, n), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m)
    sn = np.zeros(m, dtype=complex)
    g = np.zeros(m + 1, dtype=complex)
    g[0] = beta
    V[0] = b / beta
    history = [beta]
    converged = False
    k = 0
    for k in range(m):
        w = np.asarray(matvec(V[k]), dtype=complex)
        wnorm0 = np.linalg.norm(w)
        for j in range(k + 1):
            H[j, k] = np.vdot(V[j], w)
            w -= H[j, k] * V[j]
        hn = np.linalg.norm(w)
        if hn > 0:
            proj = V[:k + 1].conj() @ w
            if np.max(np.abs(proj)) > 1e-8 * hn:
                for j in range(k + 1):
                    c = np.vdot(V[j], w)
                    H[j, k] += c
                    w -= c * V[j]
                hn = np.linalg.norm(w)
        H[k + 1, k] = hn
        for j in range(k):
            t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -np.conj(sn[j]) * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = t
        cs[k], sn[k], H[k, k] = _givens(H[k, k], H[k + 1, k])
        H[k + 1, k] = 0.0
        g[k + 1] = -np.conj(sn[k]) * g[k]
        g[k] = cs[k] * g[k]
        res = abs(g[k + 1])
        breakdown = hn <= 1e-14 * max(wnorm0, 1e-300)
        if breakdown:
            res = 0.0
        history.append(res)
        if res <= tol * beta or breakdown:
            converged = True
            break
        V[k + 1] = w / hn
    iters = k + 1
    y = sla.solve_triangular(H[:iters, :iters], g[:iters])
    x = V[:iters].T @ y
    return GmresRun(np.array(history), iters, converged, x)


class PreconditionedOperator:
    """x -> A B^{-1} x with a cached LU of B."""

    def __init__(self, A, B):
        if A.shape != B.shape:
            raise ValueError("A and B must have the same shape")
        self.A = A
        self.B = B
        self.shape = A.shape
        self.lu = LUFactor(B)
        self._shift = None

    def __call__(self, x):
        return self.matvec(x)

    def matvec(self, x):
        return self.A @ self.lu.solve(x)

    def rmatvec(self, x):
        # (A B^{-1})^H x = B^{-H} A^H x
        return self.lu.solve(self.A.conj().T @ x, trans="H")

    def recover_solution(self, xt):
        return self.lu.solve(xt)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.rmatvec, dtype=complex)

    def shift_operator(self, dense_limit: int = DENSE_LIMIT) -> ShiftOperator:
        if self._shift is None:
            self._shift = ShiftOperator(self.A, self.B, dense_limit=dense_limit)
        return self._shift


def preconditioned_operator(A, B) -> PreconditionedOperator:
    return PreconditionedOperator(A, B)


# ---------------------------------------------------------------------------
# field of values


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise hull of complex points (monotone chain); collinear
    input collapses to its two endpoints."""
    pts = sorted(set((float(p.real), float(p.imag)) for p in np.asarray(points, dtype=complex)))
    if len(pts) <= 2:
        return np.array([complex(*p) for p in pts])

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array([complex(*p) for p in hull])


def polygon_distance(poly: np.ndarray, z) -> np.ndarray:
    """Distance from z to the convex polygon (ccw vertices); 0 inside."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    poly = np.asarray(poly, dtype=complex)
    if len(poly) == 1:
        return np.abs(z - poly[0])
    a = poly
    b = np.roll(poly, -1)
    if len(poly) == 2:
        a, b = poly[:1], poly[1:]
    d = b - a
    # point-to-segment distances, shape (len(z), edges)
    t = ((z[:, None] - a[None]) * np.conj(d)[None]).real / np.maximum(np.abs(d) ** 2, 1e-300)[None]
    t = np.clip(t, 0.0, 1.0)
    dist = np.abs(z[:, None] - (a[None] + t * d[None])).min(axis=1)
    if len(poly) >= 3:
        cr = (np.conj(d)[None] * (z[:, None] - a[None])).imag
        dist[np.all(cr >= 0, axis=1)] = 0.0
    return dist


@dataclass
class FovPolygon:
    """Support data of the field of values at equally spaced angles.

    ``support`` are boundary points x*Cx of the FOV, ``levels`` the maximal
    values of Re(exp(-i theta) z) over the FOV. ``points`` (hull of the
    support points) lies inside the FOV, ``outer`` (intersection of the
    supporting half-planes) contains it.
    """

    angles: np.ndarray
    support: np.ndarray
    levels: np.ndarray
    points: np.ndarray = field(init=False)
    outer: np.ndarray = field(init=False)

    def __post_init__(self):
        self.points = convex_hull(self.support)
        self.outer = self._outer()

    def _outer(self) -> np.ndarray:
        k = len(self.angles)
        verts = []
        for i in range(k):
            t1, t2 = self.angles[i], self.angles[(i + 1) % k]
            M = np.array([[math.cos(t1), math.sin(t1)], [math.cos(t2), math.sin(t2)]])
            x, y = np.linalg.solve(M, [self.levels[i], self.levels[(i + 1) % k]])
            verts.append(complex(x, y))
        return convex_hull(np.array(verts))

    def distance(self, z, outer: bool = True) -> np.ndarray:
        return polygon_distance(self.outer if outer else self.points, z)

    def bbox(self) -> tuple[float, float, float, float]:
        p = self.outer
        return p.real.min(), p.real.max(), p.imag.min(), p.imag.max()


def fov_boundary(op, n_angles: int = 64, dense_max: int = 400) -> FovPolygon:
    """Support points of the field of values of C (matrix, ShiftOperator or
    PreconditionedOperator) at angles 2 pi k / n_angles.

    For each angle the top eigenpair of the Hermitian part of exp(-i theta) C
    is computed densely for small C and by Lanczos otherwise.
    """
    if n_angles < 8:
        raise ValueError("n_angles must be >= 8")
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    sop = as_operator(op)
    n = sop.n
    dense = sop.dense() if (n <= dense_max or not sp.issparse(sop.A)) else None
    v0 = np.random.default_rng(DEFAULT_SEED).standard_normal(n) + 0j
    support, levels = [], []
    for th in angles:
        rot = np.exp(-1j * th)
        if dense is not None:
            H = 0.5 * (rot * dense + np.conj(rot) * dense.conj().T)
            w, V = np.linalg.eigh(H)
            x = V[:, -1]
            Cx = dense @ x
        else:
            Hop = spla.LinearOperator(
                (n, n), dtype=complex,
                matvec=lambda v, r=rot: 0.5 * (r * sop.matvec(v) + np.conj(r) * sop.rmatvec(v)))
            try:
                w, V = spla.eigsh(Hop, k=1, which="LA", tol=1e-12, maxiter=20 * n, v0=v0, ncv=40)
            except spla.ArpackNoConvergence as exc:
                raise ConvergenceError(f"FOV eigensolve failed at angle {th}") from exc
            # a fresh random start each angle: warm starts can lock onto the
            # second eigenvector when the top of the spectrum is clustered
            x = V[:, -1]
            Cx = sop.matvec(x)
        support.append(np.vdot(x, Cx) / np.vdot(x, x))
        levels.append(w[-1])
    return FovPolygon(angles, np.array(support), np.array(levels))


# ---------------------------------------------------------------------------
# norm equivalence constants


@dataclass
class NormEquivalence:
    alpha_W: float
    alpha_W_upper: float
    alpha: float
    alpha_upper: float
    mass_condition_sqrt: float


def _extreme_eigs(S) -> tuple[float, float]:
    n = S.shape[0]
    if n <= DENSE_LIMIT:
        w = np.linalg.eigvalsh(_as_dense(S))
        return float(w[0]), float(w[-1])
    S = sp.csc_matrix(S.real if np.iscomplexobj(S.data) else S)
    hi = spla.eigsh(S, k=1, which="LA", tol=1e-10, return_eigenvectors=False)[0]
    lo = spla.eigsh(S, k=1, sigma=0.0, which="LM", tol=1e-10, return_eigenvectors=False)[0]
    return float(lo), float(hi)


def norm_equivalence_constants(M, K=None, kappa: float = 0.0) -> NormEquivalence:
    """Extreme Euclidean-norm equivalence constants of the mass matrix and of
    the kappa-energy matrix K + kappa^2 M."""
    lo, hi = _extreme_eigs(M)
    if lo <= 0:
        raise ValueError("mass matrix is not positive definite")
    if K is not None:
        klo, khi = _extreme_eigs(K + kappa ** 2 * M)
    else:
        klo, khi = kappa ** 2 * lo, kappa ** 2 * hi
    return NormEquivalence(math.sqrt(lo), math.sqrt(hi), math.sqrt(max(klo, 0.0)),
                           math.sqrt(khi), math.sqrt(hi / lo))
