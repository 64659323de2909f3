"""Classical subspace baselines: moment Krylov, Lanczos, Davidson, and the
Chebyshev-style convergence bounds for Krylov eigenvalue estimates.

All methods act on sector FockVectors through the sparse Slater-Condon
matrix; none of them need the dense spectrum except the bound evaluator,
which exists to compare a measured Ritz error against its guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CapacityError, ConvergenceError, ValidationError
from .fock import (
    FockVector,
    SpectrumSlice,
    hamiltonian_diagonal,
    sector_dimension,
    sector_matrix,
)
from .geev import SubspaceProblem
from .integrals import MolecularIntegrals

_MAX_MOMENT_DIM = 12
_BREAKDOWN = 1e-12


@dataclass(eq=False)
class KrylovMoments:
    """Expectation values f_l = <v0|H^l|v0>, l = 0 .. count-1."""

    moments: np.ndarray

    @property
    def count(self) -> int:
        return self.moments.size


def _sector_array(ints: MolecularIntegrals, v0: FockVector) -> np.ndarray:
    if v0.sector != ints.sector:
        raise ValidationError("start vector sector does not match integrals")
    return np.asarray(v0.amplitudes, dtype=complex)


def compute_moments(
    ints: MolecularIntegrals, v0: FockVector, count: int
) -> KrylovMoments:
    """Moments by repeated sparse matrix application."""
    if count < 1:
        raise ValidationError("need at least one moment")
    mat = sector_matrix(ints)
    vec = _sector_array(ints, v0)
    cur = vec
    out = np.empty(count)
    for ell in range(count):
        out[ell] = complex(np.vdot(vec, cur)).real
        if ell + 1 < count:
            cur = mat @ cur
    return KrylovMoments(out)


def power_krylov(ints: MolecularIntegrals, v0: FockVector, n: int) -> SubspaceProblem:
    """Moment-matrix subspace pair: S = f_(a+b), H = f_(a+b+1).

    Condition numbers grow exponentially with n (see the power-basis lower
    bound in geev), so n is capped where double precision stops resolving
    the overlap spectrum.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if n > _MAX_MOMENT_DIM:
        raise CapacityError(f"moment Krylov capped at n = {_MAX_MOMENT_DIM}")
    f = compute_moments(ints, v0, 2 * n).moments
    idx = np.arange(n)
    smat = f[idx[:, None] + idx[None, :]]
    hmat = f[idx[:, None] + idx[None, :] + 1]
    return SubspaceProblem(hmat, smat, {"method": "power_krylov", "n": n})


@dataclass(eq=False)
class TridiagonalForm:
    """Lanczos output: H restricted to the orthonormal Krylov basis."""

    alphas: np.ndarray
    betas: np.ndarray
    basis: np.ndarray  # (dim, steps) orthonormal columns

    @property
    def num_steps(self) -> int:
        return self.alphas.size

    def eigenvalues(self) -> np.ndarray:
        if self.num_steps == 1:
            return self.alphas.copy()
        return scipy.linalg.eigh_tridiagonal(
            self.alphas, self.betas, eigvals_only=True
        )


def lanczos(
    ints: MolecularIntegrals,
    v0: FockVector,
    n: int,
    reorthogonalize: bool = True,
):
    """Three-term recurrence with optional full reorthogonalization.

    Returns (TridiagonalForm, SubspaceProblem); the problem has the
    tridiagonal matrix as H and the identity as S. Stops early when the
    residual norm drops below breakdown tolerance (invariant subspace).
    """
    if n < 1:
        raise ValidationError("n must be positive")
    vec = _sector_array(ints, v0)
    norm = float(np.linalg.norm(vec))
    if norm < _BREAKDOWN:
        raise ValidationError("start vector has zero norm")
    mat = sector_matrix(ints)
    dim = vec.size
    n = min(n, dim)
    basis = np.zeros((dim, n), dtype=complex)
    basis[:, 0] = vec / norm
    alphas = []
    betas = []
    prev = np.zeros(dim, dtype=complex)
    beta = 0.0
    for k in range(n):
        q = basis[:, k]
        w = mat @ q
        alpha = complex(np.vdot(q, w)).real
        alphas.append(alpha)
        if k + 1 == n:
            break
        w = w - alpha * q - beta * prev
        if reorthogonalize:
            # Twice-repeated Gram-Schmidt against every retained vector.
            for _ in range(2):
                w = w - basis[:, : k + 1] @ (basis[:, : k + 1].conj().T @ w)
        beta = float(np.linalg.norm(w))
        if beta < _BREAKDOWN:
            break
        betas.append(beta)
        prev = q
        basis[:, k + 1] = w / beta
    steps = len(alphas)
    form = TridiagonalForm(
        alphas=np.array(alphas),
        betas=np.array(betas),
        basis=basis[:, :steps],
    )
    hmat = np.diag(form.alphas).astype(complex)
    if form.betas.size:
        hmat += np.diag(form.betas, 1) + np.diag(form.betas, -1)
    prob = SubspaceProblem(
        hmat, np.eye(steps), {"method": "lanczos", "n": steps}
    )
    return form, prob


@dataclass(eq=False)
class DavidsonResult(SpectrumSlice):
    """SpectrumSlice (eigenvectors as FockVectors) plus iteration metadata."""

    num_iterations: int = 0
    residual_norms: np.ndarray | None = None
    trace: tuple = ()  # rows (iteration, energy, residual)


def _orthonormalize_against(w: np.ndarray, basis: np.ndarray) -> np.ndarray | None:
    for _ in range(2):
        w = w - basis @ (basis.conj().T @ w)
    norm = float(np.linalg.norm(w))
    if norm < 1e-10:
        return None
    return w / norm


def davidson(
    ints: MolecularIntegrals,
    k: int = 1,
    tol: float = 1e-8,
    max_iter: int = 200,
    v0s: list | None = None,
) -> DavidsonResult:
    """Block Davidson with the diagonal (Jacobi) preconditioner.

    Expansion vector per unconverged root: w = psi + P r with
    P_ll = 1/(H_ll - E), denominator clamped at 1e-6 in magnitude. The
    search space restarts from the current Ritz vectors when it exceeds
    8k columns.
    """
    sector = ints.sector
    dim = sector_dimension(*sector)
    if not 1 <= k <= dim:
        raise ValidationError(f"need 1 <= k <= {dim}")
    mat = sector_matrix(ints)
    diag = hamiltonian_diagonal(ints)

    if v0s is not None:
        cols = [_sector_array(ints, v) for v in v0s]
    else:
        # Unit vectors on the k smallest diagonal entries.
        order = np.argsort(diag)[:k]
        cols = [np.eye(dim, dtype=complex)[:, i] for i in order]
    basis = np.zeros((dim, 0), dtype=complex)
    for c in cols:
        c = _orthonormalize_against(c.astype(complex), basis)
        if c is not None:
            basis = np.column_stack([basis, c])
    if basis.shape[1] < k:
        raise ValidationError("start vectors do not span k directions")
    images = mat @ basis

    max_cols = 8 * k
    trace = []
    best = None
    for it in range(max_iter):
        small = basis.conj().T @ images
        small = (small + small.conj().T) / 2
        theta, y = np.linalg.eigh(small)
        theta, y = theta[:k], y[:, :k]
        ritz = basis @ y
        ritz_images = images @ y
        residuals = ritz_images - ritz * theta[None, :]
        rnorms = np.linalg.norm(residuals, axis=0)
        trace.append((it, float(theta[0]), float(np.max(rnorms))))
        best = DavidsonResult(
            eigenvalues=theta.copy(),
            eigenvectors=[FockVector(sector, ritz[:, i].copy()) for i in range(k)],
            num_iterations=it,
            residual_norms=rnorms.copy(),
            trace=tuple(trace),
        )
        if np.all(rnorms <= tol):
            return best
        if basis.shape[1] + k > max_cols:
            basis = np.zeros((dim, 0), dtype=complex)
            for i in range(k):
                c = _orthonormalize_against(ritz[:, i], basis)
                if c is not None:
                    basis = np.column_stack([basis, c])
            images = mat @ basis
        added = False
        for i in range(k):
            if rnorms[i] <= tol:
                continue
            denom = diag - theta[i]
            small_d = np.abs(denom) < 1e-6
            denom = np.where(small_d, np.where(denom < 0, -1e-6, 1e-6), denom)
            w = ritz[:, i] + residuals[:, i] / denom
            w = _orthonormalize_against(w, basis)
            if w is None:
                continue
            basis = np.column_stack([basis, w])
            images = np.column_stack([images, mat @ w])
            added = True
        if not added and not np.all(rnorms <= tol):
            raise ConvergenceError(
                "expansion vectors vanished before reaching tolerance", best=best
            )
    raise ConvergenceError(f"no convergence in {max_iter} iterations", best=best)


def _chebyshev(k: int, g: float) -> float:
    """T_k on [1, inf): cosh(k arccosh(g)), monotone increasing."""
    if g < 1.0:
        raise ValidationError("Chebyshev argument below 1")
    if math.isinf(g):
        return 1.0 if k == 0 else math.inf
    return math.cosh(k * math.acosh(g))


@dataclass(eq=False)
class ConvergenceBound:
    """Measured Ritz error for state mu against its a priori bound."""

    mu: int
    n: int
    tan_theta: float
    gamma: float
    l_factor: float
    bound: float
    measured: float
    satisfied: bool
    applicable: bool


def kaniel_paige_saad(
    ints: MolecularIntegrals,
    spectrum: SpectrumSlice,
    v0: FockVector,
    n: int,
    mu: int = 0,
) -> ConvergenceBound:
    """Evaluate the Krylov convergence guarantee for eigenvalue mu.

    mu = 0 uses the ground-state inequality with gamma_0 = 1 + 2 gap ratio;
    mu >= 1 uses the excited-state form with gamma_mu = 1 + gap ratio and
    the L_mu product over lower Ritz values. The measured error comes from
    a reorthogonalized n-step Lanczos run with the same start vector.
    """
    evals = np.asarray(spectrum.eigenvalues, dtype=float)
    dim = evals.size
    if not 0 <= mu < dim - 1:
        raise ValidationError("mu must index a non-top eigenvalue")
    if n <= mu:
        raise ValidationError("need n > mu Krylov dimensions")
    vec = _sector_array(ints, v0)
    vec = vec / np.linalg.norm(vec)
    psi = np.asarray(spectrum.eigenvectors[mu].amplitudes)
    cos = abs(complex(np.vdot(psi, vec)))
    if cos < 1e-12:
        return ConvergenceBound(mu, n, math.inf, math.nan, math.nan,
                                math.inf, math.nan, False, False)
    tan = math.sqrt(max(0.0, 1.0 - cos**2)) / cos

    form, _ = lanczos(ints, v0, n, reorthogonalize=True)
    ritz = form.eigenvalues()
    measured = float(ritz[mu] - evals[mu])

    top = evals[dim - 1]
    gap_to_top = float(top - evals[mu + 1])
    factor = 2.0 if mu == 0 else 1.0
    if gap_to_top > 0:
        gamma = 1.0 + factor * (evals[mu + 1] - evals[mu]) / gap_to_top
    else:
        gamma = math.inf  # mu+1 is already the top of the spectrum
    l_factor = 1.0
    for nu in range(mu):
        denom = float(evals[mu] - ritz[nu])
        l_factor = math.inf if denom == 0 else l_factor * (top - ritz[nu]) / denom
    cheb = _chebyshev(n - 1 - mu, gamma)
    if math.isinf(l_factor):
        bound = math.inf  # a Ritz value sits exactly on E_mu
    elif math.isinf(cheb):
        bound = 0.0
    else:
        bound = (top - evals[mu]) * (abs(l_factor) * tan / cheb) ** 2
    satisfied = measured >= -1e-12 and measured <= bound + 1e-12
    return ConvergenceBound(
        mu=mu,
        n=n,
        tan_theta=tan,
        gamma=gamma,
        l_factor=l_factor,
        bound=bound,
        measured=measured,
        satisfied=bool(satisfied),
        applicable=True,
    )
