"""Moment Krylov, Lanczos, Davidson, and the convergence bound evaluator."""

import math

import numpy as np
import pytest

from qsubspace.classical import (
    ConvergenceBound,
    DavidsonResult,
    KrylovMoments,
    TridiagonalForm,
    compute_moments,
    davidson,
    kaniel_paige_saad,
    lanczos,
    power_krylov,
)
from qsubspace.errors import CapacityError, ConvergenceError, ValidationError
from qsubspace.fock import FockVector, exact_eigenpairs, sector_dimension
from qsubspace.geev import conditioning_report, solve

from oracles import krylov_moments, sector_fci, sector_hamiltonian


def dense_sector(ints):
    return sector_hamiltonian(
        ints.e_nuc, ints.one_body, ints.two_body, ints.num_up, ints.num_down
    )


def random_vector(ints, seed):
    rng = np.random.default_rng(seed)
    dim = sector_dimension(ints.num_orbitals, ints.num_up, ints.num_down)
    amp = rng.standard_normal(dim)
    return FockVector(ints.sector, amp / np.linalg.norm(amp))


def test_moments_match_dense_oracle(h2):
    v0 = random_vector(h2, 21)
    mom = compute_moments(h2, v0, 8)
    ref = krylov_moments(dense_sector(h2), v0.amplitudes, 8)
    assert isinstance(mom, KrylovMoments) and mom.count == 8
    assert np.allclose(mom.moments, ref, atol=1e-10)


def test_moment_invariants(h3_plus):
    v0 = random_vector(h3_plus, 22)
    n = 5
    f = compute_moments(h3_plus, v0, 2 * n).moments
    assert np.isclose(f[0], 1.0)
    idx = np.arange(n)
    hankel = f[idx[:, None] + idx[None, :]]
    assert np.min(np.linalg.eigvalsh(hankel)) >= -1e-10


def test_power_krylov_smallest_case(h2):
    v0 = random_vector(h2, 23)
    prob = power_krylov(h2, v0, 1)
    f = compute_moments(h2, v0, 2).moments
    assert np.isclose(prob.smat[0, 0].real, 1.0)
    assert np.isclose(prob.hmat[0, 0].real, f[1])
    assert prob.provenance == {"method": "power_krylov", "n": 1}


def test_power_krylov_eigenvector_start(h2):
    evals, evecs = sector_fci(
        h2.e_nuc, h2.one_body, h2.two_body, h2.num_up, h2.num_down
    )
    v0 = FockVector(h2.sector, evecs[:, 0].astype(complex))
    sol = solve(power_krylov(h2, v0, 3), eps=1e-10)
    assert sol.retained_dim == 1
    assert np.isclose(sol.eigenvalues[0], evals[0], atol=1e-9)


def test_power_krylov_full_space_reaches_fci(h2):
    v0 = random_vector(h2, 24)
    evals, _ = sector_fci(
        h2.e_nuc, h2.one_body, h2.two_body, h2.num_up, h2.num_down
    )
    sol = solve(power_krylov(h2, v0, 4), eps=1e-10)
    assert abs(sol.eigenvalues[0] - evals[0]) < 1e-8


def test_power_krylov_provenance_enables_cond_bound(h3_plus):
    prob = power_krylov(h3_plus, random_vector(h3_plus, 25), 5)
    report = conditioning_report(prob)
    assert report["cond"] >= report["power_basis_cond_lower_bound"]


def test_power_krylov_domain_checks(h2, h3_plus):
    v0 = random_vector(h2, 26)
    with pytest.raises(CapacityError):
        power_krylov(h2, v0, 13)
    with pytest.raises(ValidationError):
        power_krylov(h2, v0, 0)
    with pytest.raises(ValidationError):
        power_krylov(h3_plus, v0, 2)  # sector mismatch


def test_lanczos_single_step_rayleigh(h2):
    v0 = random_vector(h2, 27)
    form, prob = lanczos(h2, v0, 1)
    hd = dense_sector(h2)
    rq = float(np.real(v0.amplitudes.conj() @ hd @ v0.amplitudes))
    assert form.num_steps == 1 and form.betas.size == 0
    assert np.isclose(form.alphas[0], rq, atol=1e-10)
    assert prob.smat.shape == (1, 1)


def test_lanczos_agrees_with_power_krylov(h3_plus):
    # Same start vector spans the same subspace, so the thresholded moment
    # problem and the tridiagonal form share their Ritz values.
    v0 = random_vector(h3_plus, 28)
    for n in (2, 4, 6):
        form, _ = lanczos(h3_plus, v0, n)
        ritz = form.eigenvalues()
        sol = solve(power_krylov(h3_plus, v0, n), eps=1e-10)
        k = sol.retained_dim
        assert np.allclose(sol.eigenvalues[:1], ritz[:1], atol=1e-6)
        # Retained directions match the leading Ritz values.
        assert np.allclose(sol.eigenvalues, ritz[:k], atol=1e-5) or k < n


def test_lanczos_full_run_reaches_fci(h3_plus):
    v0 = random_vector(h3_plus, 29)
    dim = sector_dimension(*h3_plus.sector)
    form, prob = lanczos(h3_plus, v0, dim)
    evals, _ = sector_fci(
        h3_plus.e_nuc, h3_plus.one_body, h3_plus.two_body,
        h3_plus.num_up, h3_plus.num_down,
    )
    if form.num_steps == dim:  # no accidental early invariant subspace
        assert np.allclose(form.eigenvalues(), evals, atol=1e-8)
    assert isinstance(form, TridiagonalForm)
    # Tridiagonal matrix is the projection of H onto the basis.
    hd = dense_sector(h3_plus)
    proj = form.basis.conj().T @ hd @ form.basis
    assert np.allclose(proj, prob.hmat, atol=1e-8)


def test_lanczos_basis_orthonormal(h4_toy):
    v0 = random_vector(h4_toy, 30)
    form, _ = lanczos(h4_toy, v0, 20, reorthogonalize=True)
    gram = form.basis.conj().T @ form.basis
    assert np.max(np.abs(gram - np.eye(form.num_steps))) <= 1e-8


def test_lanczos_breakdown_on_eigenvector(h2):
    evals, evecs = sector_fci(
        h2.e_nuc, h2.one_body, h2.two_body, h2.num_up, h2.num_down
    )
    v0 = FockVector(h2.sector, evecs[:, 1].astype(complex))
    form, _ = lanczos(h2, v0, 4)
    assert form.num_steps == 1
    assert np.isclose(form.alphas[0], evals[1], atol=1e-10)


def test_lanczos_zero_vector_rejected(h2):
    dim = sector_dimension(2, 1, 1)
    with pytest.raises(ValidationError):
        lanczos(h2, FockVector(h2.sector, np.zeros(dim, dtype=complex)), 3)


def test_reorthogonalization_controls_drift(h4_toy):
    v0 = random_vector(h4_toy, 31)
    n = 30

    def loss(reorth):
        form, _ = lanczos(h4_toy, v0, n, reorthogonalize=reorth)
        gram = form.basis.conj().T @ form.basis
        off = gram - np.eye(form.num_steps)
        return float(np.max(np.abs(off)))

    loss_plain = loss(False)
    loss_clean = loss(True)
    assert loss_clean <= 1e-8
    assert loss_plain > loss_clean


def test_variational_upper_bound_and_monotonicity(h3_plus):
    v0 = random_vector(h3_plus, 32)
    evals, _ = sector_fci(
        h3_plus.e_nuc, h3_plus.one_body, h3_plus.two_body,
        h3_plus.num_up, h3_plus.num_down,
    )
    last = math.inf
    for n in range(1, 7):
        form, _ = lanczos(h3_plus, v0, n)
        ground = float(form.eigenvalues()[0])
        assert ground >= evals[0] - 1e-10
        assert ground <= last + 1e-12
        last = ground


def test_davidson_converges_on_fixture(h2):
    result = davidson(h2, k=1, tol=1e-8, max_iter=50)
    evals, _ = sector_fci(
        h2.e_nuc, h2.one_body, h2.two_body, h2.num_up, h2.num_down
    )
    assert isinstance(result, DavidsonResult)
    assert abs(result.eigenvalues[0] - evals[0]) < 1e-7
    assert result.num_iterations <= 5
    assert np.all(result.residual_norms <= 1e-8)
    it, energy, res = result.trace[-1]
    assert it == result.num_iterations
    assert np.isclose(energy, result.eigenvalues[0])


def test_davidson_eigenvector_start_converges_immediately(h2):
    _, evecs = sector_fci(
        h2.e_nuc, h2.one_body, h2.two_body, h2.num_up, h2.num_down
    )
    v0 = FockVector(h2.sector, evecs[:, 0].astype(complex))
    result = davidson(h2, k=1, tol=1e-8, v0s=[v0])
    assert result.num_iterations == 0


def test_davidson_multiple_roots(h3_plus):
    result = davidson(h3_plus, k=3, tol=1e-9, max_iter=100)
    evals, _ = sector_fci(
        h3_plus.e_nuc, h3_plus.one_body, h3_plus.two_body,
        h3_plus.num_up, h3_plus.num_down,
    )
    assert np.allclose(result.eigenvalues, evals[:3], atol=1e-7)
    hd = dense_sector(h3_plus)
    for i in range(3):
        x = result.eigenvectors[i].amplitudes
        rq = float(np.real(x.conj() @ hd @ x) / np.real(x.conj() @ x))
        assert np.isclose(rq, evals[i], atol=1e-7)


def test_davidson_restart_path(h4_toy):
    # k=1 caps the search space at 8 columns; convergence needs more
    # expansions than that, so at least one restart happens.
    result = davidson(h4_toy, k=1, tol=1e-9, max_iter=100)
    assert result.eigenvalues.size == 1
    assert abs(result.eigenvalues[0] - exact_eigenpairs(h4_toy).eigenvalues[0]) < 1e-7


def test_davidson_domain_and_convergence_errors(h2, h4_toy):
    with pytest.raises(ValidationError):
        davidson(h2, k=5)
    with pytest.raises(ConvergenceError) as err:
        davidson(h4_toy, k=2, tol=1e-12, max_iter=2)
    best = err.value.best
    assert best is not None and best.eigenvalues.size == 2
    assert len(best.trace) == 2


def test_bound_zero_for_exact_start(h2):
    spectrum = exact_eigenpairs(h2, k=4)
    v0 = spectrum.eigenvectors[0]
    rec = kaniel_paige_saad(h2, spectrum, v0, n=3, mu=0)
    assert rec.applicable and rec.satisfied
    assert rec.tan_theta == 0 and rec.bound == 0
    assert abs(rec.measured) < 1e-10


def test_bound_random_start_sweep(h3_plus):
    spectrum = exact_eigenpairs(h3_plus, k=9)
    for seed in range(10):
        v0 = random_vector(h3_plus, 100 + seed)
        for mu in (0, 1):
            for n in range(mu + 1, 7):
                rec = kaniel_paige_saad(h3_plus, spectrum, v0, n=n, mu=mu)
                assert isinstance(rec, ConvergenceBound)
                assert rec.applicable
                assert rec.satisfied, (seed, mu, n, rec.measured, rec.bound)


def test_bound_inapplicable_for_orthogonal_start(h2):
    spectrum = exact_eigenpairs(h2, k=4)
    v0 = spectrum.eigenvectors[1]
    rec = kaniel_paige_saad(h2, spectrum, v0, n=2, mu=0)
    assert not rec.applicable


def test_bound_argument_validation(h2):
    spectrum = exact_eigenpairs(h2, k=4)
    v0 = random_vector(h2, 33)
    with pytest.raises(ValidationError):
        kaniel_paige_saad(h2, spectrum, v0, n=2, mu=3)
    with pytest.raises(ValidationError):
        kaniel_paige_saad(h2, spectrum, v0, n=1, mu=1)
