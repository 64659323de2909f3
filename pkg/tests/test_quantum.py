"""Quantum subspace builders: expansions, time grids, filters, spectra."""

import math

import numpy as np
import pytest

from conftest import load_integrals
from oracles import dense_pauli_sum, imaginary_evolve_dense, sector_hamiltonian
from qsubspace.classical import power_krylov
from qsubspace.engine import (
    Statevector,
    apply_pauli_sum,
    distance,
    expectation,
    statevector_from_fock,
)
from qsubspace.errors import (
    CapacityError,
    DataError,
    RescalingError,
    ValidationError,
)
from qsubspace.fock import (
    FockVector,
    basis_vector,
    evolve_imag,
    evolve_real,
    exact_eigenpairs,
    reference_configuration,
    sector_dimension,
)
from qsubspace.geev import SubspaceProblem, solve
from qsubspace.integrals import MolecularIntegrals
from qsubspace.qubits import PauliString, jordan_wigner, pauli_sum
from qsubspace.quantum import (
    ExcitationOperator,
    QfdGrid,
    chebyshev_krylov_build,
    epperly_qfd_bound,
    fast_forward,
    gaussian_power_build,
    qeom_build,
    qeom_pool,
    qfd_build,
    qite_pool,
    qite_step,
    qlanczos_build,
    qse_build,
    qse_pool,
    response_function,
    spectral_weights,
)


def dense_sector(ints):
    return sector_hamiltonian(
        ints.e_nuc, ints.one_body, ints.two_body, ints.num_up, ints.num_down
    )


def random_vector(ints, seed, offset=0.3):
    rng = np.random.default_rng(seed)
    dim = sector_dimension(*ints.sector)
    amp = rng.standard_normal(dim) + offset
    return FockVector(ints.sector, amp / np.linalg.norm(amp))


def hf_statevector(ints):
    return statevector_from_fock(
        basis_vector(ints.sector, reference_configuration(ints))
    )


def full_spectrum(ints):
    return exact_eigenpairs(ints, k=sector_dimension(*ints.sector))


def scaled_integrals(ints, s):
    return MolecularIntegrals(
        ints.num_orbitals,
        ints.num_up,
        ints.num_down,
        ints.e_nuc * s,
        ints.one_body * s,
        ints.two_body * s,
    )


def diagonal_integrals():
    """Density-density interactions only; diagonal in the determinant basis."""
    h = np.diag([-1.0, -0.4])
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = 0.30
    g[1, 1, 1, 1] = 0.25
    g[0, 0, 1, 1] = g[1, 1, 0, 0] = 0.12
    return MolecularIntegrals(2, 1, 1, 0.5, h, g)


# ---------------------------------------------------------------------------
# expansion subspaces


class TestQse:
    def test_pool_sizes(self):
        assert len(qse_pool(2, "S")) == 1 + 8
        # 2 same-spin doubles + 16 opposite-spin doubles for m = 2
        assert len(qse_pool(2, "SD")) == 1 + 8 + 18
        with pytest.raises(ValidationError):
            qse_pool(2, "SDT")

    def test_fci_reference_recovers_ground(self, h2):
        spec = exact_eigenpairs(h2, k=1)
        state = statevector_from_fock(spec.eigenvectors[0])
        sol = solve(qse_build(state, h2, level="SD"), eps=1e-10)
        assert abs(sol.eigenvalues[0] - spec.eigenvalues[0]) < 1e-9

    @pytest.mark.parametrize(
        "name", ["h2_sto3g", "h2_stretched", "heh_like", "h3_plus"]
    )
    def test_sd_exact_for_two_electrons(self, name):
        ints = load_integrals(name)
        e_fci = exact_eigenpairs(ints, k=1).eigenvalues[0]
        sol = solve(qse_build(hf_statevector(ints), ints, level="SD"), eps=1e-10)
        assert abs(sol.eigenvalues[0] - e_fci) < 1e-9

    @pytest.mark.parametrize("name", ["h2_sto3g", "heh_like"])
    def test_singles_keep_mean_field_energy(self, name):
        # canonical orbitals: the reference is stationary against singles
        ints = load_integrals(name)
        state = hf_statevector(ints)
        e_ref = float(expectation(jordan_wigner(ints), state).real)
        sol = solve(qse_build(state, ints, level="S"), eps=1e-10)
        assert abs(sol.eigenvalues[0] - e_ref) < 1e-9

    def test_budget_exceeded_raises(self, h2):
        state = hf_statevector(h2)
        with pytest.raises(CapacityError):
            qse_build(state, h2, level="SD", budget=10)

    def test_problem_passes_geev_validation(self, h2):
        state = statevector_from_fock(random_vector(h2, 5))
        prob = qse_build(state.normalized(), h2, level="SD")
        assert prob.provenance["method"] == "qse"
        sol = solve(prob, eps=1e-10)
        assert np.all(np.isfinite(sol.eigenvalues))


class TestQeom:
    @pytest.mark.parametrize("name", ["h2_sto3g", "heh_like", "h3_plus"])
    def test_gaps_match_fci(self, name):
        ints = load_integrals(name)
        spec = full_spectrum(ints)
        state = statevector_from_fock(spec.eigenvectors[0])
        blocks, energies = qeom_build(state, ints)
        gaps = spec.eigenvalues[1:] - spec.eigenvalues[0]
        pos = energies[energies > 1e-8]
        k = min(3, len(gaps))
        assert np.allclose(pos[:k], gaps[:k], atol=1e-7)

    def test_block_structure(self, h2):
        spec = exact_eigenpairs(h2, k=1)
        state = statevector_from_fock(spec.eigenvectors[0])
        blocks, _ = qeom_build(state, h2)
        p = blocks.size
        assert blocks.mmat.shape == (p, p) and blocks.qmat.shape == (p, p)
        np.testing.assert_allclose(
            blocks.vmat, blocks.vmat.conj().T, atol=1e-12
        )
        np.testing.assert_allclose(
            blocks.mmat, blocks.mmat.conj().T, atol=1e-12
        )
        # W_IJ = -<[F+_I, F+_J]> flips sign under I <-> J
        np.testing.assert_allclose(blocks.wmat.T, -blocks.wmat, atol=1e-12)

    def test_shift_invariance(self, h2):
        # commutators kill any constant added to H
        shifted = MolecularIntegrals(
            2, 1, 1, h2.e_nuc + 7.3, h2.one_body, h2.two_body
        )
        state = statevector_from_fock(exact_eigenpairs(h2, k=1).eigenvectors[0])
        _, base = qeom_build(state, h2)
        _, moved = qeom_build(state, shifted)
        np.testing.assert_allclose(base, moved, atol=1e-10)

    def test_commuting_pool_gives_zero_excitations(self):
        ints = diagonal_integrals()
        dim = sector_dimension(*ints.sector)
        state = statevector_from_fock(
            FockVector(ints.sector, np.full(dim, 1.0 / math.sqrt(dim)))
        )
        pool = [
            ExcitationOperator(2, "single", (a, a), (s,))
            for s in (0, 1)
            for a in range(2)
        ]
        blocks, energies = qeom_build(state, ints, pool=pool)
        assert np.max(np.abs(blocks.mmat)) < 1e-12
        np.testing.assert_allclose(energies, 0.0)

    def test_tda_matches_full_on_lowest_gap(self, h2):
        state = statevector_from_fock(exact_eigenpairs(h2, k=1).eigenvectors[0])
        _, full = qeom_build(state, h2)
        _, tda = qeom_build(state, h2, tda=True)
        lowest_full = full[full > 1e-8][0]
        lowest_tda = tda[tda > 1e-8][0]
        assert abs(lowest_full - lowest_tda) < 1e-6

    def test_entangled_reference_degenerate_metric(self, h2_stretched):
        # open-shell singlet: excitation and de-excitation overlaps cancel
        state = statevector_from_fock(
            exact_eigenpairs(h2_stretched, k=1).eigenvectors[0]
        )
        with pytest.raises(DataError):
            qeom_build(state, h2_stretched)

    def test_pool_drops_diagonal_operators(self):
        assert all(
            op.orbitals[0] != op.orbitals[1]
            for op in qeom_pool(2)
            if op.kind == "single"
        )


# ---------------------------------------------------------------------------
# real-time grids


class TestQfd:
    def test_single_point_is_rayleigh(self, h2):
        v0 = random_vector(h2, 3)
        prob = qfd_build(v0, h2, QfdGrid(0.5, 1))
        ray = float(
            np.real(v0.amplitudes.conj() @ dense_sector(h2) @ v0.amplitudes)
        )
        np.testing.assert_allclose(prob.smat, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(prob.hmat, [[ray]], atol=1e-10)

    @pytest.mark.parametrize("symmetric", [False, True])
    def test_exact_backend_toeplitz(self, h2, symmetric):
        v0 = random_vector(h2, 7)
        prob = qfd_build(v0, h2, QfdGrid(0.3, 5, symmetric=symmetric))
        for mat, tol in ((prob.smat, 1e-12), (prob.hmat, 1e-10)):
            for k in range(5):
                band = np.diag(mat, k)
                assert np.max(np.abs(band - mat[0, k])) < tol

    def test_matches_direct_exponential_gram(self, h2):
        # independent route: scipy expm snapshots, explicit Gram
        import scipy.linalg

        v0 = random_vector(h2, 9)
        dt, n = 0.4, 4
        prob = qfd_build(v0, h2, QfdGrid(dt, n))
        mat = dense_sector(h2)
        snaps = [
            scipy.linalg.expm(-1j * dt * a * mat) @ v0.amplitudes for a in range(n)
        ]
        smat = np.array([[np.vdot(x, y) for y in snaps] for x in snaps])
        hmat = np.array([[np.vdot(x, mat @ y) for y in snaps] for x in snaps])
        np.testing.assert_allclose(prob.smat, smat, atol=1e-10)
        np.testing.assert_allclose(prob.hmat, hmat, atol=1e-10)

    def test_epperly_bound_holds(self, h3_plus):
        v0 = random_vector(h3_plus, 13)
        e0 = exact_eigenpairs(h3_plus, k=1).eigenvalues[0]
        errors = []
        for n in range(2, 9):
            report = epperly_qfd_bound(h3_plus, v0, n)
            prob = qfd_build(v0, h3_plus, QfdGrid(report["dt"], n))
            err = solve(prob, eps=1e-12).eigenvalues[0] - e0
            assert err <= report["bound"] + 1e-12
            errors.append(err)
        # convergence: later grids never do worse than the first
        assert errors[-1] <= errors[0] + 1e-12

    def test_trotter_backend_approaches_exact(self, h2):
        v0 = random_vector(h2, 7)
        exact = qfd_build(v0, h2, QfdGrid(0.3, 4))
        devs = []
        for substeps in (1, 2, 4):
            grid = QfdGrid(0.3, 4, backend="trotter", substeps=substeps)
            approx = qfd_build(v0, h2, grid)
            devs.append(float(np.max(np.abs(approx.hmat - exact.hmat))))
        assert devs[0] > devs[1] > devs[2]

    def test_small_time_step_approaches_power_krylov(self, h2):
        v0 = random_vector(h2, 11, offset=0.5)
        target = solve(power_krylov(h2, v0, 3), eps=1e-12).eigenvalues[0]
        gaps = []
        for dt in (0.2, 0.1, 0.05):
            sol = solve(qfd_build(v0, h2, QfdGrid(dt, 3)), eps=1e-12)
            gaps.append(abs(sol.eigenvalues[0] - target))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_grid_validation(self):
        with pytest.raises(ValidationError):
            QfdGrid(0.0, 3)
        with pytest.raises(ValidationError):
            QfdGrid(0.1, 0)
        with pytest.raises(ValidationError):
            QfdGrid(0.1, 3, backend="adiabatic")

    def test_bound_report_fields(self, h2):
        v0 = random_vector(h2, 3)
        report = epperly_qfd_bound(h2, v0, 4)
        dim = sector_dimension(*h2.sector)
        assert report["l_index"] == dim - 1
        spec = full_spectrum(h2)
        gap = spec.eigenvalues[dim - 1] - spec.eigenvalues[0]
        assert abs(report["dt"] - math.pi / gap) < 1e-12


# ---------------------------------------------------------------------------
# imaginary-time grids


class TestQlanczos:
    def test_single_snapshot_is_rayleigh(self, h2):
        v0 = random_vector(h2, 3)
        prob = qlanczos_build(v0, h2, 0.5, 1)
        ray = float(
            np.real(v0.amplitudes.conj() @ dense_sector(h2) @ v0.amplitudes)
        )
        np.testing.assert_allclose(prob.smat, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(prob.hmat, [[ray]], atol=1e-10)

    def test_overlap_identity_vs_direct_norms(self, h2):
        v0 = random_vector(h2, 7)
        dtau, n = 0.5, 4
        prob = qlanczos_build(v0, h2, dtau, n)
        snaps = [
            evolve_imag(h2, v0, dtau * a)[0] if a else v0 for a in range(n)
        ]
        direct = np.array(
            [
                [float(np.vdot(x.amplitudes, y.amplitudes).real) for y in snaps]
                for x in snaps
            ]
        )
        np.testing.assert_allclose(prob.smat, direct, atol=1e-10)

    def test_exact_mode_reaches_fci(self, h2):
        v0 = random_vector(h2, 7)
        e0 = exact_eigenpairs(h2, k=1).eigenvalues[0]
        sol = solve(qlanczos_build(v0, h2, 0.5, 4), eps=1e-10)
        assert abs(sol.eigenvalues[0] - e0) < 1e-6

    def test_qite_mode_is_variational_above_noise_floor(self, h2):
        # unitary-approximate snapshots leak O(dtau^2) error into S and H;
        # thresholding above that floor keeps the estimate variational
        v0 = random_vector(h2, 7)
        spec = exact_eigenpairs(h2, k=1)
        ray = float(
            np.real(v0.amplitudes.conj() @ dense_sector(h2) @ v0.amplitudes)
        )
        prob = qlanczos_build(v0, h2, 0.2, 4, mode="qite")
        val = solve(prob, eps=1e-5).eigenvalues[0]
        assert spec.eigenvalues[0] - 1e-6 <= val <= ray + 1e-3

    def test_mode_validation(self, h2):
        with pytest.raises(ValidationError):
            qlanczos_build(random_vector(h2, 3), h2, 0.5, 2, mode="euler")


class TestQite:
    def test_eigenstate_is_fixed_point(self, h2):
        spec = exact_eigenpairs(h2, k=1)
        state = statevector_from_fock(spec.eigenvectors[0])
        new, energy, factor = qite_step(state, h2, 0.1)
        assert distance(new, state) < 1e-9
        assert abs(energy - spec.eigenvalues[0]) < 1e-9
        assert factor > 0

    def test_single_step_second_order(self, h2):
        v0 = random_vector(h2, 7)
        state = statevector_from_fock(v0)
        mat = dense_sector(h2)
        taus = [0.4, 0.2, 0.1, 0.05]
        errs = []
        for dtau in taus:
            new, _, _ = qite_step(state, h2, dtau)
            want, _ = imaginary_evolve_dense(mat, v0.amplitudes, dtau)
            want_sv = statevector_from_fock(FockVector(h2.sector, want))
            errs.append(float(np.linalg.norm(new.amplitudes - want_sv.amplitudes)))
        slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
        assert abs(slope - 2.0) < 0.2

    def test_complete_pool_matches_exact_ite(self):
        # all 15 non-identity strings on 2 qubits: the linear ansatz is
        # complete and a single small step lands on the exact ITE state
        ints = load_integrals("he_minimal")
        pool = tuple(
            PauliString(2, x, z) for x in range(4) for z in range(4) if x or z
        )
        rng = np.random.default_rng(23)
        amp = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        state = Statevector(2, amp / np.linalg.norm(amp))
        ham = jordan_wigner(ints)
        dense = dense_pauli_sum(2, [(c, s.letters) for c, s in ham.terms()])
        dtau = 1e-3
        new, _, _ = qite_step(state, ints, dtau, pool)
        want, _ = imaginary_evolve_dense(dense.real, state.amplitudes, dtau)
        assert distance(new, Statevector(2, want)) < 1e-8

    def test_pool_strings_are_distinct_and_sorted(self, h2):
        pool = qite_pool(h2)
        letters = [s.letters for s in pool]
        assert letters == sorted(letters)
        assert len(set(letters)) == len(pool)

    def test_norm_factor_tracks_ite_norm(self, h2):
        v0 = random_vector(h2, 7)
        state = statevector_from_fock(v0)
        dtau = 0.05
        _, _, factor = qite_step(state, h2, dtau)
        _, norm = imaginary_evolve_dense(dense_sector(h2), v0.amplitudes, dtau)
        assert abs(factor - norm) < 5 * dtau**3


# ---------------------------------------------------------------------------
# polynomial filters


class TestChebyshev:
    def bounds(self, ints, margin=0.5):
        spec = full_spectrum(ints)
        return float(spec.eigenvalues[0] - margin), float(
            spec.eigenvalues[-1] + margin
        )

    def test_first_moments(self, h2):
        v0 = random_vector(h2, 7)
        lo, hi = self.bounds(h2)
        prob = chebyshev_krylov_build(v0, h2, 3, (lo, hi))
        ray = float(
            np.real(v0.amplitudes.conj() @ dense_sector(h2) @ v0.amplitudes)
        )
        assert abs(prob.smat[0, 0] - 1.0) < 1e-12
        # T_1 moment: S_01 = f_1 = <v0|Hbar|v0>
        f1 = (2 * ray - (lo + hi)) / (hi - lo)
        assert abs(prob.smat[0, 1] - f1) < 1e-12
        assert abs(prob.hmat[0, 0] - ray) < 1e-10

    def test_eigenvector_cosine_moments(self, h2):
        spec = full_spectrum(h2)
        v0 = FockVector(h2.sector, spec.eigenvectors[1].amplitudes)
        lo, hi = self.bounds(h2)
        lam = (2 * spec.eigenvalues[1] - (lo + hi)) / (hi - lo)
        n = 4
        prob = chebyshev_krylov_build(v0, h2, n, (lo, hi))
        f = [math.cos(a * math.acos(lam)) for a in range(2 * n)]
        want = np.array(
            [[(f[a + b] + f[abs(a - b)]) / 2 for b in range(n)] for a in range(n)]
        )
        np.testing.assert_allclose(prob.smat, want, atol=1e-12)

    @pytest.mark.parametrize("name", ["h2_sto3g", "heh_like", "h3_plus"])
    def test_matches_power_krylov(self, name):
        ints = load_integrals(name)
        v0 = random_vector(ints, 11, offset=0.5)
        cheb = solve(
            chebyshev_krylov_build(v0, ints, 4, self.bounds(ints)), eps=1e-10
        )
        power = solve(power_krylov(ints, v0, 4), eps=1e-10)
        assert len(cheb.eigenvalues) == len(power.eigenvalues)
        np.testing.assert_allclose(cheb.eigenvalues, power.eigenvalues, atol=1e-7)

    def test_spectrum_outside_interval_raises(self, h2):
        spec = full_spectrum(h2)
        lo = float(spec.eigenvalues[0] + 0.2)
        hi = float(spec.eigenvalues[-1] - 0.2)
        with pytest.raises(RescalingError):
            chebyshev_krylov_build(random_vector(h2, 7), h2, 4, (lo, hi))


class TestGaussianPower:
    def test_zero_width_matches_power_moments(self, h2):
        v0 = random_vector(h2, 7)
        prob = gaussian_power_build(v0, h2, 3, 0.0, e0=0.0)
        ref = power_krylov(h2, v0, 3)
        np.testing.assert_allclose(prob.smat, ref.smat, atol=1e-12)
        np.testing.assert_allclose(prob.hmat, ref.hmat, atol=1e-12)

    @pytest.mark.parametrize("scale", [1.0, 2.0])
    def test_norm_bound_when_filter_is_wide(self, h2, scale):
        # ||v_{n-1}|| <= ((n-1)/(e tau^2))^{(n-1)/2} once e tau^2 >= n-1
        n = 4
        tau = math.sqrt(scale * (n - 1) / math.e)
        prob = gaussian_power_build(random_vector(h2, 7), h2, n, tau)
        bound = ((n - 1) / (math.e * tau**2)) ** ((n - 1) / 2)
        assert prob.provenance["basis_norms"][-1] <= bound + 1e-12

    def test_default_shift_is_rayleigh(self, h2):
        v0 = random_vector(h2, 7)
        ray = float(
            np.real(v0.amplitudes.conj() @ dense_sector(h2) @ v0.amplitudes)
        )
        prob = gaussian_power_build(v0, h2, 3, 0.7)
        assert abs(prob.provenance["e0"] - ray) < 1e-12

    def test_noise_spread_smaller_with_filter(self, h3_plus):
        # fixed absolute matrix noise: the bounded-norm basis keeps the
        # thresholded ground eigenvalue far more stable than raw powers
        ints = scaled_integrals(h3_plus, 3.0)
        ref = basis_vector(ints.sector, reference_configuration(ints))
        n, noise = 7, 1e-6
        tau = math.sqrt(2 * (n - 1) / math.e)
        filtered = gaussian_power_build(ref, ints, n, tau)
        raw = gaussian_power_build(ref, ints, n, 0.0)

        def iqr(prob):
            rng = np.random.default_rng(3)
            stds = np.full(prob.hmat.shape, noise)
            vals = []
            for _ in range(100):
                noisy = SubspaceProblem(
                    prob.hmat + rng.normal(0, noise, prob.hmat.shape),
                    prob.smat + rng.normal(0, noise, prob.smat.shape),
                    dict(prob.provenance),
                    hmat_std=stds,
                    smat_std=stds,
                )
                vals.append(solve(noisy, eps=1e-6).eigenvalues[0])
            q1, q3 = np.percentile(vals, [25, 75])
            return q3 - q1

        assert iqr(filtered) < iqr(raw)


# ---------------------------------------------------------------------------
# derived spectra and fast-forwarding


def qfd_eigenbasis(ints, seed, n, dt=0.4):
    v0 = random_vector(ints, seed)
    sol = solve(qfd_build(v0, ints, QfdGrid(dt, n)), eps=1e-10)
    basis = [evolve_real(ints, v0, a * dt) for a in range(n)]
    return sol, basis


class TestResponse:
    def test_identity_response_single_peak(self, h2):
        sol, basis = qfd_eigenbasis(h2, 5, 6)
        nq = 2 * h2.num_orbitals
        ident = pauli_sum(nq, [(1.0, "I" * nq)])
        omegas = np.linspace(-1.0, 1.0, 9)
        eta = 0.05
        got = response_function(sol, basis, ident, ident, omegas, eta)
        want = (eta / math.pi) / (omegas**2 + eta**2)
        np.testing.assert_allclose(got.real, want, atol=1e-8)
        np.testing.assert_allclose(got.imag, 0.0, atol=1e-8)

    def test_peak_positions_are_fci_gaps(self, h2):
        sol, basis = qfd_eigenbasis(h2, 5, 6)
        spec = full_spectrum(h2)
        ham = jordan_wigner(h2)
        gaps, _ = spectral_weights(sol, basis, ham, ham)
        want = spec.eigenvalues - spec.eigenvalues[0]
        np.testing.assert_allclose(np.sort(gaps), want, atol=1e-8)

    def test_sum_rule_complete_subspace(self, h2):
        sol, basis = qfd_eigenbasis(h2, 5, 6)
        b_op = jordan_wigner(h2)
        _, weights = spectral_weights(sol, basis, b_op.dagger(), b_op)
        spec = full_spectrum(h2)
        ground = statevector_from_fock(spec.eigenvectors[0])
        image = apply_pauli_sum(b_op, ground)
        norm2 = float(np.vdot(image.amplitudes, image.amplitudes).real)
        assert abs(float(np.sum(weights).real) - norm2) < 1e-8
        assert abs(float(np.sum(weights).imag)) < 1e-8

    def test_broadening_validation(self, h2):
        sol, basis = qfd_eigenbasis(h2, 5, 3)
        ham = jordan_wigner(h2)
        with pytest.raises(ValidationError):
            response_function(sol, basis, ham, ham, [0.0], 0.0)


class TestFastForward:
    def contained_setup(self, ints, k=3):
        spec = full_spectrum(ints)
        amp = np.sum([spec.eigenvectors[i].amplitudes for i in range(k)], axis=0)
        v0 = FockVector(ints.sector, amp / np.linalg.norm(amp))
        dt = 0.6
        sol = solve(qfd_build(v0, ints, QfdGrid(dt, k)), eps=1e-10)
        basis = [evolve_real(ints, v0, a * dt) for a in range(k)]
        return spec, v0, sol, basis

    def test_t_zero_is_projection(self, h2):
        _, v0, sol, basis = self.contained_setup(h2)
        result = fast_forward(sol, basis, v0, 0.0)
        assert result.projection_weight > 1 - 1e-10
        assert not result.low_weight
        got = statevector_from_fock(result.state)
        assert distance(got, statevector_from_fock(v0)) < 1e-8

    def test_contained_state_evolves_exactly(self, h2):
        _, v0, sol, basis = self.contained_setup(h2)
        result = fast_forward(sol, basis, v0, 100.0)
        want = evolve_real(h2, v0, 100.0)
        got = statevector_from_fock(result.state)
        assert distance(got, statevector_from_fock(want)) < 1e-6

    def test_fidelity_bounded_by_leaked_weight(self, h2):
        spec, _, sol, basis = self.contained_setup(h2)
        mix = np.array([0.6, 0.5, 0.4, 0.48])
        amp = np.sum(
            [c * spec.eigenvectors[i].amplitudes for i, c in enumerate(mix)],
            axis=0,
        )
        target = FockVector(h2.sector, amp / np.linalg.norm(amp))
        result = fast_forward(sol, basis, target, 17.0)
        weight = result.projection_weight
        assert weight < 1.0
        want = evolve_real(h2, target, 17.0)
        overlap = 1.0 - distance(
            statevector_from_fock(result.state), statevector_from_fock(want)
        )
        assert overlap**2 >= weight**2 - 1e-9

    def test_low_weight_flagged(self, h2):
        spec, _, sol, basis = self.contained_setup(h2)
        amp = spec.eigenvectors[3].amplitudes + 0.1 * spec.eigenvectors[0].amplitudes
        target = FockVector(h2.sector, amp / np.linalg.norm(amp))
        result = fast_forward(sol, basis, target, 1.0)
        assert result.projection_weight < 0.5
        assert result.low_weight

    def test_zero_vector_rejected(self, h2):
        _, _, sol, basis = self.contained_setup(h2)
        dim = sector_dimension(*h2.sector)
        with pytest.raises(ValidationError):
            fast_forward(sol, basis, FockVector(h2.sector, np.zeros(dim)), 1.0)


# ---------------------------------------------------------------------------
# cross-builder invariants


@pytest.mark.parametrize("builder", ["qse", "qfd", "qlanczos", "chebyshev", "gauss"])
def test_builders_produce_solvable_problems(h2, builder):
    v0 = random_vector(h2, 31)
    spec = full_spectrum(h2)
    if builder == "qse":
        prob = qse_build(statevector_from_fock(v0), h2, level="SD")
    elif builder == "qfd":
        prob = qfd_build(v0, h2, QfdGrid(0.3, 4))
    elif builder == "qlanczos":
        prob = qlanczos_build(v0, h2, 0.4, 4)
    elif builder == "chebyshev":
        lo = float(spec.eigenvalues[0] - 0.5)
        hi = float(spec.eigenvalues[-1] + 0.5)
        prob = chebyshev_krylov_build(v0, h2, 4, (lo, hi))
    else:
        prob = gaussian_power_build(v0, h2, 4, 0.8)
    sol = solve(prob, eps=1e-10)
    # every subspace contains v0, so the ground estimate is variational
    assert spec.eigenvalues[0] - 1e-9 <= sol.eigenvalues[0]
    assert np.all(np.diff(sol.eigenvalues) >= -1e-12)
