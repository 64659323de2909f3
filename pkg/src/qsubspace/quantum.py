"""Measurement-driven subspace builders.

Each builder prepares a family of states by statevector simulation (operator
pools applied to a reference, real- or imaginary-time snapshots, filtered
power bases), evaluates overlap and Hamiltonian matrix elements exactly, and
packages them as a SubspaceProblem for the thresholded eigensolver. Derived
quantities (excitation energies, convergence bounds, response spectra,
fast-forwarded states) reuse the same machinery.

All expectation values here use the exact statevector backend, which is the
correctness reference; the shots module layers a sampling model on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    CapacityError,
    DataError,
    RescalingError,
    StepError,
    ValidationError,
)
from .fock import (
    FockVector,
    apply_hamiltonian,
    evolve_imag,
    evolve_real,
    exact_eigenpairs,
    sector_dimension,
)
from .fock import inner as fock_inner
from .geev import GEEVSolution, SubspaceProblem
from .integrals import MolecularIntegrals, cholesky_decompose_eri, effective_one_body
from .qubits import PauliString, PauliSum, identity_sum, jordan_wigner, jw_ladder
from .engine import (
    Statevector,
    apply_pauli,
    apply_pauli_exponential,
    apply_pauli_sum,
    expectation,
    fock_from_statevector,
    statevector_from_fock,
    trotter_plan,
    trotter_step,
)
from .shots import EntryPlan, ExpectationRecipe, MeasurementJob
# pool_size^2 * Pauli terms of H; expansion-based builders refuse past this
_QSE_BUDGET = 50_000_000

# pool vectors with smaller norm on the reference are metric null directions
_NULL_OP = 1e-12


# ---------------------------------------------------------------------------
# excitation operators and pools


@dataclass(frozen=True)
class ExcitationOperator:
    """Number- and spin-projection-conserving ladder monomial.

    kind "identity" carries no indices. kind "single" is adag_{a s} a_{i s}
    with orbitals=(a, i), spins=(s,). kind "double" is
    adag_{a s} adag_{b t} a_{j t} a_{i s} with orbitals=(a, b, i, j),
    spins=(s, t). Spin 0 is up, 1 is down. Same-spin doubles are canonical
    with a < b and i < j; opposite-spin doubles fix (s, t) = (0, 1).
    """

    num_orbitals: int
    kind: str
    orbitals: tuple = ()
    spins: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "orbitals", tuple(int(x) for x in self.orbitals))
        object.__setattr__(self, "spins", tuple(int(s) for s in self.spins))
        if self.num_orbitals < 1:
            raise ValidationError("need at least one orbital")
        shapes = {"identity": (0, 0), "single": (2, 1), "double": (4, 2)}
        if self.kind not in shapes:
            raise ValidationError(f"unknown excitation kind {self.kind!r}")
        if (len(self.orbitals), len(self.spins)) != shapes[self.kind]:
            raise ValidationError(f"index counts do not match kind {self.kind!r}")
        if any(not 0 <= x < self.num_orbitals for x in self.orbitals):
            raise ValidationError("orbital index outside register")
        if any(s not in (0, 1) for s in self.spins):
            raise ValidationError("spin must be 0 (up) or 1 (down)")
        if self.kind == "double":
            a, b, i, j = self.orbitals
            s, t = self.spins
            if s == t and not (a < b and i < j):
                raise ValidationError("same-spin double needs a < b and i < j")
            if s != t and (s, t) != (0, 1):
                raise ValidationError("opposite-spin double fixes spins (0, 1)")

    def to_pauli(self) -> PauliSum:
        """Qubit image on 2m qubits (up modes 0..m-1, down modes m..2m-1)."""
        m = self.num_orbitals
        nq = 2 * m
        if self.kind == "identity":
            return identity_sum(nq)
        if self.kind == "single":
            a, i = self.orbitals
            (s,) = self.spins
            return jw_ladder(a + s * m, nq, True) * jw_ladder(i + s * m, nq, False)
        a, b, i, j = self.orbitals
        s, t = self.spins
        return (
            jw_ladder(a + s * m, nq, True)
            * jw_ladder(b + t * m, nq, True)
            * jw_ladder(j + t * m, nq, False)
            * jw_ladder(i + s * m, nq, False)
        )


def single_excitations(num_orbitals: int, include_diagonal: bool = True) -> list:
    ops = []
    for s in (0, 1):
        for a in range(num_orbitals):
            for i in range(num_orbitals):
                if a == i and not include_diagonal:
                    continue
                ops.append(ExcitationOperator(num_orbitals, "single", (a, i), (s,)))
    return ops


def double_excitations(num_orbitals: int, disjoint_only: bool = False) -> list:
    """Canonical doubles; disjoint_only drops creation/annihilation overlap."""
    m = num_orbitals
    ops = []
    for s in (0, 1):
        for a in range(m):
            for b in range(a + 1, m):
                for i in range(m):
                    for j in range(i + 1, m):
                        if disjoint_only and ({a, b} & {i, j}):
                            continue
                        ops.append(
                            ExcitationOperator(m, "double", (a, b, i, j), (s, s))
                        )
    for a in range(m):
        for b in range(m):
            for i in range(m):
                for j in range(m):
                    if disjoint_only and (a == i or b == j):
                        continue
                    ops.append(ExcitationOperator(m, "double", (a, b, i, j), (0, 1)))
    return ops


def qse_pool(num_orbitals: int, level: str) -> list:
    """Identity plus all singles, plus all doubles at level SD."""
    level = str(level).upper()
    if level not in ("S", "SD"):
        raise ValidationError(f"level must be S or SD, got {level!r}")
    ops = [ExcitationOperator(num_orbitals, "identity")]
    ops += single_excitations(num_orbitals)
    if level == "SD":
        ops += double_excitations(num_orbitals)
    return ops


def qeom_pool(num_orbitals: int) -> list:
    """True excitations only: off-diagonal singles, disjoint-index doubles."""
    return single_excitations(num_orbitals, include_diagonal=False) + (
        double_excitations(num_orbitals, disjoint_only=True)
    )


# ---------------------------------------------------------------------------
# expansion subspaces on a reference state


def _sector_reference(state: Statevector, ints: MolecularIntegrals) -> Statevector:
    if state.num_qubits != 2 * ints.num_orbitals:
        raise ValidationError("state register does not match the orbital count")
    fock_from_statevector(state, ints.sector)  # raises on sector leakage
    return state.normalized()


def qse_build(
    state: Statevector,
    ints: MolecularIntegrals,
    level: str = "SD",
    budget: int = _QSE_BUDGET,
) -> SubspaceProblem:
    """Subspace over pool states O_a |Phi>.

    S_ab = <Phi| O_a^+ O_b |Phi> and H_ab = <Phi| O_a^+ H O_b |Phi>,
    evaluated by applying the qubit images of the pool operators and the
    Hamiltonian to the reference statevector.
    """
    phi = _sector_reference(state, ints)
    pool = qse_pool(ints.num_orbitals, level)
    ham = jordan_wigner(ints)
    cost = len(pool) ** 2 * len(ham)
    if cost > budget:
        raise CapacityError(
            f"pool^2 x Pauli terms = {cost} exceeds the budget {budget}"
        )
    states = [apply_pauli_sum(op.to_pauli(), phi) for op in pool]
    basis = np.stack([s.amplitudes for s in states])
    images = np.stack([apply_pauli_sum(ham, s).amplitudes for s in states])
    smat = basis.conj() @ basis.T
    hmat = basis.conj() @ images.T
    provenance = {
        "method": "qse",
        "level": str(level).upper(),
        "pool_size": len(pool),
    }
    return SubspaceProblem(hmat, smat, provenance)


def qse_recipe(
    state: Statevector,
    ints: MolecularIntegrals,
    level: str = "SD",
    budget: int = _QSE_BUDGET,
) -> ExpectationRecipe:
    """Measurement plan whose exact limit reproduces qse_build.

    Expands O_a^+ O_b and O_a^+ H O_b into Pauli sums measured on the one
    reference state; conjugate entries share the same estimates, so only
    the i <= j triangle is planned.
    """
    phi = _sector_reference(state, ints)
    pool = qse_pool(ints.num_orbitals, level)
    ham = jordan_wigner(ints)
    cost = len(pool) ** 2 * len(ham)
    if cost > budget:
        raise CapacityError(
            f"pool^2 x Pauli terms = {cost} exceeds the budget {budget}"
        )
    paulis = [op.to_pauli() for op in pool]
    dags = [p.dagger() for p in paulis]
    h_images = [ham * p for p in paulis]
    raw = {}
    seen = set()
    for a in range(len(pool)):
        for b in range(a, len(pool)):
            raw[("s", a, b)] = dags[a] * paulis[b]
            raw[("h", a, b)] = dags[a] * h_images[b]
    for sm in raw.values():
        seen.update(s for s in sm.strings if s.x or s.z)
    order = sorted(seen, key=lambda s: s.letters)
    index = {s: k for k, s in enumerate(order)}
    entries = {}
    for key, sm in raw.items():
        const = 0.0j
        terms = []
        for c, s in sm.terms():
            if s.x == 0 and s.z == 0:
                const += c
            else:
                terms.append((0, index[s], c))
        entries[key] = EntryPlan(complex(const), tuple(terms))
    provenance = {
        "method": "qse",
        "level": str(level).upper(),
        "pool_size": len(pool),
    }
    return ExpectationRecipe(
        len(pool), (MeasurementJob(phi, tuple(order)),), entries, provenance
    )


@dataclass(eq=False)
class EomBlocks:
    """Commutator blocks of the excitation-operator eigenproblem.

    mmat and vmat are Hermitized on construction; all blocks must be finite.
    pool holds the retained operators, dropped counts pool members that
    annihilate the reference.
    """

    mmat: np.ndarray
    qmat: np.ndarray
    vmat: np.ndarray
    wmat: np.ndarray
    pool: tuple = ()
    dropped: int = 0
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        p = None
        for name in ("mmat", "qmat", "vmat", "wmat"):
            mat = np.asarray(getattr(self, name), dtype=complex)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValidationError(f"{name} must be square")
            if p is None:
                p = mat.shape[0]
            elif mat.shape[0] != p:
                raise ValidationError("block dimensions differ")
            if not np.all(np.isfinite(mat)):
                raise DataError(f"{name} contains non-finite entries")
            setattr(self, name, mat)
        self.mmat = (self.mmat + self.mmat.conj().T) / 2.0
        self.vmat = (self.vmat + self.vmat.conj().T) / 2.0

    @property
    def size(self) -> int:
        return self.mmat.shape[0]


def _eom_energies(blocks: EomBlocks, tda: bool) -> np.ndarray:
    """Solve the block pencil (or its Tamm-Dancoff reduction) for gaps."""
    p = blocks.size
    report = blocks.report
    report["tda"] = bool(tda)
    if tda:
        w, u = np.linalg.eigh(blocks.vmat)
        keep = np.abs(w) > 1e-10
        report["metric_dropped"] = int(np.sum(~keep))
        report["metric_negative"] = int(np.sum(w[keep] < 0))
        if not np.any(keep):
            raise DataError("excitation metric has no significant directions")
        ub = u[:, keep]
        vals = scipy.linalg.eig(
            ub.conj().T @ blocks.mmat @ ub, np.diag(w[keep]), right=False
        )
        finite = vals[np.isfinite(vals)]
        report["num_finite"] = int(finite.size)
        report["max_imag"] = float(np.max(np.abs(finite.imag), initial=0.0))
        return np.sort(finite.real)

    lhs = np.block([[blocks.mmat, blocks.qmat], [blocks.qmat.conj(), blocks.mmat.conj()]])
    rhs = np.block([[blocks.vmat, blocks.wmat], [-blocks.wmat.conj(), -blocks.vmat.conj()]])
    if float(np.max(np.abs(lhs))) < 1e-14:
        # commuting pool: every excitation is degenerate at zero
        report["num_finite"] = 2 * p
        report["max_imag"] = 0.0
        report["paired"] = p
        return np.zeros(p)
    # the metric is Hermitian (V Hermitian, W antisymmetric) but indefinite;
    # pool states that are linearly dependent on the reference give exact
    # null directions shared by both sides, so those are projected out
    w, u = np.linalg.eigh(rhs)
    keep = np.abs(w) > 1e-10 * max(1.0, float(np.max(np.abs(w))))
    report["metric_dropped"] = int(np.sum(~keep))
    report["metric_min_kept"] = float(np.min(np.abs(w[keep]), initial=math.inf))
    flagged = bool(np.any(~keep))
    report["flagged_singular"] = flagged
    if flagged:
        report["suggestion"] = "metric has null directions; consider tda=True"
    if not np.any(keep):
        raise DataError("excitation metric has no significant directions")
    ub = u[:, keep]
    vals = scipy.linalg.eig(ub.conj().T @ lhs @ ub, np.diag(w[keep]), right=False)
    finite = np.sort(vals[np.isfinite(vals)].real)
    k = finite.size
    report["num_finite"] = int(k)
    report["max_imag"] = float(
        np.max(np.abs(vals[np.isfinite(vals)].imag), initial=0.0)
    )
    upper = finite[k - k // 2 :]
    lower = -finite[: k // 2][::-1]
    scale = max(1.0, float(np.max(np.abs(finite), initial=0.0)))
    report["paired"] = int(np.sum(np.abs(upper - lower) <= 1e-8 * scale))
    return upper


def qeom_build(
    state: Statevector,
    ints: MolecularIntegrals,
    tda: bool = False,
    pool: list | None = None,
):
    """Commutator-block eigenproblem for excitation energies.

    Blocks on the reference |Phi> with pool operators F_J:

        V_IJ =  <Phi| [F_I^+, F_J] |Phi>
        W_IJ = -<Phi| [F_I^+, F_J^+] |Phi>
        M_IJ =  <Phi| [F_I^+, [H, F_J]] |Phi>
        Q_IJ = -<Phi| [F_I^+, [H, F_J^+]] |Phi>

    The full pencil [[M, Q], [Q*, M*]] z = dE [[V, W], [-W*, -V*]] z has
    paired +/- eigenvalues; the upper half is returned, ascending. With
    tda=True the reduced problem M x = dE V x is solved instead and every
    finite eigenvalue is returned. Operators annihilating the reference are
    dropped before solving.

    Returns (EomBlocks, excitation energies); diagnostics (pairing, metric
    conditioning, imaginary residue) land in blocks.report.
    """
    phi = _sector_reference(state, ints)
    if pool is None:
        pool = qeom_pool(ints.num_orbitals)
    if not pool:
        raise ValidationError("empty excitation pool")
    ham = jordan_wigner(ints)
    kept, paulis, excite, deexcite = [], [], [], []
    for op in pool:
        f = op.to_pauli()
        a = apply_pauli_sum(f, phi)
        if a.norm() < _NULL_OP:
            continue
        kept.append(op)
        paulis.append(f)
        excite.append(a)
        deexcite.append(apply_pauli_sum(f.dagger(), phi))
    dropped = len(pool) - len(kept)
    if not kept:
        raise DataError("every pool operator annihilates the reference")

    hphi = apply_pauli_sum(ham, phi)
    amat = np.stack([s.amplitudes for s in excite])
    cmat = np.stack([s.amplitudes for s in deexcite])
    hamat = np.stack([apply_pauli_sum(ham, s).amplitudes for s in excite])
    hcmat = np.stack([apply_pauli_sum(ham, s).amplitudes for s in deexcite])
    fhmat = np.stack([apply_pauli_sum(f, hphi).amplitudes for f in paulis])
    fdhmat = np.stack([apply_pauli_sum(f.dagger(), hphi).amplitudes for f in paulis])

    def gram(x, y):
        return x.conj() @ y.T

    vmat = gram(amat, amat) - gram(cmat, cmat).T
    wmat = -(gram(amat, cmat) - gram(amat, cmat).T)
    mmat = (
        gram(amat, hamat)
        - gram(amat, fhmat)
        - gram(fdhmat, cmat).T
        + gram(cmat, hcmat).T
    )
    qmat = -(
        gram(amat, hcmat)
        - gram(amat, fdhmat)
        - gram(fhmat, cmat).T
        + gram(amat, hcmat).T
    )
    blocks = EomBlocks(mmat, qmat, vmat, wmat, pool=tuple(kept), dropped=dropped)
    blocks.report["pool_size"] = len(kept)
    blocks.report["dropped"] = dropped
    energies = _eom_energies(blocks, tda)
    return blocks, energies


# ---------------------------------------------------------------------------
# real-time (phase-estimation-free) subspaces


@dataclass(frozen=True)
class QfdGrid:
    """Uniform time grid t_a = a*dt (optionally centered around zero)."""

    dt: float
    n: int
    backend: str = "exact"
    substeps: int = 1
    symmetric: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.n < 1:
            raise ValidationError("need at least one grid point")
        if self.backend not in ("exact", "trotter"):
            raise ValidationError(f"unknown backend {self.backend!r}")
        if self.substeps < 1:
            raise ValidationError("substeps must be at least 1")

    def times(self) -> np.ndarray:
        alpha = np.arange(self.n, dtype=float)
        if self.symmetric:
            alpha -= (self.n - 1) / 2.0
        return alpha * self.dt


def _trotter_snapshots(v0: FockVector, ints, times, substeps: int) -> list:
    """Product-formula snapshots at the grid times, stepped outward from 0."""
    factors = cholesky_decompose_eri(ints)
    plan = trotter_plan(effective_one_body(ints, factors), factors, ints.e_nuc)
    start = statevector_from_fock(v0)
    cache = {0.0: start}

    def walk(targets):
        t_prev, cur = 0.0, start
        for t in targets:
            if t not in cache:
                hop = (t - t_prev) / substeps
                for _ in range(substeps):
                    cur = trotter_step(plan, hop, cur)
                cache[t] = cur
            t_prev, cur = t, cache[t]

    walk(sorted(t for t in times if t >= 0))
    walk(sorted((t for t in times if t < 0), reverse=True))
    # Givens and phase layers conserve occupation numbers, so the snapshots
    # stay exactly inside the reference sector
    return [fock_from_statevector(cache[float(t)], v0.sector) for t in times]


def qfd_build(state0: FockVector, ints: MolecularIntegrals, grid: QfdGrid) -> SubspaceProblem:
    """Subspace over propagated states v_a = exp(-i t_a H) v0.

    S_ab = <v_a|v_b> and H_ab = <v_a|H|v_b>. With the exact backend both
    depend only on b - a (Toeplitz); the trotter backend breaks that
    structure by product-formula error.
    """
    v0 = state0.normalized()
    times = grid.times()
    if grid.backend == "exact":
        snaps = [evolve_real(ints, v0, float(t)) for t in times]
    else:
        snaps = _trotter_snapshots(v0, ints, times, grid.substeps)
    basis = np.stack([s.amplitudes for s in snaps])
    images = np.stack([apply_hamiltonian(ints, s).amplitudes for s in snaps])
    smat = basis.conj() @ basis.T
    hmat = basis.conj() @ images.T
    provenance = {
        "method": "qfd",
        "dt": float(grid.dt),
        "n": int(grid.n),
        "backend": grid.backend,
        "substeps": int(grid.substeps),
        "symmetric": bool(grid.symmetric),
    }
    return SubspaceProblem(hmat, smat, provenance)


def qfd_recipe(
    state0: FockVector, ints: MolecularIntegrals, grid: QfdGrid
) -> ExpectationRecipe:
    """Hadamard-test measurement plan whose exact limit reproduces qfd_build.

    Matrix elements depend only on the grid offset b - a, so each offset k
    gets one superposition register (|0> snap_0 + |1> snap_k)/sqrt(2)
    carrying ancilla-X and ancilla-Y copies of every Hamiltonian string;
    offset zero is measured directly on the first snapshot.  Every entry of
    one diagonal shares the same estimates, so sampled matrices stay exactly
    Toeplitz.  With the trotter backend the offset structure is exact for S
    and holds for H up to the product-formula error the builder already
    accepts.
    """
    v0 = state0.normalized()
    times = grid.times()
    if grid.backend == "exact":
        snaps = [evolve_real(ints, v0, float(t)) for t in times]
    else:
        snaps = _trotter_snapshots(v0, ints, times, grid.substeps)
    psi = [statevector_from_fock(s).normalized() for s in snaps]
    ham = jordan_wigner(ints)
    nq = 2 * ints.num_orbitals
    ham_terms = list(ham.terms())
    const_h = sum(c for c, s in ham_terms if s.x == 0 and s.z == 0)
    plain = sorted((s for _, s in ham_terms if s.x or s.z), key=lambda s: s.letters)
    plain_index = {s: k for k, s in enumerate(plain)}
    jobs = [MeasurementJob(psi[0], tuple(plain))]
    diag_terms = tuple((0, plain_index[s], c) for c, s in ham_terms if s.x or s.z)
    s_plans = {0: EntryPlan(1.0 + 0.0j, ())}
    h_plans = {0: EntryPlan(complex(const_h), diag_terms)}
    anc = 1 << nq
    identity = PauliString(nq, 0, 0)
    for k in range(1, grid.n):
        amps = np.concatenate([psi[0].amplitudes, psi[k].amplitudes]) / math.sqrt(2.0)
        register = Statevector(nq + 1, amps)
        pairs = {
            sigma: (
                PauliString(nq + 1, sigma.x | anc, sigma.z),
                PauliString(nq + 1, sigma.x | anc, sigma.z | anc),
            )
            for sigma in [identity, *plain]
        }
        strings = sorted(
            {p for two in pairs.values() for p in two}, key=lambda s: s.letters
        )
        index = {s: i for i, s in enumerate(strings)}
        job_id = len(jobs)
        jobs.append(MeasurementJob(register, tuple(strings)))
        x_id, y_id = pairs[identity]
        s_plans[k] = EntryPlan(
            0.0j, ((job_id, index[x_id], 1.0 + 0.0j), (job_id, index[y_id], 1.0j))
        )
        acc = {}
        for c, s in ham_terms:
            x_p, y_p = pairs[identity if (s.x == 0 and s.z == 0) else s]
            acc[index[x_p]] = acc.get(index[x_p], 0.0j) + c
            acc[index[y_p]] = acc.get(index[y_p], 0.0j) + 1.0j * c
        h_plans[k] = EntryPlan(
            0.0j, tuple((job_id, i, c) for i, c in sorted(acc.items()))
        )
    entries = {}
    for a in range(grid.n):
        for b in range(a, grid.n):
            entries[("s", a, b)] = s_plans[b - a]
            entries[("h", a, b)] = h_plans[b - a]
    provenance = {
        "method": "qfd",
        "dt": float(grid.dt),
        "n": int(grid.n),
        "backend": grid.backend,
        "substeps": int(grid.substeps),
        "symmetric": bool(grid.symmetric),
    }
    return ExpectationRecipe(grid.n, tuple(jobs), entries, provenance)


def epperly_qfd_bound(
    ints: MolecularIntegrals,
    v0: FockVector,
    num_points: int,
    l_index: int | None = None,
) -> dict:
    """Ground-energy error bound for a uniform-grid time subspace.

    For the grid step dt = pi / (E_L - E_0) and d grid points,

        0 <= E0_estimate - E0 <= (1 + pi dE_1/dE_L)^-(d-1)
                                 * 8 sum_{u=1..L} dE_u w_u / w_0
                               + 2 sum_{u>L} dE_u w_u / w_0

    with dE_u = E_u - E_0 and w_u the squared overlap of v0 with the u-th
    eigenvector. Default L = D-1 empties the second sum. Returns the bound
    together with the prescribed dt.
    """
    if num_points < 1:
        raise ValidationError("need at least one grid point")
    dim = sector_dimension(*ints.sector)
    if l_index is None:
        l_index = dim - 1
    if not 1 <= l_index <= dim - 1:
        raise ValidationError(f"l_index={l_index} outside 1..{dim - 1}")
    spectrum = exact_eigenpairs(ints, k=dim)
    v = v0.normalized()
    weights = np.array(
        [abs(fock_inner(vec, v)) ** 2 for vec in spectrum.eigenvectors]
    )
    gaps = spectrum.eigenvalues - spectrum.eigenvalues[0]
    if gaps[l_index] <= 0:
        raise DataError("reference level is degenerate with the ground state")
    dt = math.pi / float(gaps[l_index])
    if weights[0] <= 0:
        bound = math.inf
    else:
        decay = (1.0 + math.pi * gaps[1] / gaps[l_index]) ** (-(num_points - 1))
        head = 8.0 * float(np.sum(gaps[1 : l_index + 1] * weights[1 : l_index + 1]))
        tail = 2.0 * float(np.sum(gaps[l_index + 1 :] * weights[l_index + 1 :]))
        bound = (decay * head + tail) / float(weights[0])
    return {
        "bound": float(bound),
        "dt": dt,
        "l_index": int(l_index),
        "num_points": int(num_points),
        "w0": float(weights[0]),
    }


# ---------------------------------------------------------------------------
# imaginary-time subspaces


def qite_pool(ints: MolecularIntegrals) -> tuple:
    """Hermitian Pauli strings spanning the anti-Hermitian excitation images.

    Every T - T^+ over off-diagonal singles and doubles maps to a purely
    imaginary combination of Hermitian strings; the distinct strings form
    the rotation pool.
    """
    seen = set()
    for op in qeom_pool(ints.num_orbitals):
        f = op.to_pauli()
        for coeff, string in (f - f.dagger()).terms():
            if abs(coeff) > _NULL_OP:
                seen.add(string)
    return tuple(sorted(seen, key=lambda s: s.letters))


def qite_step(
    state: Statevector,
    ints: MolecularIntegrals,
    delta_tau: float,
    pool: tuple | None = None,
    halve_on_increase: bool = True,
):
    """One unitary imaginary-time step.

    Matches (1 + i sum_m theta_m G_m)|Phi> to the first-order propagated
    state by solving A theta = b with

        A_mn = <Phi| {G_m, G_n} |Phi>    b_m = -i dtau <Phi| [H, G_m] |Phi>

    (Tikhonov damping 1e-8), then applies prod_m exp(i theta_m G_m). If the
    energy rises by more than 1e-8 the step is retried once with dtau/2 and
    then rejected. Returns (state, energy, norm factor) where the norm
    factor sqrt(1 - 2 dtau <H> + 2 dtau^2 <H^2>) is the second-order
    estimate of the decay of the unnormalized imaginary-time state.
    """
    if not delta_tau > 0:
        raise ValidationError("delta_tau must be positive")
    if pool is None:
        pool = qite_pool(ints)
    if not pool:
        raise ValidationError("empty rotation pool")
    ham = jordan_wigner(ints)
    phi = state.normalized()
    e_old = float(expectation(ham, phi).real)
    rotated = np.stack([apply_pauli(p, phi).amplitudes for p in pool])
    amat = 2.0 * np.real(rotated.conj() @ rotated.T)
    hphi = apply_pauli_sum(ham, phi)
    bvec = 2.0 * delta_tau * np.imag(rotated @ np.conj(hphi.amplitudes))
    try:
        theta = scipy.linalg.solve(
            amat + 1e-8 * np.eye(len(pool)), bvec, assume_a="pos"
        )
    except np.linalg.LinAlgError as exc:  # pragma: no cover - damped solve
        raise StepError(f"rotation solve failed: {exc}") from exc
    if not np.all(np.isfinite(theta)):
        raise StepError("rotation solve produced non-finite angles")
    new = phi
    for string, angle in zip(pool, theta):
        # exp(i angle P) = R_P(-2 angle)
        new = apply_pauli_exponential(string, -2.0 * float(angle), new)
    e_new = float(expectation(ham, new).real)
    if e_new > e_old + 1e-8:
        if halve_on_increase:
            return qite_step(state, ints, delta_tau / 2.0, pool, False)
        raise StepError(
            f"energy rose from {e_old:.12f} to {e_new:.12f} at dtau={delta_tau}"
        )
    h2 = float(np.vdot(hphi.amplitudes, hphi.amplitudes).real)
    factor = math.sqrt(
        max(1.0 - 2.0 * delta_tau * e_old + 2.0 * delta_tau**2 * h2, 0.0)
    )
    return new, e_new, factor


def qlanczos_build(
    v0: FockVector,
    ints: MolecularIntegrals,
    delta_tau: float,
    n: int,
    mode: str = "exact",
    pool: tuple | None = None,
) -> SubspaceProblem:
    """Subspace over imaginary-time snapshots v_a = exp(-a dtau H) v0 / norm.

    Only norms and snapshot energies are recorded, at every half step
    k = 0..2(n-1): N_k = |exp(-k dtau/2 H) v0| and the snapshot Rayleigh
    quotient h_k. Matrix elements then follow from

        S_ab = N_{a+b}^2 / (N_{2a} N_{2b})      H_ab = S_ab h_{a+b}

    mode "exact" propagates with the sector eigendecomposition; mode "qite"
    replaces each half step by a unitary step whose norm factor estimates
    the decay.
    """
    if not delta_tau > 0:
        raise ValidationError("delta_tau must be positive")
    if n < 1:
        raise ValidationError("need at least one snapshot")
    if mode not in ("exact", "qite"):
        raise ValidationError(f"unknown mode {mode!r}")
    half = delta_tau / 2.0
    num_half = 2 * (n - 1)
    norms = np.ones(num_half + 1)
    rayleigh = np.empty(num_half + 1)
    if mode == "exact":
        cur = v0.normalized()
        rayleigh[0] = fock_inner(cur, apply_hamiltonian(ints, cur)).real
        for k in range(1, num_half + 1):
            cur, step = evolve_imag(ints, cur, half)
            norms[k] = norms[k - 1] * step
            rayleigh[k] = fock_inner(cur, apply_hamiltonian(ints, cur)).real
    else:
        if pool is None:
            pool = qite_pool(ints)
        ham = jordan_wigner(ints)
        cur = statevector_from_fock(v0.normalized())
        rayleigh[0] = float(expectation(ham, cur).real)
        for k in range(1, num_half + 1):
            cur, energy, factor = qite_step(
                cur, ints, half, pool, halve_on_increase=False
            )
            norms[k] = norms[k - 1] * factor
            rayleigh[k] = energy
    idx = np.add.outer(np.arange(n), np.arange(n))
    full = norms[2 * np.arange(n)]
    smat = norms[idx] ** 2 / np.outer(full, full)
    hmat = smat * rayleigh[idx]
    provenance = {
        "method": "qlanczos",
        "delta_tau": float(delta_tau),
        "n": int(n),
        "mode": mode,
        "norms": [float(x) for x in norms],
    }
    return SubspaceProblem(hmat, smat, provenance)


# ---------------------------------------------------------------------------
# polynomial filter subspaces


def chebyshev_krylov_build(
    v0: FockVector,
    ints: MolecularIntegrals,
    n: int,
    bounds: tuple,
) -> SubspaceProblem:
    """Subspace over T_a(Hbar) v0 with Hbar = (2H - (a+b)) / (b - a).

    Only the 2n moments f_k = <v0| T_k(Hbar) |v0> are needed; the product
    rule 2 T_a T_b = T_{a+b} + T_{|a-b|} assembles

        S_ab = (f_{a+b} + f_{|a-b|}) / 2
        Hbar_ab = (f_{a+b+1} + f_{|a+b-1|} + f_{|a-b|+1} + f_{|a-b-1|}) / 4

    and H is returned in energy units as scale * Hbar + shift * S. Any
    moment leaving [-1, 1] means the spectrum escapes [a, b].
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not hi > lo:
        raise ValidationError("need spectral bounds with b > a")
    if n < 1:
        raise ValidationError("need at least one basis vector")
    scale = (hi - lo) / 2.0
    shift = (hi + lo) / 2.0
    start = v0.normalized()

    def rescaled(w: FockVector) -> FockVector:
        hw = apply_hamiltonian(ints, w)
        return FockVector(w.sector, (hw.amplitudes - shift * w.amplitudes) / scale)

    raw = np.empty(2 * n, dtype=complex)
    raw[0] = 1.0
    prev, cur = start, rescaled(start)
    if 2 * n > 1:
        raw[1] = fock_inner(start, cur)
    for k in range(2, 2 * n):
        nxt = FockVector(start.sector, 2.0 * rescaled(cur).amplitudes - prev.amplitudes)
        prev, cur = cur, nxt
        raw[k] = fock_inner(start, cur)
    worst = int(np.argmax(np.abs(raw)))
    if abs(raw[worst]) > 1.0 + 1e-8:
        raise RescalingError(
            f"moment {worst} has magnitude {abs(raw[worst]):.6f}; "
            f"spectrum escapes [{lo}, {hi}]"
        )
    f = raw.real
    r = np.arange(n)
    tot = np.add.outer(r, r)
    dif = np.abs(np.subtract.outer(r, r))
    smat = (f[tot] + f[dif]) / 2.0
    hbar = (f[tot + 1] + f[np.abs(tot - 1)] + f[dif + 1] + f[np.abs(dif - 1)]) / 4.0
    hmat = scale * hbar + shift * smat
    provenance = {"method": "chebyshev", "n": int(n), "bounds": [lo, hi]}
    return SubspaceProblem(hmat, smat, provenance)


def gaussian_power_build(
    v0: FockVector,
    ints: MolecularIntegrals,
    n: int,
    tau: float,
    e0: float | None = None,
) -> SubspaceProblem:
    """Subspace over v_a = (H - E0)^a exp(-(H - E0)^2 tau^2 / 2) v0.

    The Gaussian filter suppresses eigencomponents far from E0, taming the
    norm growth of the power basis; tau = 0 recovers the plain shifted
    power basis. E0 defaults to the Rayleigh quotient of v0. Realized
    through the dense sector eigendecomposition.
    """
    if n < 1:
        raise ValidationError("need at least one basis vector")
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    dim = sector_dimension(*ints.sector)
    spectrum = exact_eigenpairs(ints, k=dim)
    v = v0.normalized()
    if e0 is None:
        e0 = float(fock_inner(v, apply_hamiltonian(ints, v)).real)
    basis_mat = np.stack([vec.amplitudes for vec in spectrum.eigenvectors])
    coeff = basis_mat.conj() @ v.amplitudes
    centered = spectrum.eigenvalues - e0
    filtered = np.exp(-(centered**2) * tau**2 / 2.0) * coeff
    rows = np.stack([centered**alpha * filtered for alpha in range(n)])
    smat = rows.conj() @ rows.T
    hmat = rows.conj() @ (spectrum.eigenvalues * rows).T
    provenance = {
        "method": "gaussian_power",
        "n": int(n),
        "tau": float(tau),
        "e0": float(e0),
        "basis_norms": [float(np.linalg.norm(row)) for row in rows],
    }
    return SubspaceProblem(hmat, smat, provenance)


# ---------------------------------------------------------------------------
# derived spectra and fast-forwarding


def _subspace_eigenstates(sol: GEEVSolution, basis: list) -> np.ndarray:
    """Rows are eigenvector amplitudes assembled from the original basis."""
    if not basis:
        raise ValidationError("empty basis")
    arrays = np.stack([np.asarray(x.amplitudes) for x in basis])
    if sol.coefficients.shape[0] != arrays.shape[0]:
        raise ValidationError("coefficient rows do not match the basis size")
    return sol.coefficients.T @ arrays


def spectral_weights(
    sol: GEEVSolution,
    basis: list,
    a_op: PauliSum,
    b_op: PauliSum,
) -> tuple[np.ndarray, np.ndarray]:
    """Stick spectrum: gaps dE_u and weights <0|A|u><u|B|0>.

    Basis states may be FockVectors (converted to the full register) or
    Statevectors.  The u=0 term is included.
    """
    states = [
        statevector_from_fock(x) if isinstance(x, FockVector) else x for x in basis
    ]
    eigen = _subspace_eigenstates(sol, states)
    nq = states[0].num_qubits
    ground = Statevector(nq, eigen[0])
    adag_ground = apply_pauli_sum(a_op.dagger(), ground).amplitudes
    b_ground = apply_pauli_sum(b_op, ground).amplitudes
    a_amp = np.conj(eigen.conj() @ adag_ground)  # <0|A|u> = conj(<u|A^+|0>)
    b_amp = eigen.conj() @ b_ground  # <u|B|0>
    gaps = sol.eigenvalues - sol.eigenvalues[0]
    return gaps, a_amp * b_amp


def response_function(
    sol: GEEVSolution,
    basis: list,
    a_op: PauliSum,
    b_op: PauliSum,
    omegas,
    eta: float,
) -> np.ndarray:
    """Frequency response sum_u L_eta(w - dE_u) <0|A|u><u|B|0>.

    The subspace eigenvectors replace the exact eigenfunctions; L_eta is a
    unit-area Lorentzian, so integrating recovers the transition weights.
    """
    if not eta > 0:
        raise ValidationError("broadening must be positive")
    gaps, weights = spectral_weights(sol, basis, a_op, b_op)
    omegas = np.asarray(omegas, dtype=float)
    spectrum = np.zeros(omegas.shape, dtype=complex)
    for w, gap in zip(weights, gaps):
        spectrum += w * (eta / math.pi) / ((omegas - gap) ** 2 + eta**2)
    return spectrum


@dataclass(eq=False)
class FastForwardResult:
    """Propagated state plus how much of the input the subspace captured."""

    state: object
    projection_weight: float
    low_weight: bool


def fast_forward(sol: GEEVSolution, basis: list, state, t: float) -> FastForwardResult:
    """Evolve by projecting onto subspace eigenpairs and rotating phases.

    out = sum_u exp(-i E_u t) <psi_u|state> |psi_u>. The projection weight
    sum |<psi_u|state>|^2 / |state|^2 reports subspace leakage; below 0.5
    the result is flagged. t = 0 returns the plain projection.
    """
    eigen = _subspace_eigenstates(sol, basis)
    target = np.asarray(state.amplitudes)
    if target.shape != eigen[0].shape:
        raise ValidationError("state does not live in the basis vector space")
    coeff = eigen.conj() @ target
    norm2 = float(np.vdot(target, target).real)
    if norm2 == 0.0:
        raise ValidationError("cannot fast-forward the zero vector")
    weight = float(np.sum(np.abs(coeff) ** 2) / norm2)
    out = (np.exp(-1j * sol.eigenvalues * t) * coeff) @ eigen
    if isinstance(state, FockVector):
        evolved = FockVector(state.sector, out)
    else:
        evolved = Statevector(state.num_qubits, out)
    return FastForwardResult(evolved, weight, weight < 0.5)
