"""Finite-sampling measurement model.

Expectation values are estimated by drawing computational-basis samples
after the diagonalizing rotation implied by a commuting group: qubitwise
groups need only single-qubit basis changes, fully commuting groups are
sampled in their densely computed joint eigenbasis.  On top of the raw
estimators the module allocates shots across groups against a precision
target and assembles noise-tagged subspace problems from measurement
recipes emitted by the subspace builders.

Sample streams use the Philox counter-based generator keyed by
(seed, group index), so every estimate is bit-reproducible from the
recorded plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Statevector, apply_pauli, inner
from .errors import CapacityError, DataError, ValidationError
from .geev import SubspaceProblem
from .qubits import PauliString, commutes, group_commuting, pauli_sum, qubitwise_commutes

GENERATOR = "philox"

# dense joint-eigenbasis cap; beyond this the diagonalization would need
# the Clifford machinery this package deliberately avoids
_FULL_GROUP_QUBIT_CAP = 12

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
_Y_TO_Z = np.array([[1.0, -1.0j], [1.0, 1.0j]], dtype=complex) / math.sqrt(2.0)
_ONE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _rng(seed: int, group_index: int) -> np.random.Generator:
    if seed < 0 or group_index < 0:
        raise ValidationError("seed and group index must be nonnegative")
    key = np.array([seed, group_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SampledEstimate:
    """Sample mean with its standard error (sample std / sqrt(shots))."""

    mean: float
    std_error: float
    shots: int


@dataclass(frozen=True)
class ShotPlan:
    """Per-group shot counts plus the seed that fixes every stream."""

    seed: int
    counts: tuple
    eps_target: float | None = None
    mode: str = "qubitwise"
    generator: str = GENERATOR

    def __post_init__(self):
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")
        counts = tuple(int(c) for c in self.counts)
        if not counts or any(c < 1 for c in counts):
            raise ValidationError("every group needs at least one shot")
        object.__setattr__(self, "counts", counts)
        if self.generator != GENERATOR:
            raise ValidationError(f"unsupported generator {self.generator!r}")

    @property
    def total_shots(self) -> int:
        return int(sum(self.counts))

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "seed": int(self.seed),
            "counts": list(self.counts),
            "eps_target": None if self.eps_target is None else float(self.eps_target),
            "mode": self.mode,
        }


# ---------------------------------------------------------------------------
# sampling a commuting group


def _strip_coefficients(group):
    strings = []
    for item in group:
        if isinstance(item, PauliString):
            strings.append(item)
        else:
            _, s = item
            strings.append(s)
    if not strings:
        raise ValidationError("empty measurement group")
    return strings


def _apply_one_qubit(amps: np.ndarray, gate: np.ndarray, qubit: int, nq: int):
    t = amps.reshape(1 << (nq - 1 - qubit), 2, 1 << qubit)
    return np.einsum("ab,ibj->iaj", gate, t).reshape(amps.size)


def _sign_table(dim: int, mask: int) -> np.ndarray:
    idx = np.arange(dim)
    return 1.0 - 2.0 * (np.bitwise_count(idx & mask) & 1)


def _qubitwise_model(state: Statevector, strings):
    """Rotate X/Y letters onto Z one qubit at a time, then read parities."""
    nq = state.num_qubits
    gates = {}
    for p in strings:
        for q in range(nq):
            xb, zb = (p.x >> q) & 1, (p.z >> q) & 1
            if xb:
                gates[q] = _HADAMARD if not zb else _Y_TO_Z
    amps = state.normalized().amplitudes
    for q, gate in gates.items():
        amps = _apply_one_qubit(amps, gate, q, nq)
    probs = np.abs(amps) ** 2
    values = np.stack([_sign_table(amps.size, p.x | p.z) for p in strings])
    return probs, values


def _dense_string(p: PauliString) -> np.ndarray:
    mat = np.ones((1, 1), dtype=complex)
    for letter in p.letters:
        mat = np.kron(mat, _ONE_QUBIT[letter])
    return mat


def _joint_eigenbasis(strings, nq: int) -> np.ndarray:
    """Simultaneous eigenbasis of mutually commuting strings.

    Refines eigenspace blocks one operator at a time; the +-1 spectrum of
    a Pauli string makes the block split unambiguous.
    """
    dim = 1 << nq
    basis = np.eye(dim, dtype=complex)
    blocks = [np.arange(dim)]
    for p in strings:
        mat = _dense_string(p)
        refined = []
        for idx in blocks:
            if idx.size == 1:
                refined.append(idx)
                continue
            sub = basis[:, idx]
            w, vec = np.linalg.eigh(sub.conj().T @ mat @ sub)
            basis[:, idx] = sub @ vec
            refined.extend(part for part in (idx[w < 0.0], idx[w >= 0.0]) if part.size)
        blocks = refined
    return basis


def _full_commuting_model(state: Statevector, strings):
    nq = state.num_qubits
    if nq > _FULL_GROUP_QUBIT_CAP:
        raise CapacityError(
            f"joint eigenbasis of a fully commuting group is dense; "
            f"capped at {_FULL_GROUP_QUBIT_CAP} qubits, got {nq}"
        )
    basis = _joint_eigenbasis(strings, nq)
    amps = basis.conj().T @ state.normalized().amplitudes
    probs = np.abs(amps) ** 2
    values = np.empty((len(strings), amps.size))
    for k, p in enumerate(strings):
        image = _dense_string(p) @ basis
        diag = np.einsum("ij,ij->j", basis.conj(), image)
        if np.max(np.abs(np.abs(diag) - 1.0)) > 1e-8:
            raise DataError("group strings are not diagonal in the joint basis")
        values[k] = np.where(diag.real > 0.0, 1.0, -1.0)
    return probs, values


def _group_model(state: Statevector, strings):
    """Outcome distribution and the per-string +-1 value table."""
    for p in strings:
        if p.num_qubits != state.num_qubits:
            raise ValidationError("string width does not match the register")
    pairs = [(a, b) for i, a in enumerate(strings) for b in strings[i + 1 :]]
    if all(qubitwise_commutes(a, b) for a, b in pairs):
        return _qubitwise_model(state, strings)
    if all(commutes(a, b) for a, b in pairs):
        return _full_commuting_model(state, strings)
    raise ValidationError("strings in one measurement group must commute")


def _normalized_probs(probs: np.ndarray) -> np.ndarray:
    p = np.clip(probs, 0.0, None)
    return p / p.sum()


def sample_group(state, group, n_shots: int, seed: int, group_index: int = 0):
    """Joint measurement of one commuting group.

    All strings are read off the same n_shots samples, so the returned
    estimates are correlated exactly as they would be on hardware.
    Accepts bare PauliStrings or (coefficient, PauliString) pairs.
    """
    if n_shots < 1:
        raise ValidationError("need at least one shot")
    strings = _strip_coefficients(group)
    probs, values = _group_model(state, strings)
    counts = _rng(seed, group_index).multinomial(n_shots, _normalized_probs(probs))
    out = []
    for row in values:
        mean = float(row @ counts) / n_shots
        if n_shots > 1:
            var1 = float(((row - mean) ** 2) @ counts) / (n_shots - 1)
        else:
            var1 = 0.0
        out.append(SampledEstimate(mean, math.sqrt(max(var1, 0.0) / n_shots), n_shots))
    return tuple(out)


# ---------------------------------------------------------------------------
# measurement recipes: matrix entries as linear combinations of expectations


@dataclass(eq=False)
class MeasurementJob:
    """One preparable state and the strings measured on it."""

    state: Statevector
    strings: tuple

    def __post_init__(self):
        for p in self.strings:
            if p.num_qubits != self.state.num_qubits:
                raise ValidationError("string width does not match the register")
            if p.x == 0 and p.z == 0:
                raise ValidationError("identity belongs in the constant part")


@dataclass(frozen=True)
class EntryPlan:
    """const + sum of coeff * <string k of job j> for one matrix entry."""

    const: complex
    terms: tuple  # ((job, string index, coeff), ...)


@dataclass(eq=False)
class ExpectationRecipe:
    """Measurement plan for a subspace pair (H, S).

    entries maps ("h" | "s", i, j) with i <= j to an EntryPlan; the lower
    triangle is the conjugate by construction and is never measured twice.
    """

    size: int
    jobs: tuple
    entries: dict
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError("need at least a 1x1 subspace")
        for (kind, i, j), plan in self.entries.items():
            if kind not in ("h", "s") or not 0 <= i <= j < self.size:
                raise ValidationError(f"bad entry key {(kind, i, j)!r}")
            for job, k, _ in plan.terms:
                if not 0 <= job < len(self.jobs):
                    raise ValidationError("entry references a missing job")
                if not 0 <= k < len(self.jobs[job].strings):
                    raise ValidationError("entry references a missing string")


@dataclass(frozen=True)
class MeasurementGroup:
    """Indices of one commuting set within one job's string table."""

    job: int
    members: tuple


def measurement_groups(recipe: ExpectationRecipe, mode: str = "qubitwise"):
    """Deterministic partition of every job's strings into commuting groups."""
    groups = []
    for j, job in enumerate(recipe.jobs):
        if not job.strings:
            continue
        unit = pauli_sum(job.state.num_qubits, [(1.0, s) for s in job.strings])
        if unit.strings != tuple(job.strings):
            raise ValidationError("job strings must be distinct and letter-sorted")
        for members in group_commuting(unit, mode).groups:
            groups.append(MeasurementGroup(j, tuple(sorted(members))))
    return tuple(groups)


def _entry_blocks(recipe: ExpectationRecipe, groups):
    """Per group: rows of touching entries and their coefficient matrix."""
    lookup = {}
    for f, g in enumerate(groups):
        for col, k in enumerate(g.members):
            lookup[(g.job, k)] = (f, col)
    rows = [[] for _ in groups]
    coeffs = [[] for _ in groups]
    for d, plan in enumerate(recipe.entries.values()):
        per_group = {}
        for job, k, c in plan.terms:
            f, col = lookup[(job, k)]
            vec = per_group.get(f)
            if vec is None:
                vec = per_group[f] = np.zeros(len(groups[f].members), dtype=complex)
            vec[col] += c
        for f, vec in per_group.items():
            rows[f].append(d)
            coeffs[f].append(vec)
    return [
        (np.asarray(r, dtype=int), np.asarray(c, dtype=complex))
        for r, c in zip(rows, coeffs)
    ]


def _assemble(recipe: ExpectationRecipe, values, stds=None):
    n = recipe.size
    mats = {"h": np.zeros((n, n), dtype=complex), "s": np.zeros((n, n), dtype=complex)}
    smats = {"h": np.zeros((n, n)), "s": np.zeros((n, n))}
    for d, (kind, i, j) in enumerate(recipe.entries.keys()):
        mats[kind][i, j] = values[d]
        mats[kind][j, i] = np.conj(values[d])
        if stds is not None:
            smats[kind][i, j] = smats[kind][j, i] = stds[d]
    if stds is None:
        return SubspaceProblem(mats["h"], mats["s"], dict(recipe.provenance))
    return SubspaceProblem(
        mats["h"],
        mats["s"],
        dict(recipe.provenance),
        hmat_std=smats["h"],
        smat_std=smats["s"],
    )


def exact_subspace(recipe: ExpectationRecipe) -> SubspaceProblem:
    """Infinite-shot limit: evaluate every expectation on the statevector."""
    exact = [
        np.array([inner(job.state, apply_pauli(p, job.state)) for p in job.strings])
        if job.strings
        else np.zeros(0, dtype=complex)
        for job in recipe.jobs
    ]
    values = np.empty(len(recipe.entries), dtype=complex)
    for d, plan in enumerate(recipe.entries.values()):
        acc = plan.const
        for job, k, c in plan.terms:
            acc += c * exact[job][k]
        values[d] = acc
    return _assemble(recipe, values)


def pilot_variances(
    recipe: ExpectationRecipe,
    groups,
    seed: int,
    pilot_shots: int = 100,
) -> np.ndarray:
    """Single-shot variance of each entry's contribution from each group.

    Pilot streams are keyed (seed, len(groups) + f) so they never collide
    with the production streams of the same seed.
    """
    if pilot_shots < 2:
        raise ValidationError("pilot needs at least two shots")
    blocks = _entry_blocks(recipe, groups)
    out = np.zeros((len(recipe.entries), len(groups)))
    for f, group in enumerate(groups):
        rows, cmat = blocks[f]
        if rows.size == 0:
            continue
        job = recipe.jobs[group.job]
        strings = [job.strings[k] for k in group.members]
        probs, values = _group_model(job.state, strings)
        counts = _rng(seed, len(groups) + f).multinomial(
            pilot_shots, _normalized_probs(probs)
        )
        per_shot = cmat @ values.astype(complex)  # (rows, outcomes)
        mean = per_shot @ counts / pilot_shots
        second = (np.abs(per_shot) ** 2) @ counts / pilot_shots
        var1 = (second - np.abs(mean) ** 2) * pilot_shots / (pilot_shots - 1)
        out[rows, f] = np.maximum(var1.real, 0.0)
    return out


def allocate_shots(
    groups,
    variances,
    eps_target: float,
    seed: int = 0,
    mode: str = "qubitwise",
) -> ShotPlan:
    """Uniform count M = eps^-2 max_d sum_f Var[A_d^(f)] per weighted group.

    variances holds single-shot variance estimates, one row per target
    observable and one column per group; groups with no weight anywhere
    get the minimum single shot.
    """
    if not eps_target > 0.0:
        raise ValidationError("eps_target must be positive")
    v = np.atleast_2d(np.asarray(variances, dtype=float))
    if v.shape[1] != len(groups):
        raise ValidationError("one variance column per group required")
    if np.any(v < 0.0) or not np.all(np.isfinite(v)):
        raise ValidationError("variances must be finite and nonnegative")
    m = max(1, math.ceil(float(v.sum(axis=1).max()) / eps_target**2))
    counts = tuple(m if v[:, f].any() else 1 for f in range(len(groups)))
    return ShotPlan(seed, counts, eps_target=eps_target, mode=mode)


def plan_from_target(
    recipe: ExpectationRecipe,
    eps_target: float,
    seed: int,
    mode: str = "qubitwise",
    pilot_shots: int = 100,
) -> ShotPlan:
    """Pilot round plus allocation in one step."""
    groups = measurement_groups(recipe, mode)
    v = pilot_variances(recipe, groups, seed, pilot_shots)
    return allocate_shots(groups, v, eps_target, seed=seed, mode=mode)


def noisy_subspace(recipe: ExpectationRecipe, plan: ShotPlan) -> SubspaceProblem:
    """Sample every entry of the pair per the plan and tag entrywise stds.

    Hermiticity holds by construction (conjugate pairs share estimates);
    the SubspaceProblem constructor applies the documented quadrature
    combination on the mirrored stds.
    """
    groups = measurement_groups(recipe, plan.mode)
    if len(groups) != len(plan.counts):
        raise ValidationError(
            f"plan has {len(plan.counts)} counts for {len(groups)} groups"
        )
    blocks = _entry_blocks(recipe, groups)
    values = np.array([e.const for e in recipe.entries.values()], dtype=complex)
    var_mean = np.zeros(len(recipe.entries))
    for f, group in enumerate(groups):
        rows, cmat = blocks[f]
        if rows.size == 0:
            continue
        job = recipe.jobs[group.job]
        strings = [job.strings[k] for k in group.members]
        probs, table = _group_model(job.state, strings)
        n = plan.counts[f]
        counts = _rng(plan.seed, f).multinomial(n, _normalized_probs(probs))
        per_shot = cmat @ table.astype(complex)
        mean = per_shot @ counts / n
        values[rows] += mean
        if n > 1:
            second = (np.abs(per_shot) ** 2) @ counts / n
            var1 = (second - np.abs(mean) ** 2) * n / (n - 1)
            var_mean[rows] += np.maximum(var1.real, 0.0) / n
    prob = _assemble(recipe, values, np.sqrt(var_mean))
    prob.provenance["shots"] = plan.to_dict()
    return prob


def operator_recipe(state: Statevector, h, provenance: dict | None = None):
    """1x1 recipe for a single operator expectation (S is the constant 1)."""
    table = {}
    const = 0.0j
    terms = []
    ordered = sorted(
        ((s, c) for c, s in h.terms()), key=lambda item: item[0].letters
    )
    for s, c in ordered:
        if s.x == 0 and s.z == 0:
            const += c
        else:
            terms.append((0, len(table), c))
            table[s] = len(table)
    job = MeasurementJob(state.normalized(), tuple(table))
    entries = {
        ("h", 0, 0): EntryPlan(complex(const), tuple(terms)),
        ("s", 0, 0): EntryPlan(1.0 + 0.0j, ()),
    }
    return ExpectationRecipe(1, (job,), entries, provenance or {"method": "operator"})


# ---------------------------------------------------------------------------
# ancilla-free overlap reconstruction


@dataclass(frozen=True)
class OverlapCosine:
    """Relative phase recovered from three ancilla-free magnitudes."""

    value: float
    raw: float
    consistent: bool
    theta0: float


def hadamard_free_overlap(
    f0: float, f1: float, f2: float, theta0: float = 0.0, tol: float = 1e-6
) -> OverlapCosine:
    """cos(theta1 - theta0) from 4 f2 = f1 + f0 + 2 sqrt(f0 f1) cos(...).

    f0 and f1 are the squared magnitudes of the reference and target
    matrix elements, f2 the squared magnitude on their equal superposition;
    the cross terms cancel by sector orthogonality.  Out-of-range results
    beyond tol are flagged and clamped.
    """
    if f0 < 0.0 or f1 < 0.0 or f2 < 0.0:
        raise ValidationError("squared magnitudes must be nonnegative")
    if f0 * f1 == 0.0:
        raise DataError("relative phase is indeterminate when f0 * f1 = 0")
    raw = (4.0 * f2 - f1 - f0) / (2.0 * math.sqrt(f0 * f1))
    consistent = abs(raw) <= 1.0 + tol
    return OverlapCosine(float(np.clip(raw, -1.0, 1.0)), raw, consistent, theta0)
