"""Gate set models in the Pauli transfer matrix (PTM) representation.

Conventions used throughout the package:

- Operators are expressed in the normalized Pauli basis ``{P_0 = I/sqrt(d),
  P_1, ...}`` of Hilbert-Schmidt space, so a channel is a real ``D x D``
  matrix with ``D = d**2``, a state is a length-``D`` vector and a
  measurement effect is a length-``D`` covector.  Outcome probabilities are
  plain dot products ``E . (G_n ... G_1 rho)``.
- A trace-preserving (TP) map has first row ``(1, 0, ..., 0)``, a trace-1
  state has first entry ``1/sqrt(d)`` and the effects of one complete
  measurement sum to the trace covector ``(sqrt(d), 0, ..., 0)``.
- The free model parameters of a TP gate set are: every gate entry except
  the first row of each gate, every prep entry except the first, and every
  entry of all effects but the last one (which is the completeness
  complement).  ``to_vector`` / ``from_vector`` map between gate sets and
  this flat parameter vector; ``param_blocks`` names the per-operation
  blocks ("rho" and "meas" for the SPAM blocks).

Derivatives of circuit probabilities are computed analytically from cached
prefix/suffix operator products, never by automatic differentiation, so a
depth-n circuit costs O(n) small matrix products for the Jacobian and
O(n^2) for the Hessian.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GateSetError",
    "Circuit",
    "CircuitStructure",
    "GateSet",
    "GaugeTangent",
    "pauli_matrices",
    "unitary_to_ptm",
    "density_to_statevec",
    "effect_to_covec",
    "depolarizing_ptm",
    "hamiltonian_generator_ptms",
    "circuit_ptm",
    "circuit_probabilities",
    "effective_fiducial_states",
    "effective_fiducial_effects",
    "param_blocks",
    "param_entries",
    "n_params",
    "to_vector",
    "from_vector",
    "probability_jacobian",
    "probability_hessian",
    "tp_gauge_generator_indices",
    "gauge_tangent",
    "non_gauge_count",
    "apply_gauge_transform",
    "matrix_rank_rel",
    "RANK_RTOL",
]

# Relative singular-value cutoff used everywhere a numerical rank is taken.
RANK_RTOL = 1e-8

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class GateSetError(ValueError):
    """Invalid gate set content or an unresolvable circuit label."""


def matrix_rank_rel(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank of ``a`` counting singular values above ``rtol * s_max``."""
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def pauli_matrices(num_qubits: int, normalized: bool = True) -> list[np.ndarray]:
    """All n-qubit Pauli strings, identity first, optionally HS-normalized."""
    mats = []
    for combo in itertools.product("IXYZ", repeat=num_qubits):
        m = _PAULI_1Q[combo[0]]
        for c in combo[1:]:
            m = np.kron(m, _PAULI_1Q[c])
        mats.append(m)
    if normalized:
        d = 2**num_qubits
        mats = [m / math.sqrt(d) for m in mats]
    return mats


def _num_qubits_from_dim(dim: int) -> int:
    d = math.isqrt(dim)
    if d * d != dim:
        raise GateSetError(f"superoperator dimension {dim} is not a perfect square")
    n = d.bit_length() - 1
    if 2**n != d:
        raise GateSetError(f"Hilbert space dimension {d} is not a power of two")
    return n


def unitary_to_ptm(u: np.ndarray) -> np.ndarray:
    """PTM of the unitary channel rho -> U rho U^dag (real output)."""
    d = u.shape[0]
    paulis = pauli_matrices(_num_qubits_from_dim(d * d))
    dim = d * d
    ptm = np.empty((dim, dim))
    conj = [u @ p @ u.conj().T for p in paulis]
    for i, pi in enumerate(paulis):
        for j in range(dim):
            ptm[i, j] = np.real(np.trace(pi.conj().T @ conj[j]))
    return ptm


def density_to_statevec(rho: np.ndarray) -> np.ndarray:
    """Expand a density matrix in the normalized Pauli basis."""
    d = rho.shape[0]
    paulis = pauli_matrices(_num_qubits_from_dim(d * d))
    return np.array([np.real(np.trace(p.conj().T @ rho)) for p in paulis])


def effect_to_covec(effect: np.ndarray) -> np.ndarray:
    """Expand a POVM effect in the normalized Pauli basis (same map as states)."""
    return density_to_statevec(effect)


def depolarizing_ptm(dim: int, eta: float) -> np.ndarray:
    """Uniform depolarization: identity on P_0, shrink by (1 - eta) elsewhere."""
    m = np.eye(dim) * (1.0 - eta)
    m[0, 0] = 1.0
    return m


def hamiltonian_generator_ptms(num_qubits: int) -> list[np.ndarray]:
    """PTM adjoint representations of ``rho -> -i [P_a, rho]``.

    One generator per non-identity (unnormalized) Pauli string ``P_a``; the
    returned matrices are real and antisymmetric, so ``expm(sum h_a H_a)``
    is orthogonal and TP.
    """
    paulis_norm = pauli_matrices(num_qubits)
    paulis_raw = pauli_matrices(num_qubits, normalized=False)
    dim = len(paulis_norm)
    gens = []
    for a in range(1, dim):
        pa = paulis_raw[a]
        h = np.empty((dim, dim))
        for k in range(dim):
            comm = -1j * (pa @ paulis_norm[k] - paulis_norm[k] @ pa)
            for j in range(dim):
                h[j, k] = np.real(np.trace(paulis_norm[j].conj().T @ comm))
        gens.append(h)
    return gens


# ---------------------------------------------------------------------------
# Circuits


@dataclass(frozen=True)
class CircuitStructure:
    """Plaquette provenance of a circuit: F_j g_k^p H_i indices."""

    prep_index: int
    germ_index: int
    power: int
    meas_index: int


@dataclass(frozen=True)
class Circuit:
    """An ordered gate-label sequence; equality and hashing use labels only."""

    labels: tuple[str, ...]
    structure: CircuitStructure | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.labels + other.labels)

    def repeated(self, power: int) -> "Circuit":
        return Circuit(self.labels * power)

    def __str__(self) -> str:
        return "{}" if not self.labels else " ".join(self.labels)

    @staticmethod
    def from_str(text: str) -> "Circuit":
        text = text.strip()
        if text in ("", "{}"):
            return Circuit(())
        return Circuit(tuple(text.split()))


# ---------------------------------------------------------------------------
# Gate sets


@dataclass(frozen=True)
class GateSet:
    """Gates (PTMs), one state prep and one measurement, plus gate arities.

    ``effects`` holds the full measurement (all m outcomes, including the
    completeness complement).  Arrays are frozen read-only at construction;
    all operations on gate sets are pure functions.
    """

    gates: dict[str, np.ndarray]
    prep: np.ndarray
    effects: tuple[np.ndarray, ...]
    two_qubit_labels: frozenset[str] = frozenset()

    def __post_init__(self):
        gates = {k: np.array(v, dtype=float) for k, v in self.gates.items()}
        prep = np.array(self.prep, dtype=float)
        effects = tuple(np.array(e, dtype=float) for e in self.effects)
        for g in gates.values():
            g.flags.writeable = False
        prep.flags.writeable = False
        for e in effects:
            e.flags.writeable = False
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "prep", prep)
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "two_qubit_labels", frozenset(self.two_qubit_labels))

    @property
    def dim(self) -> int:
        """Superoperator dimension D = d**2."""
        return self.prep.shape[0]

    @property
    def num_effects(self) -> int:
        return len(self.effects)

    @property
    def num_qubits(self) -> int:
        return _num_qubits_from_dim(self.dim)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.gates)

    def effect_matrix(self) -> np.ndarray:
        return np.vstack(self.effects)

    def validate(self, tp_tol: float = 1e-12) -> None:
        """Check shape/finite/TP invariants; raises :class:`GateSetError`."""
        dim = self.dim
        d = math.isqrt(dim)
        if d * d != dim:
            raise GateSetError(f"dimension {dim} is not a perfect square")
        if self.num_effects < 2:
            raise GateSetError("a measurement needs at least two effects")
        for label, g in self.gates.items():
            if g.shape != (dim, dim):
                raise GateSetError(f"gate {label!r} has shape {g.shape}, wanted {(dim, dim)}")
            if not np.all(np.isfinite(g)):
                raise GateSetError(f"gate {label!r} has non-finite entries")
            first_row = np.zeros(dim)
            first_row[0] = 1.0
            if np.max(np.abs(g[0] - first_row)) > tp_tol:
                raise GateSetError(f"gate {label!r} is not trace preserving")
        if abs(self.prep[0] - 1.0 / math.sqrt(d)) > tp_tol:
            raise GateSetError("prep first entry must be 1/sqrt(d)")
        trace_covec = np.zeros(dim)
        trace_covec[0] = math.sqrt(d)
        total = np.sum(self.effect_matrix(), axis=0)
        if np.max(np.abs(total - trace_covec)) > 1e-10:
            raise GateSetError("effects do not sum to the trace covector")

    # -- JSON interface ----------------------------------------------------

    def to_json_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "convention": "pauli-normalized",
            "gates": {k: v.tolist() for k, v in self.gates.items()},
            "prep": self.prep.tolist(),
            "effects": [e.tolist() for e in self.effects],
        }
        if self.two_qubit_labels:
            out["two_qubit_gates"] = sorted(self.two_qubit_labels)
        return out

    @staticmethod
    def from_json_dict(doc: dict) -> "GateSet":
        if doc.get("convention", "pauli-normalized") != "pauli-normalized":
            raise GateSetError(f"unsupported basis convention {doc.get('convention')!r}")
        gs = GateSet(
            gates={k: np.array(v, float) for k, v in doc["gates"].items()},
            prep=np.array(doc["prep"], float),
            effects=tuple(np.array(e, float) for e in doc["effects"]),
            two_qubit_labels=frozenset(doc.get("two_qubit_gates", ())),
        )
        if gs.dim != doc["dim"]:
            raise GateSetError("declared dim does not match operator shapes")
        return gs

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=1, sort_keys=True)

    @staticmethod
    def load(path) -> "GateSet":
        with open(path) as f:
            return GateSet.from_json_dict(json.load(f))


def _gate(gs: GateSet, label: str) -> np.ndarray:
    try:
        return gs.gates[label]
    except KeyError:
        raise GateSetError(f"unknown gate label {label!r}") from None


def circuit_ptm(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """Product PTM G_1 -> ... -> G_n of a circuit (time order left to right)."""
    out = np.eye(gs.dim)
    for label in circuit.labels:
        out = _gate(gs, label) @ out
    return out


def circuit_probabilities(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """Outcome probabilities ``p_j = E_j . (G_n ... G_1 rho)``."""
    v = gs.prep
    for label in circuit.labels:
        v = _gate(gs, label) @ v
    return gs.effect_matrix() @ v


def effective_fiducial_states(gs: GateSet, prep_fids: list[Circuit]) -> list[np.ndarray]:
    """States reached by each prep fiducial: ``rho'_j = F_j rho``."""
    return [circuit_ptm(gs, f) @ gs.prep for f in prep_fids]


def effective_fiducial_effects(gs: GateSet, meas_fids: list[Circuit]) -> list[np.ndarray]:
    """Effective effects ``E'_i``, one per (measurement fiducial, outcome).

    The flat index runs over fiducials with the native outcome varying
    fastest: ``E'_i = E_{i mod m} . H_{i // m}`` for a measurement with
    m outcomes.
    """
    out = []
    for fid in meas_fids:
        hmat = circuit_ptm(gs, fid)
        for e in gs.effects:
            out.append(e @ hmat)
    return out


# ---------------------------------------------------------------------------
# Parameter map


def param_blocks(gs: GateSet) -> dict[str, slice]:
    """Contiguous parameter blocks per operation, gates first then SPAM.

    Gate blocks exclude each gate's fixed first row; "rho" excludes the
    fixed first entry; "meas" covers all effects but the final complement.
    """
    dim = gs.dim
    blocks: dict[str, slice] = {}
    start = 0
    per_gate = (dim - 1) * dim
    for label in gs.gates:
        blocks[label] = slice(start, start + per_gate)
        start += per_gate
    blocks["rho"] = slice(start, start + dim - 1)
    start += dim - 1
    n_meas = (gs.num_effects - 1) * dim
    blocks["meas"] = slice(start, start + n_meas)
    return blocks


def n_params(gs: GateSet) -> int:
    dim = gs.dim
    return len(gs.gates) * (dim - 1) * dim + (dim - 1) + (gs.num_effects - 1) * dim


def param_entries(gs: GateSet) -> list[tuple[str, tuple]]:
    """Ordered (operation label, coordinate) pairs defining the theta vector."""
    dim = gs.dim
    entries: list[tuple[str, tuple]] = []
    for label in gs.gates:
        for a in range(1, dim):
            for b in range(dim):
                entries.append((label, (a, b)))
    for b in range(1, dim):
        entries.append(("rho", (b,)))
    for l in range(gs.num_effects - 1):
        for b in range(dim):
            entries.append((f"E{l}", (b,)))
    return entries


def to_vector(gs: GateSet) -> np.ndarray:
    """Flatten the free coordinates of ``gs`` into a parameter vector."""
    parts = [g[1:, :].ravel() for g in gs.gates.values()]
    parts.append(gs.prep[1:])
    parts.extend(gs.effects[:-1])
    return np.concatenate(parts)


def from_vector(template: GateSet, theta: np.ndarray) -> GateSet:
    """Rebuild a gate set from a parameter vector, keeping TP-fixed entries."""
    dim = template.dim
    d = math.isqrt(dim)
    theta = np.asarray(theta, float)
    if theta.shape != (n_params(template),):
        raise GateSetError(f"parameter vector has length {theta.size}, wanted {n_params(template)}")
    pos = 0
    gates = {}
    for label in template.gates:
        g = np.zeros((dim, dim))
        g[0, 0] = 1.0
        g[1:, :] = theta[pos : pos + (dim - 1) * dim].reshape(dim - 1, dim)
        pos += (dim - 1) * dim
        gates[label] = g
    prep = np.empty(dim)
    prep[0] = 1.0 / math.sqrt(d)
    prep[1:] = theta[pos : pos + dim - 1]
    pos += dim - 1
    effects = []
    trace_covec = np.zeros(dim)
    trace_covec[0] = math.sqrt(d)
    acc = np.zeros(dim)
    for _ in range(template.num_effects - 1):
        e = theta[pos : pos + dim].copy()
        pos += dim
        effects.append(e)
        acc += e
    effects.append(trace_covec - acc)
    return GateSet(gates, prep, tuple(effects), template.two_qubit_labels)


# ---------------------------------------------------------------------------
# Analytic derivatives


def _prefix_states(gs: GateSet, labels: tuple[str, ...]) -> list[np.ndarray]:
    states = [gs.prep]
    for label in labels:
        states.append(_gate(gs, label) @ states[-1])
    return states


def _suffix_effect_rows(gs: GateSet, labels: tuple[str, ...]) -> list[np.ndarray]:
    """``rows[i] = E_mat @ G_n ... G_{i+1}`` for i = 0..n (rows[n] = E_mat)."""
    emat = gs.effect_matrix()
    rows = [emat]
    for label in reversed(labels):
        rows.append(rows[-1] @ _gate(gs, label))
    rows.reverse()
    return rows


def _effect_sign_matrix(m: int) -> np.ndarray:
    """s[j, l] = d p_j / d (E_l entries) sign; the last effect is -sum of others."""
    s = np.zeros((m, m - 1))
    s[: m - 1, :] = np.eye(m - 1)
    s[m - 1, :] = -1.0
    return s


def probability_jacobian(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """d p_j / d theta, shape (num_effects, n_params).

    A gate appearing r times in the circuit contributes r rank-1 terms to
    its block, one per occurrence, via cached prefix states and suffix
    effect rows.
    """
    dim = gs.dim
    m = gs.num_effects
    labels = circuit.labels
    blocks = param_blocks(gs)
    jac = np.zeros((m, n_params(gs)))

    states = _prefix_states(gs, labels)
    rows = _suffix_effect_rows(gs, labels)

    for i, label in enumerate(labels, start=1):
        contrib = np.einsum("ja,b->jab", rows[i][:, 1:], states[i - 1])
        jac[:, blocks[label]] += contrib.reshape(m, -1)

    jac[:, blocks["rho"]] = rows[0][:, 1:]

    sgn = _effect_sign_matrix(m)
    final_state = states[-1]
    meas = blocks["meas"]
    for l in range(m - 1):
        jac[:, meas.start + l * dim : meas.start + (l + 1) * dim] = np.outer(sgn[:, l], final_state)
    return jac


def probability_hessian(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """d^2 p_j / d theta^2, shape (num_effects, n_params, n_params).

    O(depth^2) small matrix products; intended for short circuits (tests,
    Fisher-information cross checks), not for deep germ-power circuits.
    """
    dim = gs.dim
    m = gs.num_effects
    labels = circuit.labels
    n = len(labels)
    npar = n_params(gs)
    blocks = param_blocks(gs)
    hess = np.zeros((m, npar, npar))

    states = _prefix_states(gs, labels)
    rows = _suffix_effect_rows(gs, labels)
    prefix_mats = [np.eye(dim)]
    for label in labels:
        prefix_mats.append(_gate(gs, label) @ prefix_mats[-1])
    suffix_mats = [np.eye(dim)]
    for label in reversed(labels):
        suffix_mats.append(suffix_mats[-1] @ _gate(gs, label))
    suffix_mats.reverse()  # suffix_mats[i] = G_n ... G_{i+1}

    sgn = _effect_sign_matrix(m)
    meas = blocks["meas"]
    rho = blocks["rho"]

    def add_sym(rows_slice: slice, cols_slice: slice, block: np.ndarray) -> None:
        hess[:, rows_slice, cols_slice] += block
        hess[:, cols_slice, rows_slice] += np.swapaxes(block, 1, 2)

    for i in range(1, n + 1):
        k_i = labels[i - 1]
        s_prev = states[i - 1]
        # gate(i) x gate(i2) for i2 > i
        mid = np.eye(dim)
        for i2 in range(i + 1, n + 1):
            k_i2 = labels[i2 - 1]
            # [j, (a,b), (c,d)] = rows[i2][j,c] * mid[d,a] * s_prev[b]
            blk = np.einsum("jc,da,b->jabcd", rows[i2][:, 1:], mid[:, 1:], s_prev)
            blk = blk.reshape(m, (dim - 1) * dim, (dim - 1) * dim)
            add_sym(blocks[k_i], blocks[k_i2], blk)
            if i2 < n:
                mid = _gate(gs, labels[i2 - 1]) @ mid
        # gate(i) x rho
        blk = np.einsum("ja,bc->jabc", rows[i][:, 1:], prefix_mats[i - 1][:, 1:])
        add_sym(blocks[k_i], rho, blk.reshape(m, (dim - 1) * dim, dim - 1))
        # gate(i) x effect l
        for l in range(m - 1):
            blk = np.einsum("j,ca,b->jabc", sgn[:, l], suffix_mats[i][:, 1:], s_prev)
            cols = slice(meas.start + l * dim, meas.start + (l + 1) * dim)
            add_sym(blocks[k_i], cols, blk.reshape(m, (dim - 1) * dim, dim))

    # rho x effect l
    full = prefix_mats[n]
    for l in range(m - 1):
        blk = np.einsum("j,cb->jbc", sgn[:, l], full[:, 1:])
        cols = slice(meas.start + l * dim, meas.start + (l + 1) * dim)
        add_sym(rho, cols, blk)

    return hess


# ---------------------------------------------------------------------------
# Gauge structure


@dataclass(frozen=True)
class GaugeTangent:
    """Parameter-space directions generated by infinitesimal TP gauge motion.

    Columns of ``basis`` are images of the generators K = E_ab (first row
    zero): gates move by K G - G K, the prep by K rho and effects by -E K.
    """

    basis: np.ndarray
    rank: int


def tp_gauge_generator_indices(dim: int) -> list[tuple[int, int]]:
    """Index pairs (a, b) of the elementary TP generators (rows a >= 1)."""
    return [(a, b) for a in range(1, dim) for b in range(dim)]


def gauge_tangent(gs: GateSet) -> GaugeTangent:
    dim = gs.dim
    m = gs.num_effects
    npar = n_params(gs)
    gens = tp_gauge_generator_indices(dim)
    basis = np.zeros((npar, len(gens)))
    blocks = param_blocks(gs)
    meas = blocks["meas"]
    for col, (a, b) in enumerate(gens):
        vec = np.zeros(npar)
        for label, g in gs.gates.items():
            # K G - G K with K = E_ab: row a picks up G[b, :], column b drops G[:, a]
            delta = np.zeros((dim, dim))
            delta[a, :] += g[b, :]
            delta[:, b] -= g[:, a]
            vec[blocks[label]] = delta[1:, :].ravel()
        dprep = np.zeros(dim)
        dprep[a] = gs.prep[b]
        vec[blocks["rho"]] = dprep[1:]
        for l in range(m - 1):
            deff = np.zeros(dim)
            deff[b] = -gs.effects[l][a]
            vec[meas.start + l * dim : meas.start + (l + 1) * dim] = deff
        basis[:, col] = vec
    return GaugeTangent(basis=basis, rank=matrix_rank_rel(basis))


def non_gauge_count(gs: GateSet) -> int:
    """Number of physically observable parameters: N_p - gauge rank."""
    return n_params(gs) - gauge_tangent(gs).rank


def apply_gauge_transform(gs: GateSet, mat: np.ndarray) -> GateSet:
    """Similarity-transform every operation: G -> M G M^-1, rho -> M rho, E -> E M^-1."""
    mat = np.asarray(mat, float)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond >= 1e8:
        raise GateSetError(f"gauge transform is singular or ill conditioned (cond={cond:.3g})")
    minv = np.linalg.inv(mat)
    return GateSet(
        gates={k: mat @ g @ minv for k, g in gs.gates.items()},
        prep=mat @ gs.prep,
        effects=tuple(e @ minv for e in gs.effects),
        two_qubit_labels=gs.two_qubit_labels,
    )
