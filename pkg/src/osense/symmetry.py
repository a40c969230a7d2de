"""Analytic conserved operators (classes A-G) as dictionary coefficient vectors.

This is ground truth for tests and verification runs; the learning
pipeline itself never consults it.

Variances here are reported in normalized-trace units, i.e. for the
operator rescaled so that Tr(O^2) / 2**n = 1, which keeps thresholds
independent of system size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import InteractionGraph, find_swap_automorphisms
from .kernel import OperatorBasis, variance_of
from .spin import OpKind

ZERO_VARIANCE_TOL = 1e-10
INTRINSIC_CLASSES = ("A", "B", "C", "D", "E")


@dataclass(frozen=True, eq=False)
class SymmetryClassOperator:
    class_label: str  # A, B, C, D, E, F, G or H
    params: tuple[int, ...]
    coeffs: np.ndarray
    bond_eigenvalue: float | None = None  # G only: the F eigenvalue it annihilates

    @property
    def name(self) -> str:
        return self.class_label + ("_" + "".join(f"{p}," for p in self.params).rstrip(",") if self.params else "")


def coeffs_from_terms(basis: OperatorBasis, terms, normalize: bool = True) -> np.ndarray:
    """Coefficient vector of sum a * W for (kind, sites, a) in terms.

    ``a`` multiplies the unnormalized physical operator, so the coordinate
    on the unit-norm element is a * hs_norm.  Unit-l2 unless ``normalize``
    is False, in which case the vector reproduces the physical operator.
    """
    c = np.zeros(basis.size)
    for kind, sites, a in terms:
        k = basis.index_of(kind, *sites)
        c[k] += a * basis.ops[k].hs_norm
    if not normalize:
        return c
    norm = np.linalg.norm(c)
    return c / norm if norm > 0 else c


def heisenberg_terms(i: int, j: int, coupling: float = 1.0):
    """J sigma_i . sigma_j = J (ZZ + 2 Hop)."""
    i, j = sorted((i, j))
    return [(OpKind.ZZ, (i, j), coupling), (OpKind.HOP, (i, j), 2.0 * coupling)]


def hamiltonian_coeffs(g: InteractionGraph, basis: OperatorBasis) -> np.ndarray:
    terms = []
    for (i, j), coupling in zip(g.edges, g.couplings):
        terms += heisenberg_terms(i, j, coupling)
    return coeffs_from_terms(basis, terms)


def _sorted3(*s):
    return tuple(sorted(s))


def build_intrinsic_set(basis: OperatorBasis, graph: InteractionGraph | None = None) -> list[SymmetryClassOperator]:
    """Classes A-E (N_v**2 + 2 operators), plus H when ``graph`` is given."""
    n = basis.n_sites
    if n < 3:
        raise ValueError("intrinsic classes are distinct only for n_sites >= 3")
    out = [SymmetryClassOperator("A", (), coeffs_from_terms(basis, [(OpKind.Z, (i,), 1.0) for i in range(n)]))]
    for i in range(n):
        terms = [(OpKind.ZZ, tuple(sorted((i, j))), 1.0) for j in range(n) if j != i]
        out.append(SymmetryClassOperator("B", (i,), coeffs_from_terms(basis, terms)))
    for i in range(n):
        for j in range(i + 1, n):
            terms = [(OpKind.Z, (i,), 1.0), (OpKind.Z, (j,), 1.0)]
            terms += [(OpKind.ZZZ, _sorted3(i, j, k), 1.0) for k in range(n) if k not in (i, j)]
            out.append(SymmetryClassOperator("C", (i, j), coeffs_from_terms(basis, terms)))
    for i in range(n):
        for j in range(i + 1, n):
            # (XX + YY) = 2 Hop
            terms = [(OpKind.HOPZ, (i, j, k), 2.0) for k in range(n) if k not in (i, j)]
            out.append(SymmetryClassOperator("D", (i, j), coeffs_from_terms(basis, terms)))
    # sum over ordered pairs i != j of (XX + YY) = 4 sum_{i<j} Hop
    terms = [(OpKind.HOP, (i, j), 4.0) for i in range(n) for j in range(i + 1, n)]
    out.append(SymmetryClassOperator("E", (), coeffs_from_terms(basis, terms)))
    if graph is not None:
        out.append(SymmetryClassOperator("H", (), hamiltonian_coeffs(graph, basis)))
    return out


def build_geometric_set(
    g: InteractionGraph, pairs, basis: OperatorBasis, bond_eigenvalue: float = 1.0
) -> list[SymmetryClassOperator]:
    """F_mn = sigma_m . sigma_n and G_mnk = (F_mn - lambda) Z_k for every verified swap pair.

    lambda = 1 (the default) is the triplet family; -3 gives the singlet one.
    """
    allowed = set(find_swap_automorphisms(g))
    out = []
    for m, n in pairs:
        m, n = sorted((m, n))
        if (m, n) not in allowed:
            raise ValueError(f"({m}, {n}) is not a swap automorphism of the graph")
        out.append(SymmetryClassOperator("F", (m, n), coeffs_from_terms(basis, heisenberg_terms(m, n))))
        for k in range(g.n_vertices):
            if k in (m, n):
                continue
            terms = [
                (OpKind.ZZZ, _sorted3(m, n, k), 1.0),
                (OpKind.HOPZ, (m, n, k), 2.0),
                (OpKind.Z, (k,), -bond_eigenvalue),
            ]
            out.append(SymmetryClassOperator("G", (m, n, k), coeffs_from_terms(basis, terms), bond_eigenvalue))
    return out


def predicted_kernel_ops(g: InteractionGraph, sample, basis: OperatorBasis) -> list[SymmetryClassOperator]:
    """Everything the oracle expects in the kernel: A-E, H, F per coupling-preserving
    swap pair, and the G family matching the bond sector when the sample is confined."""
    ops = build_intrinsic_set(basis, g)
    for m, n in find_swap_automorphisms(g, respect_couplings=True):
        sector = bond_sector(sample, m, n, basis)
        lam = {"triplet": 1.0, "singlet": -3.0}.get(sector)
        geo = build_geometric_set(g, [(m, n)], basis, bond_eigenvalue=1.0 if lam is None else lam)
        ops += geo if lam is not None else geo[:1]
    return ops


def state_variances(c: np.ndarray, mats) -> np.ndarray:
    """Per-state variance of the operator with coefficients c, normalized-trace units."""
    return np.array([variance_of(c, m) for m in mats])


def trace_units(basis: OperatorBasis) -> float:
    return float(2.0**basis.n_sites)


def bond_sector(sample, m: int, n: int, basis: OperatorBasis, mats=None, tol: float = 1e-8) -> str:
    """'triplet', 'singlet' or 'mixed': where the sampled states sit for sigma_m . sigma_n."""
    from .spin import coeff_operator_matrix

    f = coeffs_from_terms(basis, heisenberg_terms(m, n), normalize=False)
    op = coeff_operator_matrix(f, basis, sample.basis)
    values = set()
    for a in range(sample.n_states):
        v = sample.vectors[:, a]
        fv = op @ v
        lam = float(v @ fv)
        if np.linalg.norm(fv - lam * v) > tol:
            return "mixed"
        values.add("triplet" if abs(lam - 1.0) < 1e-6 else "singlet" if abs(lam + 3.0) < 1e-6 else "other")
    return values.pop() if len(values) == 1 else "mixed"


@dataclass
class VerificationReport:
    entries: list[dict] = field(default_factory=list)

    @property
    def violations(self) -> list[dict]:
        return [e for e in self.entries if e["expected_zero"] and not e["passed"]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "n_checked": len(self.entries), "violations": self.violations, "entries": self.entries}


def verify_zero_variance(ops, sample, mats, basis: OperatorBasis, tol: float = ZERO_VARIANCE_TOL) -> VerificationReport:
    """Check the zero-variance identities class by class.

    A-E and H must vanish on every state of an Sz=0 eigen-sample.  F is
    expected to vanish for a swap pair (callers only pass verified pairs).
    G is expected to vanish only when all sampled states sit in the
    eigensector its bond eigenvalue selects; the entry records which.
    """
    scale = trace_units(basis)
    report = VerificationReport()
    sectors: dict[tuple[int, int], str] = {}
    for op in ops:
        var = state_variances(op.coeffs, mats) * scale
        entry = {"operator": op.name, "class": op.class_label, "max_variance": float(var.max())}
        expected = True
        if op.class_label == "G":
            pair = op.params[:2]
            if pair not in sectors:
                sectors[pair] = bond_sector(sample, *pair, basis)
            entry["bond_sector"] = sectors[pair]
            wanted = "triplet" if op.bond_eigenvalue == 1.0 else "singlet" if op.bond_eigenvalue == -3.0 else None
            expected = sectors[pair] == wanted
        entry["expected_zero"] = expected
        entry["passed"] = bool(var.max() <= tol)
        report.entries.append(entry)
    return report
