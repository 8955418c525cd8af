"""Energy-stability certificates built from graph decompositions.

The squared-distance weights of a scheme induce a graph on the stage and
history indices.  When that graph splits into parts matching one of two
planar-embeddable templates (a book of triangles sharing an edge, or a hub
joined to a path) and each part's weighted Laplacian-like form Q is negative
semidefinite, stepping cannot increase the energy; run against the shifted
weights, the same test certifies a uniform-in-time energy bound.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .jacobi import max_eigenvalue_symmetric
from .schemes import (SchemeCoefficients, WeightMatrix, as_fraction,
                      format_rational, shifted_weights, weights)


class CertificateError(ValueError):
    """The decomposition does not match the scheme graph (an edge is missing
    from every part, or the per-edge theta values do not sum to the weight)."""


def _canon_edge(i, j):
    i, j = int(i), int(j)
    if i == j:
        raise ValueError(f"self-loop edge ({i}, {j}) is not allowed")
    return (i, j) if i > j else (j, i)


def _is_exact(value):
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


@dataclass(frozen=True)
class SchemeGraph:
    """Vertices -M+1..N and an undirected edge for every nonzero weight."""
    vertices: frozenset
    edges: frozenset


def build_graph(w: WeightMatrix) -> SchemeGraph:
    """Graph with an edge {i, j} wherever w[(i, j)] != 0; isolated vertices
    are kept so the vertex set is always the full index range."""
    vertices = frozenset(range(-w.M + 1, w.N + 1))
    edges = frozenset(_canon_edge(i, j) for (i, j), v in w.entries.items() if v != 0)
    return SchemeGraph(vertices=vertices, edges=edges)


def fan_decomposition(N: int):
    """Edge sets E^0..E^{N-2} covering the complete graph on {0..N}.

    Part alpha is the book with spine {alpha+1, alpha+2} and a page through
    each earlier vertex 0..alpha.
    """
    if N < 2:
        raise ValueError(f"fan decomposition needs N >= 2, got {N}")
    parts = []
    for alpha in range(N - 1):
        edges = {(alpha + 2, alpha + 1)}
        for v in range(alpha + 1):
            edges.add((alpha + 1, v))
            edges.add((alpha + 2, v))
        parts.append(frozenset(edges))
    return parts


def diagonal_decomposition(N: int):
    """Two edge sets covering the graph of a 2-step diagonal scheme: vertex
    -1 joined to 0..N plus the stage path, and vertex 0 joined to 1..N plus
    the stage path."""
    if N < 1:
        raise ValueError(f"diagonal decomposition needs N >= 1, got {N}")
    path = {(m + 1, m) for m in range(1, N)}
    s0 = frozenset({(v, -1) for v in range(N + 1)} | path)
    s1 = frozenset({(v, 0) for v in range(1, N + 1)} | path)
    return [s0, s1]


def classify_template(edges, vertices) -> str:
    """Match an edge set against the recognized-embeddable templates.

    Returns "book" when two vertices touch every edge (a subgraph of a book
    of triangles), "hub-plus-path" when removing one vertex leaves only
    disjoint simple paths, and "unrecognized" otherwise.  Unrecognized does
    not prove the part cannot be embedded.
    """
    edges = frozenset(_canon_edge(i, j) for i, j in edges)
    if not edges:
        return "book"
    touched = sorted({v for e in edges for v in e})

    for a in range(len(touched)):
        for b in range(a, len(touched)):
            p, q = touched[a], touched[b]
            if all(p in e or q in e for e in edges):
                return "book"

    for hub in touched:
        rest = [e for e in edges if hub not in e]
        degree = {}
        for i, j in rest:
            degree[i] = degree.get(i, 0) + 1
            degree[j] = degree.get(j, 0) + 1
        if degree and max(degree.values()) > 2:
            continue
        parent = {v: v for v in degree}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        acyclic = True
        for i, j in rest:
            ri, rj = find(i), find(j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if acyclic:
            return "hub-plus-path"
    return "unrecognized"


def is_embeddable_template(edges, vertices) -> bool:
    """True when the edge set is a subgraph of a recognized template family
    (book of triangles, or hub plus path).  False is conservative."""
    return classify_template(edges, vertices) != "unrecognized"


def assemble_Q(edges, theta, vertex_count: int, index_offset: int = 0):
    """Sum of theta[(i, j)] * (e_i' - e_j')(e_i' - e_j')^T over the part's
    edges, where row i' = i + index_offset; vertex_count = M + N and
    index_offset = M - 1 map vertex labels -M+1..N onto rows 0..M+N-1.

    Raises when theta carries a key outside the part's edge set.
    """
    edges = frozenset(_canon_edge(i, j) for i, j in edges)
    Q = np.zeros((vertex_count, vertex_count))
    for key, value in theta.items():
        e = _canon_edge(*key)
        if e not in edges:
            raise CertificateError(f"theta assigned to edge {e} outside the part")
        a, b = e[0] + index_offset, e[1] + index_offset
        if not (0 <= b < a < vertex_count):
            raise ValueError(f"edge {e} maps to rows ({a}, {b}) outside a "
                             f"{vertex_count}x{vertex_count} matrix")
        v = float(value)
        Q[a, a] += v
        Q[b, b] += v
        Q[a, b] -= v
        Q[b, a] -= v
    return Q


@dataclass
class DecompositionPart:
    """One part: its edge set and the per-edge theta split (edges without an
    explicit theta contribute zero)."""
    edges: frozenset
    theta: dict

    def __post_init__(self):
        self.edges = frozenset(_canon_edge(i, j) for i, j in self.edges)
        theta = {}
        for key, value in self.theta.items():
            e = _canon_edge(*key)
            if e not in self.edges:
                raise CertificateError(f"theta assigned to edge {e} outside the part")
            theta[e] = value
        self.theta = theta


@dataclass
class SubgraphDecomposition:
    """A list of parts expected to cover the scheme graph with per-edge theta
    values summing to the weights."""
    parts: list

    def __post_init__(self):
        self.parts = [p if isinstance(p, DecompositionPart)
                      else DecompositionPart(p[0], p[1]) for p in self.parts]

    @property
    def exact(self) -> bool:
        """True when every theta value is an exact rational."""
        return all(_is_exact(v) for p in self.parts for v in p.theta.values())

    def edge_union(self) -> frozenset:
        out = frozenset()
        for p in self.parts:
            out = out | p.edges
        return out

    def theta_total(self, edge):
        e = _canon_edge(*edge)
        total = Fraction(0) if self.exact else 0.0
        for p in self.parts:
            total = total + p.theta.get(e, 0)
        return total


@dataclass
class StabilityCertificate:
    """Outcome of a certificate check.

    kind is "dissipative", "bounded" or "inconclusive"; spectra holds one
    (max eigenvalue, matrix dimension) pair per part, templates the matched
    template name per part.  Inconclusive only means the sufficient
    conditions did not verify, never that the scheme is unstable.
    """
    kind: str
    spectra: list
    templates: list
    decomposition: SubgraphDecomposition
    tol_psd: float
    tol_part: object
    L1: Fraction = None
    L2: Fraction = None

    @property
    def template_ok(self):
        return [t != "unrecognized" for t in self.templates]


def _check_cover_and_partition(w, decomposition, tol_part, exact):
    graph_edges = frozenset(_canon_edge(i, j) for (i, j), v in w.entries.items() if v != 0)
    union = decomposition.edge_union()
    for e in sorted(graph_edges):
        if e not in union:
            raise CertificateError(f"edge {e} of the scheme graph is not covered by any part")
    check = graph_edges | frozenset(k for p in decomposition.parts for k in p.theta)
    for e in sorted(check):
        target = w.at(*e)
        total = decomposition.theta_total(e)
        if exact:
            ok = as_fraction(total) == target
            gap = abs(as_fraction(total) - target)
        else:
            gap = abs(float(total) - float(target))
            ok = gap <= tol_part
        if not ok:
            raise CertificateError(
                f"edge {e}: theta values sum to {float(total):.6g} but the weight is "
                f"{float(target):.6g} (difference {float(gap):.3g})")


def project_onto_partition(decomposition: SubgraphDecomposition, w: WeightMatrix) -> SubgraphDecomposition:
    """Repair per-edge sums: spread each edge's residual w - sum(theta)
    equally over the parts whose edge set carries the edge.

    Keeps exact values exact.  Raises when a weighted edge is carried by no
    part at all.
    """
    graph_edges = frozenset(_canon_edge(i, j) for (i, j), v in w.entries.items() if v != 0)
    union = decomposition.edge_union()
    for e in sorted(graph_edges):
        if e not in union:
            raise CertificateError(f"edge {e} of the scheme graph is not covered by any part")
    new_thetas = [dict(p.theta) for p in decomposition.parts]
    fix = graph_edges | frozenset(k for p in decomposition.parts for k in p.theta)
    for e in sorted(fix):
        carriers = [idx for idx, p in enumerate(decomposition.parts) if e in p.edges]
        target = w.at(*e)
        current = sum((new_thetas[idx].get(e, 0) for idx in carriers),
                      Fraction(0) if decomposition.exact else 0.0)
        residual = target - current
        if residual == 0:
            continue
        share = residual / len(carriers)
        for idx in carriers:
            new_thetas[idx][e] = new_thetas[idx].get(e, 0) + share
    parts = [DecompositionPart(p.edges, t)
             for p, t in zip(decomposition.parts, new_thetas)]
    return SubgraphDecomposition(parts)


def _certify(scheme, w, decomposition, kind_if_pass, tol_psd, tol_part, L1=None, L2=None):
    exact = decomposition.exact
    if tol_psd is None:
        tol_psd = 1e-9 if exact else 1e-6
    if tol_part is None and not exact:
        tol_part = 5e-3
    _check_cover_and_partition(w, decomposition, tol_part, exact)
    graph = build_graph(w)
    dim = scheme.M + scheme.N
    offset = scheme.M - 1
    spectra = []
    templates = []
    for part in decomposition.parts:
        Q = assemble_Q(part.edges, part.theta, dim, index_offset=offset)
        lam = max_eigenvalue_symmetric(Q, tol=1e-12)
        spectra.append((lam, dim))
        templates.append(classify_template(part.edges, graph.vertices))
    passed = (all(t != "unrecognized" for t in templates)
              and all(lam <= tol_psd for lam, _ in spectra))
    kind = kind_if_pass if passed else "inconclusive"
    return StabilityCertificate(kind=kind, spectra=spectra, templates=templates,
                                decomposition=decomposition, tol_psd=tol_psd,
                                tol_part=tol_part, L1=L1, L2=L2)


def certify_dissipative(scheme: SchemeCoefficients, decomposition: SubgraphDecomposition,
                        tol_psd=None, tol_part=None) -> StabilityCertificate:
    """Check the per-step energy-dissipation conditions against weights(scheme).

    Coverage or per-edge-sum failures raise CertificateError naming the edge;
    a part failing the template or eigenvalue test yields kind "inconclusive".
    Default tolerances: lambda_max <= 1e-9 and exact sums for rational theta,
    lambda_max <= 1e-6 and sums within 5e-3 for decimal theta.
    """
    return _certify(scheme, weights(scheme), decomposition, "dissipative",
                    tol_psd, tol_part)


def certify_bounded(scheme: SchemeCoefficients, L1, L2, decomposition: SubgraphDecomposition,
                    tol_psd=None, tol_part=None) -> StabilityCertificate:
    """Check the uniform-in-time energy-bound conditions against
    shifted_weights(scheme, L1, L2); otherwise as certify_dissipative."""
    w = shifted_weights(scheme, L1, L2)
    cert = _certify(scheme, w, decomposition, "bounded", tol_psd, tol_part,
                    L1=w.L1, L2=w.L2)
    return cert


def builtin_decomposition(name: str) -> SubgraphDecomposition:
    """The stock decomposition and theta split shipped for a builtin scheme."""
    if name == "backward_euler":
        return SubgraphDecomposition([(frozenset({(1, 0)}), {(1, 0): Fraction(-1)})])
    if name == "stage3_order2":
        e0, e1 = fan_decomposition(3)
        t0 = {(1, 0): Fraction(-5), (2, 0): Fraction("2.2"), (2, 1): Fraction("-3.93")}
        t1 = {(2, 0): Fraction("-3.2"), (2, 1): Fraction("-2.67"), (3, 0): Fraction(2),
              (3, 1): Fraction("1.6"), (3, 2): Fraction("-9.6")}
        return SubgraphDecomposition([(e0, t0), (e1, t1)])
    if name == "diag7_order3":
        s0, s1 = diagonal_decomposition(7)
        t0 = {(1, -1): -0.87, (2, -1): 0.66, (2, 1): -4.82, (3, -1): 0.27,
              (3, 2): -2.46, (4, -1): -0.21, (4, 3): -1.52, (5, -1): -0.04,
              (5, 4): -0.10, (6, -1): 0.17, (6, 5): -0.12, (7, -1): -0.19,
              (7, 6): -0.94}
        t1 = {(1, 0): -12.32, (2, 0): -1.40, (2, 1): -7.63, (3, 0): -0.66,
              (3, 2): -10.81, (4, 0): 0.80, (4, 3): -7.45, (5, 0): -0.87,
              (5, 4): -6.80, (6, 0): 0.90, (6, 5): -8.18, (7, 0): 0.89,
              (7, 6): -10.31}
        return SubgraphDecomposition([(s0, t0), (s1, t1)])
    raise ValueError(f"no builtin decomposition for scheme {name!r}")


def certificate_report(certificate: StabilityCertificate, title: str = None) -> str:
    """Multi-line text summary: verdict, tolerances, then each part's edge
    count, template match, extreme eigenvalue and theta table."""
    lines = []
    if title:
        lines.append(f"scheme: {title}")
    if certificate.kind == "bounded":
        lines.append(f"verdict: bounded (L1={format_rational(certificate.L1)}, "
                     f"L2={format_rational(certificate.L2)})")
    else:
        lines.append(f"verdict: {certificate.kind}")
    part_tol = ("exact" if certificate.tol_part is None
                else f"{certificate.tol_part:.1e}")
    lines.append(f"tolerances: lambda_max <= {certificate.tol_psd:.1e}, "
                 f"edge-sum mismatch <= {part_tol}")
    for idx, part in enumerate(certificate.decomposition.parts):
        lam, dim = certificate.spectra[idx]
        lines.append(f"part {idx}: {len(part.edges)} edges, "
                     f"template={certificate.templates[idx]}, "
                     f"lambda_max={lam:.6e} ({dim}x{dim})")
        for e in sorted(part.edges):
            v = part.theta.get(e, 0)
            lines.append(f"  theta[{e[0]},{e[1]}] = {float(v):.6g}")
    return "\n".join(lines)
