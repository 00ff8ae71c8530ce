"""Latent variable graphs: domain types, validity checking, d-separation, purity.

A latent variable graph is a DAG over three kinds of nodes: latent variables,
observed variables, and explicit error nodes (each standing for one
double-headed "correlated error" arc between two observed variables). All
graph values are immutable after construction and every operation here is a
pure function, so concurrent callers need no synchronization.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .cliques import maximal_independent_sets
from .errors import GuardExceededError, UnknownLabelError, ValidationError

Edge = tuple[str, str]

#: Hard ceiling for brute-force subset enumeration in purifications_oracle.
SUBSET_ENUMERATION_GUARD = 20


@dataclass(frozen=True)
class NodeId:
    """A graph node: its kind ('latent', 'observed' or 'error') plus label."""

    kind: str
    label: str

    def __post_init__(self) -> None:
        if self.kind not in ("latent", "observed", "error"):
            raise ValidationError(f"unknown node kind {self.kind!r}")


def _freeze_edges(edges: Iterable[Edge]) -> frozenset[Edge]:
    return frozenset((str(a), str(b)) for a, b in edges)


@dataclass(frozen=True)
class LatentVariableGraph:
    """DAG over latents, observed variables, and correlated-error nodes.

    Edge sets are segregated by role: latent_edges run between latents,
    measurement_edges point into observed variables (from latents or from
    other observed variables), and error_edges point from error nodes into
    observed variables.
    """

    latents: frozenset[str]
    observed: frozenset[str]
    errors: frozenset[str]
    latent_edges: frozenset[Edge]
    measurement_edges: frozenset[Edge]
    error_edges: frozenset[Edge]

    @classmethod
    def from_parts(
        cls,
        latents: Iterable[str],
        observed: Iterable[str],
        errors: Iterable[str] = (),
        latent_edges: Iterable[Edge] = (),
        measurement_edges: Iterable[Edge] = (),
        error_edges: Iterable[Edge] = (),
    ) -> "LatentVariableGraph":
        return cls(
            latents=frozenset(map(str, latents)),
            observed=frozenset(map(str, observed)),
            errors=frozenset(map(str, errors)),
            latent_edges=_freeze_edges(latent_edges),
            measurement_edges=_freeze_edges(measurement_edges),
            error_edges=_freeze_edges(error_edges),
        )

    @property
    def nodes(self) -> frozenset[str]:
        return self.latents | self.observed | self.errors

    @property
    def edges(self) -> frozenset[Edge]:
        return self.latent_edges | self.measurement_edges | self.error_edges

    def kind_of(self, label: str) -> str:
        if label in self.latents:
            return "latent"
        if label in self.observed:
            return "observed"
        if label in self.errors:
            return "error"
        raise UnknownLabelError(label)

    def node_id(self, label: str) -> NodeId:
        return NodeId(self.kind_of(label), label)

    @cached_property
    def _parents(self) -> dict[str, frozenset[str]]:
        acc: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            if b in acc:
                acc[b].add(a)
        return {n: frozenset(s) for n, s in acc.items()}

    @cached_property
    def _children(self) -> dict[str, frozenset[str]]:
        acc: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            if a in acc:
                acc[a].add(b)
        return {n: frozenset(s) for n, s in acc.items()}

    def parents_of(self, label: str) -> frozenset[str]:
        try:
            return self._parents[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    def children_of(self, label: str) -> frozenset[str]:
        try:
            return self._children[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    def latent_parents(self, label: str) -> frozenset[str]:
        return self.parents_of(label) & self.latents

    def observed_children(self, label: str) -> frozenset[str]:
        return self.children_of(label) & self.observed

    def immediate_latent_ancestors(self, label: str) -> frozenset[str]:
        """Latents with a directed path to `label` passing through no other latent."""
        found: set[str] = set()
        seen: set[str] = set()
        stack = [label]
        while stack:
            node = stack.pop()
            for p in self.parents_of(node):
                if p in self.latents:
                    found.add(p)
                elif p not in seen:
                    seen.add(p)
                    stack.append(p)
        return frozenset(found)

    def topological_order(self) -> list[str]:
        """Kahn topological sort; raises ValidationError on a cycle."""
        indeg = {n: len(self._parents[n]) for n in self.nodes}
        ready = deque(sorted(n for n, d in indeg.items() if d == 0))
        order: list[str] = []
        while ready:
            node = ready.popleft()
            order.append(node)
            for c in sorted(self._children[node]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.nodes):
            raise ValidationError("graph contains a directed cycle")
        return order

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "latents": sorted(self.latents),
            "observed": sorted(self.observed),
            "errors": sorted(self.errors),
            "latent_edges": sorted(map(list, self.latent_edges)),
            "measurement_edges": sorted(map(list, self.measurement_edges)),
            "error_edges": sorted(map(list, self.error_edges)),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "LatentVariableGraph":
        try:
            return cls.from_parts(
                latents=doc["latents"],
                observed=doc["observed"],
                errors=doc.get("errors", ()),
                latent_edges=doc.get("latent_edges", ()),
                measurement_edges=doc.get("measurement_edges", ()),
                error_edges=doc.get("error_edges", ()),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed graph document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LatentVariableGraph":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PureMeasurementModel:
    """A partition of retained observed variables into single-parent clusters."""

    clusters: tuple[tuple[str, frozenset[str]], ...]

    @classmethod
    def from_mapping(cls, clusters: Mapping[str, Iterable[str]]) -> "PureMeasurementModel":
        items = tuple(
            (str(latent), frozenset(map(str, members)))
            for latent, members in sorted(clusters.items())
        )
        return cls(items)

    def as_dict(self) -> dict[str, frozenset[str]]:
        return dict(self.clusters)

    @property
    def latent_labels(self) -> tuple[str, ...]:
        return tuple(latent for latent, _ in self.clusters)

    @property
    def observed_set(self) -> frozenset[str]:
        out: set[str] = set()
        for _, members in self.clusters:
            out |= members
        return frozenset(out)

    def partition(self) -> frozenset[frozenset[str]]:
        """Cluster contents with latent labels erased."""
        return frozenset(members for _, members in self.clusters)

    def validate(self) -> None:
        seen: set[str] = set()
        for latent, members in self.clusters:
            if len(members) < 2:
                raise ValidationError(f"cluster {latent} has fewer than 2 members")
            if seen & members:
                raise ValidationError("clusters overlap: " + ", ".join(sorted(seen & members)))
            seen |= members

    def as_graph(self) -> LatentVariableGraph:
        """Materialize as a latent variable graph with one latent per cluster."""
        edges = [
            (latent, member) for latent, members in self.clusters for member in members
        ]
        return LatentVariableGraph.from_parts(
            latents=[latent for latent, _ in self.clusters],
            observed=self.observed_set,
            measurement_edges=edges,
        )

    def to_json_dict(self) -> dict:
        return {"clusters": {latent: sorted(members) for latent, members in self.clusters}}

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "PureMeasurementModel":
        return cls.from_mapping(doc["clusters"])


@dataclass(frozen=True)
class LinearParameters:
    """Edge coefficients plus disturbance variances for a linear parameterization.

    exogenous_variances holds one positive entry per node: the variance of the
    node itself when it has no parents, otherwise of its additive disturbance.
    """

    coefficients: tuple[tuple[Edge, float], ...]
    exogenous_variances: tuple[tuple[str, float], ...]

    @classmethod
    def from_mappings(
        cls, coefficients: Mapping[Edge, float], variances: Mapping[str, float]
    ) -> "LinearParameters":
        for node, var in variances.items():
            if not var > 0:
                raise ValidationError(f"variance for {node} must be positive, got {var}")
        return cls(
            coefficients=tuple(sorted(coefficients.items())),
            exogenous_variances=tuple(sorted(variances.items())),
        )

    def coefficient_map(self) -> dict[Edge, float]:
        return dict(self.coefficients)

    def variance_map(self) -> dict[str, float]:
        return dict(self.exogenous_variances)

    def to_json_dict(self) -> dict:
        return {
            "coefficients": [[a, b, w] for (a, b), w in self.coefficients],
            "exogenous_variances": {n: v for n, v in self.exogenous_variances},
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "LinearParameters":
        return cls.from_mappings(
            {(a, b): w for a, b, w in doc["coefficients"]},
            dict(doc["exogenous_variances"]),
        )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphViolation:
    """One violated validity clause, naming the offending node or edge."""

    clause: str
    subject: str

    def __str__(self) -> str:
        return f"{self.clause}: {self.subject}"


def validate_graph(g: LatentVariableGraph) -> list[GraphViolation]:
    """Check every structural clause of a latent variable graph.

    Returns an empty list iff the graph is valid; violations are data, not
    exceptions.
    """
    out: list[GraphViolation] = []
    add = lambda clause, subject: out.append(GraphViolation(clause, subject))

    for a, b in [("latents", "observed"), ("latents", "errors"), ("observed", "errors")]:
        shared = getattr(g, a) & getattr(g, b)
        for label in sorted(shared):
            add("node-kinds-disjoint", f"{label} is in both {a} and {b}")
    if out:
        return out

    known = g.nodes
    for a, b in sorted(g.edges):
        if a not in known:
            add("edge-endpoint-unknown", f"{a} -> {b} (source)")
        if b not in known:
            add("edge-endpoint-unknown", f"{a} -> {b} (target)")
    if any(v.clause == "edge-endpoint-unknown" for v in out):
        return out

    for a, b in sorted(g.latent_edges):
        if a not in g.latents or b not in g.latents:
            add("latent-edge-endpoints-latent", f"{a} -> {b}")
    for a, b in sorted(g.measurement_edges):
        if b not in g.observed:
            add("measurement-edge-into-observed", f"{a} -> {b}")
        if a not in g.latents | g.observed:
            add("measurement-edge-source-latent-or-observed", f"{a} -> {b}")
    for a, b in sorted(g.error_edges):
        if a not in g.errors or b not in g.observed:
            add("error-edge-from-error-into-observed", f"{a} -> {b}")

    try:
        g.topological_order()
    except ValidationError:
        add("acyclic", "graph contains a directed cycle")
        return out

    for latent in sorted(g.latents):
        if not g.observed_children(latent):
            add("latent-has-observed-child", latent)
    for obs in sorted(g.observed):
        if not g.latent_parents(obs):
            add("observed-has-latent-parent", obs)
    for err in sorted(g.errors):
        if len(g.observed_children(err)) < 2:
            add("error-has-two-observed-children", err)
        if g.parents_of(err):
            add("error-has-no-parents", err)
        else:
            for latent in sorted(g.latents):
                if not d_separated(g, err, latent, frozenset()):
                    add("error-d-separated-from-latents", f"{err} vs {latent}")
    return out


def require_valid(g: LatentVariableGraph) -> None:
    violations = validate_graph(g)
    if violations:
        summary = "; ".join(str(v) for v in violations[:5])
        raise ValidationError(f"invalid latent variable graph: {summary}")


# ---------------------------------------------------------------------------
# d-separation
# ---------------------------------------------------------------------------


def reachable_given(
    g: LatentVariableGraph, source: str, cond: frozenset[str] | set[str]
) -> frozenset[str]:
    """Nodes connected to `source` by an active trail given `cond`.

    Standard reachability over trail states (node, direction): a trail enters
    a node either from a parent (downward) or from a child (upward). A
    collider passes only when the node or one of its descendants is
    conditioned on.
    """
    cond = frozenset(cond)
    for label in {source} | cond:
        if label not in g.nodes:
            raise UnknownLabelError(label)

    collider_open = set(cond)
    stack = list(cond)
    while stack:
        node = stack.pop()
        for p in g.parents_of(node):
            if p not in collider_open:
                collider_open.add(p)
                stack.append(p)

    reached: set[str] = set()
    seen: set[tuple[str, bool]] = set()
    # state: (node, arrived_from_child); the source behaves as if entered from a child
    queue: deque[tuple[str, bool]] = deque([(source, True)])
    while queue:
        node, from_child = queue.popleft()
        if (node, from_child) in seen:
            continue
        seen.add((node, from_child))
        if node != source and node not in cond:
            reached.add(node)
        if from_child:
            if node not in cond:
                for p in g.parents_of(node):
                    queue.append((p, True))
                for c in g.children_of(node):
                    queue.append((c, False))
        else:
            if node not in cond:
                for c in g.children_of(node):
                    queue.append((c, False))
            if node in collider_open:
                for p in g.parents_of(node):
                    queue.append((p, True))
    return frozenset(reached)


def d_separated(
    g: LatentVariableGraph, x: str, y: str, cond: Iterable[str] = ()
) -> bool:
    """True iff every path between x and y is blocked by `cond`."""
    cond = frozenset(cond)
    if x == y:
        raise ValidationError("d-separation query requires x != y")
    if x in cond or y in cond:
        raise ValidationError("query nodes may not appear in the conditioning set")
    if y not in g.nodes:
        raise UnknownLabelError(y)
    return y not in reachable_given(g, x, cond)


# ---------------------------------------------------------------------------
# Purity
# ---------------------------------------------------------------------------


def is_pure(g: LatentVariableGraph) -> bool:
    """Whether the measurement model of g is pure.

    Every observed variable must have exactly one latent parent, there must be
    no error nodes, and each observed variable must be d-separated from every
    other node (latents and observed alike) given its latent parent.
    """
    require_valid(g)
    if g.errors or g.error_edges:
        return False
    for obs in g.observed:
        lp = g.latent_parents(obs)
        if len(lp) != 1:
            return False
        (parent,) = lp
        reach = reachable_given(g, obs, frozenset({parent}))
        if reach & (g.latents - {parent}):
            return False
        if reach & (g.observed - {obs}):
            return False
    return True


@dataclass(frozen=True)
class PurityStructure:
    """Subset-independent purity facts about one graph.

    candidates can appear in some pure sub-model; excluded never can (multiple
    latent parents, or an open trail to a foreign latent that no deletion of
    observed variables closes). conflict pairs cannot be retained together.
    """

    parent: Mapping[str, str]
    candidates: frozenset[str]
    excluded: frozenset[str]
    conflicts: frozenset[frozenset[str]]


def purity_structure(g: LatentVariableGraph) -> PurityStructure:
    """Classify observed variables and pairwise conflicts for purification.

    Deleting observed variables never changes trail reachability among the
    remaining nodes, so purity of any retained subset reduces to these
    per-node and per-pair facts computed once on the full graph.
    """
    parent: dict[str, str] = {}
    reach: dict[str, frozenset[str]] = {}
    excluded: set[str] = set()
    for obs in sorted(g.observed):
        lp = g.latent_parents(obs)
        if len(lp) != 1:
            excluded.add(obs)
            continue
        (p,) = lp
        r = reachable_given(g, obs, frozenset({p}))
        if r & (g.latents - {p}):
            excluded.add(obs)
            continue
        parent[obs] = p
        reach[obs] = r
    candidates = frozenset(parent)
    conflicts = frozenset(
        frozenset((a, b))
        for a, b in itertools.combinations(sorted(candidates), 2)
        if b in reach[a] or a in reach[b]
    )
    return PurityStructure(
        parent=parent,
        candidates=candidates,
        excluded=frozenset(excluded),
        conflicts=conflicts,
    )


def _group_by_parent(
    structure: PurityStructure, members: Iterable[str]
) -> dict[str, set[str]]:
    grouped: dict[str, set[str]] = {}
    for obs in members:
        grouped.setdefault(structure.parent[obs], set()).add(obs)
    return grouped


def _enforce_min_children(
    structure: PurityStructure, members: Iterable[str], min_children: int
) -> frozenset[str]:
    """Drop whole clusters that fall below min_children members."""
    grouped = _group_by_parent(structure, members)
    keep: set[str] = set()
    for latent, group in grouped.items():
        if len(group) >= min_children:
            keep |= group
    return frozenset(keep)


def _model_from_members(
    structure: PurityStructure, members: Iterable[str]
) -> PureMeasurementModel:
    grouped = _group_by_parent(structure, members)
    return PureMeasurementModel.from_mapping(grouped)


def _drop_dominated(solutions: set[frozenset[str]]) -> list[frozenset[str]]:
    ordered = sorted(solutions, key=len, reverse=True)
    kept: list[frozenset[str]] = []
    for s in ordered:
        if s and not any(s < k for k in kept):
            kept.append(s)
    return kept


def purifications_oracle(
    g: LatentVariableGraph, min_children: int = 3
) -> set[PureMeasurementModel]:
    """All maximal pure sub-models of g, by brute-force subset enumeration.

    This is the testing oracle, not the production path: it enumerates every
    subset of the purifiable observed variables in decreasing size and keeps
    the maximal ones that are pure and give each surviving latent at least
    min_children children. Guarded to at most SUBSET_ENUMERATION_GUARD
    observed variables.
    """
    require_valid(g)
    if len(g.observed) > SUBSET_ENUMERATION_GUARD:
        raise GuardExceededError(
            f"{len(g.observed)} observed variables exceed the subset-enumeration "
            f"guard of {SUBSET_ENUMERATION_GUARD}; use purify_pattern on a "
            "discovered measurement pattern instead"
        )
    structure = purity_structure(g)
    cand = sorted(structure.candidates)
    conflict_mask = {c: 0 for c in cand}
    pos = {c: i for i, c in enumerate(cand)}
    for pair in structure.conflicts:
        a, b = tuple(pair)
        conflict_mask[a] |= 1 << pos[b]
        conflict_mask[b] |= 1 << pos[a]
    latent_of = [structure.parent[c] for c in cand]

    kept_masks: list[int] = []
    solutions: set[PureMeasurementModel] = set()
    n = len(cand)
    for size in range(n, max(min_children - 1, 0), -1):
        for combo in itertools.combinations(range(n), size):
            mask = 0
            for i in combo:
                mask |= 1 << i
            if any(mask & kept == mask for kept in kept_masks):
                continue
            if any(conflict_mask[cand[i]] & mask for i in combo):
                continue
            counts: dict[str, int] = {}
            for i in combo:
                counts[latent_of[i]] = counts.get(latent_of[i], 0) + 1
            if any(c < min_children for c in counts.values()):
                continue
            kept_masks.append(mask)
            solutions.add(_model_from_members(structure, [cand[i] for i in combo]))
    return solutions


def enumerate_purifications(
    g: LatentVariableGraph, min_children: int = 3
) -> set[PureMeasurementModel]:
    """All maximal pure sub-models of g, via the conflict graph.

    Same answers as purifications_oracle but scales past the enumeration
    guard: maximal independent sets of the conflict graph are enumerated
    directly, then clusters below min_children are dropped wholesale.
    """
    require_valid(g)
    structure = purity_structure(g)
    raw = maximal_independent_sets(structure.candidates, structure.conflicts)
    fixed = {
        _enforce_min_children(structure, members, min_children) for members in raw
    }
    return {
        _model_from_members(structure, members)
        for members in _drop_dominated(fixed)
    }
