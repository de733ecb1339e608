"""Operational semantics: reduction, barbs, the connection-set LTS,
composite processes, weak transitions, state-space exploration, and the
erasure into the ordinary asynchronous pi-calculus.

Two independent routes to dynamics are kept deliberately separate:

* ``reduce`` works on structural-congruence normal forms and locates
  redexes syntactically (a restriction chain connecting an input atom to
  an output atom, or a destructor applied to a literal value);
* ``lts_step`` is a structural SOS over raw terms, parameterized by a
  connection set delta that licenses synchronization between an input
  name and an output name.

Their agreement on restricted processes is the harmony property checked
by the test suite; neither is defined in terms of the other.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import api
from .syntax import (
    Case, ChanType, Input, LetTuple, Name, Nil, NIL, Output, Par, Process,
    RepInput, Res, SUCCESS, VInl, VInr, VName, VTuple, VUNIT, Value,
    canonicalize, canonical_process, free_names, fresh_name,
    print_value, rename_free, substitute, substitute_value, value_names,
)


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------

class Label:
    pass


@dataclass(frozen=True)
class Tau(Label):
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class In(Label):
    subject: Name
    param: Name  # bound in the label: ground transitions never instantiate it

    def __str__(self):
        return f"{self.subject}({self.param})"


@dataclass(frozen=True)
class FreeOut(Label):
    subject: Name
    payload: Value

    def __str__(self):
        inner = "" if self.payload == VUNIT else print_value(self.payload)
        return f"{self.subject}!({inner})"


@dataclass(frozen=True)
class BoundOut(Label):
    """Bound output: the exported name and its companion are both extruded.

    ``in_type`` is the annotation of the opened restriction so a Close can
    re-form it; ``exported_is_input`` records which member left as payload.
    """

    subject: Name
    exported: Name
    companion: Name
    in_type: ChanType
    exported_is_input: bool

    def __str__(self):
        return f"{self.subject}!(new {self.exported})"


TAU = Tau()


def label_free_names(mu: Label) -> frozenset:
    if isinstance(mu, Tau):
        return frozenset()
    if isinstance(mu, In):
        return frozenset((mu.subject,))
    if isinstance(mu, FreeOut):
        return frozenset((mu.subject,)) | value_names(mu.payload)
    if isinstance(mu, BoundOut):
        return frozenset((mu.subject,))
    raise TypeError(f"not a label: {mu!r}")


def label_bound_names(mu: Label) -> frozenset:
    if isinstance(mu, In):
        return frozenset((mu.param,))
    if isinstance(mu, BoundOut):
        return frozenset((mu.exported, mu.companion))
    return frozenset()


def label_names(mu: Label) -> frozenset:
    return label_free_names(mu) | label_bound_names(mu)


def rename_label(mu: Label, renames) -> Label:
    if isinstance(mu, Tau):
        return mu
    if isinstance(mu, In):
        return In(renames.get(mu.subject, mu.subject),
                  renames.get(mu.param, mu.param))
    if isinstance(mu, FreeOut):
        return FreeOut(renames.get(mu.subject, mu.subject),
                       substitute_value(mu.payload,
                                        {k: VName(v) for k, v in renames.items()}))
    if isinstance(mu, BoundOut):
        return BoundOut(renames.get(mu.subject, mu.subject),
                        renames.get(mu.exported, mu.exported),
                        renames.get(mu.companion, mu.companion),
                        mu.in_type, mu.exported_is_input)
    raise TypeError(f"not a label: {mu!r}")


# ---------------------------------------------------------------------------
# Connection sets
# ---------------------------------------------------------------------------

def delta_names(delta) -> frozenset:
    out = set()
    for a, b in delta:
        out.add(a)
        out.add(b)
    return frozenset(out)


def parse_delta(text: str) -> frozenset:
    """Parse ``"a-b,c-d"`` into a set of (input name, output name) pairs."""
    pairs = set()
    text = text.strip()
    if not text:
        return frozenset()
    for part in text.split(","):
        left, sep, right = part.partition("-")
        if not sep or not left.strip() or not right.strip():
            raise ValueError(f"bad connection {part!r}; expected in-out")
        pairs.add((_parse_name(left.strip()), _parse_name(right.strip())))
    return frozenset(pairs)


def _parse_name(s: str) -> Name:
    if "#" in s:
        base, idx = s.split("#")
        return Name(base, int(idx))
    return Name(s)


# ---------------------------------------------------------------------------
# The delta-parameterized LTS
# ---------------------------------------------------------------------------

def _freshen_bound(mu: Label, target: Process, avoid):
    """Rename the label's bound names (and the target) away from ``avoid``."""
    clash = label_bound_names(mu) & frozenset(avoid)
    if not clash:
        return mu, target
    taken = set(avoid) | label_names(mu) | free_names(target)
    renames = {}
    for n in clash:
        nn = fresh_name(n, taken)
        taken.add(nn)
        renames[n] = nn
    return rename_label(mu, renames), rename_free(target, renames)


def lts_step(delta, p: Process):
    """All transitions of ``p`` under connection set ``delta``.

    Ground style: input parameters stay uninstantiated.  The caller is
    expected to have canonicalized ``p`` (or otherwise guaranteed distinct
    bound names, disjoint from n(delta)).
    """
    out = []
    if isinstance(p, Nil):
        return out
    if isinstance(p, Input):
        out.append((In(p.subject, p.param), p.body))
        return out
    if isinstance(p, RepInput):
        out.append((In(p.subject, p.param), Par(p.body, p)))
        return out
    if isinstance(p, Output):
        out.append((FreeOut(p.subject, p.payload), NIL))
        return out
    if isinstance(p, LetTuple):
        if isinstance(p.scrutinee, VTuple) and len(p.scrutinee.items) == len(p.params):
            body = substitute(p.body, dict(zip(p.params, p.scrutinee.items)))
            out.append((TAU, body))
        return out
    if isinstance(p, Case):
        if isinstance(p.scrutinee, VInl):
            out.append((TAU, substitute(p.left_body,
                                        {p.left_param: p.scrutinee.value})))
        elif isinstance(p.scrutinee, VInr):
            out.append((TAU, substitute(p.right_body,
                                        {p.right_param: p.scrutinee.value})))
        return out
    if isinstance(p, Par):
        lsteps = lts_step(delta, p.left)
        rsteps = lts_step(delta, p.right)
        for mu, l2 in lsteps:
            mu2, l3 = _freshen_bound(mu, l2, free_names(p.right))
            out.append((mu2, Par(l3, p.right)))
        for mu, r2 in rsteps:
            mu2, r3 = _freshen_bound(mu, r2, free_names(p.left))
            out.append((mu2, Par(p.left, r3)))
        for ina, fromleft in ((p.left, True), (p.right, False)):
            isteps = lsteps if fromleft else rsteps
            osteps = rsteps if fromleft else lsteps
            for mu_i, pi in isteps:
                if not isinstance(mu_i, In):
                    continue
                for mu_o, qo in osteps:
                    if isinstance(mu_o, FreeOut):
                        if (mu_i.subject, mu_o.subject) not in delta:
                            continue
                        inst = substitute(pi, {mu_i.param: mu_o.payload})
                        tgt = Par(inst, qo) if fromleft else Par(qo, inst)
                        out.append((TAU, tgt))
                    elif isinstance(mu_o, BoundOut):
                        if (mu_i.subject, mu_o.subject) not in delta:
                            continue
                        # keep the extruded pair clear of the receiving side
                        mu_o2, qo2 = _freshen_bound(
                            mu_o, qo, free_names(pi) | {mu_i.param})
                        inst = substitute(pi, {mu_i.param: VName(mu_o2.exported)})
                        body = Par(inst, qo2) if fromleft else Par(qo2, inst)
                        if mu_o2.exported_is_input:
                            a, b = mu_o2.exported, mu_o2.companion
                        else:
                            a, b = mu_o2.companion, mu_o2.exported
                        out.append((TAU, Res(a, b, mu_o2.in_type, body)))
        return out
    if isinstance(p, Res):
        pair = {p.in_name, p.out_name}
        inner = frozenset(delta) | {(p.in_name, p.out_name)}
        for mu, q in lts_step(inner, p.body):
            if isinstance(mu, Tau):
                out.append((TAU, Res(p.in_name, p.out_name, p.in_type, q)))
                continue
            if isinstance(mu, FreeOut) and mu.subject not in pair:
                pnames = value_names(mu.payload)
                if pnames & pair:
                    if isinstance(mu.payload, VName):
                        m = mu.payload.name
                        other = p.out_name if m == p.in_name else p.in_name
                        out.append((BoundOut(mu.subject, m, other, p.in_type,
                                             m == p.in_name), q))
                    # a composite value holding a restricted name cannot be
                    # extruded; the name stays private
                    continue
                out.append((mu, Res(p.in_name, p.out_name, p.in_type, q)))
                continue
            if label_names(mu) & pair:
                continue
            out.append((mu, Res(p.in_name, p.out_name, p.in_type, q)))
        return out
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Composite processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Composite:
    process: Process
    delta: frozenset  # of (Name, Name)

    def gc(self) -> "Composite":
        """Drop connection pairs no longer touching the process."""
        fn = free_names(self.process)
        kept = frozenset((a, b) for a, b in self.delta if a in fn or b in fn)
        if kept == self.delta:
            return self
        return Composite(self.process, kept)


def composite_step(comp: Composite):
    """Transitions of a composite: delta grows on O-name bound outputs."""
    out = []
    for mu, q in lts_step(comp.delta, comp.process):
        if isinstance(mu, BoundOut) and not mu.exported_is_input:
            delta2 = comp.delta | {(mu.companion, mu.exported)}
        else:
            delta2 = comp.delta
        out.append((mu, Composite(q, delta2)))
    return out


# ---------------------------------------------------------------------------
# Reduction (normal-form route, independent of the LTS)
# ---------------------------------------------------------------------------

def _split_chain(p):
    pairs = []
    while isinstance(p, Res):
        pairs.append((p.in_name, p.out_name, p.in_type))
        p = p.body
    return pairs, p


def _par_list(p):
    if isinstance(p, Par):
        return _par_list(p.left) + _par_list(p.right)
    return [p]


def _rebuild(pairs, atoms):
    core = NIL
    if atoms:
        core = atoms[0]
        for a in atoms[1:]:
            core = Par(core, a)
    for a, b, t in reversed(pairs):
        core = Res(a, b, t, core)
    return core


def reduce(p: Process):
    """One-step reducts of ``p`` modulo structural congruence.

    Synchronization happens only across a restriction connecting the input
    end to the output end; destructors fire on literal values.  Results are
    canonical, deduplicated.
    """
    canon = canonicalize(p).process
    pairs, core = _split_chain(canon)
    atoms = _par_list(core)
    if atoms == [NIL]:
        atoms = []
    results = {}

    def emit(q: Process):
        c = canonicalize(q)
        results[c.key] = c.process

    for a, b, t in pairs:
        for i, recv in enumerate(atoms):
            if isinstance(recv, Input) and recv.subject == a:
                replica = None
            elif isinstance(recv, RepInput) and recv.subject == a:
                replica = recv
            else:
                continue
            for j, send in enumerate(atoms):
                if j == i or not isinstance(send, Output) or send.subject != b:
                    continue
                body = substitute(recv.body, {recv.param: send.payload})
                rest = [x for k, x in enumerate(atoms) if k not in (i, j)]
                newatoms = [body] + ([replica] if replica else []) + rest
                emit(_rebuild(pairs, newatoms))
    for i, atom in enumerate(atoms):
        fired = None
        if isinstance(atom, LetTuple) and isinstance(atom.scrutinee, VTuple) \
                and len(atom.scrutinee.items) == len(atom.params):
            fired = substitute(atom.body,
                               dict(zip(atom.params, atom.scrutinee.items)))
        elif isinstance(atom, Case) and isinstance(atom.scrutinee, VInl):
            fired = substitute(atom.left_body,
                               {atom.left_param: atom.scrutinee.value})
        elif isinstance(atom, Case) and isinstance(atom.scrutinee, VInr):
            fired = substitute(atom.right_body,
                               {atom.right_param: atom.scrutinee.value})
        if fired is not None:
            rest = [x for k, x in enumerate(atoms) if k != i]
            emit(_rebuild(pairs, [fired] + rest))
    return set(results.values())


# ---------------------------------------------------------------------------
# Barbs
# ---------------------------------------------------------------------------

class NameSet(frozenset):
    """Set of names; ``truncated`` marks an exhausted search budget."""

    truncated = False


class ProcessSet(frozenset):
    """Set of processes; ``truncated`` marks an exhausted search budget."""

    truncated = False


def strong_barbs(p: Process) -> NameSet:
    """Success names with an unguarded output occurrence."""
    canon = canonicalize(p).process
    _, core = _split_chain(canon)
    barbs = set()
    for atom in _par_list(core):
        if isinstance(atom, Output) and atom.subject.kind == SUCCESS:
            barbs.add(atom.subject)
    return NameSet(barbs)


def weak_barbs(p: Process, budget: int = 2000) -> NameSet:
    """Union of strong barbs over reducts reachable within the budget."""
    seen = {}
    start = canonicalize(p)
    seen[start.key] = start.process
    frontier = [start.process]
    barbs = set(strong_barbs(start.process))
    truncated = False
    while frontier:
        if len(seen) >= budget:
            truncated = True
            break
        cur = frontier.pop()
        for q in reduce(cur):
            k = canonicalize(q).key
            if k in seen:
                continue
            seen[k] = q
            barbs |= strong_barbs(q)
            frontier.append(q)
    res = NameSet(barbs)
    res.truncated = truncated
    return res


# ---------------------------------------------------------------------------
# Weak transitions
# ---------------------------------------------------------------------------

def weak_closure(delta, p: Process, budget: int = 2000) -> ProcessSet:
    """Processes reachable by tau transitions, canonical, budget-bounded."""
    start = canonicalize(p)
    seen = {start.key: start.process}
    frontier = [start.process]
    truncated = False
    while frontier:
        if len(seen) >= budget:
            truncated = True
            break
        cur = frontier.pop()
        for mu, q in lts_step(delta, cur):
            if not isinstance(mu, Tau):
                continue
            c = canonicalize(q)
            if c.key in seen:
                continue
            seen[c.key] = c.process
            frontier.append(c.process)
    res = ProcessSet(seen.values())
    res.truncated = truncated
    return res


def match_label(mu: Label, ell: Label):
    """Match ``mu`` against requested ``ell`` up to bound-name renaming.

    Returns a rename map (possibly empty) to apply to mu's target, or None
    if the labels differ.
    """
    if type(mu) is not type(ell):
        return None
    if isinstance(mu, Tau):
        return {}
    if isinstance(mu, In):
        if mu.subject != ell.subject:
            return None
        return {} if mu.param == ell.param else {mu.param: ell.param}
    if isinstance(mu, FreeOut):
        return {} if (mu.subject == ell.subject and mu.payload == ell.payload) else None
    if isinstance(mu, BoundOut):
        if (mu.subject != ell.subject or mu.in_type != ell.in_type
                or mu.exported_is_input != ell.exported_is_input):
            return None
        ren = {}
        if mu.exported != ell.exported:
            ren[mu.exported] = ell.exported
        if mu.companion != ell.companion:
            ren[mu.companion] = ell.companion
        return ren
    raise TypeError(f"not a label: {mu!r}")


def weak_transitions(delta, p: Process, ell: Label, budget: int = 2000) -> ProcessSet:
    """Targets of tau* ell tau* (tau* alone when ell is Tau)."""
    pre = weak_closure(delta, p, budget)
    if isinstance(ell, Tau):
        return pre
    mids = {}
    for q in pre:
        for mu, r in lts_step(delta, q):
            ren = match_label(mu, ell)
            if ren is None:
                continue
            r2 = rename_free(r, ren) if ren else r
            c = canonicalize(r2)
            mids[c.key] = c.process
    out = {}
    truncated = pre.truncated
    for r in mids.values():
        post = weak_closure(delta, r, budget)
        truncated = truncated or post.truncated
        for s in post:
            out[canonicalize(s).key] = s
    res = ProcessSet(out.values())
    res.truncated = truncated
    return res


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------

@dataclass
class LtsGraph:
    nodes: list  # of Composite (canonical process, gc'd delta)
    edges: list  # of (int, Label, int)
    root: int
    depth_truncated: bool
    state_truncated: bool

    @property
    def truncated(self) -> bool:
        return self.depth_truncated or self.state_truncated


def _comp_key(comp: Composite):
    return (canonicalize(comp.process).key,
            tuple(sorted((str(a), str(b)) for a, b in comp.delta)))


def explore(delta, p: Process, depth_bound: int = 6,
            state_bound: int = 2000) -> LtsGraph:
    """Breadth-first LTS exploration over canonical composite states."""
    root = Composite(canonical_process(p), frozenset(delta)).gc()
    nodes = [root]
    index = {_comp_key(root): 0}
    edges = []
    depth_trunc = False
    state_trunc = False
    frontier = [(0, 0)]
    while frontier:
        nid, depth = frontier.pop(0)
        if depth >= depth_bound:
            if composite_step(nodes[nid]):
                depth_trunc = True
            continue
        for mu, nxt in composite_step(nodes[nid]):
            nxt = Composite(canonical_process(nxt.process), nxt.delta).gc()
            key = _comp_key(nxt)
            tid = index.get(key)
            if tid is None:
                if len(nodes) >= state_bound:
                    state_trunc = True
                    continue
                tid = len(nodes)
                index[key] = tid
                nodes.append(nxt)
                frontier.append((tid, depth + 1))
            edges.append((nid, mu, tid))
    return LtsGraph(nodes, edges, 0, depth_trunc, state_trunc)


# ---------------------------------------------------------------------------
# Erasure to the ordinary asynchronous pi-calculus
# ---------------------------------------------------------------------------

def _erase_value(v: Value, m):
    return substitute_value(v, {k: VName(w) for k, w in m.items()})


def erase_to_api(comp: Composite) -> api.Process:
    """Collapse every connected pair and restricted pair to its O-name."""
    m = {a: b for a, b in comp.delta}

    def go(p, m):
        if isinstance(p, Nil):
            return api.NIL
        if isinstance(p, Par):
            return api.Par(go(p.left, m), go(p.right, m))
        if isinstance(p, Input):
            return api.Input(m.get(p.subject, p.subject), p.param, go(p.body, m))
        if isinstance(p, RepInput):
            return api.RepInput(m.get(p.subject, p.subject), p.param, go(p.body, m))
        if isinstance(p, Output):
            return api.Output(m.get(p.subject, p.subject), _erase_value(p.payload, m))
        if isinstance(p, Res):
            m2 = dict(m)
            m2[p.in_name] = p.out_name
            m2.pop(p.out_name, None)
            return api.Res(p.out_name, go(p.body, m2))
        if isinstance(p, LetTuple):
            return api.LetTuple(p.params, _erase_value(p.scrutinee, m), go(p.body, m))
        if isinstance(p, Case):
            return api.Case(_erase_value(p.scrutinee, m),
                            p.left_param, go(p.left_body, m),
                            p.right_param, go(p.right_body, m))
        raise TypeError(f"not a process: {p!r}")

    return go(comp.process, m)


def erase_label(mu: Label, delta) -> "api.Label":
    m = {a: b for a, b in delta}
    if isinstance(mu, Tau):
        return api.TAU
    if isinstance(mu, In):
        return api.InLabel(m.get(mu.subject, mu.subject), mu.param)
    if isinstance(mu, FreeOut):
        return api.OutLabel(m.get(mu.subject, mu.subject),
                            _erase_value(mu.payload, m))
    if isinstance(mu, BoundOut):
        oname = mu.companion if mu.exported_is_input else mu.exported
        return api.BoundOutLabel(m.get(mu.subject, mu.subject), oname)
    raise TypeError(f"not a label: {mu!r}")
