"""Wires and the translation into the internal fragment.

A wire forwards every message arriving at an input name to an output
name.  The translation rewrites each output of channel names into a
bound output: the process exports one end of a fresh pair and installs a
wire connecting the other end to the original name, so that emitted
names are always fresh.  Payloads whose type carries no channel are left
untouched; tuple and sum literals are wired componentwise.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    Case, ChanType, Input, LetTuple, Name, Nil, Output, Par, Process,
    RepInput, Res, TupleType, SumType, UNIT, VInl, VInr, VName, VTuple,
    VUnit, Value, ValueType, bound_names, free_names,
)
from .typecheck import ANY, dual

INPUT_MODES = ("i", "li")
OUTPUT_MODES = ("o", "lo")


@dataclass(frozen=True)
class WireSpec:
    """The two ends of a wire and the type it carries.

    ``from_name`` is the receiving (input) end, ``to_name`` the emitting
    (output) end; ``linear`` drops the replication.
    """

    from_name: Name
    to_name: Name
    payload: ValueType
    linear: bool = False


def wire(w: WireSpec, env=None) -> Process:
    """Build the forwarder ``!from(x).to!(x)`` (unreplicated if linear)."""
    if env is not None:
        ft = env.get(w.from_name)
        tt = env.get(w.to_name)
        want_in = ChanType("li" if w.linear else "i", w.payload)
        if ft != want_in or tt != dual(want_in):
            raise ValueError(
                f"wire ends must be typed {want_in} / {dual(want_in)}, "
                f"got {ft} / {tt}")
    x = Name("x", _next_free_index(
        "x", {w.from_name, w.to_name}))
    body = Output(w.to_name, VName(x))
    if w.linear:
        return Input(w.from_name, x, body)
    return RepInput(w.from_name, x, body)


def _next_free_index(base, taken):
    idxs = {n.index for n in taken if n.base == base}
    k = 1
    while k in idxs:
        k += 1
    return k


def _is_chan(t) -> bool:
    return isinstance(t, ChanType)


def _value_type(v: Value, env):
    if isinstance(v, VName):
        return env.get(v.name, ANY)
    if isinstance(v, VUnit):
        return UNIT
    if isinstance(v, VTuple):
        return TupleType(tuple(_value_type(x, env) or ANY for x in v.items))
    # inl/inr alone do not determine the other summand
    return None


def _branch_envs(scrutinee: Value, env, left_param: Name, right_param: Name):
    """Environments for the two case branches.

    A name scrutinee of sum type fixes both params; a literal tag fixes
    the live branch and leaves the dead one unconstrained.
    """
    envl = dict(env)
    envr = dict(env)
    envl[left_param] = ANY
    envr[right_param] = ANY
    if isinstance(scrutinee, VInl):
        envl[left_param] = _value_type(scrutinee.value, env) or ANY
    elif isinstance(scrutinee, VInr):
        envr[right_param] = _value_type(scrutinee.value, env) or ANY
    else:
        t = _value_type(scrutinee, env)
        if isinstance(t, SumType):
            envl[left_param] = t.left
            envr[right_param] = t.right
    return envl, envr


def _chan_names_in(v: Value, env):
    """Names of channel type occurring in ``v`` (with multiplicity)."""
    out = []
    if isinstance(v, VName):
        if _is_chan(env.get(v.name)):
            out.append(v.name)
    elif isinstance(v, VTuple):
        for item in v.items:
            out.extend(_chan_names_in(item, env))
    elif isinstance(v, (VInl, VInr)):
        out.extend(_chan_names_in(v.value, env))
    return out


class _Fresh:
    def __init__(self, taken):
        self.taken = set(taken)
        self.k = 0

    def pair(self):
        k = self.k + 1
        while Name("w", k) in self.taken or Name("w'", k) in self.taken:
            k += 1
        self.k = k
        a, b = Name("w", k), Name("w'", k)
        self.taken.add(a)
        self.taken.add(b)
        return a, b

    def param(self):
        k = self.k + 1
        while Name("x", k) in self.taken:
            k += 1
        self.k = k
        x = Name("x", k)
        self.taken.add(x)
        return x


def internalize(p: Process, env) -> Process:
    """Rewrite every output of channel names into bound-output-plus-wire.

    ``env`` assigns types to the free names; binder types are propagated
    from it.  The result types under the same environment and is related
    to ``p`` by the wire laws.
    """
    fresh = _Fresh(free_names(p) | bound_names(p) | set(env))
    return _walk(p, dict(env), fresh)


def _rewire(v: Value, env, fresh):
    """Replace channel-typed names in ``v`` by fresh exported ends.

    Returns (v', bindings) where each binding carries the restriction to
    wrap and the raw wire to install.
    """
    if isinstance(v, VName):
        t = env.get(v.name)
        if not _is_chan(t):
            return v, []
        exported, companion = fresh.pair()
        if t.mode in OUTPUT_MODES:
            # export a fresh output end; its input companion feeds the
            # original target
            in_end, in_type = companion, ChanType(
                "li" if t.mode == "lo" else "i", t.payload)
            res = (in_end, exported, in_type)
            fwd_subject = v.name
            wire_subject = in_end
        else:
            # export a fresh input end; we keep listening at the original
            # name and resend through the fresh output companion
            in_type = ChanType(t.mode, t.payload)
            res = (exported, companion, in_type)
            fwd_subject = companion
            wire_subject = v.name
        linear = t.mode in ("li", "lo")
        return VName(exported), [(res, wire_subject, fwd_subject,
                                  t.payload, linear)]
    if isinstance(v, VTuple):
        items = []
        binds = []
        for item in v.items:
            item2, b = _rewire(item, env, fresh)
            items.append(item2)
            binds.extend(b)
        return VTuple(tuple(items)), binds
    if isinstance(v, VInl):
        v2, b = _rewire(v.value, env, fresh)
        return VInl(v2), b
    if isinstance(v, VInr):
        v2, b = _rewire(v.value, env, fresh)
        return VInr(v2), b
    return v, []


def _walk(p: Process, env, fresh) -> Process:
    if isinstance(p, Nil):
        return p
    if isinstance(p, Par):
        return Par(_walk(p.left, env, fresh), _walk(p.right, env, fresh))
    if isinstance(p, (Input, RepInput)):
        t = env.get(p.subject)
        env2 = dict(env)
        env2[p.param] = t.payload if _is_chan(t) else ANY
        return type(p)(p.subject, p.param, _walk(p.body, env2, fresh))
    if isinstance(p, Res):
        env2 = dict(env)
        env2[p.in_name] = p.in_type
        env2[p.out_name] = dual(p.in_type)
        return Res(p.in_name, p.out_name, p.in_type,
                   _walk(p.body, env2, fresh))
    if isinstance(p, LetTuple):
        t = _value_type(p.scrutinee, env)
        env2 = dict(env)
        if isinstance(t, TupleType) and len(t.items) == len(p.params):
            for x, ti in zip(p.params, t.items):
                env2[x] = ti
        else:
            for x in p.params:
                env2[x] = ANY
        return LetTuple(p.params, p.scrutinee, _walk(p.body, env2, fresh))
    if isinstance(p, Case):
        envl, envr = _branch_envs(p.scrutinee, env, p.left_param, p.right_param)
        return Case(p.scrutinee,
                    p.left_param, _walk(p.left_body, envl, fresh),
                    p.right_param, _walk(p.right_body, envr, fresh))
    if isinstance(p, Output):
        v2, binds = _rewire(p.payload, env, fresh)
        if not binds:
            return p
        core = Output(p.subject, v2)
        for (in_name, out_name, in_type), wsubj, fwd, vtype, linear in binds:
            x = fresh.param()
            env2 = dict(env)
            env2[x] = vtype
            env2[in_name] = in_type
            env2[out_name] = dual(in_type)
            # the forwarded output is itself internalized, so wiring
            # recurses through the payload type
            fwd_out = _walk(Output(fwd, VName(x)), env2, fresh)
            w = Input(wsubj, x, fwd_out) if linear \
                else RepInput(wsubj, x, fwd_out)
            core = Par(core, w)
        for (in_name, out_name, in_type), _, _, _, _ in reversed(binds):
            core = Res(in_name, out_name, in_type, core)
        return core
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# The internal-fragment predicate
# ---------------------------------------------------------------------------

def is_internal(p: Process, env) -> bool:
    """True iff every output either carries a channel-free value or is in
    the bound-output-plus-wire shape the translation produces."""
    return _chk(p, dict(env))


def _region(p):
    pairs = []
    while isinstance(p, Res):
        pairs.append((p.in_name, p.out_name, p.in_type))
        p = p.body
    atoms = []
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Par):
            stack.append(q.right)
            stack.append(q.left)
        else:
            atoms.append(q)
    return pairs, atoms


def _occ_in_value(v: Value, m: Name) -> int:
    if isinstance(v, VName):
        return 1 if v.name == m else 0
    if isinstance(v, VTuple):
        return sum(_occ_in_value(x, m) for x in v.items)
    if isinstance(v, (VInl, VInr)):
        return _occ_in_value(v.value, m)
    return 0


def _payload_occurrences(p: Process, m: Name) -> int:
    """Free occurrences of ``m`` inside output payloads, at any depth.

    Subject, forward-target and scrutinee positions do not count: only a
    payload position emits the name to a peer.
    """
    if isinstance(p, (Nil, type(None))):
        return 0
    if isinstance(p, Par):
        return (_payload_occurrences(p.left, m)
                + _payload_occurrences(p.right, m))
    if isinstance(p, Output):
        return _occ_in_value(p.payload, m)
    if isinstance(p, (Input, RepInput)):
        return 0 if p.param == m else _payload_occurrences(p.body, m)
    if isinstance(p, Res):
        if m in (p.in_name, p.out_name):
            return 0
        return _payload_occurrences(p.body, m)
    if isinstance(p, LetTuple):
        if m in p.params:
            return 0
        return _payload_occurrences(p.body, m)
    if isinstance(p, Case):
        left = (0 if p.left_param == m
                else _payload_occurrences(p.left_body, m))
        right = (0 if p.right_param == m
                 else _payload_occurrences(p.right_body, m))
        return left + right
    raise TypeError(f"not a process: {p!r}")


def _chk(p: Process, env) -> bool:
    pairs, atoms = _region(p)
    env = dict(env)
    in_of = {}
    out_of = {}
    for a, b, t in pairs:
        env[a] = t
        env[b] = dual(t)
        in_of[b] = a
        out_of[a] = b
    for m in list(in_of) + list(out_of):
        total = sum(_payload_occurrences(a, m) for a in atoms)
        if total == 0:
            continue
        exporters = [a for a in atoms
                     if isinstance(a, Output) and _occ_in_value(a.payload, m)]
        at_top = sum(_occ_in_value(a.payload, m) for a in exporters)
        # a pair end may be emitted once, by a top-level sibling of its wire
        if total != at_top or total > 1:
            return False
        rest = [a for a in atoms if a is not exporters[0]]
        if m in in_of:
            # exported output end: the companion input end is served by a
            # wire, an input that forwards its parameter onward
            c = in_of[m]
            served = any(isinstance(w, (Input, RepInput)) and w.subject == c
                         and w.param in free_names(w.body) for w in rest)
        else:
            # exported input end: some wire forwards into the companion
            c = out_of[m]
            served = any(isinstance(w, (Input, RepInput))
                         and c in free_names(w.body) for w in rest)
        if not served:
            return False
    for atom in atoms:
        if isinstance(atom, Output):
            for n in _chan_names_in(atom.payload, env):
                if n not in in_of and n not in out_of:
                    return False
        elif isinstance(atom, (Input, RepInput)):
            t = env.get(atom.subject)
            env2 = dict(env)
            env2[atom.param] = t.payload if _is_chan(t) else ANY
            if not _chk(atom.body, env2):
                return False
        elif isinstance(atom, Res):
            if not _chk(atom, env):
                return False
        elif isinstance(atom, LetTuple):
            t = _value_type(atom.scrutinee, env)
            env2 = dict(env)
            if isinstance(t, TupleType) and len(t.items) == len(atom.params):
                for x, ti in zip(atom.params, t.items):
                    env2[x] = ti
            else:
                for x in atom.params:
                    env2[x] = ANY
            if not _chk(atom.body, env2):
                return False
        elif isinstance(atom, Case):
            envl, envr = _branch_envs(atom.scrutinee, env,
                                      atom.left_param, atom.right_param)
            if not (_chk(atom.left_body, envl) and _chk(atom.right_body, envr)):
                return False
        elif isinstance(atom, Nil):
            continue
        else:
            raise TypeError(f"not a process: {atom!r}")
    return True
