"""The ordinary asynchronous pi-calculus: the target of erasure.

Restriction binds a single name and the same name may occur in input and
output position; there is no connection set.  The transition system here
is written directly from the standard early rules (com and close fire on
a shared subject) so it can serve as an independent reference when
checking that erasure preserves and reflects transitions.  It must not be
defined via the connection-set machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    Name, Value, VName, VTuple, VInl, VInr, VUNIT,
    fresh_name, print_value, substitute_value, value_names,
)


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

class Process:
    pass


@dataclass(frozen=True)
class Nil(Process):
    pass


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Input(Process):
    subject: Name
    param: Name
    body: Process


@dataclass(frozen=True)
class RepInput(Process):
    subject: Name
    param: Name
    body: Process


@dataclass(frozen=True)
class Output(Process):
    subject: Name
    payload: Value


@dataclass(frozen=True)
class Res(Process):
    name: Name
    body: Process


@dataclass(frozen=True)
class LetTuple(Process):
    params: tuple
    scrutinee: Value
    body: Process


@dataclass(frozen=True)
class Case(Process):
    scrutinee: Value
    left_param: Name
    left_body: Process
    right_param: Name
    right_body: Process


NIL = Nil()


def free_names(p: Process) -> frozenset:
    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, Par):
        return free_names(p.left) | free_names(p.right)
    if isinstance(p, Input) or isinstance(p, RepInput):
        return frozenset((p.subject,)) | (free_names(p.body) - {p.param})
    if isinstance(p, Output):
        return frozenset((p.subject,)) | value_names(p.payload)
    if isinstance(p, Res):
        return free_names(p.body) - {p.name}
    if isinstance(p, LetTuple):
        return value_names(p.scrutinee) | (free_names(p.body) - set(p.params))
    if isinstance(p, Case):
        return (value_names(p.scrutinee)
                | (free_names(p.left_body) - {p.left_param})
                | (free_names(p.right_body) - {p.right_param}))
    raise TypeError(f"not a process: {p!r}")


def substitute(p: Process, mapping) -> Process:
    mapping = {k: v for k, v in mapping.items() if v != VName(k)}
    if not mapping or not (set(mapping) & free_names(p)):
        return p
    return _subst(p, mapping)


def _subst_subject(n: Name, mapping) -> Name:
    v = mapping.get(n)
    if v is None:
        return n
    if isinstance(v, VName):
        return v.name
    raise ValueError(f"cannot use non-name value as subject for {n}")


def _avoid(mapping, p):
    taken = set(free_names(p))
    for v in mapping.values():
        taken |= value_names(v)
    return taken


def _refresh(binders, mapping, bodies):
    """Drop shadowed entries, rename binders clashing with incoming names."""
    live = {k: v for k, v in mapping.items() if k not in binders}
    incoming = set()
    for v in live.values():
        incoming |= value_names(v)
    renames = {}
    if incoming & set(binders):
        taken = incoming | set(binders)
        for b in bodies:
            taken |= free_names(b)
        for b in binders:
            if b in incoming:
                nb = fresh_name(b, taken)
                taken.add(nb)
                renames[b] = nb
    return live, renames


def _subst(p: Process, mapping) -> Process:
    if isinstance(p, Nil):
        return p
    if isinstance(p, Par):
        return Par(substitute(p.left, mapping), substitute(p.right, mapping))
    if isinstance(p, Output):
        return Output(_subst_subject(p.subject, mapping),
                      substitute_value(p.payload, mapping))
    if isinstance(p, (Input, RepInput)):
        subj = _subst_subject(p.subject, mapping)
        live, ren = _refresh((p.param,), mapping, (p.body,))
        body = p.body
        if ren:
            body = substitute(body, {k: VName(v) for k, v in ren.items()})
        body = substitute(body, live)
        param = ren.get(p.param, p.param)
        return type(p)(subj, param, body)
    if isinstance(p, Res):
        live, ren = _refresh((p.name,), mapping, (p.body,))
        body = p.body
        if ren:
            body = substitute(body, {k: VName(v) for k, v in ren.items()})
        return Res(ren.get(p.name, p.name), substitute(body, live))
    if isinstance(p, LetTuple):
        scrut = substitute_value(p.scrutinee, mapping)
        live, ren = _refresh(p.params, mapping, (p.body,))
        body = p.body
        if ren:
            body = substitute(body, {k: VName(v) for k, v in ren.items()})
        params = tuple(ren.get(x, x) for x in p.params)
        return LetTuple(params, scrut, substitute(body, live))
    if isinstance(p, Case):
        scrut = substitute_value(p.scrutinee, mapping)
        livel, renl = _refresh((p.left_param,), mapping, (p.left_body,))
        lb = p.left_body
        if renl:
            lb = substitute(lb, {k: VName(v) for k, v in renl.items()})
        liver, renr = _refresh((p.right_param,), mapping, (p.right_body,))
        rb = p.right_body
        if renr:
            rb = substitute(rb, {k: VName(v) for k, v in renr.items()})
        return Case(scrut,
                    renl.get(p.left_param, p.left_param), substitute(lb, livel),
                    renr.get(p.right_param, p.right_param), substitute(rb, liver))
    raise TypeError(f"not a process: {p!r}")


def rename_free(p: Process, renames) -> Process:
    return substitute(p, {k: VName(v) for k, v in renames.items()})


def print_process(p: Process) -> str:
    if isinstance(p, Par):
        left = print_process(p.left) if isinstance(p.left, Par) else _atom(p.left)
        return f"{left} | {_atom(p.right)}"
    return _atom(p)


def _atom(p: Process) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Par):
        return f"({print_process(p)})"
    if isinstance(p, Input):
        return f"{p.subject}({p.param}).{_atom(p.body)}"
    if isinstance(p, RepInput):
        return f"!{p.subject}({p.param}).{_atom(p.body)}"
    if isinstance(p, Output):
        inner = "" if p.payload == VUNIT else print_value(p.payload)
        return f"{p.subject}!({inner})"
    if isinstance(p, Res):
        return f"new({p.name}) {_atom(p.body)}"
    if isinstance(p, LetTuple):
        ps = ", ".join(str(x) for x in p.params)
        return f"let ({ps}) = {print_value(p.scrutinee)} in {_atom(p.body)}"
    if isinstance(p, Case):
        return (f"case {print_value(p.scrutinee)} {{ "
                f"inl {p.left_param} -> {print_process(p.left_body)}; "
                f"inr {p.right_param} -> {print_process(p.right_body)} }}")
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Alpha-invariant keys
# ---------------------------------------------------------------------------

def alpha_key(p: Process) -> str:
    return _akey(p, {}, [0])


def _akey_name(n, env):
    return env.get(n, f"f:{n}")


def _akey_value(v, env):
    if isinstance(v, VName):
        return _akey_name(v.name, env)
    if isinstance(v, VTuple):
        return "(" + ",".join(_akey_value(x, env) for x in v.items) + ")"
    if isinstance(v, VInl):
        return f"inl {_akey_value(v.value, env)}"
    if isinstance(v, VInr):
        return f"inr {_akey_value(v.value, env)}"
    return "*"


def _bind(env, counter, *names):
    env = dict(env)
    for n in names:
        env[n] = f"b{counter[0]}"
        counter[0] += 1
    return env


def _akey(p, env, counter):
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Par):
        return f"({_akey(p.left, env, counter)}|{_akey(p.right, env, counter)})"
    if isinstance(p, (Input, RepInput)):
        bang = "!" if isinstance(p, RepInput) else ""
        env2 = _bind(env, counter, p.param)
        return f"{bang}{_akey_name(p.subject, env)}?.{_akey(p.body, env2, counter)}"
    if isinstance(p, Output):
        return f"{_akey_name(p.subject, env)}!{_akey_value(p.payload, env)}"
    if isinstance(p, Res):
        env2 = _bind(env, counter, p.name)
        return f"nu.{_akey(p.body, env2, counter)}"
    if isinstance(p, LetTuple):
        s = _akey_value(p.scrutinee, env)
        env2 = _bind(env, counter, *p.params)
        return f"let{len(p.params)} {s} in {_akey(p.body, env2, counter)}"
    if isinstance(p, Case):
        s = _akey_value(p.scrutinee, env)
        envl = _bind(env, counter, p.left_param)
        envr = _bind(env, counter, p.right_param)
        return (f"case {s} [{_akey(p.left_body, envl, counter)}]"
                f"[{_akey(p.right_body, envr, counter)}]")
    raise TypeError(f"not a process: {p!r}")


def alpha_eq(p: Process, q: Process) -> bool:
    return alpha_key(p) == alpha_key(q)


# ---------------------------------------------------------------------------
# Labels and transitions
# ---------------------------------------------------------------------------

class Label:
    pass


@dataclass(frozen=True)
class TauLabel(Label):
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class InLabel(Label):
    subject: Name
    param: Name

    def __str__(self):
        return f"{self.subject}({self.param})"


@dataclass(frozen=True)
class OutLabel(Label):
    subject: Name
    payload: Value

    def __str__(self):
        inner = "" if self.payload == VUNIT else print_value(self.payload)
        return f"{self.subject}!({inner})"


@dataclass(frozen=True)
class BoundOutLabel(Label):
    subject: Name
    exported: Name

    def __str__(self):
        return f"{self.subject}!(new {self.exported})"


TAU = TauLabel()


def label_free_names(mu: Label) -> frozenset:
    if isinstance(mu, TauLabel):
        return frozenset()
    if isinstance(mu, InLabel):
        return frozenset((mu.subject,))
    if isinstance(mu, OutLabel):
        return frozenset((mu.subject,)) | value_names(mu.payload)
    if isinstance(mu, BoundOutLabel):
        return frozenset((mu.subject,))
    raise TypeError(f"not a label: {mu!r}")


def label_bound_names(mu: Label) -> frozenset:
    if isinstance(mu, InLabel):
        return frozenset((mu.param,))
    if isinstance(mu, BoundOutLabel):
        return frozenset((mu.exported,))
    return frozenset()


def label_names(mu: Label) -> frozenset:
    return label_free_names(mu) | label_bound_names(mu)


def _rename_label(mu: Label, renames) -> Label:
    if isinstance(mu, TauLabel):
        return mu
    if isinstance(mu, InLabel):
        return InLabel(renames.get(mu.subject, mu.subject),
                       renames.get(mu.param, mu.param))
    if isinstance(mu, OutLabel):
        return OutLabel(renames.get(mu.subject, mu.subject),
                        substitute_value(mu.payload,
                                         {k: VName(v) for k, v in renames.items()}))
    if isinstance(mu, BoundOutLabel):
        return BoundOutLabel(renames.get(mu.subject, mu.subject),
                             renames.get(mu.exported, mu.exported))
    raise TypeError(f"not a label: {mu!r}")


def _freshen_bound(mu, target, avoid):
    clash = label_bound_names(mu) & frozenset(avoid)
    if not clash:
        return mu, target
    taken = set(avoid) | label_names(mu) | free_names(target)
    renames = {}
    for n in clash:
        nn = fresh_name(n, taken)
        taken.add(nn)
        renames[n] = nn
    return _rename_label(mu, renames), rename_free(target, renames)


def lts_step(p: Process):
    """Early transitions (ground inputs), written from the standard rules."""
    out = []
    if isinstance(p, Nil):
        return out
    if isinstance(p, Input):
        out.append((InLabel(p.subject, p.param), p.body))
        return out
    if isinstance(p, RepInput):
        out.append((InLabel(p.subject, p.param), Par(p.body, p)))
        return out
    if isinstance(p, Output):
        out.append((OutLabel(p.subject, p.payload), NIL))
        return out
    if isinstance(p, LetTuple):
        if isinstance(p.scrutinee, VTuple) and len(p.scrutinee.items) == len(p.params):
            out.append((TAU, substitute(p.body,
                                        dict(zip(p.params, p.scrutinee.items)))))
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
        lsteps = lts_step(p.left)
        rsteps = lts_step(p.right)
        for mu, l2 in lsteps:
            mu2, l3 = _freshen_bound(mu, l2, free_names(p.right))
            out.append((mu2, Par(l3, p.right)))
        for mu, r2 in rsteps:
            mu2, r3 = _freshen_bound(mu, r2, free_names(p.left))
            out.append((mu2, Par(p.left, r3)))
        for fromleft in (True, False):
            isteps = lsteps if fromleft else rsteps
            osteps = rsteps if fromleft else lsteps
            for mu_i, pi in isteps:
                if not isinstance(mu_i, InLabel):
                    continue
                for mu_o, qo in osteps:
                    if isinstance(mu_o, OutLabel) and mu_o.subject == mu_i.subject:
                        inst = substitute(pi, {mu_i.param: mu_o.payload})
                        tgt = Par(inst, qo) if fromleft else Par(qo, inst)
                        out.append((TAU, tgt))
                    elif (isinstance(mu_o, BoundOutLabel)
                          and mu_o.subject == mu_i.subject):
                        mu_o2, qo2 = _freshen_bound(
                            mu_o, qo, free_names(pi) | {mu_i.param})
                        inst = substitute(pi, {mu_i.param: VName(mu_o2.exported)})
                        body = Par(inst, qo2) if fromleft else Par(qo2, inst)
                        out.append((TAU, Res(mu_o2.exported, body)))
        return out
    if isinstance(p, Res):
        for mu, q in lts_step(p.body):
            if isinstance(mu, OutLabel) and mu.subject != p.name \
                    and p.name in value_names(mu.payload):
                if mu.payload == VName(p.name):
                    out.append((BoundOutLabel(mu.subject, p.name), q))
                # a composite value holding the restricted name stays private
                continue
            if p.name in label_names(mu):
                continue
            out.append((mu, Res(p.name, q)))
        return out
    raise TypeError(f"not a process: {p!r}")
