"""Front-end translators targeting the workbench calculus.

Two sources are supported.  The localised asynchronous pi-calculus,
where a restricted name may be used in both input and output position
but received names may only be used for output, is compiled by splitting
every name into a value channel, a request channel and a server that
matches one pending value with one pending request at a time.  The
simply-typed lambda-calculus is compiled continuation-style: a term
becomes a process listening on one linear input name for the channels
standing for its arguments, and context variables become free output
names.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import api
from .syntax import (
    ChanType, LetTuple, Name, NIL, Input, Output, Par, ParseError, Process,
    RepInput, Res, SUCCESS, TupleType, UNIT, VName, VUNIT, bound_names,
    canonical_process, free_names, fresh_name, vtuple,
)
from .typecheck import ANY
from .semantics import Composite, erase_to_api, lts_step, In
from .equivalence import BisimConfig, NotClosed, Verdict


class LocalityViolation(ValueError):
    """A received name was used as an input subject."""


class UnmappedName(ValueError):
    """An input subject has no request channel assigned."""


class IllTyped(ValueError):
    """The lambda-term does not simply typecheck."""


# ---------------------------------------------------------------------------
# Localised asynchronous pi-calculus: terms and types
# ---------------------------------------------------------------------------

class AlpiType:
    pass


@dataclass(frozen=True)
class AlpiUnit(AlpiType):
    def __str__(self):
        return "unit"


@dataclass(frozen=True)
class AlpiChan(AlpiType):
    """Payload type of names passed around: receivers may only send on them."""

    payload: AlpiType

    def __str__(self):
        return f"o[{self.payload}]"


ALPI_UNIT = AlpiUnit()


class AlpiProcess:
    pass


@dataclass(frozen=True)
class AlpiNil(AlpiProcess):
    pass


@dataclass(frozen=True)
class AlpiPar(AlpiProcess):
    left: AlpiProcess
    right: AlpiProcess


@dataclass(frozen=True)
class AlpiInput(AlpiProcess):
    subject: Name
    param: Name
    body: AlpiProcess


@dataclass(frozen=True)
class AlpiRepInput(AlpiProcess):
    subject: Name
    param: Name
    body: AlpiProcess


@dataclass(frozen=True)
class AlpiOutput(AlpiProcess):
    subject: Name
    payload: Name | None  # None sends the unit value


@dataclass(frozen=True)
class AlpiRes(AlpiProcess):
    """Single-name restriction; the bound name may be read and written."""

    name: Name
    payload_type: AlpiType
    body: AlpiProcess


ALPI_NIL = AlpiNil()


def alpi_free_names(p: AlpiProcess) -> frozenset:
    if isinstance(p, AlpiNil):
        return frozenset()
    if isinstance(p, AlpiPar):
        return alpi_free_names(p.left) | alpi_free_names(p.right)
    if isinstance(p, (AlpiInput, AlpiRepInput)):
        return frozenset((p.subject,)) | (alpi_free_names(p.body) - {p.param})
    if isinstance(p, AlpiOutput):
        out = frozenset((p.subject,))
        return out if p.payload is None else out | {p.payload}
    if isinstance(p, AlpiRes):
        return alpi_free_names(p.body) - {p.name}
    raise TypeError(f"not a localised process: {p!r}")


def check_locality(p: AlpiProcess, received=frozenset()) -> None:
    """Received names may appear under their binder only in output position."""
    if isinstance(p, AlpiNil):
        return
    if isinstance(p, AlpiPar):
        check_locality(p.left, received)
        check_locality(p.right, received)
        return
    if isinstance(p, (AlpiInput, AlpiRepInput)):
        if p.subject in received:
            raise LocalityViolation(
                f"received name {p.subject} used as an input subject")
        check_locality(p.body, received | {p.param})
        return
    if isinstance(p, AlpiOutput):
        return
    if isinstance(p, AlpiRes):
        check_locality(p.body, received - {p.name})
        return
    raise TypeError(f"not a localised process: {p!r}")


def is_local(p: AlpiProcess) -> bool:
    try:
        check_locality(p)
    except LocalityViolation:
        return False
    return True


def alpi_names(p: AlpiProcess) -> frozenset:
    """Every name occurring in ``p``, bound or free."""
    if isinstance(p, AlpiNil):
        return frozenset()
    if isinstance(p, AlpiPar):
        return alpi_names(p.left) | alpi_names(p.right)
    if isinstance(p, (AlpiInput, AlpiRepInput)):
        return frozenset((p.subject, p.param)) | alpi_names(p.body)
    if isinstance(p, AlpiOutput):
        out = frozenset((p.subject,))
        return out if p.payload is None else out | {p.payload}
    if isinstance(p, AlpiRes):
        return frozenset((p.name,)) | alpi_names(p.body)
    raise TypeError(f"not a localised process: {p!r}")


# ---------------------------------------------------------------------------
# Localised pi -> workbench calculus
# ---------------------------------------------------------------------------

def trans_alpi_type(t: AlpiType):
    """Payload types: received names grant the output capability only."""
    if isinstance(t, AlpiUnit):
        return UNIT
    if isinstance(t, AlpiChan):
        return ChanType("o", trans_alpi_type(t.payload))
    raise TypeError(f"not a payload type: {t!r}")


def encode_alpi(p: AlpiProcess, f: dict) -> Process:
    """Compile a localised process, with ``f`` giving the request channel
    for each free name that is used in input position.

    Every name of the source keeps its identity as an output channel.  An
    input becomes a request carrying a fresh return channel; a restriction
    spawns the server that pairs values with requests.
    """
    check_locality(p)
    avoid = set(alpi_names(p)) | set(f.keys()) | set(f.values())
    return _enc_alpi(p, dict(f), {}, avoid)


def _fresh(base: str, avoid: set) -> Name:
    n = Name(base)
    if n in avoid:
        n = fresh_name(n, avoid)
    avoid.add(n)
    return n


def _enc_alpi(p: AlpiProcess, f: dict, tenv: dict, avoid: set) -> Process:
    if isinstance(p, AlpiNil):
        return NIL
    if isinstance(p, AlpiPar):
        return Par(_enc_alpi(p.left, f, tenv, avoid),
                   _enc_alpi(p.right, f, tenv, avoid))
    if isinstance(p, AlpiOutput):
        payload = VUNIT if p.payload is None else VName(p.payload)
        return Output(p.subject, payload)
    if isinstance(p, AlpiInput):
        return _enc_alpi_input(p, f, tenv, avoid)
    if isinstance(p, AlpiRepInput):
        once = AlpiInput(p.subject, p.param, p.body)
        d = _fresh("d", avoid)
        do = _fresh("do", avoid)
        t = _fresh("t", avoid)
        again = Par(Output(do, VUNIT), _enc_alpi_input(once, f, tenv, avoid))
        return Res(d, do, ChanType("i", UNIT),
                   Par(Output(do, VUNIT), RepInput(d, t, again)))
    if isinstance(p, AlpiRes):
        return _enc_alpi_res(p, f, tenv, avoid)
    raise TypeError(f"not a localised process: {p!r}")


def _enc_alpi_input(p: AlpiInput, f: dict, tenv: dict, avoid: set) -> Process:
    if p.subject not in f:
        raise UnmappedName(f"no request channel for input subject {p.subject}")
    pay = trans_alpi_type(tenv[p.subject]) if p.subject in tenv else ANY
    zi = _fresh("zi", avoid)
    z = _fresh("z", avoid)
    body = _enc_alpi(p.body, f, tenv, avoid)
    # ask for the next value at the request channel, listen on the
    # fresh return channel
    return Res(zi, z, ChanType("i", pay),
               Par(Output(f[p.subject], VName(z)), Input(zi, p.param, body)))


def _enc_alpi_res(p: AlpiRes, f: dict, tenv: dict, avoid: set) -> Process:
    a = p.name
    pay = trans_alpi_type(p.payload_type)
    avoid.add(a)
    ai = _fresh(a.base + "i", avoid)
    bi = _fresh("bi", avoid)
    b = _fresh("b", avoid)
    ci = _fresh("ci", avoid)
    c = _fresh("c", avoid)
    body = _enc_alpi(p.body, {**f, a: b}, {**tenv, a: p.payload_type}, avoid)

    a2 = _fresh("vc", avoid)
    b2 = _fresh("rc", avoid)
    x = _fresh("x", avoid)
    y = _fresh("y", avoid)
    tok = _fresh("tk", avoid)
    serve = Input(a2, x, Input(b2, y, Par(
        Output(c, vtuple((VName(a2), VName(b2)))),
        Output(y, VName(x)))))
    server = RepInput(ci, tok, LetTuple((a2, b2), VName(tok), serve))
    token = Output(c, vtuple((VName(ai), VName(bi))))

    req_pay = ChanType("o", pay)
    tok_pay = TupleType((ChanType("i", pay), ChanType("i", req_pay)))
    return Res(ai, a, ChanType("i", pay),
               Res(bi, b, ChanType("i", req_pay),
                   Res(ci, c, ChanType("i", tok_pay),
                       Par(Par(body, token), server))))


def alpi_env(p: AlpiProcess) -> dict:
    """Typing environment for the image of a process whose free names are
    success names carrying unit."""
    env = {}
    for n in alpi_free_names(p):
        if n.kind == SUCCESS:
            env[n] = ChanType("o", UNIT)
    return env


# ---------------------------------------------------------------------------
# Localised pi: concrete syntax
# ---------------------------------------------------------------------------
#
#   file    := { "success" name ";" } process
#   process := par { "|" par }
#   par     := "0" | "(" process ")" | "new" "(" name ":" "^" type ")" par
#            | ["!"] name "(" name? ")" "." par | name "!" "(" name? ")"
#   type    := "unit" | "o" "[" type "]"

_ALPI_PUNCT = ("|", ".", "!", "(", ")", ":", ";", "^", "[", "]")


def _alpi_tokens(text: str):
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == "0":
            toks.append("0")
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(text[i:j])
            i = j
            continue
        if ch in _ALPI_PUNCT:
            toks.append(ch)
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}")
    return toks


class _AlpiParser:
    def __init__(self, toks, success):
        self.toks = toks
        self.pos = 0
        self.success = set(success)

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return t

    def expect(self, tok):
        t = self.take()
        if t != tok:
            raise ParseError(f"expected {tok!r}, found {t!r}")

    def name(self):
        t = self.take()
        if not (t[0].isalpha() or t[0] == "_"):
            raise ParseError(f"expected a name, found {t!r}")
        kind = SUCCESS if t in self.success else "regular"
        return Name(t, kind=kind)

    def type(self):
        t = self.take()
        if t == "unit":
            return ALPI_UNIT
        if t == "o":
            self.expect("[")
            inner = self.type()
            self.expect("]")
            return AlpiChan(inner)
        raise ParseError(f"expected a payload type, found {t!r}")

    def process(self):
        parts = [self.prefix()]
        while self.peek() == "|":
            self.take()
            parts.append(self.prefix())
        out = parts[0]
        for nxt in parts[1:]:
            out = AlpiPar(out, nxt)
        return out

    def prefix(self):
        t = self.peek()
        if t == "0":
            self.take()
            return ALPI_NIL
        if t == "(":
            self.take()
            inner = self.process()
            self.expect(")")
            return inner
        if t == "new":
            self.take()
            self.expect("(")
            n = self.name()
            self.expect(":")
            self.expect("^")
            ty = self.type()
            self.expect(")")
            return AlpiRes(n, ty, self.prefix())
        if t == "!":
            self.take()
            return self.guard(replicated=True)
        return self.guard(replicated=False)

    def guard(self, replicated: bool):
        subject = self.name()
        t = self.take()
        if t == "!":
            if replicated:
                raise ParseError("replication guards an input, not an output")
            self.expect("(")
            payload = None if self.peek() == ")" else self.name()
            self.expect(")")
            return AlpiOutput(subject, payload)
        if t == "(":
            param = self.name() if self.peek() != ")" else Name("_w")
            self.expect(")")
            self.expect(".")
            body = self.prefix()
            cls = AlpiRepInput if replicated else AlpiInput
            return cls(subject, param, body)
        raise ParseError(f"expected '!' or '(' after name {subject}")


def parse_alpi(text: str):
    toks = _alpi_tokens(text)
    success = []
    pos = 0
    while pos < len(toks) and toks[pos] == "success":
        success.append(toks[pos + 1])
        if pos + 2 >= len(toks) or toks[pos + 2] != ";":
            raise ParseError("expected ';' after success declaration")
        pos += 3
    parser = _AlpiParser(toks[pos:], success)
    p = parser.process()
    if parser.peek() is not None:
        raise ParseError(f"trailing input at {parser.peek()!r}")
    return p


# ---------------------------------------------------------------------------
# Correspondence between a localised process and its image
# ---------------------------------------------------------------------------

def alpi_to_api(p: AlpiProcess) -> api.Process:
    """The source is a fragment of the plain asynchronous calculus, so it
    embeds directly; this gives the reference behaviour."""
    if isinstance(p, AlpiNil):
        return api.NIL
    if isinstance(p, AlpiPar):
        return api.Par(alpi_to_api(p.left), alpi_to_api(p.right))
    if isinstance(p, AlpiInput):
        return api.Input(p.subject, p.param, alpi_to_api(p.body))
    if isinstance(p, AlpiRepInput):
        return api.RepInput(p.subject, p.param, alpi_to_api(p.body))
    if isinstance(p, AlpiOutput):
        payload = VUNIT if p.payload is None else VName(p.payload)
        return api.Output(p.subject, payload)
    if isinstance(p, AlpiRes):
        return api.Res(p.name, alpi_to_api(p.body))
    raise TypeError(f"not a localised process: {p!r}")


def _api_closure_iter(p: api.Process, budget: int, trunc: list):
    """Weak tau descendants in breadth-first order, lazily.

    The image of a replicated input can regenerate requests without bound,
    so closures must not be materialised eagerly; callers stop at the
    first useful state.  ``trunc[0]`` is set when the budget cuts the walk.
    """
    from collections import deque

    seen = {api.alpha_key(p)}
    queue = deque((p,))
    count = 0
    while queue:
        if count >= budget:
            trunc[0] = True
            return
        cur = queue.popleft()
        count += 1
        yield cur
        for mu, q in api.lts_step(cur):
            if not isinstance(mu, api.TauLabel):
                continue
            k = api.alpha_key(q)
            if k not in seen:
                seen.add(k)
                queue.append(q)


def _api_weak_after_iter(p: api.Process, mu, budget: int, trunc: list):
    if isinstance(mu, api.TauLabel):
        yield from _api_closure_iter(p, budget, trunc)
        return
    want = repr(mu)
    keys = set()
    for p1 in _api_closure_iter(p, budget, trunc):
        for mv, p2 in api.lts_step(p1):
            if isinstance(mv, api.TauLabel) or repr(mv) != want:
                continue
            for p3 in _api_closure_iter(p2, budget, trunc):
                k = api.alpha_key(p3)
                if k not in keys:
                    keys.add(k)
                    yield p3


def _api_weak_sim(p: api.Process, q: api.Process, cfg: BisimConfig):
    """Does ``q`` weakly simulate ``p``?  Three-valued and bounded."""
    memo = {}
    calls = [0]

    def play(a, b, n):
        if n == 0:
            return True
        calls[0] += 1
        if calls[0] > cfg.state_budget:
            return None
        key = (api.alpha_key(a), api.alpha_key(b), n)
        if key in memo:
            return memo[key]
        memo[key] = True
        result = True
        for mu, a2 in api.lts_step(a):
            trunc = [False]
            matched = False
            saw_open = False
            for b2 in _api_weak_after_iter(b, mu, cfg.tau_budget, trunc):
                sub = play(a2, b2, n - 1)
                if sub is True:
                    matched = True
                    break
                if sub is None:
                    saw_open = True
            if matched:
                continue
            result = None if (saw_open or trunc[0]) else False
            break
        memo[key] = result
        return result

    return play(p, q, cfg.depth)


def _api_weak_barbs(p: api.Process, budget: int):
    trunc = [False]
    barbs = set()
    for s in _api_closure_iter(p, budget, trunc):
        for mu, _t in api.lts_step(s):
            if isinstance(mu, api.OutLabel) and mu.subject.kind == SUCCESS:
                barbs.add(str(mu.subject))
    return frozenset(barbs), trunc[0]


def check_alpi_correspondence(p: AlpiProcess, cfg: BisimConfig = None) -> Verdict:
    """Compare a closed localised process against its compiled image.

    The source runs on the reference transition system of the plain
    asynchronous calculus; the image runs on the workbench semantics and
    is erased to the same calculus.  The verdict combines a weak
    simulation game in each direction with a comparison of the weak
    success barbs.
    """
    cfg = cfg or BisimConfig()
    for n in alpi_free_names(p):
        if n.kind != SUCCESS:
            raise NotClosed(f"free name {n} is not a success name")
    direct = alpi_to_api(p)
    image = encode_alpi(p, {})
    erased = erase_to_api(Composite(canonical_process(image), frozenset()))

    fwd = _api_weak_sim(direct, erased, cfg)
    bwd = _api_weak_sim(erased, direct, cfg)
    barbs_d, tr_d = _api_weak_barbs(direct, cfg.tau_budget)
    barbs_e, tr_e = _api_weak_barbs(erased, cfg.tau_budget)

    def word(v):
        return "equivalent" if v is True else (
            "distinguished" if v is False else "inconclusive")

    # A truncated barb walk can only miss barbs, so disagreement under
    # truncation stays open while agreement stands with the sim verdicts.
    barbs_open = (barbs_d != barbs_e) and (tr_d or tr_e)
    if fwd is False or bwd is False or (barbs_d != barbs_e and not barbs_open):
        result = "distinguished"
    elif fwd is None or bwd is None or barbs_open:
        result = "inconclusive"
    else:
        result = "equivalent"
    bounds = {
        "method": "alpi-correspondence",
        "forward": word(fwd),
        "backward": word(bwd),
        "barbs_direct": sorted(barbs_d),
        "barbs_encoded": sorted(barbs_e),
        "depth": cfg.depth,
        "tau_budget": cfg.tau_budget,
    }
    return Verdict(result, (), bounds)


# ---------------------------------------------------------------------------
# Simply-typed lambda-calculus: terms and types
# ---------------------------------------------------------------------------

class StlcType:
    pass


@dataclass(frozen=True)
class Base(StlcType):
    def __str__(self):
        return "o"


@dataclass(frozen=True)
class Arrow(StlcType):
    arg: StlcType
    res: StlcType

    def __str__(self):
        left = f"({self.arg})" if isinstance(self.arg, Arrow) else str(self.arg)
        return f"{left} -> {self.res}"


BASE = Base()


class StlcTerm:
    pass


@dataclass(frozen=True)
class SVar(StlcTerm):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class SLam(StlcTerm):
    var: str
    var_type: StlcType
    body: StlcTerm

    def __str__(self):
        return f"\\{self.var}:{self.var_type}. {self.body}"


@dataclass(frozen=True)
class SApp(StlcTerm):
    fn: StlcTerm
    arg: StlcTerm

    def __str__(self):
        fn = f"({self.fn})" if isinstance(self.fn, SLam) else str(self.fn)
        arg = str(self.arg) if isinstance(self.arg, SVar) else f"({self.arg})"
        return f"{fn} {arg}"


def arrow_parts(t: StlcType):
    """The unique decomposition into argument types and the base result."""
    args = []
    while isinstance(t, Arrow):
        args.append(t.arg)
        t = t.res
    return args


def stlc_type(term: StlcTerm, env: dict) -> StlcType:
    if isinstance(term, SVar):
        if term.name not in env:
            raise IllTyped(f"unbound variable {term.name}")
        return env[term.name]
    if isinstance(term, SLam):
        body = stlc_type(term.body, {**env, term.var: term.var_type})
        return Arrow(term.var_type, body)
    if isinstance(term, SApp):
        fn = stlc_type(term.fn, env)
        arg = stlc_type(term.arg, env)
        if not isinstance(fn, Arrow):
            raise IllTyped(f"applied term has base type: {term.fn}")
        if fn.arg != arg:
            raise IllTyped(
                f"argument type {arg} does not match expected {fn.arg}")
        return fn.res
    raise TypeError(f"not a lambda term: {term!r}")


def term_size(term: StlcTerm) -> int:
    if isinstance(term, SVar):
        return 1
    if isinstance(term, SLam):
        return 1 + term_size(term.body)
    if isinstance(term, SApp):
        return 1 + term_size(term.fn) + term_size(term.arg)
    raise TypeError(f"not a lambda term: {term!r}")


def type_order(t: StlcType) -> int:
    if isinstance(t, Base):
        return 0
    return max(type_order(t.arg) + 1, type_order(t.res))


# ---------------------------------------------------------------------------
# Lambda-terms: concrete syntax
# ---------------------------------------------------------------------------
#
#   term := "\" name ":" type "." term | atom { atom }
#   atom := name | "(" term ")"
#   type := "o" | type "->" type (right associative) | "(" type ")"

def _stlc_tokens(text: str):
    toks = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if text.startswith("->", i):
            toks.append("->")
            i += 2
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(text[i:j])
            i = j
            continue
        if ch in ("\\", ":", ".", "(", ")"):
            toks.append(ch)
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}")
    return toks


class _StlcParser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return t

    def expect(self, tok):
        t = self.take()
        if t != tok:
            raise ParseError(f"expected {tok!r}, found {t!r}")

    def type_atom(self):
        t = self.take()
        if t == "o":
            return BASE
        if t == "(":
            inner = self.type()
            self.expect(")")
            return inner
        raise ParseError(f"expected a type, found {t!r}")

    def type(self):
        left = self.type_atom()
        if self.peek() == "->":
            self.take()
            return Arrow(left, self.type())
        return left

    def term(self):
        if self.peek() == "\\":
            self.take()
            var = self.take()
            if not (var[0].isalpha() or var[0] == "_"):
                raise ParseError(f"expected a variable, found {var!r}")
            self.expect(":")
            ty = self.type()
            self.expect(".")
            return SLam(var, ty, self.term())
        out = self.atom()
        while self.peek() is not None and self.peek() not in (")",):
            out = SApp(out, self.atom())
        return out

    def atom(self):
        t = self.take()
        if t == "(":
            inner = self.term()
            self.expect(")")
            return inner
        if t == "\\":
            self.pos -= 1
            return self.term()
        if t[0].isalpha() or t[0] == "_":
            return SVar(t)
        raise ParseError(f"expected a term, found {t!r}")


def parse_stlc(text: str) -> StlcTerm:
    parser = _StlcParser(_stlc_tokens(text))
    t = parser.term()
    if parser.peek() is not None:
        raise ParseError(f"trailing input at {parser.peek()!r}")
    return t


def parse_stlc_type(text: str) -> StlcType:
    parser = _StlcParser(_stlc_tokens(text))
    t = parser.type()
    if parser.peek() is not None:
        raise ParseError(f"trailing input at {parser.peek()!r}")
    return t


# ---------------------------------------------------------------------------
# Lambda-terms -> workbench calculus
# ---------------------------------------------------------------------------

def encode_stlc_type(t: StlcType) -> ChanType:
    """A term listens once on a channel carrying one output channel per
    argument, plus a final unit component."""
    args = arrow_parts(t)
    comps = [ChanType("o", encode_stlc_type(a).payload) for a in args]
    items = tuple(comps) + (UNIT,)
    payload = UNIT if len(items) == 1 else TupleType(items)
    return ChanType("li", payload)


def _arg_chan_type(t: StlcType) -> ChanType:
    return ChanType("o", encode_stlc_type(t).payload)


def stlc_env(env: dict, result: StlcType, p: Name) -> dict:
    """Typing environment for an encoded judgement: context variables are
    output channels, the continuation is the one linear input."""
    out = {Name(x): _arg_chan_type(t) for x, t in env.items()}
    out[p] = encode_stlc_type(result)
    return out


def encode_stlc(term: StlcTerm, env: dict, p: Name) -> Process:
    """Compile a typed term against continuation name ``p``.

    The three clauses: a variable forwards the received argument tuple to
    its context channel; an abstraction receives all arguments, peels off
    the first and resends the rest to the body's continuation; an
    application allocates a replicated server for the argument and resends
    the widened tuple to the function's continuation.
    """
    stlc_type(term, env)  # raises IllTyped before any construction
    avoid = {Name(x) for x in env} | {p}
    chan = {x: Name(x) for x in env}
    return _enc_stlc(term, env, chan, p, avoid)


def _receive(subject: Name, params: tuple, body: Process, avoid: set) -> Process:
    if len(params) == 1:
        return Input(subject, params[0], body)
    tmp = _fresh("pk", avoid)
    return Input(subject, tmp, LetTuple(params, VName(tmp), body))


def _enc_stlc(term, env, chan, p, avoid):
    ty = stlc_type(term, env)
    args = arrow_parts(ty)

    if isinstance(term, SVar):
        ys = [_fresh("y", avoid) for _ in args]
        u = _fresh("u", avoid)
        payload = vtuple([VName(n) for n in ys] + [VName(u)])
        return _receive(p, tuple(ys) + (u,), Output(chan[term.name], payload),
                        avoid)

    if isinstance(term, SLam):
        x1 = Name(term.var)
        if x1 in avoid:
            x1 = fresh_name(x1, avoid)
        avoid.add(x1)
        rest = [_fresh("x", avoid) for _ in args[1:]]
        q = _fresh("q", avoid)
        r = _fresh("r", avoid)
        ro = _fresh("ro", avoid)
        body_env = {**env, term.var: term.var_type}
        body_chan = {**chan, term.var: x1}
        body = _enc_stlc(term.body, body_env, body_chan, r, avoid)
        resend = Output(ro, vtuple([VName(n) for n in rest] + [VName(q)]))
        inner_ty = encode_stlc_type(ty.res)
        return _receive(p, (x1,) + tuple(rest) + (q,),
                        Res(r, ro, inner_ty, Par(resend, body)), avoid)

    if isinstance(term, SApp):
        fn_ty = stlc_type(term.fn, env)
        rest = [_fresh("x", avoid) for _ in args]
        q = _fresh("q", avoid)
        r = _fresh("r", avoid)
        ro = _fresh("ro", avoid)
        y = _fresh("a", avoid)
        x1 = _fresh("ao", avoid)
        fn = _enc_stlc(term.fn, env, chan, r, avoid)
        arg = _enc_stlc(term.arg, env, chan, y, avoid)
        if not isinstance(arg, Input):
            raise IllTyped("argument encoding must start at its continuation")
        served = RepInput(arg.subject, arg.param, arg.body)
        resend = Output(ro, vtuple(
            [VName(x1)] + [VName(n) for n in rest] + [VName(q)]))
        arg_pay = encode_stlc_type(fn_ty.arg).payload
        inner = Res(r, ro, encode_stlc_type(fn_ty),
                    Res(y, x1, ChanType("i", arg_pay),
                        Par(Par(resend, fn), served)))
        return _receive(p, tuple(rest) + (q,), inner, avoid)

    raise TypeError(f"not a lambda term: {term!r}")


def initial_actions(p: Process):
    """Labels available before any step; used to confirm an encoding is
    input-guarded at its continuation."""
    return [mu for mu, _t in lts_step(frozenset(), canonical_process(p))]


def is_negative_for(p: Process, cont: Name) -> bool:
    moves = initial_actions(p)
    return bool(moves) and all(
        isinstance(mu, In) and mu.subject == cont for mu in moves)
