import random

import pytest

from awpi.syntax import (
    ChanType, Name, Output, SumType, TupleType, UNIT, VName, parse_file,
    parse_process, parse_vtype,
)
from awpi.typecheck import (
    ANY, EnvCombineError, classify, combine_env, dual, is_copyable,
    is_discardable, typecheck, types_match,
)

from gen_typed import random_typed


def check_src(src):
    f = parse_file(src)
    return typecheck(f.env, f.process)


def rules_of(verdict):
    return {e.rule for e in verdict.errors}


# ---------------------------------------------------------------------------
# type-level helpers
# ---------------------------------------------------------------------------

TYPES = [
    "unit",
    "i[unit]", "o[unit]", "li[unit]", "lo[unit]",
    "o[o[unit]]", "i[unit * o[unit]]",
    "unit * unit", "unit * o[unit]", "li[unit] * unit",
    "unit + unit", "o[unit] + li[unit]",
]


@pytest.mark.parametrize("src", TYPES)
def test_dual_is_an_involution_on_channels(src):
    t = parse_vtype(src)
    if isinstance(t, ChanType):
        assert dual(dual(t)) == t
        assert dual(t).payload == t.payload


def test_dual_swaps_modes():
    assert dual(parse_vtype("i[unit]")) == parse_vtype("o[unit]")
    assert dual(parse_vtype("li[unit]")) == parse_vtype("lo[unit]")
    assert dual(parse_vtype("lo[o[unit]]")) == parse_vtype("li[o[unit]]")


def test_everything_is_discardable():
    for src in TYPES:
        assert is_discardable(parse_vtype(src))


def test_copyable_fragment():
    copyable = ["unit", "o[unit]", "o[o[unit]]", "unit * unit",
                "unit * o[unit]", "unit + unit"]
    notcopyable = ["i[unit]", "li[unit]", "lo[unit]", "li[unit] * unit",
                   "o[unit] + li[unit]", "i[unit * o[unit]]"]
    for src in copyable:
        assert is_copyable(parse_vtype(src)), src
    for src in notcopyable:
        assert not is_copyable(parse_vtype(src)), src


def test_classify():
    c = classify(parse_vtype("o[unit]"))
    assert c == {"discardable": True, "copyable": True}
    c = classify(parse_vtype("li[unit]"))
    assert c == {"discardable": True, "copyable": False}


def test_types_match_wildcard():
    assert types_match(ANY, parse_vtype("i[unit]"))
    assert types_match(parse_vtype("o[unit]"), ANY)
    assert types_match(ChanType("o", ANY), parse_vtype("o[i[unit]]"))
    assert not types_match(parse_vtype("o[unit]"), parse_vtype("i[unit]"))


def test_combine_env_merges_copyable():
    a = Name("a")
    g1 = {a: parse_vtype("o[unit]")}
    g2 = {a: parse_vtype("o[unit]")}
    assert combine_env(g1, g2) == g1


def test_combine_env_rejects_shared_input():
    a = Name("a")
    g = {a: parse_vtype("i[unit]")}
    with pytest.raises(EnvCombineError) as e:
        combine_env(g, dict(g))
    assert e.value.kind == "SharedInput"


def test_combine_env_rejects_shared_linear():
    a = Name("a")
    g = {a: parse_vtype("lo[unit]")}
    with pytest.raises(EnvCombineError) as e:
        combine_env(g, dict(g))
    assert e.value.kind == "SharedLinear"


def test_combine_env_rejects_mismatch():
    a = Name("a")
    with pytest.raises(EnvCombineError) as e:
        combine_env({a: parse_vtype("o[unit]")}, {a: parse_vtype("unit")})
    assert e.value.kind == "TypeMismatch"


# ---------------------------------------------------------------------------
# accepted processes
# ---------------------------------------------------------------------------

def test_request_server_with_connection_return():
    # a request carries a payload and a reply channel; the input capability
    # of the request channel is itself shipped to a replicated worker
    src = """
    free a : i[unit * o[unit]];
    new(bi: i[i[unit * o[unit]]], b) (
      a(n, q).( q!(n) | b!(a) )
      | bi(x). !x(m, r). r!(m)
    )
    """
    assert check_src(src)


def test_nested_reinput_on_same_subject():
    assert check_src("""
    free a : i[unit];
    a(x). a(y). 0
    """)


def test_linear_input_consumed():
    assert check_src("""
    free a : li[o[unit]];
    a(x). x!()
    """)


def test_linear_output_used_once():
    assert check_src("""
    free b : lo[unit];
    b!()
    """)


def test_case_branches_share_linear_name():
    # the branch rule is additive: both sides may spend the same resource
    assert check_src("""
    free b : lo[unit];
    free e : o[unit + unit];
    new(ci: i[unit + unit], c) (
      ci(x). case x { inl u -> b!(); inr v -> b!() }
      | c!(inl ())
    )
    """)


def test_replication_with_copyable_residual():
    assert check_src("""
    free a : i[o[unit]];
    free b : o[unit];
    !a(x). ( x!() | b!() )
    """)


def test_success_output_needs_no_declaration_type():
    assert check_src("""
    success ok;
    ok!()
    """)


def test_tuple_and_sum_payloads():
    assert check_src("""
    free b : o[unit * (unit + o[unit])];
    free c : o[unit];
    b!((), inr c)
    """)


def test_unused_env_entries_are_fine():
    assert check_src("""
    free a : i[unit];
    free b : lo[unit];
    0
    """)


def test_parallel_split_of_distinct_linear_names():
    assert check_src("""
    free b : lo[unit];
    free c : lo[unit];
    b!() | c!()
    """)


def test_copyable_output_shared_across_parallel():
    assert check_src("""
    free b : o[unit];
    b!() | b!()
    """)


# ---------------------------------------------------------------------------
# rejected processes
# ---------------------------------------------------------------------------

def test_two_inputs_race_on_one_subject():
    v = check_src("""
    free b : o[unit];
    new(a: i[unit], b') ( a(x).0 | a(y).0 | b'!() )
    """)
    assert not v
    assert "OneInputViolation" in {e.rule for e in v.errors} or \
        any("input" in e.msg.lower() for e in v.errors)


def test_free_input_name_shared_across_parallel():
    v = check_src("""
    free a : i[unit];
    a(x).0 | a(y).0
    """)
    assert not v


def test_linear_name_shared_across_parallel():
    v = check_src("""
    free b : lo[unit];
    b!() | b!()
    """)
    assert not v


def test_linear_input_reused_in_body():
    v = check_src("""
    free a : li[unit];
    a(x). a(y). 0
    """)
    assert not v


def test_output_at_input_name():
    v = check_src("""
    free a : i[unit];
    a!()
    """)
    assert not v


def test_input_at_output_name():
    v = check_src("""
    free b : o[unit];
    b(x).0
    """)
    assert not v


def test_payload_type_mismatch():
    v = check_src("""
    free b : o[o[unit]];
    b!(())
    """)
    assert not v


def test_polyadic_arity_mismatch():
    v = check_src("""
    free b : o[unit * unit];
    b!((), (), ())
    """)
    assert not v


def test_replication_needs_unrestricted_subject():
    v = check_src("""
    free a : li[unit];
    !a(x).0
    """)
    assert not v
    assert "RIn" in rules_of(v)


def test_replication_body_must_not_capture_linear_resources():
    v = check_src("""
    free a : i[unit];
    free b : lo[unit];
    !a(x). b!()
    """)
    assert not v


def test_replication_body_must_not_capture_input_names():
    v = check_src("""
    free a : i[unit];
    free c : i[unit];
    !a(x). c(y).0
    """)
    assert not v


def test_success_name_cannot_be_bound():
    v = check_src("""
    success ok;
    new(a: i[unit], b) a(ok).0
    """)
    assert not v


def test_success_name_cannot_be_input_subject():
    v = check_src("""
    success ok;
    ok(x).0
    """)
    assert not v


def test_success_payload_must_be_unit():
    v = check_src("""
    success ok;
    free b : o[unit];
    ok!(b)
    """)
    assert not v


def test_case_on_non_sum():
    v = check_src("""
    free b : o[unit];
    case () { inl x -> 0; inr y -> 0 }
    """)
    assert not v


def test_let_on_non_tuple():
    v = check_src("""
    free b : o[unit];
    let (x, y) = b in 0
    """)
    assert not v


def test_undeclared_free_name():
    v = check_src("""
    free b : o[unit];
    c!()
    """)
    assert not v


def test_nonlinear_payload_duplicated_inside_value():
    v = check_src("""
    free a : li[unit];
    free b : o[li[unit] * li[unit]];
    b!(a, a)
    """)
    assert not v


def test_input_capability_kept_after_being_sent():
    # shipping the input end and then listening on it would break the
    # one-receiver guarantee
    v = check_src("""
    free a : i[unit];
    free b : o[i[unit]];
    b!(a) | a(x).0
    """)
    assert not v


def test_error_reports_rule_and_path():
    v = check_src("""
    free a : i[unit];
    a!()
    """)
    assert not v
    err = v.errors[0]
    assert err.rule
    assert isinstance(err.path, tuple)


# ---------------------------------------------------------------------------
# generated coverage
# ---------------------------------------------------------------------------

def test_generated_terms_typecheck():
    for seed in range(500):
        env, p = random_typed(seed, size=14)
        v = typecheck(env, p)
        assert v, f"seed {seed}: {v.errors}"


def test_weakening_preserves_typability():
    rng = random.Random(7)
    junk_types = [parse_vtype(s) for s in
                  ("unit", "o[unit]", "li[unit]", "i[o[unit]]")]
    for seed in range(60):
        env, p = random_typed(seed, size=12)
        env2 = dict(env)
        for k in range(3):
            env2[Name("junk", k + 1)] = rng.choice(junk_types)
        assert typecheck(env2, p)


def test_mutated_terms_often_fail():
    # sanity guard against a checker that accepts everything: flipping a
    # well-typed output subject to an arbitrary input name must be caught
    env, p = random_typed(3, size=12)
    bad = Output(Name("a"), VName(Name("a")))
    from awpi.syntax import Par
    v = typecheck(env, Par(p, bad))
    assert not v
