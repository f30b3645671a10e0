import json

import pytest
from hypothesis import given, strategies as st

from usn.core import (
    FIELD_ORDER,
    MAX_FIELD_VALUE_BYTES,
    PolicyContext,
    ProfileField,
    ServedProfile,
    ServiceArea,
    UserProfile,
    ViewPolicy,
    canonical_json,
    evaluate_permissions,
    parse_usnd_id,
    policy_from_json,
    policy_to_json,
    profile_from_json,
    profile_to_json,
    served_to_json,
)
from usn.errors import UsnError

# Independent reference for the id grammar, written separately from the module.
import re

REFERENCE_ID = re.compile(r"\AUSND-[0-9A-F]{8}\Z")


def err_code(excinfo):
    return excinfo.value.code


class TestUsndIdGrammar:
    @pytest.mark.parametrize(
        "raw",
        ["USND-00000000", "USND-DEADBEEF", "USND-FFFFFFFF", "USND-1234ABCD"],
    )
    def test_valid_ids_parse_and_round_trip(self, raw):
        assert parse_usnd_id(raw).value == raw

    @pytest.mark.parametrize(
        "raw",
        [
            "usnd-deadbeef",  # lowercase everywhere
            "USND-deadbeef",  # lowercase hex
            "USND-1234",  # too short
            "USND-123456789",  # too long
            "USND-1234567G",  # non-hex char
            "USND_12345678",  # wrong separator
            "XUSND-12345678",  # junk prefix
            "USND-12345678 ",  # trailing space
            " USND-12345678",
            "",
            None,
            42,
        ],
    )
    def test_malformed_ids_rejected(self, raw):
        with pytest.raises(UsnError) as excinfo:
            parse_usnd_id(raw)
        assert err_code(excinfo) == "MalformedId"

    @given(st.from_regex(REFERENCE_ID))
    def test_everything_the_reference_grammar_accepts_parses(self, raw):
        assert parse_usnd_id(raw).value == raw

    @given(st.text(max_size=24))
    def test_parser_agrees_with_reference_grammar(self, raw):
        """The parser accepts exactly the reference language, nothing else."""
        expected = bool(REFERENCE_ID.match(raw))
        if expected:
            assert parse_usnd_id(raw).value == raw
        else:
            with pytest.raises(UsnError):
                parse_usnd_id(raw)


def make_profile(**fields):
    fields.setdefault("name", "A")
    return UserProfile(user_id="a", usnd_id="USND-00000001", fields=fields)


def make_policy(*names, user_id="a", context=PolicyContext.UBISERV_EVENT):
    return ViewPolicy(
        user_id=user_id,
        context=context,
        allowed_fields=frozenset(ProfileField.from_name(n) for n in names),
    )


class TestEvaluatePermissions:
    def test_restriction_to_allowed_fields(self):
        profile = make_profile(name="A", contact_info="x@y", work_domain="compilers")
        served = evaluate_permissions(profile, make_policy("name", "work_domain"))
        assert served_to_json(served) == {
            "user_id": "a",
            "fields": {"name": "A", "work_domain": "compilers"},
        }

    def test_empty_policy_serves_empty_profile_not_error(self):
        served = evaluate_permissions(make_profile(), make_policy())
        assert served.fields == {}
        assert served.user_id == "a"

    def test_full_policy_serves_profile_verbatim(self):
        profile = make_profile(
            name="A",
            location="L",
            work_domain="W",
            contact_info="C",
            qualifications="Q",
            experience="E",
            job_interest="J",
            pictures=["p1", "p2"],
        )
        policy = make_policy(*(f.value for f in ProfileField))
        served = evaluate_permissions(profile, policy)
        assert dict(served.fields) == dict(profile.fields)

    def test_allowed_but_absent_fields_silently_omitted(self):
        profile = make_profile(name="A")
        served = evaluate_permissions(profile, make_policy("name", "location"))
        assert set(served.fields) == {ProfileField.NAME}

    def test_policy_for_other_user_rejected(self):
        with pytest.raises(UsnError) as excinfo:
            evaluate_permissions(make_profile(), make_policy("name", user_id="b"))
        assert err_code(excinfo) == "PolicyMismatch"

    def test_public_context_policy_rejected(self):
        with pytest.raises(UsnError) as excinfo:
            evaluate_permissions(
                make_profile(), make_policy("name", context=PolicyContext.PUBLIC)
            )
        assert err_code(excinfo) == "WrongContext"


field_names = st.sampled_from([f.value for f in ProfileField if f is not ProfileField.PICTURES])
profile_fields = st.dictionaries(field_names, st.text(max_size=40)).map(
    lambda d: {**d, "name": d.get("name", "N")}
)
allowed_sets = st.sets(st.sampled_from(list(ProfileField)))


class TestPermissionProperties:
    @given(profile_fields, allowed_sets)
    def test_served_keys_within_allowed_and_present(self, fields, allowed):
        profile = UserProfile(user_id="u", usnd_id="USND-000000AB", fields=fields)
        policy = ViewPolicy(
            user_id="u",
            context=PolicyContext.UBISERV_EVENT,
            allowed_fields=frozenset(allowed),
        )
        served = evaluate_permissions(profile, policy)
        assert set(served.fields) <= set(allowed) & set(profile.fields)

    @given(profile_fields, allowed_sets)
    def test_evaluation_is_pure(self, fields, allowed):
        """Same inputs always give the same served view, and the profile is untouched."""
        profile = UserProfile(user_id="u", usnd_id="USND-000000AB", fields=fields)
        before = dict(profile.fields)
        policy = ViewPolicy(
            user_id="u",
            context=PolicyContext.UBISERV_EVENT,
            allowed_fields=frozenset(allowed),
        )
        first = evaluate_permissions(profile, policy)
        second = evaluate_permissions(profile, policy)
        assert served_to_json(first) == served_to_json(second)
        assert dict(profile.fields) == before

    @given(profile_fields)
    def test_values_pass_through_unmodified(self, fields):
        profile = UserProfile(user_id="u", usnd_id="USND-000000AB", fields=fields)
        policy = ViewPolicy(
            user_id="u",
            context=PolicyContext.UBISERV_EVENT,
            allowed_fields=frozenset(ProfileField),
        )
        served = evaluate_permissions(profile, policy)
        for key, value in served.fields.items():
            assert value == profile.fields[key]


class TestProfileValidation:
    def test_name_is_mandatory(self):
        with pytest.raises(UsnError) as excinfo:
            UserProfile(user_id="a", usnd_id="USND-00000001", fields={"location": "X"})
        assert err_code(excinfo) == "InvalidProfile"

    def test_unknown_field_rejected(self):
        with pytest.raises(UsnError) as excinfo:
            make_profile(shoe_size="44")
        assert err_code(excinfo) == "InvalidField"

    def test_value_at_size_cap_accepted(self):
        make_profile(location="x" * MAX_FIELD_VALUE_BYTES)

    def test_value_over_size_cap_rejected(self):
        with pytest.raises(UsnError) as excinfo:
            make_profile(location="x" * (MAX_FIELD_VALUE_BYTES + 1))
        assert err_code(excinfo) == "InvalidProfile"

    def test_size_cap_counts_utf8_bytes_not_chars(self):
        # 'é' is two bytes in UTF-8
        with pytest.raises(UsnError):
            make_profile(location="é" * ((MAX_FIELD_VALUE_BYTES // 2) + 1))

    def test_pictures_must_be_a_list_of_strings(self):
        with pytest.raises(UsnError) as excinfo:
            make_profile(pictures="pic-1")
        assert err_code(excinfo) == "InvalidProfile"
        with pytest.raises(UsnError):
            make_profile(pictures=["pic-1", 7])

    def test_non_string_value_rejected(self):
        with pytest.raises(UsnError):
            make_profile(location=12)

    @pytest.mark.parametrize("bad", ["", "a" * 65, "no spaces", "päivi", None])
    def test_bad_user_ids_rejected(self, bad):
        with pytest.raises(UsnError):
            UserProfile(user_id=bad, usnd_id="USND-00000001", fields={"name": "A"})


class TestSerialization:
    def test_profile_round_trip(self):
        raw = {
            "user_id": "carol",
            "usnd_id": "USND-0000CAFE",
            "fields": {"name": "Carol", "pictures": ["p1", "p2"]},
        }
        assert profile_to_json(profile_from_json(raw)) == raw

    def test_policy_round_trip_sorts_allowed_fields(self):
        raw = {
            "user_id": "carol",
            "context": "ubiserv_event",
            "allowed_fields": ["work_domain", "name", "contact_info"],
        }
        encoded = policy_to_json(policy_from_json(raw))
        assert encoded["allowed_fields"] == ["contact_info", "name", "work_domain"]

    def test_policy_serialization_is_byte_stable(self):
        policy = make_policy("name", "work_domain", "contact_info")
        first = canonical_json(policy_to_json(policy))
        second = canonical_json(policy_to_json(make_policy("contact_info", "work_domain", "name")))
        assert first == second

    def test_canonical_json_fixes_key_order_and_spacing(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_canonical_json_keeps_unicode_readable(self):
        assert canonical_json({"name": "João"}) == '{"name":"João"}'

    def test_policy_from_json_rejects_unknown_context(self):
        with pytest.raises(UsnError) as excinfo:
            policy_from_json(
                {"user_id": "a", "context": "billboard", "allowed_fields": []}
            )
        assert err_code(excinfo) == "InvalidPolicy"

    def test_policy_from_json_rejects_unknown_field(self):
        with pytest.raises(UsnError) as excinfo:
            policy_from_json(
                {"user_id": "a", "context": "public", "allowed_fields": ["age"]}
            )
        assert err_code(excinfo) == "InvalidField"

    def test_display_order_is_declaration_order(self):
        assert [f.value for f in FIELD_ORDER] == [
            "name",
            "location",
            "work_domain",
            "contact_info",
            "qualifications",
            "experience",
            "job_interest",
            "pictures",
        ]


class TestServiceArea:
    def test_contains_is_closed_on_all_edges(self):
        area = ServiceArea("a", "A", 0, 0, 10, 5)
        for x, y in [(0, 0), (10, 5), (0, 5), (10, 0), (5, 2.5)]:
            assert area.contains(x, y)
        for x, y in [(-0.001, 0), (10.001, 0), (5, 5.001), (5, -0.001)]:
            assert not area.contains(x, y)

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(UsnError):
            ServiceArea("a", "A", 0, 0, 0, 5)
        with pytest.raises(UsnError):
            ServiceArea("a", "A", 0, 0, 10, 0)
