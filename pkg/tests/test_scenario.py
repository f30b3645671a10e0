import copy
import json
import re

import pytest

from usn.errors import UsnError
from usn.fixtures import load_fixtures, parse_fixtures, seed_social_network
from usn.scenario import load_script, run_scenario, run_script, validate_script
from usn.socialnet import SocialNetwork, SocialNetworkClient, build_sn_app
from usn.webapi import LocalTransport

SECRET = "0123456789abcdef0123456789abcdef"

ANA = "USND-00000001"
BEN = "USND-00000002"
CARA = "USND-00000003"


def make_script(**overrides) -> dict:
    """Small three-person floor: ana and ben close together, cara far away."""
    script = {
        "schema": 1,
        "name": "inline",
        "seed": 1,
        "transport": "local",
        "areas": [
            {"area_id": "hall", "min_x": 0, "min_y": 0, "max_x": 40, "max_y": 30}
        ],
        "fixtures": {
            "ubiservs": [
                {"ubiserv_id": "ubi-hall", "secret": SECRET, "area_id": "hall"}
            ],
            "profiles": [
                {
                    "user_id": "ana",
                    "usnd_id": ANA,
                    "fields": {"name": "Ana", "contact_info": "ana@x"},
                },
                {"user_id": "ben", "usnd_id": BEN, "fields": {"name": "Ben"}},
                {"user_id": "cara", "usnd_id": CARA, "fields": {"name": "Cara"}},
            ],
            "policies": [
                {
                    "user_id": "ana",
                    "context": "ubiserv_event",
                    "allowed_fields": ["name", "contact_info"],
                }
            ],
            "placements": [
                {"usnd_id": ANA, "area_id": "hall", "x": 10.0, "y": 10.0},
                {
                    "usnd_id": BEN,
                    "area_id": "hall",
                    "x": 13.0,
                    "y": 10.0,
                    "heading": 3.14159265,
                },
                {"usnd_id": CARA, "area_id": "hall", "x": 35.0, "y": 25.0},
            ],
        },
        "steps": [
            {"action": "attach", "usnd_id": ANA, "area_id": "hall"},
            {"action": "attach", "usnd_id": BEN, "area_id": "hall"},
            {"action": "attach", "usnd_id": CARA, "area_id": "hall"},
            {"action": "scan", "usnd_id": BEN, "id": "ben-scan"},
            {"action": "assert", "step": "ben-scan", "neighbors": [ANA]},
            {"action": "point", "usnd_id": BEN, "id": "ben-point"},
            {
                "action": "assert",
                "step": "ben-point",
                "target_user_id": "ana",
                "display_lines": [["Name", "Ana"], ["Contact", "ana@x"]],
            },
        ],
    }
    script.update(overrides)
    return script


def parse_transcript(result):
    return [json.loads(line) for line in result.transcript_lines]


class TestScriptValidation:
    def test_valid_script_passes(self):
        validate_script(make_script())

    def parse_error(self, script):
        with pytest.raises(UsnError) as excinfo:
            validate_script(script)
        assert excinfo.value.code == "ScriptParseError"
        return excinfo.value.message

    def test_schema_must_be_one(self):
        assert "schema" in self.parse_error(make_script(schema=2))

    def test_name_required(self):
        self.parse_error(make_script(name=""))

    def test_seed_must_be_integer(self):
        self.parse_error(make_script(seed="42"))
        self.parse_error(make_script(seed=True))

    def test_transport_restricted(self):
        self.parse_error(make_script(transport="carrier-pigeon"))

    def test_at_least_one_area(self):
        self.parse_error(make_script(areas=[]))

    def test_duplicate_area_rejected(self):
        script = make_script()
        script["areas"] = script["areas"] * 2
        self.parse_error(script)

    def test_degenerate_area_rejected(self):
        script = make_script()
        script["areas"][0]["max_x"] = 0
        self.parse_error(script)

    def test_every_area_needs_exactly_one_credential(self):
        script = make_script()
        script["fixtures"]["ubiservs"].append(
            {"ubiserv_id": "ubi-2", "secret": SECRET, "area_id": "hall"}
        )
        assert "two ubiserv credentials" in self.parse_error(script)

        script = make_script()
        script["fixtures"]["ubiservs"][0].pop("area_id")
        assert "without a ubiserv credential" in self.parse_error(script)

    def test_placement_must_reference_defined_area(self):
        script = make_script()
        script["fixtures"]["placements"][0]["area_id"] = "atrium"
        self.parse_error(script)

    def test_unknown_action(self):
        script = make_script()
        script["steps"].append({"action": "teleport", "usnd_id": ANA})
        self.parse_error(script)

    def test_step_for_unplaced_device(self):
        script = make_script()
        script["steps"].append({"action": "scan", "usnd_id": "USND-0000DEAD"})
        self.parse_error(script)

    def test_attach_to_unknown_area(self):
        script = make_script()
        script["steps"][0]["area_id"] = "atrium"
        self.parse_error(script)

    def test_duplicate_step_ids(self):
        script = make_script()
        script["steps"][5]["id"] = "ben-scan"
        assert "duplicate id" in self.parse_error(script)

    def test_assert_must_reference_earlier_step(self):
        script = make_script()
        script["steps"][4]["step"] = "ben-point"  # defined later
        assert "unknown step" in self.parse_error(script)

    def test_assert_needs_at_least_one_check(self):
        script = make_script()
        script["steps"].append({"action": "assert", "step": "ben-scan"})
        assert "no checks" in self.parse_error(script)

    def test_assert_rejects_unknown_keys(self):
        script = make_script()
        script["steps"].append(
            {"action": "assert", "step": "ben-scan", "neighbors": [], "neighbours": []}
        )
        assert "unknown assert keys" in self.parse_error(script)

    def test_move_coordinates_must_be_numbers(self):
        script = make_script()
        script["steps"].append({"action": "move", "usnd_id": ANA, "x": "3", "y": 1})
        self.parse_error(script)

    def test_request_target_must_be_wellformed(self):
        script = make_script()
        script["steps"].append({"action": "request", "usnd_id": ANA, "target": "ben"})
        self.parse_error(script)

    def test_set_policy_requires_known_user(self):
        script = make_script()
        script["steps"].append(
            {
                "action": "set_policy",
                "user_id": "nobody",
                "context": "ubiserv_event",
                "allowed_fields": ["name"],
            }
        )
        self.parse_error(script)

    def test_parallel_cannot_nest_or_assert(self):
        script = make_script()
        script["steps"].append(
            {"action": "parallel", "steps": [{"action": "parallel", "steps": []}]}
        )
        self.parse_error(script)

        script = make_script()
        script["steps"].append(
            {
                "action": "parallel",
                "steps": [{"action": "assert", "step": "ben-scan", "neighbors": []}],
            }
        )
        self.parse_error(script)

    def test_load_script_rejects_bad_json_and_missing_files(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(UsnError) as excinfo:
            load_script(str(bad))
        assert excinfo.value.code == "ScriptParseError"
        with pytest.raises(UsnError) as excinfo:
            load_script(str(tmp_path / "ghost.json"))
        assert excinfo.value.code == "ScriptParseError"


class TestFixtureParsing:
    def base(self):
        return copy.deepcopy(make_script()["fixtures"])

    def parse_error(self, data):
        with pytest.raises(UsnError) as excinfo:
            parse_fixtures(data)
        assert excinfo.value.code == "FixtureParseError"

    def test_unknown_section_rejected(self):
        data = self.base()
        data["gadgets"] = []
        self.parse_error(data)

    def test_duplicate_ubiserv_id(self):
        data = self.base()
        data["ubiservs"].append({"ubiserv_id": "ubi-hall", "secret": SECRET})
        self.parse_error(data)

    def test_short_secret(self):
        data = self.base()
        data["ubiservs"][0]["secret"] = "tiny"
        self.parse_error(data)

    def test_duplicate_user(self):
        data = self.base()
        data["profiles"].append(data["profiles"][0])
        self.parse_error(data)

    def test_device_bound_twice(self):
        data = self.base()
        data["profiles"].append(
            {"user_id": "dana", "usnd_id": ANA, "fields": {"name": "Dana"}}
        )
        self.parse_error(data)

    def test_policy_for_unknown_user(self):
        data = self.base()
        data["policies"].append(
            {"user_id": "zoe", "context": "ubiserv_event", "allowed_fields": []}
        )
        self.parse_error(data)

    def test_duplicate_policy_context(self):
        data = self.base()
        data["policies"].append(data["policies"][0])
        self.parse_error(data)

    def test_duplicate_placement(self):
        data = self.base()
        data["placements"].append(data["placements"][0])
        self.parse_error(data)

    def test_placement_needs_area_and_numeric_coords(self):
        data = self.base()
        del data["placements"][0]["area_id"]
        self.parse_error(data)

        data = self.base()
        data["placements"][0]["x"] = "10"
        self.parse_error(data)

        data = self.base()
        data["placements"][0]["beacon_enabled"] = "yes"
        self.parse_error(data)

    def test_placement_defaults_normalized(self):
        parsed = parse_fixtures(self.base())
        first = parsed["placements"][0]
        assert first["heading"] == 0.0
        assert first["beacon_enabled"] is True

    def test_load_fixtures_file_requires_schema(self, tmp_path):
        path = tmp_path / "fixtures.json"
        path.write_text(json.dumps({"schema": 1, **self.base()}))
        assert load_fixtures(str(path))["profiles"]

        path.write_text(json.dumps({"schema": 9, **self.base()}))
        with pytest.raises(UsnError) as excinfo:
            load_fixtures(str(path))
        assert excinfo.value.code == "FixtureParseError"

    def test_load_fixtures_accepts_a_scenario_script(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps(make_script()))
        fixtures = load_fixtures(str(path))
        assert [p["user_id"] for p in fixtures["profiles"]] == [
            "ana",
            "ben",
            "cara",
        ]
        assert fixtures["placements"]

    def test_seeding_counts_and_is_repeatable(self):
        sn = SocialNetwork()
        client = SocialNetworkClient(LocalTransport(build_sn_app(sn)))
        fixtures = parse_fixtures(self.base())
        assert seed_social_network(client, fixtures) == 3
        # second seeding must tolerate the already-registered credential
        assert seed_social_network(client, fixtures) == 3
        token = sn.authenticate("ubi-hall", SECRET)["token"]
        assert sn.serve_event_view(token, "ana")["fields"] == {
            "name": "Ana",
            "contact_info": "ana@x",
        }


class TestEngine:
    def test_passing_run(self):
        result = run_script(make_script())
        assert result.passed
        assert result.asserts_total == 2
        assert result.asserts_failed == 0
        assert result.steps == 7

    def test_transcript_structure(self):
        result = run_script(make_script())
        lines = parse_transcript(result)
        header, entries, verdict = lines[0], lines[1:-1], lines[-1]
        assert header == {"scenario": "inline", "seed": 1, "transport": "local"}
        assert len(entries) == result.steps
        for index, entry in enumerate(entries):
            assert entry["tick"] == index
            assert set(entry) == {"tick", "actor", "action", "outcome"}
        assert verdict == {"verdict": "pass", "asserts": 2, "failed": 0, "steps": 7}

    def test_transcript_never_leaks_tokens(self):
        result = run_script(make_script())
        assert not re.search(r"[0-9a-f]{32}", result.transcript_text)

    def test_reruns_are_byte_identical(self):
        first = run_script(make_script())
        second = run_script(make_script())
        assert first.transcript_text == second.transcript_text
        assert first.transcript_hash == second.transcript_hash

    def test_runs_share_no_state(self):
        """A run that rewrites a policy must not bleed into the next run."""
        mutating = make_script()
        mutating["steps"] += [
            {
                "action": "set_policy",
                "user_id": "ana",
                "context": "ubiserv_event",
                "allowed_fields": [],
            }
        ]
        baseline = run_script(make_script()).transcript_text
        run_script(mutating)
        assert run_script(make_script()).transcript_text == baseline

    def test_seed_override_lands_in_header(self):
        result = run_script(make_script(), seed=77)
        assert result.seed == 77
        assert parse_transcript(result)[0]["seed"] == 77

    def test_failing_assert_fails_run_but_does_not_abort(self):
        script = make_script()
        script["steps"][4]["neighbors"] = [ANA, CARA]  # wrong on purpose
        result = run_script(script)
        assert not result.passed
        assert result.asserts_failed == 1
        assert result.asserts_total == 2
        lines = parse_transcript(result)
        failing = lines[5]
        assert failing["outcome"]["pass"] is False
        assert "detail" in failing["outcome"]
        assert lines[-1]["verdict"] == "fail"
        # later steps still ran
        assert lines[6]["action"] == "point"

    def test_error_outcomes_are_recorded_and_assertable(self):
        script = make_script()
        script["steps"] = [
            {"action": "attach", "usnd_id": BEN, "area_id": "hall"},
            {"action": "request", "usnd_id": BEN, "target": ANA, "id": "req"},
            {"action": "assert", "step": "req", "outcome": "error",
             "error": "TargetNotPresent"},
        ]
        result = run_script(script)
        assert result.passed
        entry = parse_transcript(result)[2]
        assert entry["outcome"] == {"error": "TargetNotPresent"}

    def test_unattached_requester_reads_as_unknown_session(self):
        script = make_script()
        script["steps"] = [
            {"action": "attach", "usnd_id": ANA, "area_id": "hall"},
            {"action": "request", "usnd_id": BEN, "target": ANA, "id": "req"},
            {"action": "assert", "step": "req", "error": "UnknownSession"},
        ]
        assert run_script(script).passed

    def test_opt_out_hides_from_scan_and_blocks_requests(self):
        script = make_script()
        script["steps"] = [
            {"action": "attach", "usnd_id": ANA, "area_id": "hall"},
            {"action": "attach", "usnd_id": BEN, "area_id": "hall"},
            {"action": "opt_out", "usnd_id": ANA},
            {"action": "scan", "usnd_id": BEN, "id": "scan1"},
            {"action": "assert", "step": "scan1", "excludes": [ANA]},
            {"action": "request", "usnd_id": BEN, "target": ANA, "id": "req1"},
            {"action": "assert", "step": "req1", "error": "ServiceDisabled"},
            {"action": "opt_in", "usnd_id": ANA},
            {"action": "scan", "usnd_id": BEN, "id": "scan2"},
            {"action": "assert", "step": "scan2", "contains": [ANA]},
            {"action": "request", "usnd_id": BEN, "target": ANA, "id": "req2"},
            {"action": "assert", "step": "req2", "target_user_id": "ana"},
        ]
        result = run_script(script)
        assert result.passed, result.transcript_text

    def test_move_changes_later_scans(self):
        # ben stands 3 m away the whole time; cara walks in to 2 m
        script = make_script()
        script["steps"] = [
            {"action": "attach", "usnd_id": ANA, "area_id": "hall"},
            {"action": "attach", "usnd_id": CARA, "area_id": "hall"},
            {"action": "scan", "usnd_id": ANA, "id": "before"},
            {"action": "assert", "step": "before", "neighbors": [BEN]},
            {"action": "move", "usnd_id": CARA, "x": 12.0, "y": 10.0},
            {"action": "scan", "usnd_id": ANA, "id": "after"},
            {"action": "assert", "step": "after", "neighbors": [CARA, BEN]},
        ]
        assert run_script(script).passed

    def test_parallel_steps_report_in_script_order(self):
        script = make_script()
        script["steps"] = [
            {
                "action": "parallel",
                "steps": [
                    {"action": "attach", "usnd_id": ANA, "area_id": "hall", "id": "a"},
                    {"action": "attach", "usnd_id": BEN, "area_id": "hall", "id": "b"},
                    {"action": "attach", "usnd_id": CARA, "area_id": "hall", "id": "c"},
                ],
            },
            {"action": "scan", "usnd_id": BEN, "id": "scan"},
            {"action": "assert", "step": "scan", "neighbors": [ANA]},
            {"action": "assert", "step": "a", "outcome": "ok"},
        ]
        result = run_script(script)
        assert result.passed
        entry = parse_transcript(result)[1]
        assert entry["outcome"]["results"] == [{"area_id": "hall"}] * 3

    def test_boot_failure_has_its_own_code(self):
        script = make_script()
        script["fixtures"]["placements"][0]["x"] = 999.0  # outside the hall
        with pytest.raises(UsnError) as excinfo:
            run_script(script)
        assert excinfo.value.code == "ServiceBootFailure"

    def test_tcp_and_local_transcripts_differ_only_in_header(self):
        local = run_script(make_script(transport="local"))
        tcp = run_script(make_script(transport="tcp"))
        assert local.transcript_lines[1:] == tcp.transcript_lines[1:]
        local_header = json.loads(local.transcript_lines[0])
        tcp_header = json.loads(tcp.transcript_lines[0])
        assert local_header.pop("transport") == "local"
        assert tcp_header.pop("transport") == "tcp"
        assert local_header == tcp_header


class TestBundledScenarios:
    @pytest.mark.parametrize(
        "name,expected_asserts",
        [("conference", 4), ("jobfair", 4), ("party", 5)],
    )
    def test_scenario_passes_deterministically(self, name, expected_asserts, tmp_path):
        path = f"scenarios/{name}.json"
        out = tmp_path / f"{name}.jsonl"
        first = run_scenario(path, transcript_path=str(out))
        assert first.passed, first.transcript_text
        assert first.asserts_total == expected_asserts
        assert out.read_text() == first.transcript_text
        second = run_scenario(path)
        assert second.transcript_hash == first.transcript_hash
