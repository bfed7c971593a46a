"""Scenario harness: grammar, clock discipline, determinism, replay."""

import random

import pytest

from epistemic_engine.cli import main as cli_main
from epistemic_engine.errors import ScenarioParseError, UnknownSector
from epistemic_engine.scenario import (
    CORPUS_NAMES,
    METRICS_HEADER,
    WITNESS_NAMES,
    load_corpus,
    parse_scenario,
    replay_check,
    run_scenario,
)

from support import FROZEN_VACUUM_HASH

ALL_NAMES = CORPUS_NAMES + WITNESS_NAMES


def _parse_error(script):
    with pytest.raises(ScenarioParseError) as err:
        parse_scenario(script)
    return str(err.value)


# ---------------------------------------------------------------------------
# Grammar and static validation


def test_unknown_event_kind_is_a_parse_error():
    message = _parse_error("@0 frobnicate x=1\n")
    assert "line 1" in message and "frobnicate" in message


def test_event_ahead_of_the_clock_is_a_parse_error():
    message = _parse_error("@1 reflect\n")
    assert "clock reads 0" in message


def test_event_behind_the_clock_is_a_parse_error():
    script = "@0 tick count=2\n@1 reflect\n"
    message = _parse_error(script)
    assert "@1" in message and "clock reads 2" in message


def test_prologue_line_after_events_is_a_parse_error():
    script = "@0 reflect\nsector extra\n"
    assert "prologue" in _parse_error(script)


def test_unterminated_text_is_a_parse_error():
    script = '@0 perceive kind=observation sector=perc "no closing\n'
    assert "unterminated" in _parse_error(script)


def test_trailing_garbage_after_text_is_a_parse_error():
    script = '@0 perceive kind=observation sector=perc "ok" tail=1\n'
    assert "end the line" in _parse_error(script)


def test_duplicate_key_is_a_parse_error():
    script = '@0 perceive kind=observation kind=goal sector=perc "x"\n'
    assert "duplicate key" in _parse_error(script)


def test_bad_assertion_spec_is_a_parse_error():
    script = '@0 perceive kind=observation sector=perc assertion=only_topic "x"\n'
    assert "assertion" in _parse_error(script)


def test_unknown_source_strategy_is_a_parse_error():
    script = "source a token=t strategies=direct,warp\n"
    assert "warp" in _parse_error(script)


def test_inject_without_priority_is_a_parse_error():
    script = (
        "source a token=t strategies=direct\n"
        '@0 inject strategy=direct source=a kind=goal sector=plan "x"\n'
    )
    assert "priority" in _parse_error(script)


def test_temporal_inject_without_ttl_is_a_parse_error():
    script = (
        "source a token=t strategies=temporal\n"
        '@0 inject strategy=temporal source=a priority=0.5 kind=heuristic sector=plan "x"\n'
    )
    assert "ttl" in _parse_error(script)


def test_unknown_keys_are_a_parse_error():
    script = '@0 perceive kind=observation sector=perc wings=2 "x"\n'
    assert "unknown keys" in _parse_error(script)


def test_unregistered_sector_fails_static_validation():
    script = '@0 perceive kind=observation sector=hunch "x"\n'
    with pytest.raises(UnknownSector) as err:
        parse_scenario(script)
    assert "line 1" in str(err.value)


def test_prologue_sector_line_registers_for_events():
    script = 'sector hunch\n@0 perceive kind=observation sector=hunch "x"\n'
    scenario = parse_scenario(script)
    assert scenario.sectors == ["hunch"]
    result = run_scenario(script)
    assert result.ok


def test_text_escapes_round_trip():
    script = '@0 perceive kind=observation sector=perc "say \\"hi\\" \\\\ done"\n'
    result = run_scenario(script)
    fragment = result.engine.state.get(1)
    assert fragment.text == 'say "hi" \\ done'


# ---------------------------------------------------------------------------
# Running


def test_empty_scenario_is_the_vacuum():
    result = run_scenario("sector spare\n")
    assert result.final_hash == FROZEN_VACUUM_HASH
    assert result.audit_document.splitlines() == [
        "epistemic-audit v1 elaborations=unfiltered",
        f"# final-hash {FROZEN_VACUUM_HASH}",
    ]
    assert result.metrics_document == f"{METRICS_HEADER}\n0 1.000000 0.000000 0 0\n"


def test_expect_comparators_pass_and_fail():
    script = (
        "source a token=t strategies=direct\n"
        '@0 inject strategy=direct source=a priority=0.6 kind=goal sector=plan anchor=0.8 assertion=x:done:+ "x"\n'
        "@0 expect active_count == 1\n"
        "@0 expect kappa >= 1.000000\n"
        "@0 expect lambda <= 1.000000\n"
        "@0 expect pending_count == 1\n"
    )
    result = run_scenario(script)
    assert len(result.expect_failures) == 1
    assert "line 6" in result.expect_failures[0]
    assert "actual 0" in result.expect_failures[0]
    assert not result.ok


def test_expect_uses_six_place_rounding():
    # Three naive fragments sharing one topic: pairs (+,+), (+,-), (+,-)
    # give kappa 1/3, which must compare equal to its 6dp rendering.
    script = (
        "config allow_naive=true\n"
        "source raw token=t strategies=naive\n"
        '@0 inject strategy=naive source=raw priority=0.5 kind=observation sector=perc assertion=x:hot:+ "a"\n'
        '@0 inject strategy=naive source=raw priority=0.5 kind=observation sector=perc assertion=x:hot:+ "b"\n'
        '@0 inject strategy=naive source=raw priority=0.5 kind=observation sector=perc assertion=x:hot:- "c"\n'
        "@0 expect kappa == 0.333333\n"
    )
    result = run_scenario(script)
    assert result.ok, result.expect_failures


def test_metrics_trace_for_loop_breaking_is_frozen():
    result = run_scenario(load_corpus("loop_breaking"))
    assert result.metrics_document == (
        "epistemic-metrics v1\n"
        "0 1.000000 2.000000 2 0\n"
        "1 1.000000 2.000000 2 0\n"
        "2 1.000000 2.000000 2 0\n"
        "3 1.000000 2.000000 2 0\n"
        "4 1.000000 2.000000 2 0\n"
        "5 1.000000 2.000000 2 0\n"
        "6 1.000000 2.000000 2 0\n"
        "7 1.000000 0.000000 0 0\n"
    )


def test_corpus_and_witnesses_run_green_and_replay():
    for name in ALL_NAMES:
        script = load_corpus(name)
        result = run_scenario(script)
        assert result.ok, (name, result.expect_failures)
        assert replay_check(result.audit_document, script), name


def test_three_runs_are_byte_identical():
    script = load_corpus("bootstrap")
    runs = [run_scenario(script) for _ in range(3)]
    assert len({r.final_hash for r in runs}) == 1
    assert len({r.audit_document for r in runs}) == 1
    assert len({r.metrics_document for r in runs}) == 1


def test_replay_detects_tampering():
    script = load_corpus("witness_direct")
    good = run_scenario(script).audit_document
    lines = good.splitlines()
    flipped = lines[-1][:-1] + ("0" if lines[-1][-1] != "0" else "1")
    assert not replay_check("\n".join(lines[:-1] + [flipped]) + "\n", script)
    assert not replay_check("\n".join(lines[:1] + lines[2:]) + "\n", script)


def test_every_submission_yields_exactly_one_record():
    script = load_corpus("loop_breaking")
    result = run_scenario(script)
    body = result.audit_document.splitlines()[1:-1]
    submissions = sum(
        1
        for line in script.splitlines()
        if line.strip().split()[1:2] in (["inject"], ["retire"], ["annihilate"])
    )
    assert len(body) == submissions == 5


def test_no_fragment_is_retracted_twice_across_the_audit():
    for name in ALL_NAMES:
        result = run_scenario(load_corpus(name))
        seen = []
        for record in result.engine.audit.records():
            seen.extend(record.retracted_ids)
        assert len(seen) == len(set(seen)), name


def test_randomized_scripts_run_deterministically():
    rng = random.Random(4127)
    sectors = ("perc", "plan", "mem", "know")
    for case in range(30):
        lines = ["source gen token=gen-token strategies=direct"]
        clock = 0
        for step in range(rng.randint(1, 12)):
            roll = rng.random()
            if roll < 0.35:
                topic = rng.choice(("alpha", "beta", "gamma"))
                pol = rng.choice(("+", "-"))
                lines.append(
                    f"@{clock} perceive kind=observation sector={rng.choice(sectors)} "
                    f"k={rng.randint(0, 3)} anchor={rng.uniform(0.2, 0.9):.2f} "
                    f'assertion={topic}:seen:{pol} "obs {case}.{step}"'
                )
            elif roll < 0.7:
                topic = rng.choice(("alpha", "beta", "gamma"))
                pol = rng.choice(("+", "-"))
                lines.append(
                    f"@{clock} inject strategy=direct source=gen "
                    f"priority={rng.uniform(0.1, 1.0):.2f} kind=correction "
                    f"sector={rng.choice(sectors)} k={rng.randint(0, 3)} "
                    f'assertion={topic}:seen:{pol} "inj {case}.{step}"'
                )
            elif roll < 0.85:
                lines.append(f"@{clock} reflect")
            else:
                count = rng.randint(1, 3)
                lines.append(f"@{clock} tick count={count}")
                clock += count
        script = "\n".join(lines) + "\n"
        first = run_scenario(script)
        second = run_scenario(script)
        assert first.audit_document == second.audit_document, case
        assert first.metrics_document == second.metrics_document, case
        assert first.final_hash == second.final_hash, case
        assert replay_check(first.audit_document, script), case


# ---------------------------------------------------------------------------
# CLI exit codes


def test_cli_run_exit_zero_and_hash_output(tmp_path, capsys):
    script = tmp_path / "s.scn"
    script.write_text(load_corpus("bootstrap"))
    audit_out = tmp_path / "a.audit"
    code = cli_main(["run", str(script), "--hash", "--audit-out", str(audit_out)])
    printed = capsys.readouterr().out.strip()
    assert code == 0
    assert len(printed) == 64 and int(printed, 16) >= 0
    assert audit_out.read_text().endswith(f"# final-hash {printed}\n")


def test_cli_run_exit_one_on_failed_expect(tmp_path, capsys):
    script = tmp_path / "s.scn"
    script.write_text("@0 expect active_count == 5\n")
    assert cli_main(["run", str(script)]) == 1
    assert "expect failed" in capsys.readouterr().err


def test_cli_run_exit_two_on_parse_error(tmp_path, capsys):
    script = tmp_path / "s.scn"
    script.write_text("@0 explode\n")
    assert cli_main(["run", str(script)]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_run_exit_two_on_bad_config_override(tmp_path, capsys):
    script = tmp_path / "s.scn"
    script.write_text("config capacity=soft\n@0 reflect\n")
    assert cli_main(["run", str(script)]) == 2
    capsys.readouterr()


def test_cli_replay_match_and_mismatch(tmp_path, capsys):
    script = tmp_path / "s.scn"
    script.write_text(load_corpus("witness_direct"))
    audit_out = tmp_path / "a.audit"
    assert cli_main(["run", str(script), "--audit-out", str(audit_out)]) == 0
    assert cli_main(["replay", str(script), str(audit_out)]) == 0
    assert "match" in capsys.readouterr().out
    audit_out.write_text(audit_out.read_text().replace("admitted", "rejected", 1))
    assert cli_main(["replay", str(script), str(audit_out)]) == 1
    assert "mismatch" in capsys.readouterr().out


def test_cli_config_file_feeds_the_run(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text('{"allow_naive": true}')
    script = tmp_path / "s.scn"
    script.write_text(
        "source raw token=t strategies=naive\n"
        '@0 inject strategy=naive source=raw priority=0.5 kind=observation sector=perc "x"\n'
        "@0 expect active_count == 1\n"
    )
    assert cli_main(["run", str(script)]) == 1
    assert cli_main(["run", str(script), "--config", str(config)]) == 0


def test_prologue_config_wins_over_config_file(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text('{"allow_naive": false}')
    script = tmp_path / "s.scn"
    script.write_text(
        "config allow_naive=true\n"
        "source raw token=t strategies=naive\n"
        '@0 inject strategy=naive source=raw priority=0.5 kind=observation sector=perc "x"\n'
        "@0 expect active_count == 1\n"
    )
    assert cli_main(["run", str(script), "--config", str(config)]) == 0


def test_cli_demo_prints_all_seed_summaries(capsys):
    assert cli_main(["demo", "self-injection"]) == 0
    out = capsys.readouterr().out
    for seed in ("conflict", "pinned", "healthy"):
        assert f"seed={seed}" in out
