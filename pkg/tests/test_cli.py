"""CLI subcommand tests (author, roundtrip, run)."""

from __future__ import annotations

from click.testing import CliRunner

from conftest import FIXTURES
from robostudio.service.cli import main


class TestRoundtripCommand:
    def test_all_fixture_programs_pass(self):
        runner = CliRunner()
        for path in sorted((FIXTURES / "programs").glob("*.coco")):
            result = runner.invoke(main, ["roundtrip", str(path)])
            assert result.exit_code == 0, result.output

    def test_bad_program_fails(self, tmp_path):
        bad = tmp_path / "bad.coco"
        bad.write_text("dance: everywhere\n")
        result = CliRunner().invoke(main, ["roundtrip", str(bad)])
        assert result.exit_code == 1


class TestRunCommand:
    def test_task1_prints_four_arrivals(self):
        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "run",
                "--program", str(FIXTURES / "programs" / "task1.coco"),
                "--world", str(FIXTURES / "worlds" / "office.json"),
                "--events", str(FIXTURES / "events" / "task1.json"),
            ],
        )
        assert result.exit_code == 0, result.output
        arrived = [line for line in result.output.splitlines() if "MoveArrived" in line]
        assert len(arrived) == 4

    def test_validation_failure_exits_nonzero(self, tmp_path):
        bad = tmp_path / "bad.coco"
        bad.write_text("goto: Atlantis\n")
        result = CliRunner().invoke(
            main,
            [
                "run",
                "--program", str(bad),
                "--world", str(FIXTURES / "worlds" / "office.json"),
            ],
        )
        assert result.exit_code == 1


class TestAuthorCommand:
    def test_training1_produces_golden_program(self):
        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "author",
                "--script", str(FIXTURES / "scripts" / "training1_author.json"),
                "--transcript", str(FIXTURES / "transcripts" / "training1.txt"),
                "--world", str(FIXTURES / "worlds" / "office.json"),
            ],
        )
        assert result.exit_code == 0, result.output
        golden = (FIXTURES / "programs" / "training1.coco").read_text()
        assert result.stdout == golden

    def test_author_failure_exit_code(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(
            '{"version": "providerScript/v1", "entries": '
            '[{"match": "", "response": "<code>say hi</code>"}]}'
        )
        transcript = tmp_path / "turns.txt"
        transcript.write_text("hello\n")
        result = CliRunner().invoke(
            main,
            [
                "author",
                "--script", str(script),
                "--transcript", str(transcript),
                "--retries", "0",
            ],
        )
        assert result.exit_code == 1
