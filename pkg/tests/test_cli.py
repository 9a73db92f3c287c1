from __future__ import annotations

import json

import pytest
from click.testing import CliRunner
from conftest import write_frames

from multirag.cli import main
from multirag.store import KnowledgeStore

CONFIG_YAML = """\
chunk_size: 32
providers:
  speech:
    kind: mock
    segments:
      - [0.0, 2.5, "hello there"]
      - [2.5, 5.0, "general remarks"]
  text:
    kind: mock
    mode: echo_question
  judge:
    kind: mock
    reply: "2"
"""

BENCH_TSV = (
    "item_id\tvideo_id\tquestion\tanswer\tl2\tl1\n"
    "q1\tvid\tWhat is shown first?\ta dark frame\tCP\tPerception\n"
    "q2\tvid\tWhat is said first?\thello there\tLR\tReasoning\n"
    "q3\tvid\tWhat happens at the end?\ta blue frame\tTR\tReasoning\n"
)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path, pinned_clock):
    write_frames(tmp_path / "frames")
    (tmp_path / "track.wav").write_bytes(b"RIFF\x00\x00\x00\x00WAVEfake")
    (tmp_path / "config.yaml").write_text(CONFIG_YAML, encoding="utf-8")
    (tmp_path / "bench.tsv").write_text(BENCH_TSV, encoding="utf-8")
    return tmp_path


def cli_ingest(runner, ws, *extra):
    args = [
        "--config",
        str(ws / "config.yaml"),
        "ingest",
        str(ws / "frames"),
        "--video-id",
        "vid",
        "--store-root",
        str(ws / "stores"),
        "--audio",
        str(ws / "track.wav"),
        *extra,
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


class TestIngestCommand:
    def test_builds_store_and_reports(self, runner, workspace):
        result = cli_ingest(runner, workspace)
        assert "[sampling] ..." in result.output
        assert "[indexing] ..." in result.output
        assert "ingested vid: 6 entries" in result.output
        store_dir = workspace / "stores" / "vid" / "store"
        assert (store_dir / "manifest.json").is_file()
        assert (store_dir / "chunks.jsonl").is_file()
        assert (workspace / "stores" / "vid" / "vid.md").is_file()

    def test_audio_chunks_present_with_audio(self, runner, workspace):
        cli_ingest(runner, workspace)
        store = KnowledgeStore.load(workspace / "stores" / "vid" / "store")
        assert "audio" in {c.kind for c in store.chunks()}

    def test_no_audio_flag_skips_audio(self, runner, workspace):
        args = [
            "--config",
            str(workspace / "config.yaml"),
            "ingest",
            str(workspace / "frames"),
            "--video-id",
            "vid",
            "--store-root",
            str(workspace / "stores"),
            "--no-audio",
        ]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        store = KnowledgeStore.load(workspace / "stores" / "vid" / "store")
        assert "audio" not in {c.kind for c in store.chunks()}

    def test_audio_flags_conflict(self, runner, workspace):
        result = runner.invoke(
            main,
            [
                "ingest",
                str(workspace / "frames"),
                "--audio",
                str(workspace / "track.wav"),
                "--no-audio",
            ],
        )
        assert result.exit_code != 0
        assert "--no-audio conflicts with --audio" in result.output

    def test_missing_frames_dir(self, runner, tmp_path):
        result = runner.invoke(main, ["ingest", str(tmp_path / "nope")])
        assert result.exit_code == 1
        assert "frame directory not found" in result.output

    def test_missing_audio_file(self, runner, workspace):
        result = runner.invoke(
            main,
            ["ingest", str(workspace / "frames"), "--audio", str(workspace / "gone.wav")],
        )
        assert result.exit_code == 1
        assert "audio file not found" in result.output


class TestAskCommand:
    def ask(self, runner, ws, *extra):
        return runner.invoke(
            main,
            [
                "--config",
                str(ws / "config.yaml"),
                "ask",
                "What is said first?",
                "--video-id",
                "vid",
                "--store-root",
                str(ws / "stores"),
                *extra,
            ],
        )

    def test_prints_answer_then_citations(self, runner, workspace):
        cli_ingest(runner, workspace)
        result = self.ask(runner, workspace)
        assert result.exit_code == 0, result.output
        lines = result.output.splitlines()
        assert lines[0] == "What is said first?"
        assert "cited:" in lines
        cited = [line for line in lines if line.startswith("  [doc vid | ")]
        assert len(cited) == 5
        assert all("similarity=" in line and "rank=" in line for line in cited)

    def test_k_flag_limits_citations(self, runner, workspace):
        cli_ingest(runner, workspace)
        result = self.ask(runner, workspace, "--k", "2")
        assert result.exit_code == 0
        assert len([l for l in result.output.splitlines() if l.startswith("  [doc")]) == 2

    def test_audit_file_appended(self, runner, workspace):
        cli_ingest(runner, workspace)
        audit = workspace / "audit.jsonl"
        assert self.ask(runner, workspace, "--audit", str(audit)).exit_code == 0
        assert self.ask(runner, workspace, "--audit", str(audit)).exit_code == 0
        records = [json.loads(line) for line in audit.read_text().splitlines()]
        assert len(records) == 2
        assert records[0]["question"] == "What is said first?"
        assert records[0]["answer"] == "What is said first?"

    def test_missing_store(self, runner, workspace):
        result = self.ask(runner, workspace)
        assert result.exit_code == 1
        assert "no store for video" in result.output


class TestEvalCommand:
    def eval_args(self, ws, *extra):
        return [
            "--config",
            str(ws / "config.yaml"),
            "eval",
            str(ws / "bench.tsv"),
            "--out",
            str(ws / "eval_out"),
            "--store-root",
            str(ws / "stores"),
            *extra,
        ]

    def test_writes_scorecards(self, runner, workspace):
        cli_ingest(runner, workspace)
        result = runner.invoke(main, self.eval_args(workspace))
        assert result.exit_code == 0, result.output
        text = (workspace / "eval_out" / "scorecard.txt").read_text(encoding="utf-8")
        assert "Multi-RAG" in text
        assert "Overall" in text
        report = json.loads((workspace / "eval_out" / "scorecard.json").read_text())
        assert report["rows"][0]["label"] == "Multi-RAG"
        card = report["rows"][0]["scorecard"]
        assert card["overall_mean"] == 2.0
        assert card["scored_count"] == 3
        assert card["unscored"] == 0
        assert "wrote" in result.output

    def test_ablation_rows_and_stores(self, runner, workspace):
        cli_ingest(runner, workspace)
        result = runner.invoke(
            main,
            self.eval_args(workspace, "--ablate", "audio", "--ablate", "audio,auxiliary_metadata"),
        )
        assert result.exit_code == 0, result.output
        report = json.loads((workspace / "eval_out" / "scorecard.json").read_text())
        labels = [row["label"] for row in report["rows"]]
        assert labels == [
            "Multi-RAG",
            "Multi-RAG w/o Audio",
            "Multi-RAG w/o Audio & Auxiliary metadata",
        ]
        ablated = KnowledgeStore.load(workspace / "eval_out" / "stores" / "wo_audio" / "vid")
        assert "audio" not in {c.kind for c in ablated.chunks()}
        both = KnowledgeStore.load(
            workspace / "eval_out" / "stores" / "wo_audio_auxiliary_metadata" / "vid"
        )
        assert {c.kind for c in both.chunks()} == {"frame_description"}

    def test_topk_sweep_rows(self, runner, workspace):
        cli_ingest(runner, workspace)
        result = runner.invoke(main, self.eval_args(workspace, "--topk-sweep", "1,3"))
        assert result.exit_code == 0, result.output
        report = json.loads((workspace / "eval_out" / "scorecard.json").read_text())
        labels = [row["label"] for row in report["rows"]]
        assert labels == ["Multi-RAG", "Top-1", "Top-3"]

    def test_missing_store_aborts(self, runner, workspace):
        result = runner.invoke(main, self.eval_args(workspace))
        assert result.exit_code == 1
        assert "missing store for video vid" in result.stderr
        assert "have no store" in result.output

    def test_missing_benchmark_file(self, runner, workspace):
        cli_ingest(runner, workspace)
        args = self.eval_args(workspace)
        args[args.index(str(workspace / "bench.tsv"))] = str(workspace / "absent.tsv")
        result = runner.invoke(main, args)
        assert result.exit_code == 1


class TestCalibrateCommand:
    def test_prints_and_writes_report(self, runner, workspace):
        out = workspace / "calibration.json"
        result = runner.invoke(
            main,
            ["calibrate", str(workspace / "frames"), "--bins", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["frame_count"] == 6
        assert len(report["histogram"]) == 4
        assert report["suggested_cutoff"] > 0
        assert json.loads(out.read_text(encoding="utf-8")) == report

    def test_missing_dir(self, runner, tmp_path):
        result = runner.invoke(main, ["calibrate", str(tmp_path / "nope")])
        assert result.exit_code == 1
        assert "frame directory not found" in result.output


class TestVersion:
    def test_version_flag(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.output
