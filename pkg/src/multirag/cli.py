"""Command-line shell: ingest, ask, eval, calibrate, serve."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .agent import append_audit, load_template
from .config import resolve_config
from .encoder import format_hms
from .errors import EngineError
from .evalharness import (
    DEFAULT_ABLATION_SETS,
    LabeledScorecard,
    ablation_label,
    load_benchmark,
    render_json_report,
    render_text_report,
    run_eval,
    toggles_to_excluded_kinds,
)
from .pipeline import Engine

_CONFIG_OPTIONS = (
    click.option("--store-root", default=None, help="Directory holding one store per video."),
    click.option("--rate", type=float, default=None, help="Uniform sampling rate in frames per second."),
    click.option(
        "--sampling-mode",
        type=click.Choice(["uniform", "change_filter"]),
        default=None,
        help="Keep every sampled frame, or only frames that changed enough.",
    ),
    click.option("--cutoff", type=float, default=None, help="MSE change cutoff for change_filter mode."),
    click.option("--decimate/--no-decimate", default=None, help="Halve the rate by dropping alternate frames."),
    click.option("--chunk-size", type=int, default=None, help="Chunk length in tokens."),
    click.option("--overlap-ratio", type=float, default=None, help="Fraction of a chunk shared with the next."),
    click.option("--prompt-type", type=click.Choice(["type1", "type2"]), default=None),
    click.option("--k", "default_k", type=int, default=None, help="Chunks retrieved per question."),
)


def _with_config_options(fn):
    for option in reversed(_CONFIG_OPTIONS):
        fn = option(fn)
    return fn


def _engine(ctx: click.Context, **cli_values) -> Engine:
    try:
        config = resolve_config(ctx.obj.get("config_path"), cli_values)
        return Engine(config)
    except EngineError as exc:
        raise click.ClickException(str(exc))


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="YAML config file (also via MULTIRAG_CONFIG).",
)
@click.version_option(package_name="multirag")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Video knowledge-base engine: ingest frames + audio, then ask."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.argument("frames_dir", type=click.Path(file_okay=False))
@click.option("--video-id", default=None, help="Defaults to the frames directory name.")
@click.option("--audio", "audio_path", type=click.Path(dir_okay=False), default=None)
@click.option("--no-audio", is_flag=True, default=False, help="Ingest without any audio track.")
@_with_config_options
@click.pass_context
def ingest(ctx, frames_dir, video_id, audio_path, no_audio, **cli_values):
    """Build the transcript and searchable store for one video."""
    if no_audio and audio_path:
        raise click.UsageError("--no-audio conflicts with --audio")
    if audio_path is not None and not Path(audio_path).is_file():
        raise click.ClickException(f"audio file not found: {audio_path}")
    if not Path(frames_dir).is_dir():
        raise click.ClickException(f"frame directory not found: {frames_dir}")
    engine = _engine(ctx, **cli_values)
    vid = video_id or Path(frames_dir).resolve().name

    def progress(stage: str, fraction: float) -> None:
        if fraction == 0.0:
            click.echo(f"[{stage}] ...")

    try:
        result = engine.ingest(vid, frames_dir, audio_path, progress=progress)
    except EngineError as exc:
        raise click.ClickException(str(exc))
    store = result.store
    click.echo(
        f"ingested {vid}: {len(result.document.entries)} entries, "
        f"{len(store)} chunks (dim {store.dim}, model {store.model_name})"
    )
    click.echo(f"transcript: {result.video_dir / (vid + '.md')}")
    click.echo(f"store: {result.store_dir}")


@main.command()
@click.argument("question")
@click.option("--video-id", required=True)
@click.option("--audit", "audit_path", type=click.Path(dir_okay=False), default=None,
              help="Append the full answer record to this JSON-Lines file.")
@_with_config_options
@click.pass_context
def ask(ctx, question, video_id, audit_path, **cli_values):
    """Answer a question against one video's store."""
    engine = _engine(ctx, **cli_values)
    try:
        store = engine.load_store(video_id)
        record = engine.ask(question, store=store)
    except EngineError as exc:
        raise click.ClickException(str(exc))
    click.echo(record.answer)
    if record.retrieved:
        click.echo("")
        click.echo("cited:")
        for hit in record.retrieved:
            chunk = store.get_chunk(hit.chunk_id)
            if chunk.time_range is not None:
                lo, hi = chunk.time_range
                header = f"[doc {chunk.doc_id} | {format_hms(lo)}–{format_hms(hi)} | {chunk.kind}]"
            else:
                header = f"[doc {chunk.doc_id} | {chunk.kind}]"
            click.echo(f"  {header} similarity={hit.similarity:.4f} rank={hit.rank}")
    if audit_path:
        append_audit(record, audit_path)


def _toggle_slug(toggles: tuple[str, ...]) -> str:
    return "baseline" if not toggles else "wo_" + "_".join(toggles)


@main.command("eval")
@click.argument("benchmark", type=click.Path(dir_okay=False, exists=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="eval_out")
@click.option("--ablate", "ablate_specs", multiple=True,
              help="Comma-joined toggles (audio, auxiliary_metadata); repeatable; 'all' runs every combination.")
@click.option("--topk-sweep", "topk_sweep", default=None, help="Comma-joined k values, e.g. 1,3,5,7.")
@_with_config_options
@click.pass_context
def eval_cmd(ctx, benchmark, out_dir, ablate_specs, topk_sweep, **cli_values):
    """Score a benchmark file and write text + JSON scorecards."""
    engine = _engine(ctx, **cli_values)
    try:
        items = load_benchmark(benchmark)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))
    except EngineError as exc:
        raise click.ClickException(str(exc))

    video_ids = sorted({item.video_id for item in items})
    missing = [vid for vid in video_ids if not engine.has_store(vid)]
    if missing:
        for vid in missing:
            click.echo(f"missing store for video {vid}", err=True)
        raise click.ClickException(f"{len(missing)} referenced video(s) have no store; aborting")

    base_stores = {vid: engine.load_store(vid) for vid in video_ids}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = engine.config.default_k
    providers = engine.providers
    common = dict(
        embedder=providers.embedding,
        generator=providers.text,
        judge_provider=providers.judge,
        template=load_template(engine.config.prompt_type),
    )

    toggle_sets: list[tuple[str, ...]] = [()]
    for spec in ablate_specs:
        if spec.strip().lower() == "all":
            toggle_sets = [tuple(t) for t in DEFAULT_ABLATION_SETS]
            break
        toggles = tuple(t.strip() for t in spec.split(",") if t.strip())
        if toggles and toggles not in toggle_sets:
            toggle_sets.append(toggles)

    rows: list[LabeledScorecard] = []
    try:
        for toggles in toggle_sets:
            if not toggles:
                store_for = base_stores.__getitem__
                label = ablation_label(())
            else:
                kinds = toggles_to_excluded_kinds(toggles)
                slug = _toggle_slug(toggles)
                rebuilt = {}
                for vid in video_ids:
                    rebuilt[vid] = engine.rebuild_store(
                        vid, exclude_kinds=kinds, out_dir=out / "stores" / slug / vid
                    )
                store_for = rebuilt.__getitem__
                label = ablation_label(toggles)
            result = run_eval(items, store_for, k=k, **common)
            rows.append(LabeledScorecard(label, result.scorecard))

        if topk_sweep:
            ks = [int(part) for part in topk_sweep.split(",") if part.strip()]
            for kk in ks:
                result = run_eval(items, base_stores.__getitem__, k=kk, **common)
                rows.append(LabeledScorecard(f"Top-{kk}", result.scorecard))
    except EngineError as exc:
        raise click.ClickException(str(exc))

    metadata = engine.run_metadata(
        benchmark=Path(benchmark).name,
        items=len(items),
        k=k,
        ablations=[",".join(t) or "none" for t in toggle_sets],
        topk_sweep=topk_sweep or "none",
    )
    text = render_text_report(rows, metadata)
    (out / "scorecard.txt").write_text(text, encoding="utf-8")
    (out / "scorecard.json").write_text(render_json_report(rows, metadata), encoding="utf-8")
    click.echo(text, nl=False)
    click.echo(f"wrote {out / 'scorecard.txt'} and {out / 'scorecard.json'}")


@main.command()
@click.argument("frames_dir", type=click.Path(file_okay=False))
@click.option("--bins", type=int, default=10, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@_with_config_options
@click.pass_context
def calibrate(ctx, frames_dir, bins, out_path, **cli_values):
    """Report consecutive-frame MSE statistics and a suggested cutoff."""
    if not Path(frames_dir).is_dir():
        raise click.ClickException(f"frame directory not found: {frames_dir}")
    engine = _engine(ctx, **cli_values)
    try:
        report = engine.calibrate(frames_dir, bins=bins)
    except EngineError as exc:
        raise click.ClickException(str(exc))
    payload = json.dumps(report, ensure_ascii=False, sort_keys=True, indent=2)
    click.echo(payload)
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@_with_config_options
@click.pass_context
def serve(ctx, host, port, **cli_values):
    """Run the REST service backing the companion UI."""
    import uvicorn

    from .service import create_app

    engine = _engine(ctx, **cli_values)
    uvicorn.run(create_app(engine), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
