"""Command-line interface for the workbench."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import dataset as ds
from . import formkit, imaging, metrics, synth
from .engines import EngineConfig, EngineHandle, ReferenceModel
from .textnorm import read_ground_truth


@click.group()
def main():
    """Build handwritten-OCR line datasets and evaluate engines."""


@main.command()
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--blur-k", default=4, show_default=True, type=int)
@click.option("--threshold", "thresh", default=127, show_default=True, type=click.IntRange(0, 255))
@click.option("--invert", is_flag=True, help="Make dark ink the foreground.")
@click.option("--normalize", is_flag=True, help="Scale/pad to the line geometry.")
@click.option("--out", type=click.Path(path_type=Path), default=Path("preprocessed"))
def preprocess(images, blur_k, thresh, invert, normalize, out):
    """Blur, threshold and optionally normalize line images."""
    out.mkdir(parents=True, exist_ok=True)
    for path in images:
        raster = imaging.load_png(path)
        result = imaging.preprocess_line(
            raster, blur_k=blur_k, t=thresh, invert=invert, normalize=normalize
        )
        target = out / path.name
        imaging.save_png(result, target)
        click.echo(f"{path} -> {target}")


@main.command()
@click.option("--sentences", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--dpi", default=300.0, show_default=True)
def template(sentences, out, dpi):
    """Render a collection form page plus its template.json."""
    lines = [
        line.strip()
        for line in sentences.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    page, tpl = formkit.render_template(lines, dpi=dpi)
    out.mkdir(parents=True, exist_ok=True)
    imaging.save_png(page, out / "form.png")
    tpl.save(out / "template.json")
    click.echo(f"wrote {out / 'form.png'} and {out / 'template.json'} ({len(tpl.slots)} slots)")


@main.command()
@click.option("--scan", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--template", "template_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--no-fiducials", is_flag=True, help="Skip detection; use --dpi mapping.")
@click.option("--dpi", default=300.0, show_default=True, help="Scan resolution for --no-fiducials.")
def extract(scan, template_path, out, no_fiducials, dpi):
    """Crop every slot from a scanned form."""
    raster = imaging.load_png(scan)
    tpl = formkit.TemplateDescriptor.load(template_path)
    if no_fiducials:
        reg = formkit.registration_from_dpi(dpi)
    else:
        reg = formkit.register_scan(raster, tpl)
        click.echo(f"registered at {reg.dpi:.1f} dpi, residual {reg.residual_px:.2f}px")
    out.mkdir(parents=True, exist_ok=True)
    for slot_id, crop in formkit.extract_boxes(raster, tpl, reg):
        imaging.save_png(crop, out / f"slot_{slot_id:02d}.png")
    click.echo(f"extracted {len(tpl.slots)} crops to {out}")


@main.command()
@click.option("--dir", "directory", required=True, type=click.Path(exists=True, path_type=Path))
def ingest(directory):
    """Build manifest.jsonl from <id>.png + <id>.gt.txt pairs."""
    registry = ds.Registry.ingest(directory)
    path = registry.save_manifest()
    click.echo(f"ingested {len(registry)} samples -> {path}")


@main.command()
@click.option("--dir", "directory", default=Path("."), type=click.Path(exists=True, path_type=Path))
@click.option("--ratio", default=0.9, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--by-author", is_flag=True, help="Keep each writer wholly in one side.")
def split(directory, ratio, seed, by_author):
    """Assign clean samples to train/eval deterministically."""
    registry = ds.Registry.load_manifest(Path(directory) / "manifest.jsonl")
    assignment = registry.split(
        ds.SplitSpec(ratio_train=ratio, seed=seed, by_author=by_author)
    )
    registry.save_manifest()
    click.echo(f"train {len(assignment.train)} / eval {len(assignment.eval)}")


@main.command()
@click.option("--dir", "directory", default=Path("."), type=click.Path(exists=True, path_type=Path))
@click.option("--volunteers", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), help="Also write stats.json and figures.")
def stats(directory, volunteers, out):
    """Corpus statistics, optionally with figures."""
    registry = ds.Registry.load_manifest(Path(directory) / "manifest.jsonl")
    records = ds.load_volunteers(volunteers) if volunteers else []
    result = registry.stats(records)
    doc = {
        "sample_count": result.sample_count,
        "author_count": result.author_count,
        "status_counts": result.status_counts,
        "split_counts": result.split_counts,
        "gender_counts": result.gender_counts,
        "mean_age": result.mean_age,
    }
    click.echo(json.dumps(doc, indent=2))
    if out:
        from .plots import save_stats_figures

        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        for path in save_stats_figures(result, [v.age for v in records], out):
            click.echo(f"wrote {path}")


@main.command(name="export-training")
@click.option("--dir", "directory", default=Path("."), type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--ratio", default=0.9, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
def export_training(directory, config_path, out, ratio, seed):
    """Write the external trainer's layout (pairs, lists, config)."""
    registry = ds.Registry.load_manifest(Path(directory) / "manifest.jsonl")
    cfg = (
        EngineConfig.from_key_value(config_path.read_text(encoding="utf-8"))
        if config_path
        else EngineConfig(ratio_train=ratio)
    )
    assignment = registry.split(ds.SplitSpec(ratio_train=cfg.ratio_train, seed=seed))
    registry.save_manifest()
    manifest = registry.export_training_layout(assignment, cfg, out)
    click.echo(f"exported {len(manifest)} samples to {out}")


@main.command(name="synth")
@click.option("--count", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--salt-pepper", default=0.0, show_default=True, type=float)
@click.option("--blur", default=1, show_default=True, type=int)
@click.option("--corrupt", default=0.0, show_default=True, type=float)
def synth_cmd(count, seed, out, salt_pepper, blur, corrupt):
    """Generate a synthetic line corpus in ingest format."""
    lines = synth.write_corpus(
        out,
        count,
        seed=seed,
        salt_pepper=salt_pepper,
        blur_k=blur,
        char_corrupt=corrupt,
    )
    click.echo(f"wrote {len(lines)} samples to {out}")


@main.command(name="eval")
@click.option("--ref-dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--hyp-dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--words", is_flag=True, help="Lead per-sample lines with WER instead of CER.")
@click.option("--micro", is_flag=True, help="Report pooled-count aggregates.")
@click.option("--name", default="report", show_default=True, help="Engine/report name.")
@click.option("--out", type=click.Path(path_type=Path), help="Write TSV, JSON and figures here.")
def eval_cmd(ref_dir, hyp_dir, words, micro, name, out):
    """Score hypothesis files against ground truth by sample id.

    References are <id>.gt.txt; hypotheses are <id>.txt with matching
    ids. Empty or missing hypothesis files count as total deletion.
    """
    refs = sorted(ref_dir.glob("*.gt.txt"))
    if not refs:
        raise click.ClickException(f"no .gt.txt files in {ref_dir}")
    evals = []
    for ref_path in refs:
        sample_id = ref_path.name[: -len(".gt.txt")]
        hyp_path = hyp_dir / f"{sample_id}.txt"
        hypothesis = ""
        if hyp_path.exists():
            hypothesis = hyp_path.read_text(encoding="utf-8").strip()
        reference = read_ground_truth(ref_path)
        rates = metrics.error_rates(reference, hypothesis)
        evals.append(metrics.SampleEval.from_rates(sample_id, rates))
        lead = rates.wer if words else rates.cer
        click.echo(f"{sample_id}\t{lead:.2f}")
    report = metrics.aggregate(evals, engine_name=name, dataset_name=str(ref_dir))
    rows = metrics.report_rows([report], micro=micro)
    click.echo(metrics.to_tsv(rows), nl=False)
    if out:
        from .plots import save_report_figures

        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.tsv").write_text(metrics.to_tsv(rows), encoding="utf-8")
        (out / f"{name}.json").write_text(metrics.report_to_json(report), encoding="utf-8")
        for path in save_report_figures(report, out, stem=name):
            click.echo(f"wrote {path}")


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--port", default=8777, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--engines", "engines_path", type=click.Path(exists=True, path_type=Path),
              help="JSON map of engine name to handle spec.")
@click.option("--ui-dir", type=click.Path(path_type=Path))
def serve(root, port, host, engines_path, ui_dir):
    """Run the curation service over a dataset root."""
    import uvicorn

    from .service import create_app

    handles = {}
    if engines_path:
        spec = json.loads(engines_path.read_text(encoding="utf-8"))
        for engine_name, doc in spec.items():
            if doc["kind"] == "external":
                handles[engine_name] = EngineHandle(
                    kind="external",
                    command=doc["command"],
                    timeout=doc.get("timeout", 30.0),
                )
            else:
                model = ReferenceModel.load(Path(root) / doc["model"])
                handles[engine_name] = EngineHandle(kind="reference", model=model)
    app = create_app(root, engines=handles, ui_dir=ui_dir)
    click.echo(f"serving {root} on http://{host}:{port} (UI at /ui if built)")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
