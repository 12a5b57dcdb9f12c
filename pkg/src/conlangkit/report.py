"""Static HTML browser for generated languages, translations and metrics.

Output depends only on the input files (sorted by name, no timestamps), so
identical inputs give a byte-identical site.
"""

from __future__ import annotations

import json
from html import escape
from pathlib import Path

from ._io import atomic_write_text
from .evaluator import METRICS_SUFFIX
from .sketch import SKETCH_SUFFIX, BlockKind, load_sketch
from .translator import TRANSLATIONS_SUFFIX, read_translations, validate_gloss_alignment

__all__ = ["build_report", "page_name"]

CSS = """
body { font-family: system-ui, -apple-system, Segoe UI, Roboto, Helvetica, Arial, sans-serif; margin: 24px auto; max-width: 980px; line-height: 1.45; padding: 0 16px; }
h1, h2, h3 { margin: 18px 0 8px; }
.meta { color: #555; font-size: 0.9rem; }
.block { white-space: pre-wrap; margin: 6px 0; }
table { border-collapse: collapse; width: 100%; margin: 8px 0 16px; }
th, td { border: 1px solid #ddd; padding: 6px 8px; text-align: left; vertical-align: top; }
th { background: #f5f5f5; }
.conlang { font-family: "Charis SIL", "Doulos SIL", Georgia, serif; }
.bad { color: #a00; }
"""


def page_name(sketch_id: str) -> str:
    return f"lang-{sketch_id}.html"


def _page(title: str, body: str) -> str:
    return (
        "<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{escape(title)}</title>\n<style>{CSS}</style>\n</head>\n<body>\n{body}\n</body>\n</html>\n"
    )


def _fmt_rate(doc):
    if not doc:
        return "n/a"
    return f"{doc['n_consistent']}/{doc['n_total']} ({doc['rate']:.2f})"


def _language_page(sketch, records, metrics) -> str:
    out = [f"<p><a href=\"index.html\">&larr; all languages</a></p>", f"<h1>Language {escape(sketch.id)}</h1>"]
    constraint = sketch.user_constraint or "(none)"
    out.append(f"<p class=\"meta\">seed {sketch.seed} &middot; version {sketch.version} &middot; constraint: {escape(constraint)}</p>")
    for section in sketch.sections:
        out.append(f"<h2>{escape(section.kind.value.capitalize())}</h2>")
        if section.is_empty():
            out.append("<p class=\"meta\">(empty)</p>")
        for block in section.blocks:
            if block.kind is BlockKind.HEADER:
                out.append(f"<h3>{escape(block.text.lstrip('#').strip())}</h3>")
            else:
                out.append(f"<div class=\"block\">{escape(block.text)}</div>")

    out.append("<h2>Translations</h2>")
    out.append("<table><tr><th>Source</th><th>Translation</th><th>Gloss</th><th>Refinement</th></tr>")
    for rec in records:
        align = validate_gloss_alignment(rec)
        note = "" if align.aligned else f"<br><span class=\"bad\">gloss misaligned ({align.word_count} vs {align.gloss_group_count})</span>"
        trace = escape(rec.refine_trace.summary()) if rec.refine_trace else "none"
        out.append(
            f"<tr><td>{escape(rec.source)}</td><td class=\"conlang\">{escape(rec.translation)}</td>"
            f"<td>{escape(rec.gloss)}{note}</td><td>{trace}</td></tr>"
        )
    out.append("</table>")

    out.append("<h2>Provenance and refinement traces</h2>")
    out.append("<table><tr><th>Stage</th><th>Time</th><th>Model</th><th>Summary</th></tr>")
    for p in sketch.provenance:
        out.append(
            f"<tr><td>{escape(p.stage)}</td><td>{escape(p.timestamp)}</td>"
            f"<td>{escape(p.model_id)}</td><td>{escape(p.summary)}</td></tr>"
        )
    out.append("</table>")

    out.append("<h2>Metrics</h2>")
    if metrics is None:
        out.append("<p class=\"meta\">No metrics file found.</p>")
    else:
        lc = metrics.get("language_consistency", {}).get(sketch.id)
        tc = metrics.get("translation_consistency", {}).get(sketch.id)
        out.append(f"<p>Language consistency: {_fmt_rate(lc)}<br>Translation consistency: {_fmt_rate(tc)}</p>")
        profile = next((p for p in metrics.get("profiles", []) if p["language_id"] == sketch.id), None)
        if profile:
            out.append("<table><tr><th>Feature</th><th>Value</th></tr>")
            for name, value in zip(metrics.get("features", []), profile["values"]):
                out.append(f"<tr><td>{escape(name)}</td><td>{escape(value) if value is not None else '<i>null</i>'}</td></tr>")
            out.append("</table>")
    return _page(f"Language {sketch.id}", "\n".join(out))


def build_report(output_dir, report_dir=None) -> Path:
    """Render ``index.html`` plus one page per ``*.sketch.json`` in ``output_dir``."""
    output_dir = Path(output_dir)
    report_dir = Path(report_dir) if report_dir else output_dir / "report"
    sketch_files = sorted(output_dir.glob("*" + SKETCH_SUFFIX))
    if not sketch_files:
        raise FileNotFoundError(f"no {SKETCH_SUFFIX} files in {output_dir}")
    metrics_files = sorted(output_dir.glob("*" + METRICS_SUFFIX))
    metrics = json.loads(metrics_files[0].read_text(encoding="utf-8")) if metrics_files else None

    rows = []
    for path in sketch_files:
        sketch = load_sketch(path)
        tpath = output_dir / (sketch.id + TRANSLATIONS_SUFFIX)
        records = read_translations(tpath) if tpath.exists() else []
        atomic_write_text(report_dir / page_name(sketch.id), _language_page(sketch, records, metrics))
        lc = (metrics or {}).get("language_consistency", {}).get(sketch.id)
        tc = (metrics or {}).get("translation_consistency", {}).get(sketch.id)
        rows.append(
            f"<tr><td><a href=\"{page_name(sketch.id)}\">{escape(sketch.id)}</a></td><td>{sketch.seed}</td>"
            f"<td>{escape(sketch.user_constraint or '(none)')}</td><td>{len(records)}</td>"
            f"<td>{_fmt_rate(lc)}</td><td>{_fmt_rate(tc)}</td></tr>"
        )

    body = ["<h1>Constructed languages</h1>"]
    div = (metrics or {}).get("diversity")
    if div:
        body.append(
            f"<p>Typological diversity (mean pairwise distance): <b>{div['d_mean']:.4f}</b> "
            f"over {div['n_languages']} languages.</p>"
        )
    elif metrics is not None:
        body.append("<p class=\"meta\">Diversity unavailable (fewer than two languages).</p>")
    body.append(
        "<table><tr><th>Language</th><th>Seed</th><th>Constraint</th><th>Translations</th>"
        "<th>Language consistency</th><th>Translation consistency</th></tr>"
    )
    body.extend(rows)
    body.append("</table>")
    atomic_write_text(report_dir / "index.html", _page("Constructed languages", "\n".join(body)))
    return report_dir
