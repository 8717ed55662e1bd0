"""Self-contained HTML rendering of dual explanations (inline SVG, no external assets)."""

from __future__ import annotations

import html
from dataclasses import dataclass

from .data import RecordPair, tokens_of
from .explain import DualExplanation, Explanation
from .interpretable import LOC_NAME, LOC_VALUE

BAR_HEIGHT = 22
BAR_GAP = 10
PANEL_WIDTH = 640
LABEL_WIDTH = 220
POSITIVE_COLOR = "#2e7d32"
NEGATIVE_COLOR = "#c62828"
POTENTIAL_COLOR = "#9e9e9e"
HIGHLIGHT_STYLE = "background:#fff59d;border-radius:2px;padding:0 2px;"

_PAGE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Match explanation {pair_id}</title>
<style>
body {{ font-family: sans-serif; margin: 2em; color: #222; }}
h1 {{ font-size: 1.3em; }}
h2 {{ font-size: 1.05em; margin-bottom: 0.3em; }}
table.record {{ border-collapse: collapse; margin: 0.6em 0 1.2em 0; font-size: 0.9em; }}
table.record td {{ border: 1px solid #ddd; padding: 4px 8px; vertical-align: top; }}
td.attr {{ font-weight: bold; white-space: nowrap; }}
.panel {{ margin-bottom: 2.5em; }}
.meta {{ color: #555; font-size: 0.9em; }}
</style>
</head>
<body>
<h1>Match explanation for pair {pair_id}</h1>
<p class="meta">matcher score {score} &middot; threshold {threshold} &middot; predicted {label}</p>
{panels}
</body>
</html>
"""


@dataclass
class RenderedExplanation:
    html: str
    summary: str


def _scale(e: Explanation) -> float:
    extent = 0.0
    for entry in e.entries:
        extent = max(extent, abs(entry.w), abs(entry.w + entry.p))
    return extent if extent > 0 else 1.0


def _bar_svg(e: Explanation) -> str:
    entries = sorted(e.entries, key=lambda en: -(abs(en.w) + abs(en.p)))
    n = len(entries)
    height = n * (BAR_HEIGHT + BAR_GAP) + BAR_GAP
    half = (PANEL_WIDTH - LABEL_WIDTH) / 2
    zero_x = LABEL_WIDTH + half
    scale = half / _scale(e)
    parts = [
        f'<svg width="{PANEL_WIDTH}" height="{height}" role="img">',
        f'<line x1="{zero_x}" y1="0" x2="{zero_x}" y2="{height}" stroke="#bbb"/>',
    ]
    for row, entry in enumerate(entries):
        y = BAR_GAP + row * (BAR_HEIGHT + BAR_GAP)
        label = _feature_label(e, entry)
        w_px = entry.w * scale
        color = POSITIVE_COLOR if entry.w >= 0 else NEGATIVE_COLOR
        x = zero_x if entry.w >= 0 else zero_x + w_px
        parts.append(
            f'<rect x="{x:.2f}" y="{y}" width="{abs(w_px):.2f}" height="{BAR_HEIGHT}" fill="{color}"/>'
        )
        # potential extension: gray band from w to w + p
        if entry.p != 0:
            lo = min(entry.w, entry.w + entry.p)
            hi = max(entry.w, entry.w + entry.p)
            parts.append(
                f'<rect x="{zero_x + lo * scale:.2f}" y="{y + 4}" width="{(hi - lo) * scale:.2f}" '
                f'height="{BAR_HEIGHT - 8}" fill="{POTENTIAL_COLOR}" fill-opacity="0.8"/>'
            )
        parts.append(
            f'<text x="4" y="{y + BAR_HEIGHT - 6}" font-size="12">{html.escape(label)}</text>'
        )
        parts.append(
            f'<text x="{zero_x + (half if entry.w >= 0 else -half)}" y="{y + BAR_HEIGHT - 6}" '
            f'font-size="11" text-anchor="{"end" if entry.w >= 0 else "start"}">'
            f"w={entry.w:+.3f} p={entry.p:+.3f}</text>"
        )
    parts.append("</svg>")
    return "".join(parts)


def _feature_label(e: Explanation, entry) -> str:
    f = entry.feature
    record = e.space.pair.side(f.side) if e.space else None
    if f.attribute_index < 0:
        return "(whole record)"
    name = record.attributes[f.attribute_index][0] if record else str(f.attribute_index)
    toks = e.space.feature_tokens(f) if e.space else ()
    text = " ".join(toks)
    if len(text) > 32:
        text = text[:29] + "..."
    prefix = f"{f.side}.{name}"
    if f.location == LOC_NAME:
        prefix += " (name)"
    return f"{prefix}: {text}" if text else prefix


def _highlight_spans(e: Explanation) -> dict[tuple[str, int], set[int]]:
    spans: dict[tuple[str, int], set[int]] = {}
    for entry in e.entries:
        f = entry.feature
        if f.location != LOC_VALUE or f.attribute_index < 0:
            continue
        spans.setdefault((f.side, f.attribute_index), set()).update(
            range(f.token_start, f.token_start + f.token_length)
        )
    return spans


def _record_table(pair: RecordPair, side: str, spans: dict[tuple[str, int], set[int]]) -> str:
    record = pair.side(side)
    rows = []
    for idx, (name, value) in enumerate(record.attributes):
        marked = spans.get((side, idx), set())
        toks = tokens_of(value)
        if toks and marked:
            rendered = " ".join(
                f'<mark style="{HIGHLIGHT_STYLE}">{html.escape(t)}</mark>' if i in marked else html.escape(t)
                for i, t in enumerate(toks)
            )
        elif value is None:
            rendered = "<em>null</em>"
        else:
            rendered = html.escape(" ".join(toks)) if toks else ""
        rows.append(f'<tr><td class="attr">{html.escape(name)}</td><td>{rendered}</td></tr>')
    return f'<table class="record">{"".join(rows)}</table>'


def _panel(e: Explanation, pair: RecordPair) -> str:
    spans = _highlight_spans(e)
    title = {"a": "Record a", "b": "Record b", "ab": "Both records (joint)"}[e.side]
    body = [f'<div class="panel"><h2>{title} &mdash; granularity {e.granularity} tokens</h2>']
    body.append(
        f'<p class="meta">k_g={e.k_g}, predicted CFS={e.cfs_hat:.3f}, actual CFS={e.cfs_actual:.3f}</p>'
    )
    body.append(_bar_svg(e))
    sides = ["a", "b"] if e.side == "ab" else [e.side]
    for s in sides:
        body.append(f"<h2>Record {s}</h2>")
        body.append(_record_table(pair, s, spans))
    body.append("</div>")
    return "".join(body)


def render(dual: DualExplanation, pair: RecordPair) -> RenderedExplanation:
    """Render a dual explanation as one self-contained HTML document."""
    first = dual.for_a
    label = "match" if first.is_match else "non-match"
    panels = "".join(_panel(e, pair) for e in dual.sides)
    page = _PAGE.format(
        pair_id=html.escape(dual.pair_id or "(unnamed)"),
        score=f"{first.f_x:.4f}",
        threshold=f"{first.threshold:.2f}",
        label=label,
        panels=panels,
    )
    top = []
    for e in dual.sides:
        names = ", ".join(_feature_label(e, entry) for entry in e.entries[:3])
        top.append(f"side {e.side}: {names}")
    summary = f"pair {dual.pair_id}: predicted {label} (score {first.f_x:.3f}); " + "; ".join(top)
    return RenderedExplanation(page, summary)
