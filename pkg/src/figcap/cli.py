"""Batch driver: every stage of the toolkit as a subcommand.

Paths are resolved against --root; outputs are written atomically so reruns
over unchanged inputs are byte-identical. A flat key=value config file can
preset any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import cv2
import numpy as np

from . import evaluate, features, hocr, mining, pipeline, rects, synth
from .geometry import Box

log = logging.getLogger("figcap")


def _atomic_write(path: Path, data: bytes | str):
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    cfg = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _run_parallel(jobs: int, func, items):
    if jobs <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def cmd_ingest(args) -> int:
    root = Path(args.root)
    in_dir = root / args.input
    out_dir = root / args.output
    files = sorted(in_dir.glob("*.hocr")) + sorted(in_dir.glob("*.html"))
    if not files:
        print("no inputs", file=sys.stderr)
        return 1
    failures = []
    warn_dropped = 0

    def one(path: Path):
        nonlocal warn_dropped
        try:
            page = hocr.parse_hocr(path.read_bytes(), source_id=path.stem)
        except (hocr.MalformedDocument, hocr.MissingPageElement) as exc:
            failures.append((path.name, str(exc)))
            return
        warn_dropped += page.dropped_words
        _atomic_write(out_dir / f"{path.stem}.json", hocr.page_to_json(page))

    _run_parallel(args.jobs, one, files)
    print(f"ingested {len(files) - len(failures)}/{len(files)} pages, "
          f"{warn_dropped} words dropped, {len(failures)} failures")
    for name, err in failures:
        print(f"  FAILED {name}: {err}", file=sys.stderr)
    return 1 if len(failures) == len(files) else 0


def _load_page(path: Path) -> hocr.Page:
    return hocr.page_from_json(path.read_text())


def cmd_features(args) -> int:
    root = Path(args.root)
    pages_dir, images_dir, out_dir = root / args.pages, root / args.images, root / args.output
    channels = tuple(args.channels.split(","))
    for cid in channels:
        if cid not in features.CHANNEL_IDS:
            print(f"unknown channel {cid!r}; valid: {','.join(features.CHANNEL_IDS)}",
                  file=sys.stderr)
            return 2
    page_files = sorted(pages_dir.glob("*.json"))
    if not page_files:
        print("no inputs", file=sys.stderr)
        return 1

    def one(path: Path):
        page = _load_page(path)
        gray = None
        if "gs" in channels:
            img_path = images_dir / f"{path.stem}.png"
            gray = cv2.imread(str(img_path), cv2.IMREAD_GRAYSCALE)
            if gray is None:
                raise FileNotFoundError(img_path)
        stack = features.rasterize(page, gray, channels)
        _atomic_write(out_dir / f"{path.stem}.fstk", features.write_fstk(stack))
        if args.png_dump:
            for cid, plane in stack.channels:
                ok, buf = cv2.imencode(".png", plane)
                _atomic_write(out_dir / f"{path.stem}.{cid}.png", buf.tobytes())

    _run_parallel(args.jobs, one, page_files)
    print(f"wrote {len(page_files)} stacks ({len(channels)} channels)")
    return 0


def cmd_rects(args) -> int:
    root = Path(args.root)
    pages_dir, images_dir, out_dir = root / args.pages, root / args.images, root / args.output
    page_files = sorted(pages_dir.glob("*.json"))
    if not page_files:
        print("no inputs", file=sys.stderr)
        return 1

    def one(path: Path):
        page = _load_page(path)
        gray = cv2.imread(str(images_dir / f"{path.stem}.png"), cv2.IMREAD_GRAYSCALE)
        if gray is None:
            raise FileNotFoundError(images_dir / f"{path.stem}.png")
        cands = rects.propose(gray, page.words, page.width_px, page.height_px)
        doc = [{"bbox": c.box.as_list(), "source_filter": c.source_filter} for c in cands]
        _atomic_write(out_dir / f"{path.stem}.json", json.dumps(doc, indent=1))

    _run_parallel(args.jobs, one, page_files)
    print(f"proposed rectangles for {len(page_files)} pages")
    return 0


def _read_detections(path: Path) -> list[pipeline.Detection]:
    doc = json.loads(path.read_text())
    return [
        pipeline.Detection(
            box=Box(*d["bbox"]), cls=d["class"], score=d.get("score", 1.0),
            origin=d.get("origin", "model"),
        )
        for d in doc
    ]


def _read_rects(path: Path) -> list[rects.RectCandidate]:
    doc = json.loads(path.read_text())
    return [
        rects.RectCandidate(box=Box(*r["bbox"]), source_filter=r.get("source_filter", ""))
        for r in doc
    ]


def cmd_pipeline(args) -> int:
    root = Path(args.root)
    pages_dir = root / args.pages
    det_dir = root / args.detections
    out_dir = root / args.output
    mined_dir = root / args.mined if args.mined else None
    rects_dir = root / args.rects if args.rects else None
    cfg = pipeline.PipelineConfig(last_step=args.last_step)
    page_files = sorted(pages_dir.glob("*.json"))
    if not page_files:
        print("no inputs", file=sys.stderr)
        return 1

    def one(path: Path):
        page = _load_page(path)
        raw = _read_detections(det_dir / path.name) if (det_dir / path.name).exists() else []
        if args.rects_as_figures and rects_dir and (rects_dir / path.name).exists():
            raw += [
                pipeline.Detection(box=r.box, cls="figure", score=1.0, origin="heuristic")
                for r in _read_rects(rects_dir / path.name)
            ]
        mined = []
        if mined_dir and (mined_dir / path.name).exists():
            mined = mining.parse_pdffigures2((mined_dir / path.name).read_text())
        rect_list = []
        if rects_dir and (rects_dir / path.name).exists():
            rect_list = _read_rects(rects_dir / path.name)
        out = pipeline.run_pipeline(raw, page, mined, rect_list, cfg)
        if cfg.last_step >= 8:
            doc = [
                {
                    "figure": {"bbox": p.figure.box.as_list()},
                    "caption": {"bbox": p.caption.box.as_list()} if p.caption else None,
                }
                for p in out.pairs
            ]
        else:
            doc = [
                {"bbox": d.box.as_list(), "class": d.cls, "score": d.score}
                for d in out.detections
            ]
        _atomic_write(out_dir / path.name, json.dumps(doc, indent=1))
        if args.trace:
            for step, dets in out.snapshots.items():
                snap = [
                    {"bbox": d.box.as_list(), "class": d.cls, "score": d.score}
                    for d in dets
                ]
                _atomic_write(out_dir / f"{path.stem}.step{step}.json", json.dumps(snap, indent=1))

    _run_parallel(args.jobs, one, page_files)
    print(f"post-processed {len(page_files)} pages (steps 1..{cfg.last_step})")
    return 0


def _results_to_founds(path: Path, page_id: str) -> list[evaluate.ScoredBox]:
    doc = json.loads(path.read_text())
    founds = []
    for item in doc:
        if "figure" in item:  # paired-result schema
            founds.append(evaluate.ScoredBox(
                box=Box(*item["figure"]["bbox"]), cls="figure", page_id=page_id))
            if item.get("caption"):
                founds.append(evaluate.ScoredBox(
                    box=Box(*item["caption"]["bbox"]), cls="figure_caption", page_id=page_id))
        else:  # raw detection schema
            founds.append(evaluate.ScoredBox(
                box=Box(*item["bbox"]), cls=item["class"],
                score=item.get("score", 1.0), page_id=page_id))
    return founds


def cmd_eval(args) -> int:
    root = Path(args.root)
    results_dir = root / args.results
    truths_dir = root / args.truths
    out_dir = root / args.output
    if not truths_dir.exists():
        print(f"missing truth directory {truths_dir}", file=sys.stderr)
        return 2
    truths: list[evaluate.GroundTruth] = []
    founds: list[evaluate.ScoredBox] = []
    for path in sorted(results_dir.glob("*.json")):
        truth_path = truths_dir / path.name
        if not truth_path.exists():
            print(f"missing truth file {truth_path}", file=sys.stderr)
            return 2
        founds.extend(_results_to_founds(path, path.stem))
        truths.extend(evaluate.truths_from_json(truth_path.read_text(), page_id=path.stem))
    years = None
    if args.meta:
        years = {}
        with open(root / args.meta, newline="") as fh:
            for row in csv.DictReader(fh):
                years[row["page_id"]] = int(row["year"]) if row.get("year") else None
    thresholds = tuple(float(t) for t in args.thresholds.split(","))
    rep = evaluate.report(truths, founds, thresholds, years)
    _atomic_write(out_dir / "report.json", rep.to_json())
    _atomic_write(out_dir / "report.csv", rep.to_csv())
    if args.cutoff_analysis:
        pairs = []
        for cls in ("figure", "figure_caption"):
            for rec in evaluate.match(
                [t for t in truths if t.cls == cls],
                [f for f in founds if f.cls == cls],
                0.0 + 1e-9,
            ):
                if rec.outcome == "TP":
                    pairs.append((rec.truth.box, rec.found.box))
        try:
            analysis = evaluate.excess_lost_analysis(pairs)
        except evaluate.NoCompliantPairs:
            print("cutoff analysis: no compliant pairs", file=sys.stderr)
            return 1
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["iou", "excess_frac", "lost_frac"])
        writer.writerows(analysis.rows)
        _atomic_write(out_dir / "cutoff_distribution.csv", buf.getvalue())
        print(f"derived IOU cutoff: {analysis.cutoff:.3f} "
              f"({analysis.n_compliant}/{analysis.n_pairs} compliant pairs)")
    print(f"evaluated {len(founds)} detections against {len(truths)} truths")
    return 0


def cmd_parsability(args) -> int:
    root = Path(args.root)
    years: dict[str, int | None] = {}
    tools: dict[str, str] = {}
    with open(root / args.meta, newline="") as fh:
        for row in csv.DictReader(fh):
            years[row["article_id"]] = int(row["year"]) if row.get("year") else None
    verdicts = []
    for tool_dir in args.miners:
        tool = Path(tool_dir).name
        for path in sorted((root / tool_dir).glob("*.json")):
            objs = mining.parse_pdffigures2(path.read_text(), dpi_effective=args.dpi)
            article_id = path.stem
            verdicts.append(mining.article_parsability(article_id, objs))
            tools[article_id] = tool
    rows = mining.corpus_report(verdicts, years, tools)
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["decade", "tool", "articles",
                         "pct_figures_parsable", "pct_tables_parsable"])
    writer.writeheader()
    writer.writerows(rows)
    _atomic_write(root / args.output, buf.getvalue())
    print(f"parsability over {len(verdicts)} articles -> {args.output}")
    return 0


def cmd_synth(args) -> int:
    root = Path(args.root)
    out = root / args.output
    for sp in synth.make_corpus(args.pages, seed=args.seed):
        sid = sp.page.source_id
        _atomic_write(out / "pages" / f"{sid}.json", hocr.page_to_json(sp.page))
        ok, buf = cv2.imencode(".png", sp.image)
        _atomic_write(out / "images" / f"{sid}.png", buf.tobytes())
        truth_doc = [{"bbox": t.box.as_list(), "class": t.cls} for t in sp.truths]
        _atomic_write(out / "truths" / f"{sid}.json", json.dumps(truth_doc, indent=1))
    print(f"generated {args.pages} synthetic pages under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figcap", description=__doc__)
    parser.add_argument("--root", default=".", help="base directory for all paths")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="hOCR files -> canonical page JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="page JSON + images -> FSTK stacks")
    p.add_argument("--pages", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--channels", default=",".join(features.M12_CHANNELS))
    p.add_argument("--png-dump", action="store_true")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("rects", help="heuristic rectangle proposals")
    p.add_argument("--pages", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_rects)

    p = sub.add_parser("pipeline", help="post-process detections into pairs")
    p.add_argument("--pages", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mined")
    p.add_argument("--rects")
    p.add_argument("--rects-as-figures", action="store_true",
                   help="seed raw figure detections from the rects directory")
    p.add_argument("--last-step", type=int, default=10)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("eval", help="score results against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--truths", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--meta", help="CSV with page_id,year columns")
    p.add_argument("--thresholds", default="0.1,0.6,0.8,0.9")
    p.add_argument("--cutoff-analysis", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("parsability", help="miner JSON -> per-decade parsability CSV")
    p.add_argument("--meta", required=True, help="CSV with article_id,year columns")
    p.add_argument("--output", required=True)
    p.add_argument("--dpi", type=int, default=300)
    p.add_argument("miners", nargs="+", help="one directory of miner JSON per tool")
    p.set_defaults(func=cmd_parsability)

    p = sub.add_parser("synth", help="generate a synthetic fixture corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--pages", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    file_cfg = _load_config(args.config)
    for key, value in file_cfg.items():
        if hasattr(args, key) and parser.get_default(key) == getattr(args, key):
            current = getattr(args, key)
            if isinstance(current, bool):
                value = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(value)
            setattr(args, key, value)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
