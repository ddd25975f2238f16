"""Command-line surface: extract, enroll, identify, match, evaluate, gen-corpus.

All knobs are flags (no environment variables), every command is
deterministic given its inputs, and any pipeline error exits 1 with a
one-line diagnostic on standard error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import DetectorConfig, MatchConfig
from .corpus import generate_corpus, read_manifest
from .errors import EmptyGallery, GraphSiftError
from .evaluation import run_protocol
from .facegraph import FaceGraph, build_graph
from .imageio import histogram_equalize, load_image
from .matcher import REPORT_HEADER, Constraint, identify, match, report_row
from .sift import extract_features
from .store import FORMAT_VERSION, GalleryDb, export_text, load, merge, save


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0.0:
        raise argparse.ArgumentTypeError(f"{text!r} is not a positive number")
    return v


def _ratio_value(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text!r} is not in (0, 1]")
    return v


def _unit_value(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text!r} is not in [0, 1]")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} is not a positive integer")
    return v


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    d = DetectorConfig()
    p.add_argument(
        "--scales-per-octave", type=_positive_int, default=d.scales_per_octave,
        help=f"DoG layers sampled per octave (default {d.scales_per_octave})",
    )
    p.add_argument(
        "--base-sigma", type=_positive_float, default=d.base_sigma,
        help=f"blur of the pyramid base image (default {d.base_sigma})",
    )
    p.add_argument(
        "--contrast-threshold", type=_positive_float, default=d.contrast_threshold,
        help=f"minimum refined DoG response on [0,1] intensities "
        f"(default {d.contrast_threshold})",
    )
    p.add_argument(
        "--edge-ratio", type=_positive_float, default=d.edge_ratio,
        help=f"maximum principal-curvature ratio (default {d.edge_ratio})",
    )
    p.add_argument(
        "--no-double-input", action="store_true",
        help="skip the initial 2x upsampling of the input image",
    )


def _add_match_flags(p: argparse.ArgumentParser) -> None:
    m = MatchConfig()
    p.add_argument(
        "--ratio", type=_ratio_value, default=m.ratio,
        help=f"nearest/second-nearest acceptance ratio (default {m.ratio})",
    )
    p.add_argument(
        "--multipliers", type=float, nargs=3, default=list(m.multipliers),
        metavar=("M1", "M2", "M3"),
        help="weight multipliers for the 1/2/3 sigma bands "
        f"(default {' '.join(str(v) for v in m.multipliers)})",
    )
    p.add_argument(
        "--blend", type=_unit_value, default=m.blend,
        help=f"vertex share of the combined score (default {m.blend})",
    )


def _add_constraint_flag(p: argparse.ArgumentParser, allow_both: bool = False) -> None:
    choices = ["gibmc", "rpbmc"] + (["both"] if allow_both else [])
    default = "both" if allow_both else "rpbmc"
    p.add_argument(
        "--constraint", choices=choices, default=default,
        help=f"matching constraint (default {default})",
    )


def _detector_cfg(args: argparse.Namespace) -> DetectorConfig:
    return DetectorConfig(
        scales_per_octave=args.scales_per_octave,
        base_sigma=args.base_sigma,
        contrast_threshold=args.contrast_threshold,
        edge_ratio=args.edge_ratio,
        double_input=not args.no_double_input,
    )


def _match_cfg(args: argparse.Namespace) -> MatchConfig:
    m1, m2, m3 = args.multipliers
    return MatchConfig(
        ratio=args.ratio, multipliers=(m1, m2, m3), blend=args.blend
    )


def _extract_graph(
    path: Path, det: DetectorConfig, subject_id: str, image_id: str
) -> FaceGraph:
    img = histogram_equalize(load_image(path))
    return build_graph(extract_features(img, det), subject_id, image_id)


def _load_or_new_db(path: Path, det: DetectorConfig) -> GalleryDb:
    digest = det.digest()
    if path.exists():
        db = load(path)
        if db.detector_cfg_hash != digest:
            raise GraphSiftError(
                f"{path}: gallery was built with a different detector config"
            )
        return db
    return GalleryDb(detector_cfg_hash=digest, entries=())


def cmd_extract(args: argparse.Namespace) -> int:
    det = _detector_cfg(args)
    image = Path(args.image)
    subject = args.subject or image.stem
    image_id = args.image_id or image.stem
    db = _load_or_new_db(Path(args.db), det)
    graph = _extract_graph(image, det, subject, image_id)
    save(merge(db, [graph]), args.db)
    print(f"{image}: {graph.n_vertices} keypoints -> {args.db}")
    return 0


def cmd_enroll(args: argparse.Namespace) -> int:
    det = _detector_cfg(args)
    rows = [r for r in read_manifest(args.manifest) if r.role == args.role]
    if not rows:
        raise GraphSiftError(f"{args.manifest}: no rows with role {args.role!r}")
    db = _load_or_new_db(Path(args.db), det)
    graphs = []
    for row in rows:
        g = _extract_graph(row.image_path, det, row.subject_id, row.image_id)
        graphs.append(g)
        print(f"{row.image_path.name}: {g.n_vertices} keypoints")
    save(merge(db, graphs), args.db)
    print(f"enrolled {len(graphs)} images -> {args.db}")
    return 0


def cmd_identify(args: argparse.Namespace) -> int:
    det = _detector_cfg(args)
    db = load(args.db)
    if db.detector_cfg_hash != det.digest():
        raise GraphSiftError(
            f"{args.db}: gallery was built with a different detector config"
        )
    if not db.entries:
        raise EmptyGallery(f"{args.db} holds no enrolled images")
    probe_path = Path(args.probe)
    probe = _extract_graph(probe_path, det, "?", probe_path.stem)
    constraint = Constraint(args.constraint)
    ranking = identify(probe, list(db.entries), constraint, _match_cfg(args))
    if args.top > 0:
        ranking = ranking[: args.top]
    if args.csv:
        print(REPORT_HEADER)
        for subject, score in ranking:
            print(report_row(probe.image_id, subject, score))
    else:
        for rank, (subject, score) in enumerate(ranking, start=1):
            print(f"{rank}  {subject}  {score.combined:.9g}")
    return 0


def cmd_match(args: argparse.Namespace) -> int:
    det = _detector_cfg(args)
    g1 = _extract_graph(Path(args.gallery_image), det, "gallery", Path(args.gallery_image).stem)
    g2 = _extract_graph(Path(args.probe_image), det, "probe", Path(args.probe_image).stem)
    score = match(g1, g2, Constraint(args.constraint), _match_cfg(args))
    print(f"constraint: {score.constraint.value}")
    for name in (
        "vertex_raw", "edge_raw", "vertex_weighted", "edge_weighted", "combined",
    ):
        print(f"{name}: {getattr(score, name):.9g}")
    print(f"n_vertex_pairs: {score.n_vertex_pairs}")
    print(f"n_edge_pairs: {score.n_edge_pairs}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    det = _detector_cfg(args)
    mcfg = _match_cfg(args)
    rows = read_manifest(args.manifest)
    assignment = [(r.subject_id, r.group) for r in rows]

    graphs: dict[Path, FaceGraph] = {}
    for row in rows:
        if row.image_path not in graphs:
            graphs[row.image_path] = _extract_graph(
                row.image_path, det, row.subject_id, row.image_id
            )
    gallery = [graphs[r.image_path] for r in rows if r.role == "train"]
    probes = [graphs[r.image_path] for r in rows if r.role == "test"]

    constraints = (
        [Constraint.GIBMC, Constraint.RPBMC]
        if args.constraint == "both"
        else [Constraint(args.constraint)]
    )
    out = Path(args.out)
    summary = []
    for constraint in constraints:
        result = run_protocol(
            gallery, probes, assignment, constraint, mcfg, out / constraint.value
        )
        line = (
            f"{constraint.value}: average prior EER "
            f"{100.0 * result.average_eer:.2f}% "
            f"(G1 {100.0 * result.eer['G1']:.2f}%, "
            f"G2 {100.0 * result.eer['G2']:.2f}%)"
        )
        summary.append(line)
        print(line)
    (out / "report.txt").write_text("\n".join(summary) + "\n")
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    if args.subjects < 2:
        raise GraphSiftError(f"need at least 2 subjects, got {args.subjects}")
    manifest = generate_corpus(
        args.out,
        seed=args.seed,
        n_subjects=args.subjects,
        images_per_subject=args.images,
        size=args.size,
    )
    print(f"wrote {args.subjects * args.images} images, manifest {manifest}")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    export_text(load(args.db), args.out)
    print(f"exported {args.db} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphsift",
        description="Keypoint-graph face identification toolkit "
        f"(gallery format v{FORMAT_VERSION}).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract one image into a gallery db")
    p.add_argument("image", help="input image (binary PGM, or 8-bit gray PNG)")
    p.add_argument("--db", required=True, help="gallery db to create or extend")
    p.add_argument("--subject", help="subject id (default: image stem)")
    p.add_argument("--image-id", help="image id (default: image stem)")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("enroll", help="batch-extract manifest rows into a db")
    p.add_argument("manifest", help="corpus manifest CSV")
    p.add_argument("--db", required=True)
    p.add_argument("--role", default="train", choices=["train", "test"],
                   help="manifest role to enroll (default train)")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("identify", help="rank gallery subjects for a probe")
    p.add_argument("probe", help="probe image")
    p.add_argument("--db", required=True)
    p.add_argument("--top", type=int, default=0, help="print only the best N")
    p.add_argument("--csv", action="store_true", help="machine-readable output")
    _add_detector_flags(p)
    _add_match_flags(p)
    _add_constraint_flag(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("match", help="score one gallery/probe image pair")
    p.add_argument("gallery_image")
    p.add_argument("probe_image")
    _add_detector_flags(p)
    _add_match_flags(p)
    _add_constraint_flag(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="two-group verification protocol")
    p.add_argument("manifest", help="corpus manifest CSV")
    p.add_argument("--out", required=True, help="output directory for reports")
    _add_detector_flags(p)
    _add_match_flags(p)
    _add_constraint_flag(p, allow_both=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--images", type=_positive_int, default=4,
                   help="images per subject (default 4)")
    p.add_argument("--size", type=_positive_int, default=128)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("export", help="dump a gallery db as text")
    p.add_argument("db")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (GraphSiftError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
