"""Command-line surface.

Subcommands cover the full pipeline: synthesize corpora, segment single
images, build reference sets, score and threshold individual inputs, and
run the evaluation harness. Verdicts double as exit codes (0 in-dist, 1
OOD) so the detector composes in shell pipelines; errors print a JSON
object on stderr and exit 2 (usage) or 3 (data).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import OiddError
from .evalharness import (
    CLASS_COLORS,
    ExperimentConfig,
    SynthSpec,
    calibrate_epsilon,
    generate_synthetic,
    report_to_json_dict,
    rows_to_csv,
    run_experiment,
)
from .felzseg import CenterParams, FelzParams, n_r
from .odinprep import OdinParams, baseline_score, load_classifier, odin_score
from .refdetect import (
    LabeledCorpus,
    build_reference_set,
    detect_alg3,
    load_reference_set,
    save_reference_set,
)
from .segscore import FileSegmapBackend, bls, ods
from .ssim import SsimParams
from .tensorio import (
    binary_map_to_tensor,
    read_image,
    segmap_to_tensor,
    write_binary_map_pgm,
    write_image,
    write_tensor,
)
from .toyseg import ToySegmenter

DETECTOR_CHOICES = ("bls", "ods", "ssim", "baseline", "odin")


def _felz_from(d: dict) -> tuple[FelzParams, CenterParams]:
    fp = FelzParams(
        k=float(d.get("k", 100.0)),
        min_size=int(d.get("min_size", 5)),
        smoothing_sigma=float(d.get("smoothing_sigma", 0.0)),
    )
    cp = CenterParams(
        rho=float(d.get("rho", 0.6)),
        drop_border_touching=bool(d.get("drop_border_touching", True)),
    )
    return fp, cp


def _ssim_from(d: dict) -> SsimParams:
    return SsimParams(
        window=int(d.get("window", 7)),
        k1=float(d.get("k1", 0.01)),
        k2=float(d.get("k2", 0.03)),
        dynamic_range=float(d.get("dynamic_range", 1.0)),
    )


def _toy_from(d: dict) -> ToySegmenter:
    protos = np.asarray(d.get("prototypes", CLASS_COLORS), dtype=np.float64)
    return ToySegmenter(
        protos,
        float(d.get("sharpness", 25.0)),
        float(d.get("background_floor", 0.35)),
    )


def _load_params(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _synth_spec_from(d: dict) -> SynthSpec:
    kwargs = {}
    for key in (
        "num_classes",
        "side",
        "per_split",
        "shapes_per_class",
        "noise",
        "seed",
    ):
        if key in d:
            kwargs[key] = d[key]
    for key in ("backgrounds_a", "backgrounds_b"):
        if key in d:
            kwargs[key] = tuple(tuple(c) for c in d[key])
    return SynthSpec(**kwargs)


def _cmd_synth(args) -> int:
    spec = _synth_spec_from(_load_params(args.spec))
    data = generate_synthetic(spec)
    out = Path(args.out)
    manifest: dict = {"spec": asdict(spec), "splits": {}}
    for name, split in data.items():
        (out / name).mkdir(parents=True, exist_ok=True)
        entries = []
        for i, ((img, label), mask, tag) in enumerate(
            zip(split.corpus.items, split.masks, split.tags)
        ):
            img_rel = f"{name}/img_{i:05d}.ppm"
            mask_rel = f"{name}/mask_{i:05d}.pgm"
            write_image(out / img_rel, img)
            write_binary_map_pgm(out / mask_rel, mask)
            entries.append(
                {"image": img_rel, "mask": mask_rel, "label": label, "tag": tag}
            )
        manifest["splits"][name] = entries
    (out / "labels.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {sum(len(v) for v in manifest['splits'].values())} images to {out}")
    return 0


def _cmd_segment(args) -> int:
    img = read_image(args.input)
    params = _load_params(args.params)
    if args.method == "felz":
        fp, cp = _felz_from(params)
        tensor = binary_map_to_tensor(n_r(img, fp, cp))
    elif args.method == "toy":
        tensor = segmap_to_tensor(_toy_from(params).segment(img))
    else:
        backend = FileSegmapBackend(params["path"], int(params["num_classes"]))
        tensor = segmap_to_tensor(backend.segment(img))
    write_tensor(args.out, tensor)
    return 0


def _cmd_refset(args) -> int:
    params = _load_params(args.params)
    fp, cp = _felz_from(params.get("felz_params", {}))
    sp = _ssim_from(params.get("ssim_params", {}))
    corpus_dir = Path(args.corpus)
    manifest = json.loads((corpus_dir / "labels.json").read_text())
    entries = manifest["splits"][args.split]
    items = tuple(
        (read_image(corpus_dir / e["image"]), int(e["label"])) for e in entries
    )
    refset = build_reference_set(
        LabeledCorpus(items), lambda x: n_r(x, fp, cp), args.seed
    )
    save_reference_set(refset, args.out, sp, fp, cp)
    print(f"wrote {len(refset.entries)} reference maps to {args.out}")
    return 0


def _score_one(detector: str, image_path: str, params: dict) -> dict:
    img = read_image(image_path)
    if detector in ("bls", "ods"):
        seg_cfg = params.get("segmenter", {})
        if seg_cfg.get("method", "toy") == "file":
            backend = FileSegmapBackend(seg_cfg["path"], int(seg_cfg["num_classes"]))
        else:
            backend = _toy_from(seg_cfg)
        if detector == "bls":
            return {"score": bls(backend.segment(img)).value}
        clf = load_classifier(params["classifier"])
        od = params.get("odin", {})
        op = OdinParams(float(od.get("zeta", 0.0014)), float(od.get("temp", 1000.0)))
        return {"score": ods(img, clf, backend, op.zeta, op.temp).value}
    if detector == "ssim":
        refset, sp, fp, cp = load_reference_set(params["refset"])
        _, score, nearest = detect_alg3(img, lambda x: n_r(x, fp, cp), refset, sp, 0.0)
        return {"score": score.value, "nearest": nearest}
    clf = load_classifier(params["classifier"])
    if detector == "baseline":
        return {"score": baseline_score(img, clf).value}
    od = params.get("odin", {})
    op = OdinParams(float(od.get("zeta", 0.0014)), float(od.get("temp", 1000.0)))
    return {"score": odin_score(img, clf, op).value}


def _cmd_score(args) -> int:
    result = _score_one(args.detector, args.input, _load_params(args.params))
    print(repr(result["score"]))
    return 0


def _calibration_images(root: Path, split: str) -> list[Path]:
    if (root / "labels.json").exists():
        manifest = json.loads((root / "labels.json").read_text())
        return [root / e["image"] for e in manifest["splits"][split]]
    return sorted(root.glob("*.ppm"))


def _cmd_calibrate(args) -> int:
    params = _load_params(args.params)
    images = _calibration_images(Path(args.in_dist), args.split)
    scores = [_score_one(args.detector, str(p), params)["score"] for p in images]
    eps = calibrate_epsilon(scores, args.target_tpr)
    print(repr(eps))
    return 0


def _cmd_detect(args) -> int:
    if not (0.0 <= args.epsilon <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {args.epsilon}")
    result = _score_one(args.detector, args.input, _load_params(args.params))
    verdict = 1 if result["score"] < args.epsilon else 0
    out = {
        "detector": args.detector,
        "score": result["score"],
        "epsilon": args.epsilon,
        "verdict": verdict,
    }
    if "nearest" in result:
        out["nearest"] = result["nearest"]
    print(json.dumps(out))
    return verdict


def _experiment_config_from(d: dict) -> ExperimentConfig:
    kwargs = {}
    if "detectors" in d:
        kwargs["detectors"] = tuple(d["detectors"])
    if "splits" in d:
        kwargs["splits"] = tuple(d["splits"])
    if "synth" in d:
        kwargs["synth"] = _synth_spec_from(d["synth"])
    if "felz_params" in d:
        fp, cp = _felz_from(d["felz_params"])
        kwargs["felz"], kwargs["center"] = fp, cp
    if "ssim_params" in d:
        kwargs["ssim"] = _ssim_from(d["ssim_params"])
    if "odin" in d:
        od = d["odin"]
        kwargs["odin"] = OdinParams(
            float(od.get("zeta", 0.0014)), float(od.get("temp", 1000.0))
        )
    for key in ("sharpness", "background_floor", "refset_seed", "target_tpr"):
        if key in d:
            kwargs[key] = d[key]
    return ExperimentConfig(**kwargs)


def _cmd_eval(args) -> int:
    cfg = _experiment_config_from(_load_params(args.config))
    output = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "samples.csv").write_text(rows_to_csv(output.rows))
    for (det, split), report in output.reports.items():
        stem = f"{det.replace('-', '_')}_{split}"
        (out / f"report_{stem}.json").write_text(
            json.dumps(report_to_json_dict(det, split, report), indent=2) + "\n"
        )
        roc_lines = ["fpr,tpr"]
        roc_lines.extend(f"{f!r},{t!r}" for f, t in report.roc)
        (out / f"roc_{stem}.csv").write_text("\n".join(roc_lines) + "\n")
    print(f"wrote {len(output.reports)} reports to {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oidd", description="out-of-intended-distribution detection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    p.add_argument("--spec", help="SynthSpec JSON; defaults apply when omitted")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("segment", help="segment one image to an OIDT tensor")
    p.add_argument("--method", choices=("felz", "toy", "file"), required=True)
    p.add_argument("--params", help="method parameter JSON")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_segment)

    p = sub.add_parser("refset", help="reference set operations")
    refsub = p.add_subparsers(dest="refset_command", required=True)
    b = refsub.add_parser("build", help="sample one reference map per class")
    b.add_argument("--corpus", required=True, help="synth output directory")
    b.add_argument("--split", default="in_dist_train")
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--params", help="felz_params/ssim_params JSON")
    b.add_argument("--out", required=True)
    b.set_defaults(fn=_cmd_refset)

    p = sub.add_parser("score", help="print a detector score for one image")
    p.add_argument("--detector", choices=DETECTOR_CHOICES, required=True)
    p.add_argument("--params", help="detector parameter JSON")
    p.add_argument("input")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("calibrate", help="pick epsilon at a target TPR")
    p.add_argument("--detector", choices=DETECTOR_CHOICES, required=True)
    p.add_argument("--in-dist", dest="in_dist", required=True)
    p.add_argument("--split", default="in_dist_train")
    p.add_argument("--target-tpr", dest="target_tpr", type=float, default=0.95)
    p.add_argument("--params", help="detector parameter JSON")
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("detect", help="threshold a score; exit 1 when OOD")
    p.add_argument("--detector", choices=DETECTOR_CHOICES, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--params", help="detector parameter JSON")
    p.add_argument("input")
    p.set_defaults(fn=_cmd_detect)

    p = sub.add_parser("eval", help="run detectors against corpus splits")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except OiddError as e:
        json.dump({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        json.dump({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
