"""Command-line front end: gen-data, explain, evaluate, sanity, compare.

Every command is a deterministic function of its resolved configuration and
input files; outputs embed the config hash and seed, and no output contains
wall-clock state, so reruns are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import arrayio, datagen, manifests, metrics
from .attribution import METHOD_IDS, AttributionConfig, batch_explainer
from .config import config_dict, config_hash, load_config
from .errors import ConfigError, DataError, NumericError, ToolkitError
from .refnet import RefNet
from .sanity import run_sanity_checks, write_sanity_csv, write_sanity_json
from .stats import (
    TestResult,
    benjamini_hochberg,
    bootstrap_power,
    cliffs_delta,
    eta_squared,
    kruskal_wallis,
    mann_whitney_u,
    rank_groups,
)

log = logging.getLogger("attrkit")


def _provenance(cfg) -> str:
    return f"config_hash={config_hash(cfg)} seed={cfg.seed}"


def _write_run_summary(out_dir: Path, cfg, outputs: list[str], counts: dict) -> None:
    payload = {
        "command": cfg.command,
        "config": config_dict(cfg),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "outputs": sorted(outputs),
        "counts": counts,
    }
    (out_dir / "run_summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# gen-data


def cmd_gen_data(cfg) -> int:
    out = _out_dir(cfg)
    (out / "images").mkdir(exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    samples = datagen.generate_dataset(cfg.seed, cfg.n_images, cfg.height, cfg.width, cfg.signal_area_fraction)
    records = []
    for sample in samples:
        image_rel = f"images/{sample.image_id}.npy"
        mask_rel = f"masks/{sample.image_id}.npy"
        arrayio.write_array(out / image_rel, sample.image)
        arrayio.write_array(out / mask_rel, sample.mask)
        records.append(
            {
                "image_id": sample.image_id,
                "image_path": image_rel,
                "mask_path": mask_rel,
                "label": sample.label,
                "split": sample.split,
            }
        )
    arrayio.save_dataset_manifest(
        out / "manifest.json",
        records,
        extra={"config_hash": config_hash(cfg), "seed": cfg.seed},
    )
    _write_run_summary(out, cfg, ["manifest.json", "images/", "masks/"], {"images": len(records)})
    log.info("gen-data: wrote %d samples to %s", len(records), out)
    return 0


# ---------------------------------------------------------------------------
# explain


def _load_model(cfg, input_shape: tuple[int, int, int], classes: int):
    if cfg.model:
        model = RefNet.load(cfg.model)
        if model.input_shape != input_shape:
            raise DataError(
                f"model input shape {model.input_shape} does not match dataset images {input_shape}"
            )
        model_id = getattr(cfg, "model_id", "") or f"refnet-s{model.seed}"
        return model, model_id
    model = RefNet.init(cfg.model_seed, input_shape=input_shape, classes=classes)
    model_id = getattr(cfg, "model_id", "") or f"refnet-s{cfg.model_seed}"
    return model, model_id


def _load_split(cfg):
    if not cfg.dataset_manifest:
        raise ConfigError(f"{cfg.command}: dataset_manifest is required")
    records = arrayio.load_dataset_manifest(cfg.dataset_manifest)
    records = [r for r in records if r.split == cfg.split] if hasattr(cfg, "split") else records
    if not records:
        raise DataError(f"no records in split {getattr(cfg, 'split', '?')!r}")
    images = [arrayio.read_array(r.image_path, "image") for r in records]
    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise DataError(f"dataset images disagree on shape: {sorted(shapes)}")
    return records, images


def _run_method(model, method_id, images, targets, attr_cfg: AttributionConfig, jobs: int):
    explain = batch_explainer(method_id, attr_cfg)
    if method_id == "feature_permutation" or jobs <= 1 or len(images) < 2:
        return explain(model, images, targets)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(explain, model, [img], [t], [i])
            for i, (img, t) in enumerate(zip(images, targets))
        ]
        return [f.result()[0] for f in futures]


def cmd_explain(cfg) -> int:
    records, images = _load_split(cfg)
    classes = max(2, max(r.label for r in records) + 1)
    model, model_id = _load_model(cfg, images[0].shape, classes)
    targets = [r.label for r in records]
    attr_cfg = AttributionConfig(
        ig_steps=cfg.ig_steps,
        gs_samples=cfg.gs_samples,
        gs_noise_std=cfg.gs_noise_std,
        fp_patch=cfg.fp_patch,
        fp_repeats=cfg.fp_repeats,
        seed=cfg.seed,
    )
    out = _out_dir(cfg)
    (out / "heatmaps").mkdir(exist_ok=True)
    entries = []
    for method_id in cfg.methods:
        heatmaps = _run_method(model, method_id, images, targets, attr_cfg, cfg.jobs)
        for record, target, heatmap in zip(records, targets, heatmaps):
            rel = f"heatmaps/{record.image_id}.{method_id}.npy"
            arrayio.write_array(out / rel, heatmap)
            entries.append(
                {
                    "image_id": record.image_id,
                    "method": method_id,
                    "heatmap_path": rel,
                    "target": target,
                }
            )
        log.info("explain: %s done (%d heatmaps)", method_id, len(heatmaps))
    manifests.write_explain_manifest(
        out / "manifest.json",
        model_id=model_id,
        seed=cfg.seed,
        config=attr_cfg_to_dict(attr_cfg),
        config_hash=config_hash(cfg),
        entries=entries,
    )
    _write_run_summary(
        out, cfg, ["manifest.json", "heatmaps/"],
        {"heatmaps": len(entries), "images": len(records), "methods": len(cfg.methods)},
    )
    return 0


def attr_cfg_to_dict(attr_cfg: AttributionConfig) -> dict:
    return {
        "ig_steps": attr_cfg.ig_steps,
        "gs_samples": attr_cfg.gs_samples,
        "gs_noise_std": attr_cfg.gs_noise_std,
        "fp_patch": attr_cfg.fp_patch,
        "fp_repeats": attr_cfg.fp_repeats,
        "seed": attr_cfg.seed,
    }


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(cfg) -> int:
    if not cfg.dataset_manifest or not cfg.explain_manifest:
        raise ConfigError("evaluate: dataset_manifest and explain_manifest are required")
    dataset = {r.image_id: r for r in arrayio.load_dataset_manifest(cfg.dataset_manifest)}
    explain = manifests.load_explain_manifest(cfg.explain_manifest)
    by_image: dict[str, list] = {}
    for entry in explain.entries:
        by_image.setdefault(entry.image_id, []).append(entry)
    image_ids = sorted(by_image)

    skipped_missing_mask = 0
    usable_ids = []
    masks = {}
    for image_id in image_ids:
        record = dataset.get(image_id)
        if record is None:
            raise DataError(f"evaluate: image {image_id!r} not present in the dataset manifest")
        if record.mask_path is None:
            skipped_missing_mask += 1
            continue
        masks[image_id] = arrayio.read_array(record.mask_path, "mask")
        usable_ids.append(image_id)
    if skipped_missing_mask:
        log.warning("evaluate: skipped %d images without masks", skipped_missing_mask)
    if not usable_ids:
        raise DataError("evaluate: no images with masks to score")

    records = []
    seed_list = cfg.seeds or (cfg.seed,)
    for seed in seed_list:
        if cfg.images_per_seed and cfg.images_per_seed < len(usable_ids):
            rng = np.random.default_rng(seed)
            picked = sorted(
                usable_ids[i]
                for i in rng.choice(len(usable_ids), size=cfg.images_per_seed, replace=False)
            )
        else:
            picked = usable_ids
        for image_id in picked:
            mask = masks[image_id]
            for entry in sorted(by_image[image_id], key=lambda e: e.method):
                heatmap = arrayio.read_array(entry.heatmap_path, "heatmap")
                if heatmap.shape != mask.shape:
                    raise DataError(
                        f"evaluate: heatmap {entry.heatmap_path} shape {heatmap.shape} "
                        f"!= mask shape {mask.shape}"
                    )
                records.append(
                    metrics.ScoreRecord(
                        image_id=image_id,
                        model_id=explain.model_id,
                        method_id=entry.method,
                        seed=seed,
                        rra=metrics.rra(heatmap, mask),
                        dpp=metrics.dpp(heatmap, mask, epsilon=cfg.epsilon),
                    )
                )

    out = _out_dir(cfg)
    prov = _provenance(cfg)
    metrics.write_records_csv(out / "scores.csv", records, provenance=prov)
    metrics.write_records_jsonl(
        out / "scores.jsonl", records,
        provenance={"config_hash": config_hash(cfg), "seed": cfg.seed},
    )
    summaries = metrics.aggregate(records, group_by=("model_id", "method_id"))
    _write_aggregate_csv(out / "aggregate.csv", summaries, prov)
    _write_run_summary(
        out, cfg, ["scores.csv", "scores.jsonl", "aggregate.csv"],
        {
            "records": len(records),
            "skipped_missing_mask": skipped_missing_mask,
            "images_scored": len(usable_ids),
        },
    )
    log.info("evaluate: %d records (%d images skipped for missing masks)", len(records), skipped_missing_mask)
    return 0


def _write_aggregate_csv(path, summaries, provenance: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["model_id", "method_id", "n"]
    for metric in metrics.METRIC_FIELDS:
        header += [f"{metric}_mean", f"{metric}_std"]
    writer.writerow(header)
    for s in summaries:
        row = list(s.key) + [s.count]
        for metric in metrics.METRIC_FIELDS:
            row += [repr(s.means[metric]), repr(s.stds[metric])]
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# sanity


def cmd_sanity(cfg) -> int:
    records, images = _load_split(cfg)
    classes = max(2, max(r.label for r in records) + 1)
    model, model_id = _load_model(cfg, images[0].shape, classes)
    rng = np.random.default_rng(cfg.seed)
    count = min(cfg.batch, len(images))
    picked = sorted(rng.choice(len(images), size=count, replace=False))
    batch = [images[i] for i in picked]
    targets = [records[i].label for i in picked]
    attr_cfg = AttributionConfig(
        ig_steps=cfg.ig_steps,
        gs_samples=cfg.gs_samples,
        gs_noise_std=cfg.gs_noise_std,
        fp_patch=min(cfg.fp_patch, images[0].height, images[0].width),
        fp_repeats=cfg.fp_repeats,
        seed=cfg.seed,
    )
    reports = []
    for method_id in cfg.methods:
        explain_fn = batch_explainer(method_id, attr_cfg)
        report = run_sanity_checks(
            model, method_id, explain_fn, batch, targets,
            n_layers=cfg.n_layers, seed=cfg.seed, normalized=cfg.normalized,
        )
        reports.append(report)
        log.info(
            "sanity: %s degradation=%.3f sensitivity=%.4f delta=%.2f (%s)",
            method_id, report.degradation_mean, report.sensitivity_mean,
            report.cliffs_delta, report.interpretation,
        )
    out = _out_dir(cfg)
    write_sanity_csv(out / "sanity.csv", reports, provenance=_provenance(cfg))
    write_sanity_json(
        out / "sanity.json", reports,
        provenance={
            "config_hash": config_hash(cfg),
            "seed": cfg.seed,
            "model_id": model_id,
            "batch": count,
        },
    )
    _write_run_summary(out, cfg, ["sanity.csv", "sanity.json"], {"methods": len(reports), "batch": count})
    return 0


# ---------------------------------------------------------------------------
# compare


def cmd_compare(cfg) -> int:
    if len(cfg.scores) < 2:
        raise ConfigError("compare: need at least 2 score files")
    if cfg.labels:
        labels = list(cfg.labels)
    else:
        stems = [Path(p).stem for p in cfg.scores]
        if len(set(stems)) == len(stems):
            labels = stems
        else:
            labels = [f"{stem}_{i}" for i, stem in enumerate(stems)]
    if len(labels) != len(cfg.scores) or len(set(labels)) != len(labels):
        raise ConfigError("compare: labels must be unique and match the score files one-to-one")
    groups = {label: metrics.read_records_csv(path) for label, path in zip(labels, cfg.scores)}

    method_sets = [set(r.method_id for r in recs) for recs in groups.values()]
    common_methods = sorted(set.intersection(*method_sets))
    if not common_methods:
        raise DataError("compare: score files share no method ids (mismatched metrics)")

    hypotheses = []
    for metric in cfg.metrics:
        for method_id in common_methods:
            samples = {
                label: np.array([r.metric(metric) for r in recs if r.method_id == method_id])
                for label, recs in groups.items()
            }
            hypotheses.append((metric, method_id, samples))

    rows = []
    p_raws = []
    for metric, method_id, samples in hypotheses:
        values = [samples[label] for label in labels]
        if len(values) == 2:
            outcome = mann_whitney_u(values[0], values[1])
            effect = cliffs_delta(values[0], values[1])
            test_name, effect_kind = "mann_whitney_u", "cliffs_delta"
        else:
            outcome = kruskal_wallis(values)
            effect = eta_squared(outcome.statistic, len(values), sum(v.size for v in values))
            test_name, effect_kind = "kruskal_wallis", "eta_squared"
        power = bootstrap_power(
            values,
            "mann_whitney_u" if len(values) == 2 else "kruskal_wallis",
            n_boot=cfg.n_boot,
            alpha=cfg.alpha,
            seed=cfg.seed,
        )
        rows.append(
            {
                "metric": metric,
                "method_id": method_id,
                "test_name": test_name,
                "statistic": outcome.statistic,
                "p_raw": outcome.p_value,
                "effect_size": effect.value,
                "effect_kind": effect_kind,
                "interpretation": effect.interpretation,
                "power": power,
                "means": {label: float(samples[label].mean()) for label in labels},
            }
        )
        p_raws.append(outcome.p_value)

    adjusted = benjamini_hochberg(p_raws)
    results = []
    rankings = []
    for row, p_adj in zip(rows, adjusted):
        results.append(
            TestResult(
                test_name=row["test_name"],
                metric=row["metric"],
                method_id=row["method_id"],
                statistic=row["statistic"],
                p_raw=row["p_raw"],
                p_adjusted=p_adj,
                effect_size=row["effect_size"],
                effect_kind=row["effect_kind"],
                interpretation=row["interpretation"],
                power=row["power"],
                group_ids=tuple(labels),
            )
        )
        for ranked in rank_groups(row["means"], tie_tolerance=cfg.tie_tolerance):
            rankings.append((row["metric"], row["method_id"], ranked))

    out = _out_dir(cfg)
    prov = _provenance(cfg)
    _write_results_csv(out / "results.csv", results, cfg.seed, prov)
    _write_results_json(out / "results.json", results, cfg)
    _write_ranking_csv(out / "ranking.csv", rankings, prov)
    _write_run_summary(
        out, cfg, ["results.csv", "results.json", "ranking.csv"],
        {"hypotheses": len(results), "groups": len(labels)},
    )
    log.info("compare: %d hypotheses over groups %s", len(results), labels)
    return 0


RESULT_CSV_HEADER = (
    "metric", "method_id", "test_name", "statistic", "p_raw", "p_adjusted",
    "effect_size", "effect_kind", "interpretation", "power", "significant",
    "group_ids", "seed",
)


def _write_results_csv(path, results: list[TestResult], seed: int, provenance: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_CSV_HEADER)
    for r in results:
        writer.writerow([
            r.metric, r.method_id, r.test_name, repr(r.statistic), repr(r.p_raw),
            repr(r.p_adjusted), repr(r.effect_size), r.effect_kind, r.interpretation,
            repr(r.power), int(r.significant), ";".join(r.group_ids), seed,
        ])
    Path(path).write_text(buf.getvalue())


def _write_results_json(path, results: list[TestResult], cfg) -> None:
    payload = {
        "provenance": {"config_hash": config_hash(cfg), "seed": cfg.seed},
        "alpha": cfg.alpha,
        "n_boot": cfg.n_boot,
        "bh_scope": "all hypotheses of this invocation, jointly",
        "results": [
            {
                "metric": r.metric,
                "method_id": r.method_id,
                "test_name": r.test_name,
                "statistic": r.statistic,
                "p_raw": r.p_raw,
                "p_adjusted": r.p_adjusted,
                "effect_size": r.effect_size,
                "effect_kind": r.effect_kind,
                "interpretation": r.interpretation,
                "power": r.power,
                "significant": r.significant,
                "group_ids": list(r.group_ids),
            }
            for r in results
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_ranking_csv(path, rankings, provenance: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "method_id", "group_id", "mean", "rank"])
    for metric, method_id, ranked in rankings:
        writer.writerow([metric, method_id, ranked.group_id, repr(ranked.mean), ranked.rank])
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file with one section per command")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--jobs", type=int, default=None)


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(s) for s in _str_list(raw))


def _bool_flag(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrkit",
        description="Generate, score and statistically compare visual explanations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset with ground-truth masks")
    _add_common(p)
    p.add_argument("--n-images", dest="n_images", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--signal-area-fraction", dest="signal_area_fraction", type=float, default=None)

    p = sub.add_parser("explain", help="run attribution methods over a dataset split")
    _add_common(p)
    p.add_argument("--dataset-manifest", dest="dataset_manifest", default=None)
    p.add_argument("--model", default=None, help="topology.json of a saved model")
    p.add_argument("--model-seed", dest="model_seed", type=int, default=None)
    p.add_argument("--model-id", dest="model_id", default=None)
    p.add_argument("--methods", type=_str_list, default=None, help=f"comma list from {METHOD_IDS}")
    p.add_argument("--split", default=None)
    p.add_argument("--ig-steps", dest="ig_steps", type=int, default=None)
    p.add_argument("--gs-samples", dest="gs_samples", type=int, default=None)
    p.add_argument("--gs-noise-std", dest="gs_noise_std", type=float, default=None)
    p.add_argument("--fp-patch", dest="fp_patch", type=int, default=None)
    p.add_argument("--fp-repeats", dest="fp_repeats", type=int, default=None)

    p = sub.add_parser("evaluate", help="score heatmaps against ground-truth masks")
    _add_common(p)
    p.add_argument("--dataset-manifest", dest="dataset_manifest", default=None)
    p.add_argument("--explain-manifest", dest="explain_manifest", default=None)
    p.add_argument("--seeds", type=_int_list, default=None, help="comma list of sampling seeds")
    p.add_argument("--images-per-seed", dest="images_per_seed", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)

    p = sub.add_parser("sanity", help="run layer- and input-randomization checks")
    _add_common(p)
    p.add_argument("--dataset-manifest", dest="dataset_manifest", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--model-seed", dest="model_seed", type=int, default=None)
    p.add_argument("--methods", type=_str_list, default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--n-layers", dest="n_layers", type=int, default=None)
    p.add_argument("--normalized", type=_bool_flag, default=None)
    p.add_argument("--ig-steps", dest="ig_steps", type=int, default=None)
    p.add_argument("--gs-samples", dest="gs_samples", type=int, default=None)
    p.add_argument("--gs-noise-std", dest="gs_noise_std", type=float, default=None)
    p.add_argument("--fp-patch", dest="fp_patch", type=int, default=None)
    p.add_argument("--fp-repeats", dest="fp_repeats", type=int, default=None)

    p = sub.add_parser("compare", help="statistically compare score files")
    _add_common(p)
    p.add_argument("--scores", type=_str_list, default=None, help="comma list of score CSV files")
    p.add_argument("--labels", type=_str_list, default=None)
    p.add_argument("--metrics", type=_str_list, default=None)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tie-tolerance", dest="tie_tolerance", type=float, default=None)

    return parser


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "explain": cmd_explain,
    "evaluate": cmd_evaluate,
    "sanity": cmd_sanity,
    "compare": cmd_compare,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v for k, v in vars(args).items() if k not in ("command", "config")
    }
    cfg = load_config(args.command, args.config, overrides)
    return _HANDLERS[args.command](cfg)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except ToolkitError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
