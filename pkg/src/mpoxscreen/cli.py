"""Pipeline command-line tool: ingest -> dedup -> augment -> split -> train ->
evaluate -> report -> serve.

Artifacts land in stage-named subdirectories of the workspace; image
payloads share one tree at ``<workspace>/images``. ``run all`` executes the
stages in order with all stage seeds derived from one global seed, and stops
at the first failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics as metrics_mod
from .augment import AugmentationSpec, expand_dataset
from .dataset import ClassLabel, DatasetManifest, ImageStore, summarize
from .dedup import detect_duplicates
from .folds import FoldPlan, make_folds, verify_fold_plan
from .inference import predict
from .ingest import Rect, decode_image, ingest_image
from .networks import BACKBONE_IDS, ModelConfig, build_classifier, tiny_config
from .seeds import derive_seed
from .synthetic import INTAKE_FIELDS, INTAKE_HEADER
from .training import load_trained, save_trained, train

STAGES = ("ingest", "dedup", "augment", "split", "train", "evaluate", "report", "serve")


class MissingArtifact(FileNotFoundError):
    pass


class Diag:
    """Stage diagnostics: human one-liners or machine-readable JSON lines."""

    def __init__(self, as_json: bool = False):
        self.as_json = as_json

    def emit(self, stage: str, message: str, **extra) -> None:
        if self.as_json:
            print(json.dumps({"stage": stage, "message": message, **extra}, sort_keys=True))
        else:
            print(f"{stage}: {message}")


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"{what} not found: {path}")
    return path


def ws_paths(workspace: Path) -> dict[str, Path]:
    ws = Path(workspace)
    return {
        "images": ws / "images",
        "ingest_manifest": ws / "ingest" / "manifest.tsv",
        "dedup_groups": ws / "dedup" / "groups.tsv",
        "augment_manifest": ws / "augment" / "manifest.tsv",
        "plan": ws / "split" / "plan.tsv",
        "train_dir": ws / "train",
        "evaluate_dir": ws / "evaluate",
        "report_txt": ws / "report" / "report.txt",
        "report_tsv": ws / "report" / "report.tsv",
    }


def _latest_manifest(workspace: Path) -> Path:
    paths = ws_paths(workspace)
    if paths["augment_manifest"].exists():
        return paths["augment_manifest"]
    return paths["ingest_manifest"]


def read_intake(sheet: Path) -> list[dict]:
    lines = sheet.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != INTAKE_HEADER:
        raise ValueError(f"{sheet}: expected header {INTAKE_HEADER!r}")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != len(INTAKE_FIELDS):
            raise ValueError(f"{sheet}:{n}: expected {len(INTAKE_FIELDS)} fields")
        rows.append(dict(zip(INTAKE_FIELDS, parts)))
    return rows


def stage_ingest(workspace: Path, intake: Path, diag: Diag) -> Path:
    paths = ws_paths(workspace)
    intake = _require(Path(intake), "intake sheet")
    store = ImageStore(paths["images"])
    entries = []
    for row in read_intake(intake):
        raw = decode_image((intake.parent / row["path"]).read_bytes())
        if row["roi_x"]:
            roi = Rect(int(row["roi_x"]), int(row["roi_y"]), int(row["roi_w"]), int(row["roi_h"]))
        else:
            roi = Rect(0, 0, raw.shape[1], raw.shape[0])
        entry = ingest_image(
            raw,
            roi,
            image_id=row["image_id"],
            patient_id=row["patient_id"],
            label=ClassLabel(row["label"]),
            source_note=row["source_note"],
        )
        entries.append(store.save(entry))
    manifest = DatasetManifest(entries=[replace(e, pixels=None) for e in entries])
    manifest.validate()
    manifest.write(paths["ingest_manifest"])
    diag.emit("ingest", f"wrote {len(entries)} entries", artifact=str(paths["ingest_manifest"]))
    return paths["ingest_manifest"]


def stage_dedup(workspace: Path, manifest_path: Path, threshold: int, diag: Diag) -> Path:
    paths = ws_paths(workspace)
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    store = ImageStore(paths["images"])
    groups = detect_duplicates(manifest, store, threshold=threshold)
    out = paths["dedup_groups"]
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"threshold={threshold}\tgroups={len(groups)}"]
    for g, members in enumerate(groups):
        for image_id in members:
            lines.append(f"{g}\t{image_id}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    diag.emit("dedup", f"{len(groups)} duplicate groups", artifact=str(out))
    return out


def format_counts(manifest: DatasetManifest) -> str:
    counts = summarize(manifest)
    lines = ["Class label\tOriginal images\tUnique patients\tAugmented images"]
    for name, row in counts.rows:
        lines.append(f"{name}\t{row.original_images}\t{row.unique_patients}\t{row.augmented_images}")
    return "\n".join(lines) + "\n"


def stage_summarize(manifest_path: Path, diag: Diag) -> str:
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    table = format_counts(manifest)
    print(table, end="")
    return table


def stage_augment(
    workspace: Path, manifest_path: Path, spec: AugmentationSpec, out_manifest: Path, diag: Diag
) -> Path:
    paths = ws_paths(workspace)
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    store = ImageStore(paths["images"])
    expanded = expand_dataset(manifest, spec, store)
    out_manifest = Path(out_manifest)
    expanded.write(out_manifest)
    diag.emit(
        "augment",
        f"{len(manifest)} originals -> {len(expanded)} total",
        artifact=str(out_manifest),
    )
    return out_manifest


def stage_split(manifest_path: Path, seed: int, out_path: Path, diag: Diag) -> Path:
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    plan = make_folds(manifest, seed)
    plan.write(out_path, manifest=manifest)
    diag.emit("split", f"3 folds planned (seed {seed})", artifact=str(out_path))
    return Path(out_path)


def stage_audit(plan_path: Path, manifest_path: Path, diag: Diag) -> bool:
    plan = FoldPlan.read(_require(Path(plan_path), "fold plan"))
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    audit = verify_fold_plan(plan, manifest)
    print(audit.summary())
    return audit.ok


def stage_train(
    workspace: Path,
    config: ModelConfig,
    plan_path: Path,
    fold: int,
    manifest_path: Path,
    out_dir: Path,
    diag: Diag,
) -> Path:
    paths = ws_paths(workspace)
    plan = FoldPlan.read(_require(Path(plan_path), "fold plan"))
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    audit = verify_fold_plan(plan, manifest)
    if not audit.ok:
        raise ValueError(f"fold plan fails audit:\n{audit.summary()}")
    store = ImageStore(paths["images"])
    model = build_classifier(config)
    trained = train(model, plan.folds[fold], manifest, store, config, fold_index=fold)
    target = Path(out_dir) / trained.version_tag
    save_trained(trained, target)
    diag.emit(
        "train",
        f"{config.backbone_id} fold {fold}: {len(trained.history)} epochs",
        artifact=str(target),
    )
    return target


def stage_evaluate(
    workspace: Path,
    model_dir: Path,
    plan_path: Path,
    fold: int,
    manifest_path: Path,
    out_root: Path,
    diag: Diag,
) -> Path:
    paths = ws_paths(workspace)
    trained = load_trained(_require(Path(model_dir), "model directory"))
    plan = FoldPlan.read(_require(Path(plan_path), "fold plan"))
    manifest = DatasetManifest.read(_require(Path(manifest_path), "manifest"))
    store = ImageStore(paths["images"])
    by_id = manifest.by_id()
    test_entries = [by_id[i] for i in sorted(plan.folds[fold].test)]
    batch = predict(trained, test_entries, store=store, batch_size=trained.config.batch_size)

    out_dir = Path(out_root) / trained.config.backbone_id / f"fold{fold}"
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["image_id\tp_monkeypox\tp_others\tpredicted\ttruth"]
    for p in batch.predictions:
        truth = by_id[p.image_id].label.value
        lines.append(
            f"{p.image_id}\t{p.probabilities[0]:.6f}\t{p.probabilities[1]:.6f}"
            f"\t{p.predicted_label.value}\t{truth}"
        )
    (out_dir / "predictions.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    truth_map = {e.image_id: e.label for e in test_entries}
    cm = metrics_mod.confusion_matrix(batch, truth_map)
    pos = metrics_mod.compute_metrics(cm)
    macro = metrics_mod.compute_metrics_macro(cm)
    mlines = ["scope\taccuracy\tprecision\trecall\tf1"]
    for scope, m in (("positive", pos), ("macro", macro)):
        mlines.append(f"{scope}\t{m.accuracy:.6f}\t{m.precision:.6f}\t{m.recall:.6f}\t{m.f1:.6f}")
    (out_dir / "metrics.tsv").write_text("\n".join(mlines) + "\n", encoding="utf-8")
    diag.emit(
        "evaluate",
        f"{trained.config.backbone_id} fold {fold}: accuracy {pos.accuracy:.3f}",
        artifact=str(out_dir),
    )
    return out_dir


def _read_predictions(path: Path) -> list[tuple[str, ClassLabel, ClassLabel]]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        image_id, _, _, predicted, truth = line.split("\t")
        rows.append((image_id, ClassLabel(predicted), ClassLabel(truth)))
    return rows


def stage_report(runs_dir: Path, out_txt: Path, out_tsv: Path, diag: Diag, n_folds: int = 3) -> Path:
    runs_dir = _require(Path(runs_dir), "evaluation runs directory")
    networks = sorted(d.name for d in runs_dir.iterdir() if d.is_dir())
    if not networks:
        raise MissingArtifact(f"no evaluation runs under {runs_dir}")

    per_fold_rows: dict[str, dict[int, list[tuple[str, ClassLabel, ClassLabel]]]] = {}
    for network in networks:
        per_fold_rows[network] = {}
        for k in range(n_folds):
            path = runs_dir / network / f"fold{k}" / "predictions.tsv"
            _require(path, f"predictions for {network} fold {k}")
            per_fold_rows[network][k] = _read_predictions(path)

    def metric_sets(rows_by_fold, macro: bool):
        out = []
        for k in range(n_folds):
            rows = rows_by_fold[k]
            cm = metrics_mod.confusion_matrix(
                [(i, pred) for i, pred, _ in rows], {i: truth for i, _, truth in rows}
            )
            out.append(
                metrics_mod.compute_metrics_macro(cm) if macro else metrics_mod.compute_metrics(cm)
            )
        return out

    positive = {n: metric_sets(per_fold_rows[n], macro=False) for n in networks}
    macro = {n: metric_sets(per_fold_rows[n], macro=True) for n in networks}

    if len(networks) == 3:
        ensemble_rows: dict[int, list[tuple[str, ClassLabel, ClassLabel]]] = {}
        for k in range(n_folds):
            votes: dict[str, list[ClassLabel]] = {}
            truths: dict[str, ClassLabel] = {}
            for network in networks:
                for image_id, pred, truth in per_fold_rows[network][k]:
                    votes.setdefault(image_id, []).append(pred)
                    truths[image_id] = truth
            decided = metrics_mod.majority_vote_batch(votes)
            ensemble_rows[k] = [(i, decided[i], truths[i]) for i in sorted(decided)]
        positive["ensemble"] = metric_sets(ensemble_rows, macro=False)
        macro["ensemble"] = metric_sets(ensemble_rows, macro=True)
    elif len(networks) > 1:
        diag.emit("report", f"{len(networks)} networks present; ensemble needs exactly 3, skipped")

    report_pos = metrics_mod.aggregate_folds(positive, n_folds=n_folds)
    report_macro = metrics_mod.aggregate_folds(macro, n_folds=n_folds)

    out_txt = Path(out_txt)
    out_txt.parent.mkdir(parents=True, exist_ok=True)
    out_txt.write_text(metrics_mod.render_table(report_pos), encoding="utf-8")
    Path(out_tsv).write_text(
        metrics_mod.render_numeric(report_pos, scope="positive")
        + metrics_mod.render_numeric(report_macro, scope="macro"),
        encoding="utf-8",
    )
    diag.emit("report", f"{len(positive)} networks reported", artifact=str(out_txt))
    return out_txt


def _update_meta_accuracy(model_dir: Path, mean_accuracy: float) -> None:
    meta_path = model_dir / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["mean_accuracy"] = mean_accuracy
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def run_all(
    workspace: Path,
    seed: int,
    intake: Path,
    backbones: list[str],
    threshold: int,
    diag: Diag,
    model_config_path: Path | None = None,
    spec_path: Path | None = None,
) -> None:
    paths = ws_paths(Path(workspace))
    stage_ingest(workspace, intake, diag)
    stage_dedup(workspace, paths["ingest_manifest"], threshold, diag)
    spec = (
        AugmentationSpec.from_file(spec_path)
        if spec_path
        else AugmentationSpec(master_seed=derive_seed(seed, "augment"))
    )
    stage_augment(workspace, paths["ingest_manifest"], spec, paths["augment_manifest"], diag)
    stage_split(paths["augment_manifest"], derive_seed(seed, "split"), paths["plan"], diag)

    trained_dirs: dict[str, list[Path]] = {}
    for backbone in backbones:
        if model_config_path:
            base = ModelConfig.from_json(model_config_path)
            config = replace(base, backbone_id=backbone)
        elif backbone == "tiny_test_cnn":
            config = tiny_config(seed=derive_seed(seed, "train", backbone))
        else:
            config = ModelConfig(backbone_id=backbone, seed=derive_seed(seed, "train", backbone))
        trained_dirs[backbone] = []
        for fold in range(3):
            model_dir = stage_train(
                workspace, config, paths["plan"], fold, paths["augment_manifest"],
                paths["train_dir"], diag,
            )
            trained_dirs[backbone].append(model_dir)
            stage_evaluate(
                workspace, model_dir, paths["plan"], fold, paths["augment_manifest"],
                paths["evaluate_dir"], diag,
            )

    stage_report(paths["evaluate_dir"], paths["report_txt"], paths["report_tsv"], diag)

    # Feed mean accuracies back so the serving registry can pick a default.
    for line in paths["report_tsv"].read_text(encoding="utf-8").splitlines():
        parts = line.split("\t")
        if parts[0] == "positive" and parts[2] == "accuracy" and parts[1] in trained_dirs:
            for model_dir in trained_dirs[parts[1]]:
                _update_meta_accuracy(model_dir, float(parts[-2]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpoxscreen", description=__doc__)
    parser.add_argument("--workspace", type=Path, default=Path("workspace"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", action="store_true", help="machine-readable diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="crop, pad, resize raw photos into the dataset")
    p.add_argument("--intake", type=Path, required=True)

    p = sub.add_parser("dedup", help="group near-duplicate images")
    p.add_argument("--threshold", type=int, default=0)
    p.add_argument("--manifest", type=Path)

    p = sub.add_parser("summarize", help="per-class image and patient counts")
    p.add_argument("--manifest", type=Path)

    p = sub.add_parser("augment", help="expand the dataset 14x")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--spec", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("split", help="plan patient-independent folds")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("audit", help="verify a fold plan")
    p.add_argument("--plan", type=Path)
    p.add_argument("--manifest", type=Path)

    p = sub.add_parser("train", help="train one backbone on one fold")
    p.add_argument("--config", type=Path)
    p.add_argument("--plan", type=Path)
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("evaluate", help="predict on one fold's test split")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--plan", type=Path)
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("report", help="aggregate folds into the comparison table")
    p.add_argument("--runs", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("serve", help="run the screening HTTP service")
    p.add_argument("--registry", type=Path, required=True)
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--retain", action="store_true")
    p.add_argument("--max-payload-bytes", type=int, default=10 * 2**20)

    p = sub.add_parser("run", help="run pipeline stages in order")
    p.add_argument("stages", choices=["all"])
    p.add_argument("--intake", type=Path, required=True)
    p.add_argument("--backbones", default="tiny_test_cnn")
    p.add_argument("--threshold", type=int, default=0)
    p.add_argument("--model-config", type=Path)
    p.add_argument("--spec", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    diag = Diag(as_json=args.json)
    paths = ws_paths(args.workspace)
    try:
        if args.command == "ingest":
            stage_ingest(args.workspace, args.intake, diag)
        elif args.command == "dedup":
            stage_dedup(
                args.workspace, args.manifest or paths["ingest_manifest"], args.threshold, diag
            )
        elif args.command == "summarize":
            stage_summarize(args.manifest or _latest_manifest(args.workspace), diag)
        elif args.command == "augment":
            spec = (
                AugmentationSpec.from_file(args.spec)
                if args.spec
                else AugmentationSpec(master_seed=derive_seed(args.seed, "augment"))
            )
            out = args.out or paths["augment_manifest"]
            if out.is_dir() or not out.suffix:  # --out DIR shorthand
                out = out / "manifest.tsv"
            stage_augment(
                args.workspace, args.manifest or paths["ingest_manifest"], spec, out, diag
            )
        elif args.command == "split":
            stage_split(
                args.manifest or _latest_manifest(args.workspace),
                args.seed,
                args.out or paths["plan"],
                diag,
            )
        elif args.command == "audit":
            ok = stage_audit(
                args.plan or paths["plan"], args.manifest or _latest_manifest(args.workspace), diag
            )
            return 0 if ok else 1
        elif args.command == "train":
            config = (
                ModelConfig.from_json(args.config) if args.config else tiny_config(seed=args.seed)
            )
            stage_train(
                args.workspace,
                config,
                args.plan or paths["plan"],
                args.fold,
                args.manifest or _latest_manifest(args.workspace),
                args.out or paths["train_dir"],
                diag,
            )
        elif args.command == "evaluate":
            stage_evaluate(
                args.workspace,
                args.model,
                args.plan or paths["plan"],
                args.fold,
                args.manifest or _latest_manifest(args.workspace),
                args.out or paths["evaluate_dir"],
                diag,
            )
        elif args.command == "report":
            stage_report(
                args.runs or paths["evaluate_dir"],
                args.out or paths["report_txt"],
                (args.out.with_suffix(".tsv") if args.out else paths["report_tsv"]),
                diag,
            )
        elif args.command == "serve":
            import uvicorn

            from .service import create_app

            host, _, port = args.addr.rpartition(":")
            app = create_app(
                args.registry,
                retain=args.retain,
                max_payload_bytes=args.max_payload_bytes,
                retention_path=Path(args.registry) / "retention.jsonl",
            )
            uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
        elif args.command == "run":
            backbones = [b.strip() for b in args.backbones.split(",") if b.strip()]
            for b in backbones:
                if b not in BACKBONE_IDS:
                    raise ValueError(f"unknown backbone {b!r}; known: {BACKBONE_IDS}")
            run_all(
                args.workspace,
                args.seed,
                args.intake,
                backbones,
                args.threshold,
                diag,
                model_config_path=args.model_config,
                spec_path=args.spec,
            )
    except Exception as exc:  # noqa: BLE001 - single exit point for stage failures
        message = f"error: {args.command}: {exc}"
        if args.json:
            print(json.dumps({"error": str(exc), "stage": args.command}), file=sys.stderr)
        else:
            print(message, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
