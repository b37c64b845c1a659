"""Patient-independent 3-fold train/val/test planning and auditing.

Three pairwise-disjoint test groups of patients are packed to ~20% of each
class's original images; for each fold the remaining patients are packed
into val (~10%) and train (~70%). Packing is greedy largest-patient-first
on per-patient image counts, stratified by class. Augmented children always
follow their parent's train/val assignment and never enter a test set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import ClassLabel, DatasetManifest, LesionImage, ORIGIN_ORIGINAL
from .seeds import rng_from

log = logging.getLogger(__name__)

N_FOLDS = 3
PROPORTIONS = (0.70, 0.10, 0.20)
SPLIT_NAMES = ("train", "val", "test")


@dataclass
class FoldAssignment:
    train: set[str] = field(default_factory=set)
    val: set[str] = field(default_factory=set)
    test: set[str] = field(default_factory=set)

    def split_of(self, image_id: str) -> str | None:
        for name in SPLIT_NAMES:
            if image_id in getattr(self, name):
                return name
        return None


@dataclass
class FoldPlan:
    folds: list[FoldAssignment]
    seed: int
    proportions: tuple[float, float, float] = PROPORTIONS

    def write(self, path: Path | str, manifest: DatasetManifest | None = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"plan_version=1\tseed={self.seed}\tfolds={len(self.folds)}"]
        for k, fold in enumerate(self.folds):
            for split in SPLIT_NAMES:
                for image_id in sorted(getattr(fold, split)):
                    lines.append(f"{k}\t{split}\t{image_id}")
        for k, fold in enumerate(self.folds):
            sizes = {s: len(getattr(fold, s)) for s in SPLIT_NAMES}
            lines.append(f"# fold={k} train={sizes['train']} val={sizes['val']} test={sizes['test']}")
        if manifest is not None:
            audit = verify_fold_plan(self, manifest)
            for (k, label), props in sorted(audit.proportions.items()):
                lines.append(
                    f"# achieved fold={k} class={label} train={props['train']:.3f} "
                    f"val={props['val']:.3f} test={props['test']:.3f}"
                )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: Path | str) -> "FoldPlan":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("plan_version="):
            raise ValueError(f"{path}: missing plan_version header")
        header = dict(part.split("=", 1) for part in lines[0].split("\t"))
        n_folds = int(header.get("folds", N_FOLDS))
        folds = [FoldAssignment() for _ in range(n_folds)]
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{n}: expected fold/split/image_id")
            k, split, image_id = int(parts[0]), parts[1], parts[2]
            if split not in SPLIT_NAMES:
                raise ValueError(f"{path}:{n}: unknown split {split!r}")
            getattr(folds[k], split).add(image_id)
        return cls(folds=folds, seed=int(header.get("seed", 0)))


def _pack_bins(order: list[str], counts: dict[str, int], targets: list[float]) -> list[set[str]]:
    """Greedily assign patients to bins, taking an item only when it moves
    the most-deficient bin closer to its target. Unassigned patients are
    left out (the caller decides their fate)."""
    bins: list[set[str]] = [set() for _ in targets]
    loads = [0.0 for _ in targets]
    for patient in order:
        c = counts[patient]
        deficits = [t - l for t, l in zip(targets, loads)]
        j = max(range(len(targets)), key=lambda i: deficits[i])
        if abs(deficits[j] - c) < abs(deficits[j]):
            bins[j].add(patient)
            loads[j] += c
    return bins


def _greedy_order(patients: dict[str, int], rng) -> list[str]:
    order = sorted(patients)
    rng.shuffle(order)
    order.sort(key=lambda p: -patients[p])  # stable: shuffle breaks ties
    return order


def make_folds(manifest: DatasetManifest, seed: int) -> FoldPlan:
    """Plan 3 patient-disjoint folds targeting 70:10:20 per class."""
    manifest.validate()
    originals = manifest.originals()
    children = manifest.children_of()

    by_class: dict[ClassLabel, dict[str, int]] = {}
    class_entries: dict[ClassLabel, dict[str, list[LesionImage]]] = {}
    for e in originals:
        by_class.setdefault(e.label, {})
        by_class[e.label][e.patient_id] = by_class[e.label].get(e.patient_id, 0) + 1
        class_entries.setdefault(e.label, {}).setdefault(e.patient_id, []).append(e)

    folds = [FoldAssignment() for _ in range(N_FOLDS)]
    for label, patients in sorted(by_class.items(), key=lambda kv: kv[0].value):
        if len(patients) < N_FOLDS:
            raise ValueError(
                f"class {label.value} has only {len(patients)} patients; need at least {N_FOLDS}"
            )
        total = sum(patients.values())
        biggest = max(patients.values())
        if biggest > 0.5 * total:
            log.warning(
                "class %s: one patient holds %d of %d images (>50%%); split targets unattainable",
                label.value,
                biggest,
                total,
            )
        rng = rng_from(seed, "split", label.value)
        order = _greedy_order(patients, rng)
        test_target = PROPORTIONS[2] * total
        test_groups = _pack_bins(order, patients, [test_target] * N_FOLDS)
        for k in range(N_FOLDS):
            rest = [p for p in order if p not in test_groups[k]]
            val_target = PROPORTIONS[1] * total
            (val_patients,) = _pack_bins(rest, patients, [val_target])
            train_patients = [p for p in rest if p not in val_patients]
            for patient, split_set, with_children in (
                *((p, folds[k].test, False) for p in test_groups[k]),
                *((p, folds[k].val, True) for p in val_patients),
                *((p, folds[k].train, True) for p in train_patients),
            ):
                for entry in class_entries[label][patient]:
                    split_set.add(entry.image_id)
                    if with_children:
                        for child in children.get(entry.image_id, []):
                            split_set.add(child.image_id)
    return FoldPlan(folds=folds, seed=seed)


@dataclass
class FoldAudit:
    """Mechanized check of the fold-plan guarantees."""

    patient_overlaps: list[tuple[int, str, str, str]]
    augmented_in_test: list[tuple[int, str]]
    parent_child_mismatches: list[tuple[int, str]]
    cross_fold_test_overlaps: list[tuple[str, int, int]]
    proportions: dict[tuple[int, str], dict[str, float]]

    @property
    def ok(self) -> bool:
        return not (
            self.patient_overlaps
            or self.augmented_in_test
            or self.parent_child_mismatches
            or self.cross_fold_test_overlaps
        )

    def summary(self) -> str:
        lines = [
            f"patient_overlaps={len(self.patient_overlaps)}",
            f"augmented_in_test={len(self.augmented_in_test)}",
            f"parent_child_mismatches={len(self.parent_child_mismatches)}",
            f"cross_fold_test_overlaps={len(self.cross_fold_test_overlaps)}",
        ]
        for (k, label), props in sorted(self.proportions.items()):
            lines.append(
                f"fold={k} class={label} train={props['train']:.3f} "
                f"val={props['val']:.3f} test={props['test']:.3f}"
            )
        lines.append("ok" if self.ok else "VIOLATIONS PRESENT")
        return "\n".join(lines)


def verify_fold_plan(plan: FoldPlan, manifest: DatasetManifest) -> FoldAudit:
    """Audit patient disjointness, test purity, parent/child cohesion,
    cross-fold test disjointness, and achieved proportions."""
    ids = manifest.by_id()
    for k, fold in enumerate(plan.folds):
        for split in SPLIT_NAMES:
            for image_id in getattr(fold, split):
                if image_id not in ids:
                    raise ValueError(f"fold {k} {split}: dangling image_id {image_id}")

    patient_overlaps = []
    augmented_in_test = []
    parent_child_mismatches = []
    for k, fold in enumerate(plan.folds):
        patients: dict[str, set[str]] = {}
        for split in SPLIT_NAMES:
            for image_id in getattr(fold, split):
                patients.setdefault(ids[image_id].patient_id, set()).add(split)
        for patient, splits in sorted(patients.items()):
            if len(splits) > 1:
                ordered = sorted(splits)
                patient_overlaps.append((k, patient, ordered[0], ordered[1]))
        for image_id in fold.test:
            if ids[image_id].origin != ORIGIN_ORIGINAL:
                augmented_in_test.append((k, image_id))
        for entry in manifest.augmented():
            parent_split = fold.split_of(entry.parent_id)
            child_split = fold.split_of(entry.image_id)
            if parent_split in ("train", "val"):
                if child_split != parent_split:
                    parent_child_mismatches.append((k, entry.image_id))
            elif child_split is not None:
                parent_child_mismatches.append((k, entry.image_id))

    cross_fold_test_overlaps = []
    test_patients = [
        {ids[i].patient_id for i in fold.test} for fold in plan.folds
    ]
    for a in range(len(plan.folds)):
        for b in range(a + 1, len(plan.folds)):
            for patient in sorted(test_patients[a] & test_patients[b]):
                cross_fold_test_overlaps.append((patient, a, b))

    proportions: dict[tuple[int, str], dict[str, float]] = {}
    class_totals: dict[ClassLabel, int] = {}
    for e in manifest.originals():
        class_totals[e.label] = class_totals.get(e.label, 0) + 1
    for k, fold in enumerate(plan.folds):
        per_class_counts: dict[ClassLabel, dict[str, int]] = {
            label: {s: 0 for s in SPLIT_NAMES} for label in class_totals
        }
        for split in SPLIT_NAMES:
            for image_id in getattr(fold, split):
                entry = ids[image_id]
                if entry.origin == ORIGIN_ORIGINAL:
                    per_class_counts[entry.label][split] += 1
        for label, counts in per_class_counts.items():
            total = class_totals[label]
            proportions[(k, label.value)] = {
                s: counts[s] / total if total else 0.0 for s in SPLIT_NAMES
            }

    return FoldAudit(
        patient_overlaps=patient_overlaps,
        augmented_in_test=augmented_in_test,
        parent_child_mismatches=parent_child_mismatches,
        cross_fold_test_overlaps=cross_fold_test_overlaps,
        proportions=proportions,
    )
