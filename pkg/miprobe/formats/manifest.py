import os
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
from miprobe.formats import (
    open_text, ensure_parent_dir, FormatError, ManifestError
)
from miprobe.formats.fmat import load_feature_matrix
from miprobe.formats.labels import load_labels
from miprobe.common import log

LOGGER = log.get_logger()
VIEW_PLAIN, VIEW_MASKED, VIEW_UNMASKED = 'plain', 'masked', 'unmasked'
SUPPORTED_VIEWS = [VIEW_PLAIN, VIEW_MASKED, VIEW_UNMASKED]
SPLIT_FIT, SPLIT_EVAL = 'fit', 'eval'
SUPPORTED_SPLITS = [SPLIT_FIT, SPLIT_EVAL]
DEFAULT_FRAME_PERIOD_MS = 20.0


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    split: str
    feature_paths: Dict[Tuple[int, str], str]
    label_path: Optional[str] = None
    frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS

    def layers(self):
        return sorted({layer for layer, _ in self.feature_paths})

    def feature_path(self, layer, view):
        try:
            return self.feature_paths[(layer, view)]
        except KeyError:
            raise ManifestError(
                f'utterance {self.utt_id} has no {view} dump for layer {layer}')

    def to_dict(self, base_dir=None):
        def rel(path):
            return os.path.relpath(path, base_dir) if base_dir else path

        return {
            'utt_id': self.utt_id,
            'split': self.split,
            'frame_period_ms': self.frame_period_ms,
            'label_path': rel(self.label_path) if self.label_path else None,
            'features': [
                {'layer': layer, 'view': view, 'path': rel(path)}
                for (layer, view), path in sorted(self.feature_paths.items())
            ]
        }


@dataclass(frozen=True)
class DatasetManifest:
    records: Tuple[UtteranceRecord, ...]
    base_dir: str = ''

    def __len__(self):
        return len(self.records)

    def by_split(self, split):
        return [r for r in self.records if r.split == split]

    @property
    def fit_records(self):
        return self.by_split(SPLIT_FIT)

    @property
    def eval_records(self):
        return self.by_split(SPLIT_EVAL)

    def layers(self):
        return sorted({layer for r in self.records for layer in r.layers()})

    def to_dict(self):
        return {'records': [r.to_dict(self.base_dir) for r in self.records]}


@dataclass(frozen=True)
class Violation:
    utt_id: Optional[str]
    message: str

    def __str__(self):
        who = self.utt_id if self.utt_id is not None else '<manifest>'
        return f'{who}: {self.message}'


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self):
        return not self.violations

    def add(self, utt_id, message):
        self.violations.append(Violation(utt_id, message))


def _resolve(base_dir, path):
    if path is None:
        return None
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def _parse_record(raw, base_dir, idx):
    if not isinstance(raw, dict):
        raise ManifestError(f'record {idx} is not an object')
    try:
        utt_id = str(raw['utt_id'])
        split = str(raw['split'])
        features = raw.get('features', [])
        feature_paths = {}
        for feat in features:
            key = (int(feat['layer']), str(feat['view']))
            if key in feature_paths:
                raise ManifestError(
                    f'record {utt_id} lists layer {key[0]} view {key[1]} twice')
            feature_paths[key] = _resolve(base_dir, str(feat['path']))
        label_path = raw.get('label_path')
        frame_period_ms = float(raw.get('frame_period_ms', DEFAULT_FRAME_PERIOD_MS))
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f'record {idx} is malformed: {e.__class__.__name__}: {str(e)}')
    return UtteranceRecord(
        utt_id=utt_id,
        split=split,
        feature_paths=feature_paths,
        label_path=_resolve(base_dir, label_path),
        frame_period_ms=frame_period_ms
    )


def load_manifest(path):
    """
    Loads a dataset manifest from JSON. Relative file paths resolve
    against the manifest's directory.

    Args:
        path (str): the path to the manifest

    Returns:
        (DatasetManifest): the parsed manifest (not yet validated)

    Raises:
        (ManifestError): if the document can't be parsed into records
    """
    with open_text(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ManifestError(f'{path}: invalid JSON: {str(e)}')
    if not isinstance(doc, dict) or not isinstance(doc.get('records'), list):
        raise ManifestError(f'{path}: expected an object with a "records" list')
    base_dir = os.path.dirname(os.path.abspath(path))
    records = tuple(_parse_record(raw, base_dir, idx) for idx, raw in enumerate(doc['records']))
    LOGGER.debug(f'loaded manifest {path} with {len(records)} records')
    return DatasetManifest(records=records, base_dir=base_dir)


def store_manifest(manifest, path):
    ensure_parent_dir(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    doc = {'records': [r.to_dict(base_dir) for r in manifest.records]}
    with open_text(path, 'w') as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write('\n')


def validate_manifest(manifest):
    """
    Checks every record: unique ids, known split and view tags, feature
    dumps that exist, parse and share one T, and labels whose length
    matches that T. Violations are collected, never raised.

    Args:
        manifest (DatasetManifest): the manifest to check

    Returns:
        (ValidationReport): empty iff the manifest is consistent
    """
    report = ValidationReport()
    seen = {}
    for record in manifest.records:
        if record.utt_id in seen:
            report.add(record.utt_id, f'duplicate utt_id (also in the {seen[record.utt_id]} split)')
            continue
        seen[record.utt_id] = record.split
        if record.split not in SUPPORTED_SPLITS:
            report.add(record.utt_id, f'unknown split \'{record.split}\'')
        if not record.feature_paths:
            report.add(record.utt_id, 'no feature dumps listed')
        frames = {}
        for (layer, view), path in sorted(record.feature_paths.items()):
            if view not in SUPPORTED_VIEWS:
                report.add(record.utt_id, f'unknown view tag \'{view}\' for layer {layer}')
            if layer < 0:
                report.add(record.utt_id, f'negative layer index {layer}')
            if not os.path.exists(path):
                report.add(record.utt_id, f'missing feature file {path}')
                continue
            try:
                frames[(layer, view)] = load_feature_matrix(path).frames
            except FormatError as e:
                report.add(record.utt_id, f'unreadable feature file {path}: {str(e)}')
        distinct_t = sorted(set(frames.values()))
        if len(distinct_t) > 1:
            report.add(record.utt_id, f'feature dumps disagree on T: {distinct_t}')
        if record.label_path is not None:
            if not os.path.exists(record.label_path):
                report.add(record.utt_id, f'missing label file {record.label_path}')
                continue
            try:
                labels = load_labels(record.label_path)
            except FormatError as e:
                report.add(record.utt_id, f'unreadable label file {record.label_path}: {str(e)}')
                continue
            if len(distinct_t) == 1 and len(labels) != distinct_t[0]:
                report.add(
                    record.utt_id,
                    f'label length {len(labels)} does not match feature T {distinct_t[0]}')
    return report


def half_split(records):
    """
    Bisects records deterministically: sorted by utt_id, the first half
    (rounded down) fits and the rest evaluates.

    Returns:
        fit, eval (tuple): two lists of records

    Raises:
        (ManifestError): with fewer than 2 records
    """
    ordered = sorted(records, key=lambda r: r.utt_id)
    if len(ordered) < 2:
        raise ManifestError(f'half split needs at least 2 utterances, got {len(ordered)}')
    mid = len(ordered) // 2
    return ordered[:mid], ordered[mid:]


def load_record_features(records, layer, view, max_workers=1):
    """
    Loads one dump per record, in record order.

    Returns:
        (list): numpy arrays of shape (T, D), one per record
    """
    paths = [r.feature_path(layer, view) for r in records]
    if max_workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            matrices = list(pool.map(load_feature_matrix, paths))
    else:
        matrices = [load_feature_matrix(p) for p in paths]
    return [m.values for m in matrices]
