import os
import json
import tempfile
import numpy as np
from unittest import TestCase, main
from miprobe.formats import ManifestError
from miprobe.formats import manifest as mf
from miprobe.formats.fmat import store_feature_matrix
from miprobe.formats.labels import FrameLabels, store_labels


class TestManifest(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def _record(self, utt_id, split=mf.SPLIT_FIT, frames=5, label_frames=None, layers=(1, 2)):
        paths = {}
        for layer in layers:
            path = os.path.join(self.tmp, utt_id, f'L{layer}_plain.fmat')
            store_feature_matrix(np.full((frames, 2), layer, dtype=np.float32), path)
            paths[(layer, mf.VIEW_PLAIN)] = path
        label_path = None
        if label_frames is not None:
            label_path = os.path.join(self.tmp, f'{utt_id}.lab')
            store_labels(FrameLabels(np.zeros(label_frames, dtype=int), 2), label_path)
        return mf.UtteranceRecord(utt_id, split, paths, label_path)

    def test_store_and_load_relative_paths(self):
        records = (self._record('a', label_frames=5), self._record('b', mf.SPLIT_EVAL))
        path = os.path.join(self.tmp, 'manifest.json')

        mf.store_manifest(mf.DatasetManifest(records), path)
        actual = mf.load_manifest(path)

        with open(path) as f:
            doc = json.load(f)
        self.assertFalse(os.path.isabs(doc['records'][0]['features'][0]['path']))
        self.assertEqual(len(actual), 2)
        self.assertEqual(actual.records[0].feature_paths, records[0].feature_paths)
        self.assertEqual(actual.records[0].label_path, records[0].label_path)
        self.assertEqual([r.utt_id for r in actual.fit_records], ['a'])
        self.assertEqual([r.utt_id for r in actual.eval_records], ['b'])
        self.assertEqual(actual.layers(), [1, 2])

    def test_load_invalid_json(self):
        path = os.path.join(self.tmp, 'manifest.json')
        with open(path, 'w') as f:
            f.write('{not json')

        with self.assertRaises(ManifestError):
            mf.load_manifest(path)

    def test_load_missing_records(self):
        path = os.path.join(self.tmp, 'manifest.json')
        with open(path, 'w') as f:
            json.dump({'utterances': []}, f)

        with self.assertRaises(ManifestError):
            mf.load_manifest(path)

    def test_validate_ok(self):
        manifest = mf.DatasetManifest((self._record('a', label_frames=5),))

        self.assertTrue(mf.validate_manifest(manifest).ok)

    def test_validate_collects_violations(self):
        good = self._record('a')
        bad_t = self._record('b', frames=5)
        short = os.path.join(self.tmp, 'b', 'L3_plain.fmat')
        store_feature_matrix(np.zeros((4, 2)), short)
        bad_t.feature_paths[(3, mf.VIEW_PLAIN)] = short
        bad_label = self._record('c', label_frames=7)
        missing = mf.UtteranceRecord('d', 'test', {(1, 'noisy'): os.path.join(self.tmp, 'nope.fmat')})
        manifest = mf.DatasetManifest((good, bad_t, bad_label, missing, self._record('a')))

        report = mf.validate_manifest(manifest)

        messages = [str(v) for v in report]
        self.assertFalse(report.ok)
        self.assertTrue(any(m.startswith('b:') and 'disagree on T' in m for m in messages))
        self.assertTrue(any(m.startswith('c:') and 'label length 7' in m for m in messages))
        self.assertTrue(any(m.startswith('d:') and 'unknown split' in m for m in messages))
        self.assertTrue(any(m.startswith('d:') and 'unknown view' in m for m in messages))
        self.assertTrue(any(m.startswith('d:') and 'missing feature file' in m for m in messages))
        self.assertTrue(any(m.startswith('a:') and 'duplicate' in m for m in messages))

    def test_validate_undecodable_labels(self):
        record = self._record('a', frames=2, label_frames=2)
        with open(record.label_path, 'wb') as f:
            f.write(b'num_classes=2\n0\n\xff\n')

        report = mf.validate_manifest(mf.DatasetManifest((record,)))

        self.assertEqual(len(report), 1)
        self.assertIn('unreadable label file', str(report.violations[0]))

    def test_feature_path_missing(self):
        record = self._record('a', layers=(1,))

        with self.assertRaises(ManifestError):
            record.feature_path(2, mf.VIEW_PLAIN)

    def test_half_split(self):
        records = [self._record(u, layers=(1,)) for u in ('c', 'a', 'e', 'b', 'd')]

        fit, eval_ = mf.half_split(records)

        self.assertEqual([r.utt_id for r in fit], ['a', 'b'])
        self.assertEqual([r.utt_id for r in eval_], ['c', 'd', 'e'])

    def test_half_split_too_few(self):
        with self.assertRaises(ManifestError):
            mf.half_split([self._record('a', layers=(1,))])

    def test_load_record_features(self):
        records = [self._record(u, frames=3) for u in ('a', 'b', 'c')]

        serial = mf.load_record_features(records, 2, mf.VIEW_PLAIN)
        threaded = mf.load_record_features(records, 2, mf.VIEW_PLAIN, max_workers=3)

        self.assertEqual(len(serial), 3)
        for s, t in zip(serial, threaded):
            np.testing.assert_array_equal(s, t)
            np.testing.assert_array_equal(s, np.full((3, 2), 2.0))


if __name__ == '__main__':
    main()
