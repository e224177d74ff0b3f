import os
import tempfile
import numpy as np
from unittest import TestCase, main
from miprobe.oracle import OracleError
from miprobe.oracle import corpus
from miprobe.oracle.joint import mixture_channel, exact_mi_bits
from miprobe.oracle.sampling import EmbeddingSpec
from miprobe.formats.manifest import (
    load_manifest, validate_manifest, VIEW_PLAIN, VIEW_MASKED, VIEW_UNMASKED, SPLIT_FIT, SPLIT_EVAL
)
from miprobe.formats.fmat import load_feature_matrix
from miprobe.formats.labels import load_labels


class TestCorpus(TestCase):
    def setUp(self):
        self.channel = mixture_channel(3, 0.8)
        self.spec = EmbeddingSpec.separable(3)

    def test_labeled_corpus(self):
        c = corpus.labeled_corpus(self.channel, self.spec, 5, 8, seed=1)

        self.assertEqual([u.utt_id for u in c.utterances], [f'utt0000{i}' for i in range(5)])
        self.assertEqual([u.split for u in c.utterances], [SPLIT_FIT] * 2 + [SPLIT_EVAL] * 3)
        self.assertEqual(c.utterances[0].features[(1, VIEW_PLAIN)].shape, (8, 3))
        self.assertEqual(len(c.utterances[0].labels), 8)
        self.assertEqual(c.exact_mi_bits, exact_mi_bits(self.channel))

    def test_view_pair_corpus(self):
        c = corpus.view_pair_corpus(self.channel, self.spec, self.spec, 2, 6, seed=0, layer=4)

        self.assertEqual(set(c.utterances[0].features), {(4, VIEW_MASKED), (4, VIEW_UNMASKED)})
        self.assertIsNone(c.utterances[0].labels)

    def test_single_split(self):
        c = corpus.labeled_corpus(self.channel, self.spec, 1, 4, single_split=SPLIT_EVAL)

        self.assertEqual(c.utterances[0].split, SPLIT_EVAL)

    def test_half_split_needs_two(self):
        with self.assertRaises(OracleError):
            corpus.labeled_corpus(self.channel, self.spec, 1, 4)

    def test_layered_lagged(self):
        c = corpus.layered_lagged_corpus(self.channel, self.spec, 4, 12, 2, seed=3,
                                         num_layers=3, signal_layer=2)

        utt = c.utterances[0]
        self.assertEqual(sorted(utt.features), [(1, VIEW_PLAIN), (2, VIEW_PLAIN), (3, VIEW_PLAIN)])
        # the signal layer sits near its symbol's centroid
        signal = utt.features[(2, VIEW_PLAIN)]
        np.testing.assert_array_equal(signal.argmax(axis=1), utt.labels.ids)
        self.assertEqual(c.metadata['signal_layer'], 2)

    def test_layered_lagged_errors(self):
        with self.assertRaises(OracleError):
            corpus.layered_lagged_corpus(self.channel, self.spec, 2, 2, 2)
        with self.assertRaises(OracleError):
            corpus.layered_lagged_corpus(self.channel, self.spec, 2, 10, 2, num_layers=2, signal_layer=3)

    def test_export(self):
        c = corpus.labeled_corpus(self.channel, self.spec, 4, 10, seed=2, layer=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = corpus.export_corpus(c, tmp)

            manifest = load_manifest(path)
            self.assertEqual(path, os.path.join(tmp, corpus.MANIFEST_NAME))
            self.assertTrue(validate_manifest(manifest).ok)
            self.assertEqual(len(manifest), 4)
            record = manifest.records[1]
            values = load_feature_matrix(record.feature_path(3, VIEW_PLAIN)).values
            np.testing.assert_array_equal(values, c.utterances[1].features[(3, VIEW_PLAIN)].astype(np.float32))
            self.assertEqual(load_labels(record.label_path), c.utterances[1].labels)


if __name__ == '__main__':
    main()
