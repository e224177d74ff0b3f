import os
import tempfile
import numpy as np
from unittest import TestCase, main
from miprobe.formats import FormatError, LabelFormatError
from miprobe.formats import labels


class TestLabels(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self._tmp.name, 'utt.lab')

    def tearDown(self):
        self._tmp.cleanup()

    def _write(self, text):
        with open(self.path, 'w') as f:
            f.write(text)

    def test_round_trip(self):
        expected = labels.FrameLabels(np.array([0, 2, 1, 2]), 3)

        labels.store_labels(expected, self.path)
        actual = labels.load_labels(self.path)

        self.assertEqual(actual, expected)
        with open(self.path) as f:
            self.assertEqual(f.readline(), 'num_classes=3\n')

    def test_empty_body(self):
        self._write('num_classes=4\n')

        actual = labels.load_labels(self.path)

        self.assertEqual(len(actual), 0)
        self.assertEqual(actual.num_classes, 4)

    def test_out_of_range(self):
        self._write('num_classes=2\n0\n2\n')

        with self.assertRaises(LabelFormatError) as ctx:
            labels.load_labels(self.path)

        self.assertIn('line 3', str(ctx.exception))

    def test_bad_token(self):
        self._write('num_classes=2\n0\n-1\n')

        with self.assertRaises(LabelFormatError):
            labels.load_labels(self.path)

    def test_invalid_utf8(self):
        with open(self.path, 'wb') as f:
            f.write(b'num_classes=2\n0\n\xff\n')

        with self.assertRaises(FormatError) as ctx:
            labels.load_labels(self.path)

        self.assertIn('UTF-8', str(ctx.exception))

    def test_missing_header(self):
        self._write('0\n1\n')

        with self.assertRaises(LabelFormatError):
            labels.load_labels(self.path)

    def test_in_memory_validation(self):
        with self.assertRaises(LabelFormatError):
            labels.FrameLabels(np.array([0, 5]), 3)
        with self.assertRaises(LabelFormatError):
            labels.FrameLabels(np.array([0.5]), 3)
        with self.assertRaises(LabelFormatError):
            labels.FrameLabels(np.array([0]), 0)


if __name__ == '__main__':
    main()
