import os
import tempfile
from unittest import TestCase, main
from unittest.mock import patch, Mock
import numpy as np
from miprobe import formats
from miprobe.formats.fmat import FeatureMatrix
from miprobe.formats.labels import FrameLabels


class TestPackage(TestCase):
    @patch('builtins.open')
    def test_open_binary(self, mock_open):
        expected_file = Mock()
        expected_file.closed = False
        mock_open.return_value = expected_file

        with formats.open_binary('f.fmat') as f:
            self.assertEqual(f, expected_file)

        mock_open.assert_called_with('f.fmat', formats.MODE_READ)
        expected_file.close.assert_called_with()

    @patch('builtins.open')
    def test_open_binary_error(self, mock_open):
        mock_open.side_effect = FileNotFoundError('no such file')

        with self.assertRaises(formats.FormatIOError):
            with formats.open_binary('missing.fmat'):
                pass

    def test_open_text_missing(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(formats.FormatIOError):
                with formats.open_text(os.path.join(tmp, 'missing.lab')):
                    pass

    def test_ensure_parent_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'a', 'b', 'c.fmat')

            formats.ensure_parent_dir(path)

            self.assertTrue(os.path.isdir(os.path.join(tmp, 'a', 'b')))

    def test_file_has_ext(self):
        self.assertTrue(formats.file_has_ext('x/L1_plain.fmat', formats.FORMAT_FMAT_EXT))
        self.assertFalse(formats.file_has_ext('x/utt.lab', formats.FORMAT_FMAT_EXT))

    def test_format_error_offset(self):
        e = formats.ShapeMismatchError('short payload', offset=24)

        self.assertEqual(e.offset, 24)
        self.assertIn('byte offset 24', str(e))
        self.assertIsInstance(e, formats.FormatError)

    def test_file_format_objects(self):
        matrix = FeatureMatrix(np.arange(6, dtype=np.float32).reshape(3, 2))
        labels = FrameLabels([0, 2, 1], 3)

        with tempfile.TemporaryDirectory() as tmp:
            for obj in (matrix, labels):
                path = os.path.join(tmp, f'utt.{obj.extension}')
                obj.to_file(path)
                self.assertTrue(formats.file_has_ext(path, obj.extension))

            m = FeatureMatrix.from_file(os.path.join(tmp, 'utt.fmat'))
            lab = FrameLabels.from_file(os.path.join(tmp, 'utt.lab'))

        np.testing.assert_array_equal(m.values, matrix.values)
        np.testing.assert_array_equal(lab.ids, labels.ids)
        self.assertEqual(str(m), 'FeatureMatrix (FMAT)')
        self.assertEqual(lab.format, formats.FORMAT_LABELS)

    def test_format_error_no_offset(self):
        e = formats.LabelFormatError('bad header')

        self.assertIsNone(e.offset)
        self.assertEqual(str(e), 'bad header')


if __name__ == '__main__':
    main()
