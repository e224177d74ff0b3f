import numpy as np
from unittest import TestCase, main
import miprobe as mp
from miprobe.common import version


class TestPackage(TestCase):
    def test_version(self):
        expected_ver_info = version.get_current_version()

        self.assertEqual(mp.__version__, expected_ver_info['Version'])
        self.assertEqual(mp.__version_date__, expected_ver_info['CreatedDate'])
        self.assertEqual(mp.__version_notes__, expected_ver_info['Notes'])

    def test_exports(self):
        self.assertAlmostEqual(mp.exact_mi_bits(np.diag([0.25] * 4)), 2.0)
        self.assertAlmostEqual(mp.empirical_entropy_bits(np.array([0, 1]), 2), 1.0)
        self.assertEqual(mp.ProbeConfig().kind, 'logistic')


if __name__ == '__main__':
    main()
