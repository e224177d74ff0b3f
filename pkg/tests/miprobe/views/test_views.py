import numpy as np
from unittest import TestCase, main
from miprobe import views


class TestViewPairing(TestCase):
    def test_pairs(self):
        pairing = views.ViewPairing([0, 1], [3, 4], 5)

        self.assertEqual(pairing.pairs, [(0, 3), (1, 4)])
        self.assertEqual(len(pairing), 2)

    def test_rejects_invalid(self):
        cases = {
            'out of range': ([0, 5], [0, 1], 5),
            'unsorted': ([2, 1], [2, 1], 5),
            'duplicate': ([1, 1], [2, 2], 5),
            'length': ([0, 1], [0], 5)
        }
        for name, (a, b, T) in cases.items():
            with self.subTest(name):
                with self.assertRaises(views.ViewError):
                    views.ViewPairing(a, b, T)

    def test_pair_features(self):
        za = np.arange(10).reshape(5, 2)
        zb = -np.arange(15).reshape(5, 3)
        pairing = views.ViewPairing([0, 1], [3, 4], 5)

        rows_a, rows_b = views.pair_features(za, zb, pairing)

        np.testing.assert_array_equal(rows_a, za[[0, 1]])
        np.testing.assert_array_equal(rows_b, zb[[3, 4]])

    def test_pair_features_length_mismatch(self):
        pairing = views.ViewPairing([0], [1], 5)

        with self.assertRaises(views.ViewError):
            views.pair_features(np.zeros((5, 2)), np.zeros((4, 2)), pairing)


if __name__ == '__main__':
    main()
