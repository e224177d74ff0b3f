import numpy as np
from unittest import TestCase, main
from miprobe.oracle import OracleError
from miprobe.oracle import joint


class TestJointTable(TestCase):
    def test_marginals(self):
        table = joint.JointTable([[0.1, 0.2], [0.3, 0.4]])

        np.testing.assert_allclose(table.row_marginal, [0.3, 0.7])
        np.testing.assert_allclose(table.col_marginal, [0.4, 0.6])
        self.assertEqual(table.transpose().shape, (2, 2))

    def test_rejects_invalid(self):
        cases = {
            'sum': [[0.5, 0.6]],
            'negative': [[1.5, -0.5]],
            'nan': [[np.nan, 1.0]],
            'shape': [0.5, 0.5]
        }
        for name, probs in cases.items():
            with self.subTest(name):
                with self.assertRaises(OracleError):
                    joint.JointTable(probs)


class TestExactMI(TestCase):
    def test_independent(self):
        self.assertEqual(joint.exact_mi_bits(np.full((2, 2), 0.25)), 0.0)

    def test_perfect_bit(self):
        self.assertAlmostEqual(joint.exact_mi_bits(np.diag([0.5, 0.5])), 1.0)

    def test_noisy_bit(self):
        actual = joint.exact_mi_bits(joint.JointTable([[0.4, 0.1], [0.1, 0.4]]))

        self.assertAlmostEqual(actual, 0.278072, places=6)

    def test_bounds_and_symmetry(self):
        for seed in range(20):
            with self.subTest(seed=seed):
                table = joint.random_joint(3, 4, seed=seed)
                h_rows, h_cols = joint.marginal_entropies_bits(table)

                value = joint.exact_mi_bits(table)

                self.assertGreaterEqual(value, 0.0)
                self.assertLessEqual(value, min(h_rows, h_cols) + 1e-12)
                self.assertAlmostEqual(value, joint.exact_mi_bits(table.transpose()), places=12)


class TestMixtureChannel(TestCase):
    def test_identity(self):
        self.assertAlmostEqual(joint.exact_mi_bits(joint.mixture_channel(4, 1.0)), 2.0)

    def test_independent(self):
        self.assertAlmostEqual(joint.exact_mi_bits(joint.mixture_channel(6, 0.0)), 0.0, places=12)

    def test_uniform_marginals(self):
        table = joint.mixture_channel(4, 0.7)

        np.testing.assert_allclose(table.row_marginal, np.full(4, 0.25))
        np.testing.assert_allclose(table.col_marginal, np.full(4, 0.25))

    def test_strictly_increasing(self):
        grid = np.linspace(0.0, 1.0, 11)

        values = [joint.exact_mi_bits(joint.mixture_channel(4, p)) for p in grid]

        self.assertTrue(np.all(np.diff(values) > 0))

    def test_rejects_invalid(self):
        with self.assertRaises(OracleError):
            joint.mixture_channel(1, 0.5)
        with self.assertRaises(OracleError):
            joint.mixture_channel(4, 1.5)


if __name__ == '__main__':
    main()
