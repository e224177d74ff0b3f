import os
import json
import tempfile
import pandas as pd
from unittest import TestCase, main
from miprobe.cli import report
from miprobe.estimators.mi import MIEstimate, KIND_SUPERVISED
from miprobe.formats import FormatError


def _estimate(value):
    return MIEstimate(
        kind=KIND_SUPERVISED, probe_kind='logistic', value_bits=value, entropy_term_bits=1.0,
        cross_entropy_bits=1.0 - value, per_seed_values_bits=(value, value), seed_variance=0.0,
        n_fit_frames=20, n_eval_frames=20, num_classes=2, config={'seeds': [0, 1]}
    )


class TestRunReport(TestCase):
    def _report(self):
        r = report.RunReport(command='layer-scan', config={'layers': [1, 2]})
        r.add_row(_estimate(0.25), layer=1, metric='supervised', probe='logistic')
        r.add_row(_estimate(0.75), layer=2, metric='supervised', probe='logistic')
        r.summary = {'argmax_layer': {'supervised/logistic': 2}}
        return r

    def test_defaults(self):
        r = report.RunReport(command='probe-supervised', config={})

        self.assertTrue(r.version.startswith('miprobe v'))
        self.assertIsNotNone(r.created_at)
        self.assertTrue(r.ok)

    def test_dict_round_trip(self):
        r = self._report()

        loaded = report.RunReport.from_dict(json.loads(r.to_json()))

        self.assertEqual(loaded.to_json(), r.to_json())
        self.assertEqual(loaded.rows[1]['estimate'], r.rows[1]['estimate'])

    def test_canonical_ignores_volatile_fields(self):
        first, second = self._report(), self._report()
        first.created_at, second.created_at = '2020-01-01T00:00:00Z', '2021-01-01T00:00:00Z'
        first.duration_secs, second.duration_secs = 1.0, 2.0

        self.assertEqual(first.canonical_json(), second.canonical_json())
        self.assertNotEqual(first.to_json(), second.to_json())
        self.assertNotIn('created_at', json.loads(first.canonical_json()))

    def test_canonical_ignores_check_durations(self):
        first = report.RunReport(command='synth-validate', config={})
        second = report.RunReport(command='synth-validate', config={})
        first.checks = [{'name': 'a', 'passed': True, 'detail': 'x', 'duration_secs': 1.5}]
        second.checks = [{'name': 'a', 'passed': True, 'detail': 'x', 'duration_secs': 9.0}]
        second.created_at = first.created_at

        self.assertEqual(first.canonical_json(), second.canonical_json())
        self.assertEqual(first.checks[0]['duration_secs'], 1.5)
        second.checks[0]['detail'] = 'y'
        self.assertNotEqual(first.canonical_json(), second.canonical_json())

    def test_ok_reflects_checks(self):
        r = report.RunReport(command='synth-validate', config={})
        r.checks = [{'name': 'a', 'passed': True}, {'name': 'b', 'passed': False}]

        self.assertFalse(r.ok)

    def test_curve(self):
        curve = self._report().curve()

        self.assertEqual(list(curve['layer']), [1, 2])
        self.assertEqual(list(curve['value_bits']), [0.25, 0.75])
        self.assertEqual(curve['per_seed_values_bits'][0], '0.25;0.25')

    def test_write_and_load(self):
        r = self._report()
        with tempfile.TemporaryDirectory() as tmp:
            paths = r.write(os.path.join(tmp, 'out'))

            self.assertEqual([os.path.basename(p) for p in paths], [report.REPORT_NAME, report.CURVE_NAME])
            loaded = report.load_report(paths[0])
            curve = pd.read_csv(paths[1])

        self.assertEqual(loaded.canonical_json(), r.canonical_json())
        self.assertEqual(list(curve['value_bits']), [0.25, 0.75])

    def test_write_without_rows(self):
        with tempfile.TemporaryDirectory() as tmp:
            paths = report.RunReport(command='replay', config={}).write(tmp)

        self.assertEqual(len(paths), 1)

    def test_load_invalid(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'report.json')
            with open(path, 'w') as f:
                f.write('[1, 2')
            with self.assertRaises(FormatError):
                report.load_report(path)
            with open(path, 'w') as f:
                json.dump({'command': 'x'}, f)
            with self.assertRaises(FormatError):
                report.load_report(path)


if __name__ == '__main__':
    main()
