import os
import json
import pandas as pd
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from miprobe.estimators.mi import MIEstimate
from miprobe.formats import open_text, ensure_parent_dir, FormatError
from miprobe.common import log, version, util

LOGGER = log.get_logger()
REPORT_NAME, CURVE_NAME = 'report.json', 'curve.csv'
# excluded from the canonical form compared on replay, at top level and per check
VOLATILE_FIELDS = ('created_at', 'duration_secs')


@dataclass
class RunReport:
    """
    The self-contained record of one command run: its full config, one row
    per estimate (layer / checkpoint / metric context plus the MIEstimate),
    a summary and, for synth-validate, the check outcomes.
    """
    command: str
    config: Dict
    rows: List[Dict] = field(default_factory=list)
    summary: Dict = field(default_factory=dict)
    checks: List[Dict] = field(default_factory=list)
    version: str = field(default_factory=version.get_library_identifier)
    created_at: str = field(default_factory=util.get_current_datetime)
    duration_secs: Optional[float] = None

    @property
    def ok(self):
        return all(c['passed'] for c in self.checks)

    def add_row(self, estimate, **context):
        self.rows.append(dict(context, estimate=estimate))

    def to_dict(self):
        return {
            'command': self.command,
            'config': self.config,
            'rows': [
                dict(row, estimate=row['estimate'].to_dict()) for row in self.rows
            ],
            'summary': self.summary,
            'checks': self.checks,
            'version': self.version,
            'created_at': self.created_at,
            'duration_secs': self.duration_secs
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                command=d['command'],
                config=d['config'],
                rows=[dict(row, estimate=MIEstimate.from_dict(row['estimate'])) for row in d.get('rows', [])],
                summary=d.get('summary', {}),
                checks=d.get('checks', []),
                version=d['version'],
                created_at=d.get('created_at'),
                duration_secs=d.get('duration_secs')
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f'malformed run report: {e.__class__.__name__}: {str(e)}')

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def canonical_json(self):
        d = {k: v for k, v in self.to_dict().items() if k not in VOLATILE_FIELDS}
        d['checks'] = [{k: v for k, v in c.items() if k not in VOLATILE_FIELDS} for c in d['checks']]
        return json.dumps(d, indent=2, sort_keys=True)

    def curve(self):
        """Plot-ready rows: the context columns followed by the estimate columns."""
        records = []
        for row in self.rows:
            context = {k: v for k, v in row.items() if k != 'estimate'}
            records.append(dict(context, **row['estimate'].to_row()))
        return pd.DataFrame.from_records(records)

    def write(self, out_dir):
        """
        Writes <out_dir>/report.json and, when there are estimate rows,
        <out_dir>/curve.csv.

        Returns:
            (list): the paths written
        """
        report_path = os.path.join(out_dir, REPORT_NAME)
        ensure_parent_dir(report_path)
        with open_text(report_path, 'w') as f:
            f.write(self.to_json() + '\n')
        paths = [report_path]
        if self.rows:
            curve_path = os.path.join(out_dir, CURVE_NAME)
            self.curve().to_csv(curve_path, index=False, float_format='%.17g')
            paths.append(curve_path)
        LOGGER.info(f'wrote {", ".join(paths)}')
        return paths


def load_report(path):
    with open_text(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f'{path}: invalid JSON: {str(e)}')
    return RunReport.from_dict(doc)
