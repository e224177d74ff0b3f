import sys
import argparse
from miprobe.cli import DataError, ValidationFailure, EXIT_OK, EXIT_VALIDATION, EXIT_DATA
from miprobe.cli import commands
from miprobe.cli.validate import cmd_synth_validate
from miprobe.estimators.cluster import ClusterError, DEFAULT_NUM_CLUSTERS, DEFAULT_MAX_ITER
from miprobe.estimators.mi import EstimationError
from miprobe.estimators.probe import ProbeError, SUPPORTED_PROBES
from miprobe.formats import FormatError
from miprobe.oracle import OracleError
from miprobe.views import ViewError
from miprobe.views.shift import DEFAULT_SHIFT_FRAMES
from miprobe.views.mask import DEFAULT_MASK_PERIOD, DEFAULT_MASKED_PER_PERIOD
from miprobe.common import log, version

LOGGER = log.get_logger()
COMMANDS = {
    commands.COMMAND_PROBE_SUPERVISED: commands.cmd_probe_supervised,
    commands.COMMAND_PROBE_UNSUPERVISED: commands.cmd_probe_unsupervised,
    commands.COMMAND_EMIT_MASK: commands.cmd_emit_mask,
    commands.COMMAND_LAYER_SCAN: commands.cmd_layer_scan,
    commands.COMMAND_CHECKPOINT_SCAN: commands.cmd_checkpoint_scan,
    commands.COMMAND_SYNTH_VALIDATE: cmd_synth_validate
}
DATA_ERRORS = (
    DataError, FormatError, ViewError, ClusterError, ProbeError, EstimationError, OracleError, ValueError
)
DEFAULT_SEEDS_FLAG = '0,1,2,3,4'


def _add_probe_flags(parser):
    parser.add_argument('--probe', dest='probes', action='append', choices=SUPPORTED_PROBES,
                        help='probe kind; repeat for several (default: logistic)')
    parser.add_argument('--hidden', type=int, default=512, help='MLP hidden width')
    parser.add_argument('--dropout', type=float, default=0.1, help='MLP dropout rate')
    parser.add_argument('--lr', type=float, default=0.1, help='SGD learning rate')
    parser.add_argument('--epochs', type=int, default=10)
    parser.add_argument('--batch', type=int, default=256)
    parser.add_argument('--seeds', default=DEFAULT_SEEDS_FLAG, help='comma-separated seeds')


def _add_view_flags(parser):
    parser.add_argument('--shift-frames', type=int, default=DEFAULT_SHIFT_FRAMES)
    parser.add_argument('--mask-period', type=int, default=DEFAULT_MASK_PERIOD)
    parser.add_argument('--mask-frames', default=str(DEFAULT_MASKED_PER_PERIOD),
                        help='masked frames per period; a comma list sweeps several')
    parser.add_argument('--positions', choices=['masked', 'all'], default='masked')
    parser.add_argument('--k', default=str(DEFAULT_NUM_CLUSTERS),
                        help='k-means clusters; a comma list sweeps several')
    parser.add_argument('--max-iter', type=int, default=DEFAULT_MAX_ITER)
    parser.add_argument('--normalize', action='store_true',
                        help='standardize view-b features before k-means')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='miprobe',
        description='Mutual information lower bounds for speech representations.')
    parser.add_argument('--version', action='version', version=version.get_library_identifier())
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser(commands.COMMAND_PROBE_SUPERVISED, help='supervised bound I(Z;Y)')
    p.add_argument('--manifest', required=True)
    p.add_argument('--layer', type=int)
    _add_probe_flags(p)
    p.add_argument('--out')

    p = sub.add_parser(commands.COMMAND_PROBE_UNSUPERVISED, help='unsupervised bound I(Za;Zb)')
    p.add_argument('--manifest', required=True)
    p.add_argument('--layer', type=int)
    p.add_argument('--mode', choices=[commands.MODE_SHIFT, commands.MODE_MASK], default=commands.MODE_SHIFT)
    _add_view_flags(p)
    _add_probe_flags(p)
    p.add_argument('--out')

    p = sub.add_parser(commands.COMMAND_EMIT_MASK, help='write one mask spec per utterance')
    p.add_argument('--manifest', required=True)
    p.add_argument('--mask-period', type=int, default=DEFAULT_MASK_PERIOD)
    p.add_argument('--mask-frames', type=int, default=DEFAULT_MASKED_PER_PERIOD)
    p.add_argument('--out', required=True)

    p = sub.add_parser(commands.COMMAND_LAYER_SCAN, help='per-layer bound curve')
    p.add_argument('--manifest', required=True)
    p.add_argument('--layer', dest='layers', help='comma-separated layers (default: all)')
    p.add_argument('--mode', dest='modes', action='append', choices=commands.SUPPORTED_MODES,
                   help='metric; repeat for several (default: supervised and shift)')
    _add_view_flags(p)
    _add_probe_flags(p)
    p.add_argument('--out')

    p = sub.add_parser(commands.COMMAND_CHECKPOINT_SCAN, help='per-checkpoint bound curve')
    p.add_argument('--manifest', dest='manifests', action='append', required=True,
                   help='one manifest per checkpoint, in order')
    p.add_argument('--steps', help='comma-separated training steps, one per manifest')
    p.add_argument('--baseline', type=int, help='checkpoint index to difference against')
    p.add_argument('--layer', type=int)
    p.add_argument('--mode', choices=commands.SUPPORTED_MODES, default=commands.MODE_SHIFT)
    _add_view_flags(p)
    _add_probe_flags(p)
    p.add_argument('--out')

    p = sub.add_parser(commands.COMMAND_SYNTH_VALIDATE, help='run the synthetic acceptance suite')
    p.add_argument('--quick', action='store_true', help='10x fewer frames, 0.15-bit tolerances')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')

    p = sub.add_parser(commands.COMMAND_REPLAY, help='re-run a report and compare')
    p.add_argument('report')
    p.add_argument('--out')
    return parser


def _kwargs(args):
    kwargs = {k: v for k, v in vars(args).items() if k != 'command'}
    if 'probes' in kwargs and kwargs['probes'] is None:
        kwargs['probes'] = list(commands.DEFAULT_PROBES)
    if 'modes' in kwargs and kwargs['modes'] is None:
        kwargs['modes'] = list(commands.DEFAULT_SCAN_MODES)
    return kwargs


def run(argv=None):
    """
    Parses arguments, runs one subcommand and maps the outcome to an exit
    status: 0 success, 1 validation failure, 2 data error.
    """
    args = build_parser().parse_args(argv)
    kwargs = _kwargs(args)
    try:
        if args.command == commands.COMMAND_REPLAY:
            report = commands.cmd_replay(kwargs['report'], COMMANDS, out=kwargs['out'])
        else:
            report = COMMANDS[args.command](**kwargs)
    except ValidationFailure as e:
        LOGGER.error(f'validation failure: {str(e)}')
        return EXIT_VALIDATION
    except DATA_ERRORS as e:
        LOGGER.error(f'data error: {e.__class__.__name__}: {str(e)}')
        return EXIT_DATA
    sys.stdout.write(report.to_json() + '\n')
    if not report.ok:
        return EXIT_VALIDATION
    return EXIT_OK


def main():
    sys.exit(run())
