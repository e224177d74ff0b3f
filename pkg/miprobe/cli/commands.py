import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from functools import partial
from miprobe.cli import DataError, ValidationFailure
from miprobe.cli.report import RunReport, load_report
from miprobe.estimators.cluster import DEFAULT_NUM_CLUSTERS, DEFAULT_MAX_ITER
from miprobe.estimators.mi import (
    supervised_lower_bound, unsupervised_lower_bound, run_seeded, DEFAULT_SEEDS
)
from miprobe.estimators.probe import ProbeConfig, PROBE_LOGISTIC
from miprobe.formats.labels import load_labels
from miprobe.formats.manifest import (
    load_manifest, validate_manifest, half_split, load_record_features,
    VIEW_PLAIN, VIEW_MASKED, VIEW_UNMASKED
)
from miprobe.views import ViewError, pair_features
from miprobe.views.shift import time_shift_pairing, DEFAULT_SHIFT_FRAMES
from miprobe.views.mask import (
    block_mask_spec, masked_pairing, write_mask_spec, DEFAULT_MASK_PERIOD,
    DEFAULT_MASKED_PER_PERIOD, POSITIONS_MASKED, POSITIONS_ALL
)
from miprobe.common import log, timing, util, version

LOGGER = log.get_logger()
COMMAND_PROBE_SUPERVISED = 'probe-supervised'
COMMAND_PROBE_UNSUPERVISED = 'probe-unsupervised'
COMMAND_EMIT_MASK = 'emit-mask'
COMMAND_LAYER_SCAN = 'layer-scan'
COMMAND_CHECKPOINT_SCAN = 'checkpoint-scan'
COMMAND_SYNTH_VALIDATE = 'synth-validate'
COMMAND_REPLAY = 'replay'
MODE_SUPERVISED, MODE_SHIFT, MODE_MASK = 'supervised', 'shift', 'mask'
SUPPORTED_MODES = [MODE_SUPERVISED, MODE_SHIFT, MODE_MASK]
# --positions flag values
POSITION_FLAGS = {'masked': POSITIONS_MASKED, 'all': POSITIONS_ALL}
DEFAULT_PROBES = (PROBE_LOGISTIC,)
DEFAULT_SCAN_MODES = (MODE_SUPERVISED, MODE_SHIFT)


def _probe_settings(probes=DEFAULT_PROBES, hidden=512, dropout=0.1, lr=0.1, epochs=10, batch=256):
    return [
        ProbeConfig(kind=p, hidden_dim=hidden, dropout_rate=dropout, learning_rate=lr,
                    epochs=epochs, batch_size=batch)
        for p in probes
    ]


def _load_checked_manifest(path):
    manifest = load_manifest(path)
    report = validate_manifest(manifest)
    if not report.ok:
        for violation in report:
            LOGGER.error(f'manifest violation: {violation}')
        raise ValidationFailure(
            f'{path}: {len(report)} manifest violation(s), first: {report.violations[0]}')
    return manifest


def _resolve_layer(manifest, layer):
    layers = manifest.layers()
    if not layers:
        raise DataError('the manifest lists no feature dumps')
    if layer is None:
        return layers[-1]
    if layer not in layers:
        raise DataError(f'layer {layer} is not in the manifest (layers: {layers})')
    return layer


def _sorted(records):
    # pooling order must not depend on manifest order
    return sorted(records, key=lambda r: r.utt_id)


def _labeled_pairs(records, layer, max_workers):
    for r in records:
        if r.label_path is None:
            raise DataError(f'utterance {r.utt_id} has no label_path')
    features = load_record_features(records, layer, VIEW_PLAIN, max_workers)
    return [(z, load_labels(r.label_path)) for r, z in zip(records, features)]


def _shift_pairs(records, layer, shift_frames, max_workers):
    pairs = []
    features = load_record_features(records, layer, VIEW_PLAIN, max_workers)
    for r, z in zip(records, features):
        try:
            pairing = time_shift_pairing(z.shape[0], shift_frames)
        except ViewError as e:
            LOGGER.warning(f'skipping utterance {r.utt_id}: {str(e)}')
            continue
        pairs.append(pair_features(z, z, pairing))
    return pairs, {}


def _mask_pairs(records, layer, mask_period, mask_frames, positions, max_workers):
    pairs, masked, total = [], 0, 0
    za_list = load_record_features(records, layer, VIEW_MASKED, max_workers)
    zb_list = load_record_features(records, layer, VIEW_UNMASKED, max_workers)
    for r, za, zb in zip(records, za_list, zb_list):
        if za.shape[0] != zb.shape[0]:
            raise DataError(
                f'utterance {r.utt_id}: masked dump has T={za.shape[0]} '
                f'but unmasked dump has T={zb.shape[0]}')
        spec = block_mask_spec(za.shape[0], mask_period, mask_frames)
        masked += spec.num_masked
        total += len(spec)
        try:
            pairing = masked_pairing(spec, POSITION_FLAGS[positions])
        except ViewError as e:
            LOGGER.warning(f'skipping utterance {r.utt_id}: {str(e)}')
            continue
        pairs.append(pair_features(za, zb, pairing))
    return pairs, {'masked_frames': masked, 'total_frames': total}


def _view_pairs(records, layer, mode, opts, mask_frames, max_workers):
    if mode == MODE_SHIFT:
        pairs, stats = _shift_pairs(records, layer, opts['shift_frames'], max_workers)
    else:
        if opts['positions'] not in POSITION_FLAGS:
            raise ViewError(f'positions \'{opts["positions"]}\' is not one of {sorted(POSITION_FLAGS)}')
        pairs, stats = _mask_pairs(
            records, layer, opts['mask_period'], mask_frames, opts['positions'], max_workers)
    if not pairs:
        raise DataError(f'no utterance is long enough to pair in {mode} mode')
    return pairs, stats


def _supervised_run(fit, ev, cfg, seed):
    return supervised_lower_bound(fit, ev, replace(cfg, seed=seed))


def _unsupervised_run(fit, ev, k, cfg, max_iter, normalize, seed):
    return unsupervised_lower_bound(fit, ev, k, replace(cfg, seed=seed), max_iter, normalize)


def _estimate_rows(mode, fit_records, eval_records, layer, opts, max_workers=1):
    """
    Every estimate one metric asks for on one layer: one row per probe
    kind, and for the unsupervised modes per k and mask_frames variant.

    Returns:
        (list): (context dict, MIEstimate) tuples
    """
    if mode not in SUPPORTED_MODES:
        raise DataError(f'mode \'{mode}\' is not supported. Please use one of {SUPPORTED_MODES}')
    fit_records, eval_records = _sorted(fit_records), _sorted(eval_records)
    if not eval_records:
        raise DataError('the manifest has no eval records')
    if not fit_records:
        raise DataError('the manifest has no fit records')
    settings = _probe_settings(**opts['probe'])
    seeds = opts['seeds']
    rows = []
    if mode == MODE_SUPERVISED:
        fit = _labeled_pairs(fit_records, layer, max_workers)
        ev = _labeled_pairs(eval_records, layer, max_workers)
        for cfg in settings:
            est = run_seeded(partial(_supervised_run, fit, ev, cfg), seeds)
            rows.append(({'metric': mode, 'probe': cfg.kind}, est))
        return rows

    variants = opts['mask_frames'] if mode == MODE_MASK else [None]
    for mask_frames in variants:
        fit, fit_stats = _view_pairs(fit_records, layer, mode, opts, mask_frames, max_workers)
        ev, eval_stats = _view_pairs(eval_records, layer, mode, opts, mask_frames, max_workers)
        extras = {}
        if mode == MODE_SHIFT:
            extras['shift_frames'] = opts['shift_frames']
        else:
            total = fit_stats['total_frames'] + eval_stats['total_frames']
            extras['mask_frames'] = mask_frames
            extras['mask_ratio'] = (fit_stats['masked_frames'] + eval_stats['masked_frames']) / total
        for k in opts['k']:
            for cfg in settings:
                run = partial(_unsupervised_run, fit, ev, k, cfg, opts['max_iter'], opts['normalize'])
                est = run_seeded(run, seeds)
                rows.append((dict({'metric': mode, 'probe': cfg.kind, 'k': k}, **extras), est))
    return rows


def _options(shift_frames, mask_period, mask_frames, positions, k, max_iter, normalize, seeds, probe):
    return {
        'shift_frames': shift_frames,
        'mask_period': mask_period,
        'mask_frames': util.parse_int_list(mask_frames),
        'positions': positions,
        'k': util.parse_int_list(k),
        'max_iter': max_iter,
        'normalize': normalize,
        'seeds': util.parse_int_list(seeds),
        'probe': probe
    }


def _probe_opts(probes, hidden, dropout, lr, epochs, batch):
    return {'probes': list(probes), 'hidden': hidden, 'dropout': dropout, 'lr': lr,
            'epochs': epochs, 'batch': batch}


def _metric_key(row):
    key = f'{row["metric"]}/{row["probe"]}'
    if 'k' in row:
        key += f'/k={row["k"]}'
    if row.get('mask_frames') is not None:
        key += f'/mask_frames={row["mask_frames"]}'
    return key


def finish_report(report, timer, out):
    timer.end()
    report.duration_secs = timer.duration
    negatives = [_metric_key(r) for r in report.rows if r['estimate'].is_negative]
    if negatives:
        LOGGER.warning(f'negative bound estimates (reported unclamped): {negatives}')
    if out:
        report.write(out)
    return report


def cmd_probe_supervised(manifest, layer=None, probes=DEFAULT_PROBES, hidden=512, dropout=0.1, lr=0.1,
                         epochs=10, batch=256, seeds=DEFAULT_SEEDS, out=None):
    """
    Supervised bound I(Z;Y) on one layer's plain dumps, one seed-aggregated
    estimate per probe kind.

    Raises:
        (ValidationFailure): if the manifest fails validation
        (DataError): if a record lacks labels or the layer is absent
    """
    timer = timing.Timer()
    timer.start()
    config = {
        'manifest': os.path.abspath(manifest), 'layer': layer, 'probes': list(probes),
        'hidden': hidden, 'dropout': dropout, 'lr': lr, 'epochs': epochs, 'batch': batch,
        'seeds': util.parse_int_list(seeds)
    }
    m = _load_checked_manifest(manifest)
    layer = _resolve_layer(m, layer)
    opts = {'probe': _probe_opts(probes, hidden, dropout, lr, epochs, batch), 'seeds': config['seeds']}
    report = RunReport(command=COMMAND_PROBE_SUPERVISED, config=config)
    for context, est in _estimate_rows(MODE_SUPERVISED, m.fit_records, m.eval_records, layer, opts,
                                       util.get_max_workers()):
        report.add_row(est, layer=layer, **context)
    return finish_report(report, timer, out)


def cmd_probe_unsupervised(manifest, layer=None, mode=MODE_SHIFT, shift_frames=DEFAULT_SHIFT_FRAMES,
                           mask_period=DEFAULT_MASK_PERIOD, mask_frames=DEFAULT_MASKED_PER_PERIOD,
                           positions='masked', k=DEFAULT_NUM_CLUSTERS, probes=DEFAULT_PROBES, hidden=512,
                           dropout=0.1, lr=0.1, epochs=10, batch=256, seeds=DEFAULT_SEEDS,
                           max_iter=DEFAULT_MAX_ITER, normalize=False, out=None):
    """
    Unsupervised bound I(Za;Zb) on one layer, with views from a time shift
    (plain dumps) or from block masking (masked and unmasked dumps).

    Raises:
        (ValidationFailure): if the manifest fails validation
        (DataError): for missing view dumps or a T mismatch between them
    """
    timer = timing.Timer()
    timer.start()
    if mode not in (MODE_SHIFT, MODE_MASK):
        raise DataError(f'unsupervised mode must be {MODE_SHIFT} or {MODE_MASK}, got \'{mode}\'')
    opts = _options(shift_frames, mask_period, mask_frames, positions, k, max_iter, normalize, seeds,
                    _probe_opts(probes, hidden, dropout, lr, epochs, batch))
    config = {
        'manifest': os.path.abspath(manifest), 'layer': layer, 'mode': mode,
        'shift_frames': shift_frames, 'mask_period': mask_period, 'mask_frames': opts['mask_frames'],
        'positions': positions, 'k': opts['k'], 'probes': list(probes), 'hidden': hidden,
        'dropout': dropout, 'lr': lr, 'epochs': epochs, 'batch': batch, 'seeds': opts['seeds'],
        'max_iter': max_iter, 'normalize': normalize
    }
    m = _load_checked_manifest(manifest)
    layer = _resolve_layer(m, layer)
    report = RunReport(command=COMMAND_PROBE_UNSUPERVISED, config=config)
    for context, est in _estimate_rows(mode, m.fit_records, m.eval_records, layer, opts,
                                       util.get_max_workers()):
        report.add_row(est, layer=layer, **context)
    return finish_report(report, timer, out)


def cmd_emit_mask(manifest, mask_period=DEFAULT_MASK_PERIOD, mask_frames=DEFAULT_MASKED_PER_PERIOD, out=None):
    """
    Writes <out>/<utt_id>.mask for every utterance so an upstream extractor
    can run the masked forward pass. T comes from the utterance's dumps.
    """
    timer = timing.Timer()
    timer.start()
    if not out:
        raise DataError('emit-mask needs an output directory')
    config = {
        'manifest': os.path.abspath(manifest), 'mask_period': mask_period, 'mask_frames': mask_frames,
        'out': os.path.abspath(out)
    }
    m = _load_checked_manifest(manifest)
    report = RunReport(command=COMMAND_EMIT_MASK, config=config)
    # fails before anything is written
    block_mask_spec(mask_period, mask_period, mask_frames)
    written = []
    for record in _sorted(m.records):
        if not record.feature_paths:
            raise DataError(f'utterance {record.utt_id} lists no dumps to take T from')
        first = sorted(record.feature_paths)[0]
        T = load_record_features([record], *first)[0].shape[0]
        spec = block_mask_spec(T, mask_period, mask_frames)
        write_mask_spec(spec, os.path.join(out, f'{record.utt_id}.mask'))
        written.append({'utt_id': record.utt_id, 'T': T, 'masked': spec.num_masked})
    report.summary = {'masks': written}
    LOGGER.info(f'wrote {len(written)} mask specs to {out}')
    timer.end()
    report.duration_secs = timer.duration
    report.write(out)
    return report


def _scan_layer(manifest, layer, modes, opts):
    rows = []
    for mode in modes:
        for context, est in _estimate_rows(mode, manifest.fit_records, manifest.eval_records, layer, opts):
            rows.append((dict({'layer': layer}, **context), est))
    return rows


def _argmax(report, index_key):
    best = {}
    for row in report.rows:
        key = _metric_key(row)
        value = row['estimate'].value_bits
        # strict comparison keeps the first index on ties
        if key not in best or value > best[key][1]:
            best[key] = (row[index_key], value)
    return {key: idx for key, (idx, _) in best.items()}


def cmd_layer_scan(manifest, layers=None, modes=DEFAULT_SCAN_MODES, shift_frames=DEFAULT_SHIFT_FRAMES,
                   mask_period=DEFAULT_MASK_PERIOD, mask_frames=DEFAULT_MASKED_PER_PERIOD, positions='masked',
                   k=DEFAULT_NUM_CLUSTERS, probes=DEFAULT_PROBES, hidden=512, dropout=0.1, lr=0.1, epochs=10,
                   batch=256, seeds=DEFAULT_SEEDS, max_iter=DEFAULT_MAX_ITER, normalize=False, out=None):
    """
    Estimates every requested metric on every layer. Layers run in parallel
    (capped by MIPROBE_THREADS) and rows are ordered by layer regardless.
    The summary names the argmax layer per metric.
    """
    timer = timing.Timer()
    timer.start()
    opts = _options(shift_frames, mask_period, mask_frames, positions, k, max_iter, normalize, seeds,
                    _probe_opts(probes, hidden, dropout, lr, epochs, batch))
    m = _load_checked_manifest(manifest)
    available = m.layers()
    layers = available if layers is None else util.parse_int_list(layers)
    missing = [layer for layer in layers if layer not in available]
    if missing or not layers:
        raise DataError(f'layers {missing or layers} are not in the manifest (layers: {available})')
    config = {
        'manifest': os.path.abspath(manifest), 'layers': list(layers), 'modes': list(modes),
        'shift_frames': shift_frames, 'mask_period': mask_period, 'mask_frames': opts['mask_frames'],
        'positions': positions, 'k': opts['k'], 'probes': list(probes), 'hidden': hidden,
        'dropout': dropout, 'lr': lr, 'epochs': epochs, 'batch': batch, 'seeds': opts['seeds'],
        'max_iter': max_iter, 'normalize': normalize
    }
    report = RunReport(command=COMMAND_LAYER_SCAN, config=config)
    workers = min(util.get_max_workers(), len(layers))
    LOGGER.info(f'scanning layers {layers} for {list(modes)} with {workers} worker(s)')
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_layer = list(pool.map(partial(_scan_layer, m, modes=modes, opts=opts), layers))
    for rows in per_layer:
        for context, est in rows:
            report.add_row(est, **context)
    report.summary = {'argmax_layer': _argmax(report, 'layer')}
    LOGGER.info(f'argmax layer per metric: {report.summary["argmax_layer"]}')
    return finish_report(report, timer, out)


def _scan_checkpoint(item, layer, mode, opts):
    index, path = item
    m = _load_checked_manifest(path)
    fit, ev = half_split(m.records)
    resolved = _resolve_layer(m, layer)
    return [
        (dict({'checkpoint': index, 'layer': resolved}, **context), est)
        for context, est in _estimate_rows(mode, fit, ev, resolved, opts)
    ]


def cmd_checkpoint_scan(manifests, steps=None, baseline=None, layer=None, mode=MODE_SHIFT,
                        shift_frames=DEFAULT_SHIFT_FRAMES, mask_period=DEFAULT_MASK_PERIOD,
                        mask_frames=DEFAULT_MASKED_PER_PERIOD, positions='masked', k=DEFAULT_NUM_CLUSTERS,
                        probes=DEFAULT_PROBES, hidden=512, dropout=0.1, lr=0.1, epochs=10, batch=256,
                        seeds=DEFAULT_SEEDS, max_iter=DEFAULT_MAX_ITER, normalize=False, out=None):
    """
    One estimate per pre-training checkpoint (one manifest each). Every
    manifest is bisected by sorted utt_id into fit and eval halves. k and
    mask_frames may list several values, giving one curve per variant.

    Args:
        manifests (list): manifest paths in checkpoint order
        steps (list): x-axis labels, one per manifest; defaults to indices
        baseline (int): checkpoint index whose value is subtracted into an
            improvement_bits column

    Raises:
        (DataError): for mismatched steps or an out-of-range baseline
        (ManifestError): if a manifest holds fewer than 2 utterances
    """
    timer = timing.Timer()
    timer.start()
    manifests = [os.path.abspath(p) for p in manifests]
    if not manifests:
        raise DataError('checkpoint-scan needs at least one manifest')
    steps = list(range(len(manifests))) if steps is None else util.parse_int_list(steps)
    if len(steps) != len(manifests):
        raise DataError(f'{len(steps)} steps given for {len(manifests)} manifests')
    if baseline is not None and not 0 <= baseline < len(manifests):
        raise DataError(f'baseline index {baseline} is outside [0, {len(manifests)})')
    opts = _options(shift_frames, mask_period, mask_frames, positions, k, max_iter, normalize, seeds,
                    _probe_opts(probes, hidden, dropout, lr, epochs, batch))
    config = {
        'manifests': manifests, 'steps': steps, 'baseline': baseline, 'layer': layer, 'mode': mode,
        'shift_frames': shift_frames, 'mask_period': mask_period, 'mask_frames': opts['mask_frames'],
        'positions': positions, 'k': opts['k'], 'probes': list(probes), 'hidden': hidden,
        'dropout': dropout, 'lr': lr, 'epochs': epochs, 'batch': batch, 'seeds': opts['seeds'],
        'max_iter': max_iter, 'normalize': normalize
    }
    report = RunReport(command=COMMAND_CHECKPOINT_SCAN, config=config)
    workers = min(util.get_max_workers(), len(manifests))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_checkpoint = list(pool.map(
            partial(_scan_checkpoint, layer=layer, mode=mode, opts=opts), enumerate(manifests)))
    for rows in per_checkpoint:
        for context, est in rows:
            report.add_row(est, step=steps[context['checkpoint']], **context)
    if baseline is not None:
        reference = {
            _metric_key(r): r['estimate'].value_bits for r in report.rows if r['checkpoint'] == baseline
        }
        for row in report.rows:
            row['improvement_bits'] = row['estimate'].value_bits - reference[_metric_key(row)]
    report.summary = {'best_checkpoint': _argmax(report, 'checkpoint')}
    return finish_report(report, timer, out)


def replay_report(report, command_fn):
    """
    Re-runs a report's command from its embedded config and compares the
    canonical JSON of both runs.

    Returns:
        (RunReport): the fresh run

    Raises:
        (ValidationFailure): if the canonical forms differ
    """
    fresh = command_fn(**report.config)
    if fresh.canonical_json() != report.canonical_json():
        raise ValidationFailure(f'replaying {report.command} did not reproduce the report')
    LOGGER.info(f'replay of {report.command} reproduced the report exactly')
    return fresh


def cmd_replay(report, commands, out=None):
    timer = timing.Timer()
    timer.start()
    original = load_report(report)
    if original.command not in commands:
        raise DataError(f'cannot replay unknown command \'{original.command}\'')
    current = version.get_library_identifier()
    if original.version != current:
        release = version.get_version(version.parse_library_identifier(original.version))
        released = f'released {release["CreatedDate"]}' if release else 'unknown release'
        raise ValidationFailure(
            f'report was produced by {original.version} ({released}); installed is {current}')
    replay_report(original, commands[original.command])
    result = RunReport(
        command=COMMAND_REPLAY,
        config={'report': os.path.abspath(report)},
        summary={'replayed': original.command, 'identical': True}
    )
    return finish_report(result, timer, out)
