"""
The oracle-backed acceptance suite behind `miprobe synth-validate`. Every
check compares an estimator against a synthetic distribution whose mutual
information is known exactly.
"""
import os
import shutil
import tempfile
import numpy as np
from functools import partial
from miprobe.cli.commands import (
    cmd_layer_scan, replay_report, COMMAND_SYNTH_VALIDATE, MODE_SUPERVISED, MODE_SHIFT, finish_report
)
from miprobe.cli.report import RunReport, load_report, REPORT_NAME
from miprobe.estimators.cluster import fit_kmeans
from miprobe.estimators.mi import (
    supervised_lower_bound, unsupervised_lower_bound, run_seeded, DEFAULT_SEEDS
)
from miprobe.estimators.probe import ProbeConfig, ProbeModel, init_params, gradient_check, PROBE_LOGISTIC, PROBE_MLP
from miprobe.formats.fmat import FeatureMatrix, load_feature_matrix, store_feature_matrix
from miprobe.formats.labels import FrameLabels, load_labels, store_labels
from miprobe.oracle.joint import JointTable, exact_mi_bits, mixture_channel
from miprobe.oracle.sampling import EmbeddingSpec, sample_labeled, sample_view_pair
from miprobe.oracle.corpus import layered_lagged_corpus, export_corpus
from miprobe.views.mask import block_mask_spec, mask_ratio
from miprobe.common import log, timing

LOGGER = log.get_logger()
FULL_FRAMES = 50000
QUICK_DIVISOR = 10
FULL_TOLERANCE, QUICK_TOLERANCE = 0.05, 0.15
UPPER_MARGIN = 0.02
SEED_VARIANCE_LIMIT = 4e-4
GRADIENT_LIMIT = 1e-4
# small enough that finite differences rarely straddle a ReLU kink
MLP_GRADIENT_EPSILON = 1e-6
INERTIA_TOLERANCE = 1e-9
MONOTONE_FIDELITIES = (0.5, 0.7, 0.9, 1.0)
BOUND_CHANNELS = 20
ROUND_TRIPS = 1000


class SuiteContext():
    """Scale and seed shared by every check in one run."""
    def __init__(self, quick, seed, workdir):
        self.quick = quick
        self.seed = seed
        self.workdir = workdir
        self.frames = FULL_FRAMES // QUICK_DIVISOR if quick else FULL_FRAMES
        self.tolerance = QUICK_TOLERANCE if quick else FULL_TOLERANCE
        self.estimates = []
        self.shared = {}

    def data_seed(self, offset):
        return self.seed * 1000 + offset

    def keep(self, name, estimate):
        self.estimates.append((name, estimate))
        return estimate


def _result(name, passed, detail):
    LOGGER.info(f'check {name}: {"PASS" if passed else "FAIL"} ({detail})')
    return {'name': name, 'passed': bool(passed), 'detail': detail}


def check_exact_mi(ctx):
    cases = [
        ([[0.25, 0.25], [0.25, 0.25]], 0.0),
        ([[0.5, 0.0], [0.0, 0.5]], 1.0),
        ([[0.4, 0.1], [0.1, 0.4]], 0.278072)
    ]
    got = [exact_mi_bits(JointTable(p)) for p, _ in cases]
    passed = all(abs(g - want) < 1e-6 for g, (_, want) in zip(got, cases))
    return _result('exact_mi_oracle', passed, f'values {[round(g, 6) for g in got]}')


def _labeled_sets(ctx, joint, embed, offset):
    fit = sample_labeled(joint, embed, ctx.frames, ctx.data_seed(offset))
    ev = sample_labeled(joint, embed, ctx.frames, ctx.data_seed(offset + 1))
    return [(fit[0].values, fit[1])], [(ev[0].values, ev[1])], fit[2]


def _view_sets(ctx, joint, embed_a, embed_b, offset):
    fit = sample_view_pair(joint, embed_a, embed_b, ctx.frames, ctx.data_seed(offset))
    ev = sample_view_pair(joint, embed_a, embed_b, ctx.frames, ctx.data_seed(offset + 1))
    return [(fit[0].values, fit[1].values)], [(ev[0].values, ev[1].values)], fit[2]


def _supervised(fit, ev, kind, seed):
    return supervised_lower_bound(fit, ev, ProbeConfig(kind=kind, seed=seed))


def _unsupervised(fit, ev, k, seed):
    return unsupervised_lower_bound(fit, ev, k, ProbeConfig(seed=seed))


def check_supervised_recovery(ctx):
    s = 10
    fit, ev, mi = _labeled_sets(ctx, mixture_channel(s, 1.0), EmbeddingSpec.separable(s), 10)
    est = ctx.keep('supervised_recovery', run_seeded(partial(_supervised, fit, ev, PROBE_MLP), DEFAULT_SEEDS))
    passed = mi - ctx.tolerance <= est.value_bits <= mi + UPPER_MARGIN
    return _result('supervised_recovery', passed, f'{est.value_bits:.6f} bits vs exact {mi:.6f}')


def _identical_streams(ctx):
    if 'identical' not in ctx.shared:
        s = 5
        embed_a = EmbeddingSpec.separable(s, rotation_seed=1)
        embed_b = EmbeddingSpec.separable(s, rotation_seed=2)
        fit, ev, mi = _view_sets(ctx, mixture_channel(s, 1.0), embed_a, embed_b, 20)
        est = run_seeded(partial(_unsupervised, fit, ev, s), DEFAULT_SEEDS)
        ctx.shared['identical'] = (ctx.keep('unsupervised_recovery', est), mi)
    return ctx.shared['identical']


def check_unsupervised_recovery(ctx):
    est, mi = _identical_streams(ctx)
    passed = mi - ctx.tolerance <= est.value_bits <= mi + UPPER_MARGIN
    return _result('unsupervised_recovery', passed, f'{est.value_bits:.6f} bits vs exact {mi:.6f}')


def check_independence_null(ctx):
    fit, ev, _ = _labeled_sets(ctx, mixture_channel(10, 0.0), EmbeddingSpec.separable(10), 30)
    sup = ctx.keep('null_supervised', run_seeded(partial(_supervised, fit, ev, PROBE_LOGISTIC), DEFAULT_SEEDS))
    embed = EmbeddingSpec.separable(5)
    fit, ev, _ = _view_sets(ctx, mixture_channel(5, 0.0), embed, embed, 40)
    unsup = ctx.keep('null_unsupervised', run_seeded(partial(_unsupervised, fit, ev, 5), DEFAULT_SEEDS))
    passed = abs(sup.value_bits) <= ctx.tolerance and abs(unsup.value_bits) <= ctx.tolerance
    return _result(
        'independence_null', passed,
        f'supervised {sup.value_bits:.6f}, unsupervised {unsup.value_bits:.6f} bits')


def check_bound_property(ctx):
    """
    Neither bound may exceed the exact mutual information on random mixture
    channels. The unsupervised bound is checked at k=S and at k=2S.
    """
    rng = np.random.default_rng([ctx.seed, 5])
    worst_sup = worst_unsup = -np.inf
    for i in range(BOUND_CHANNELS):
        s = int(rng.integers(2, 7))
        joint = mixture_channel(s, float(rng.random()))
        embed = EmbeddingSpec.separable(s)
        fit, ev, mi = _labeled_sets(ctx, joint, embed, 100 + 4 * i)
        worst_sup = max(worst_sup, _supervised(fit, ev, PROBE_LOGISTIC, 0).value_bits - mi)
        fit, ev, mi = _view_sets(ctx, joint, embed, embed, 102 + 4 * i)
        for k in (s, 2 * s):
            worst_unsup = max(worst_unsup, _unsupervised(fit, ev, k, 0).value_bits - mi)
    passed = worst_sup <= ctx.tolerance and worst_unsup <= ctx.tolerance
    return _result(
        'bound_property', passed,
        f'largest excess over exact MI: supervised {worst_sup:.6f}, unsupervised {worst_unsup:.6f} bits')


def check_monotone_ordering(ctx):
    s = 4
    embed = EmbeddingSpec.separable(s)
    sup, unsup = [], []
    for i, p in enumerate(MONOTONE_FIDELITIES):
        joint = mixture_channel(s, p)
        fit, ev, _ = _labeled_sets(ctx, joint, embed, 200 + 4 * i)
        sup.append(ctx.keep(f'monotone_supervised_p{p}', _supervised(fit, ev, PROBE_LOGISTIC, 0)).value_bits)
        fit, ev, _ = _view_sets(ctx, joint, embed, embed, 202 + 4 * i)
        unsup.append(ctx.keep(f'monotone_unsupervised_p{p}', _unsupervised(fit, ev, s, 0)).value_bits)
    passed = all(np.diff(sup) > 0) and all(np.diff(unsup) > 0)
    return _result(
        'monotone_ordering', passed,
        f'supervised {[round(v, 4) for v in sup]}, unsupervised {[round(v, 4) for v in unsup]}')


def check_seed_variance(ctx):
    est, _ = _identical_streams(ctx)
    return _result('seed_variance', est.seed_variance < SEED_VARIANCE_LIMIT, f'variance {est.seed_variance:.3e}')


def check_masking_constants(ctx):
    ratios = {T: mask_ratio(block_mask_spec(T)) for T in (40, 80, 4000, 25)}
    passed = all(ratios[T] == 0.75 for T in (40, 80, 4000)) and ratios[25] == 0.6
    return _result('masking_constants', passed, f'ratios {ratios}')


def check_gradients(ctx):
    worst = {PROBE_LOGISTIC: 0.0, PROBE_MLP: 0.0}
    for i in range(5):
        rng = np.random.default_rng([ctx.seed, 9, i])
        features = rng.normal(size=(32, 6))
        targets = rng.integers(0, 4, size=32)
        for kind, epsilon in ((PROBE_LOGISTIC, 1e-4), (PROBE_MLP, MLP_GRADIENT_EPSILON)):
            cfg = ProbeConfig(kind=kind, hidden_dim=8, seed=ctx.data_seed(i))
            params = init_params(kind, 6, 4, cfg)
            # non-zero biases exercise every gradient term
            for name in params:
                if params[name].ndim == 1:
                    params[name] = rng.normal(scale=0.1, size=params[name].shape)
            model = ProbeModel(kind=kind, params=params, num_classes=4)
            worst[kind] = max(worst[kind], gradient_check(model, features, targets, epsilon))
    passed = all(v < GRADIENT_LIMIT for v in worst.values())
    return _result('probe_gradients', passed, f'max relative errors {worst}')


def check_kmeans(ctx):
    monotone = True
    for i in range(10):
        data = np.random.default_rng([ctx.seed, 10, i]).normal(size=(200, 4))
        history = fit_kmeans(data, k=5, seed=i).inertia_history
        monotone &= bool(np.all(np.diff(history) <= INERTIA_TOLERANCE))
    points = np.repeat(np.array([[0.0, 0.0], [3.0, 1.0], [-2.0, 4.0]]), 10, axis=0)
    model = fit_kmeans(points, k=3, seed=ctx.seed)
    recovered = model.inertia == 0.0 and sorted(map(tuple, model.centroids.tolist())) == sorted(
        map(tuple, np.unique(points, axis=0).tolist()))
    data = np.random.default_rng([ctx.seed, 11]).normal(size=(300, 3))
    deterministic = np.array_equal(
        fit_kmeans(data, k=7, seed=3).centroids, fit_kmeans(data, k=7, seed=3).centroids)
    return _result(
        'kmeans', monotone and recovered and deterministic,
        f'monotone={monotone}, recovered={recovered}, deterministic={deterministic}')


def _layer_scan_report(ctx):
    if 'layer_scan' not in ctx.shared:
        corpus = layered_lagged_corpus(
            mixture_channel(4, 0.9), EmbeddingSpec.separable(4), n_utts=8,
            frames_per_utt=ctx.frames // 8, shift=3, seed=ctx.data_seed(300))
        manifest = export_corpus(corpus, os.path.join(ctx.workdir, 'layers'))
        report = cmd_layer_scan(
            manifest, modes=[MODE_SUPERVISED, MODE_SHIFT], k=[4], seeds=[0],
            out=os.path.join(ctx.workdir, 'layer_scan'))
        ctx.shared['layer_scan'] = report
    return ctx.shared['layer_scan']


def check_layer_argmax(ctx):
    argmax = _layer_scan_report(ctx).summary['argmax_layer']
    passed = bool(argmax) and all(layer == 2 for layer in argmax.values())
    return _result('layer_scan_argmax', passed, f'argmax layers {argmax}')


def check_replay(ctx):
    _layer_scan_report(ctx)
    saved = load_report(os.path.join(ctx.workdir, 'layer_scan', REPORT_NAME))
    try:
        replay_report(saved, cmd_layer_scan)
        passed = True
    except Exception as e:
        LOGGER.error(f'replay failed: {e.__class__.__name__}: {str(e)}')
        passed = False
    return _result('report_replay', passed, 'layer-scan report replayed from its embedded config')


def check_round_trip(ctx):
    rng = np.random.default_rng([ctx.seed, 13])
    root = os.path.join(ctx.workdir, 'round_trip')
    failures = 0
    for i in range(ROUND_TRIPS):
        shape = tuple(int(v) for v in rng.integers(1, 9, size=2))
        matrix = FeatureMatrix(rng.normal(size=shape).astype(np.float32))
        path = os.path.join(root, f'{i}.fmat')
        store_feature_matrix(matrix, path)
        failures += load_feature_matrix(path) != matrix
        k = int(rng.integers(1, 11))
        labels = FrameLabels(rng.integers(0, k, size=int(rng.integers(0, 9))), k)
        path = os.path.join(root, f'{i}.lab')
        store_labels(labels, path)
        failures += load_labels(path) != labels
    return _result('format_round_trip', failures == 0, f'{failures} mismatches over {ROUND_TRIPS} pairs')


CHECKS = [
    check_exact_mi,
    check_supervised_recovery,
    check_unsupervised_recovery,
    check_independence_null,
    check_bound_property,
    check_monotone_ordering,
    check_seed_variance,
    check_masking_constants,
    check_gradients,
    check_kmeans,
    check_layer_argmax,
    check_replay,
    check_round_trip
]


def run_checks(quick=False, seed=0, checks=None):
    """
    Runs the acceptance checks in a scratch directory.

    Returns:
        results, estimates (tuple): check result dicts and the
            (name, MIEstimate) pairs the checks produced
    """
    workdir = tempfile.mkdtemp()
    try:
        ctx = SuiteContext(quick, seed, workdir)
        results = []
        for check in checks or CHECKS:
            with timing.Timer() as timer:
                try:
                    result = check(ctx)
                except Exception as e:
                    LOGGER.error(f'{check.__name__} raised {e.__class__.__name__}: {str(e)}')
                    result = _result(check.__name__, False, f'raised {e.__class__.__name__}')
            result['duration_secs'] = timer.duration
            LOGGER.info(f'check {result["name"]} took {timer.duration:.1f}s')
            results.append(result)
        return results, ctx.estimates
    finally:
        shutil.rmtree(workdir)


def cmd_synth_validate(quick=False, seed=0, out=None):
    """
    Runs every oracle-backed acceptance check. With quick, frame counts drop
    tenfold and tolerances widen to 0.15 bits. The report fails (exit 1)
    if any check fails.
    """
    timer = timing.Timer()
    timer.start()
    report = RunReport(command=COMMAND_SYNTH_VALIDATE, config={'quick': quick, 'seed': seed})
    results, estimates = run_checks(quick, seed)
    report.checks = results
    for name, est in estimates:
        report.add_row(est, check=name)
    failed = [c['name'] for c in results if not c['passed']]
    report.summary = {'passed': len(results) - len(failed), 'failed': failed}
    if failed:
        LOGGER.error(f'synth-validate failed checks: {failed}')
    return finish_report(report, timer, out)
