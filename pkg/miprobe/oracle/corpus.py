"""
Synthetic corpora with known mutual information, written to disk in the
same FMAT + label + manifest layout the command line consumes.
"""
import os
import numpy as np
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple
from miprobe.oracle import OracleError
from miprobe.oracle.joint import exact_mi_bits
from miprobe.oracle.sampling import (
    sample_labeled, sample_view_pair, sample_lagged_symbols, gaussian_noise,
    STREAM_NOISE_A, STREAM_LAYER_BASE
)
from miprobe.formats.fmat import store_feature_matrix
from miprobe.formats.labels import FrameLabels, store_labels
from miprobe.formats.manifest import (
    UtteranceRecord, DatasetManifest, store_manifest, VIEW_PLAIN, VIEW_MASKED,
    VIEW_UNMASKED, SPLIT_FIT, SPLIT_EVAL, DEFAULT_FRAME_PERIOD_MS
)
from miprobe.common import log

LOGGER = log.get_logger()
MANIFEST_NAME = 'manifest.json'
DEFAULT_LAYER = 1


@dataclass(frozen=True, eq=False)
class SyntheticUtterance:
    utt_id: str
    split: str
    features: Dict[Tuple[int, str], np.ndarray]
    labels: Optional[FrameLabels] = None


@dataclass(frozen=True, eq=False)
class SyntheticCorpus:
    utterances: Tuple[SyntheticUtterance, ...]
    # exact MI of the symbol-level variables the corpus was drawn from
    exact_mi_bits: float
    metadata: Dict = field(default_factory=dict)


def _utt_id(idx):
    return f'utt{idx:05d}'


def _splits(n_utts, single_split):
    if single_split is not None:
        return [single_split] * n_utts
    if n_utts < 2:
        raise OracleError(f'a fit/eval corpus needs at least 2 utterances, got {n_utts}')
    half = n_utts // 2
    return [SPLIT_FIT] * half + [SPLIT_EVAL] * (n_utts - half)


def _chunks(n_utts, frames_per_utt):
    if n_utts < 1 or frames_per_utt < 1:
        raise OracleError(f'need n_utts >= 1 and frames_per_utt >= 1, got {n_utts}, {frames_per_utt}')
    return [slice(i * frames_per_utt, (i + 1) * frames_per_utt) for i in range(n_utts)]


def labeled_corpus(joint, embed, n_utts, frames_per_utt, seed=0, layer=DEFAULT_LAYER, single_split=None):
    """
    Plain-view features with frame labels drawn through sample_labeled.
    Unless single_split is given, the first half of the utterances fit and
    the rest evaluate.
    """
    splits = _splits(n_utts, single_split)
    chunks = _chunks(n_utts, frames_per_utt)
    features, labels, mi = sample_labeled(joint, embed, n_utts * frames_per_utt, seed)
    utterances = tuple(
        SyntheticUtterance(
            utt_id=_utt_id(i),
            split=splits[i],
            features={(layer, VIEW_PLAIN): features.values[chunk]},
            labels=FrameLabels(labels.ids[chunk], labels.num_classes)
        )
        for i, chunk in enumerate(chunks)
    )
    return SyntheticCorpus(utterances, mi, {'kind': 'labeled', 'seed': seed})


def view_pair_corpus(joint, embed_a, embed_b, n_utts, frames_per_utt, seed=0, layer=DEFAULT_LAYER,
                     single_split=None):
    """
    Masked-pass (view a) and unmasked-pass (view b) dumps whose aligned
    frames carry symbol pairs drawn from the joint.
    """
    splits = _splits(n_utts, single_split)
    chunks = _chunks(n_utts, frames_per_utt)
    za, zb, mi = sample_view_pair(joint, embed_a, embed_b, n_utts * frames_per_utt, seed)
    utterances = tuple(
        SyntheticUtterance(
            utt_id=_utt_id(i),
            split=splits[i],
            features={
                (layer, VIEW_MASKED): za.values[chunk],
                (layer, VIEW_UNMASKED): zb.values[chunk]
            }
        )
        for i, chunk in enumerate(chunks)
    )
    return SyntheticCorpus(utterances, mi, {'kind': 'view_pair', 'seed': seed})


def layered_lagged_corpus(channel, embed, n_utts, frames_per_utt, shift, seed=0, num_layers=3,
                          signal_layer=2, noise_scale=1.0, single_split=None):
    """
    Multi-layer plain dumps of a lagged symbol stream: `signal_layer`
    embeds the symbols and every other layer holds independent Gaussian
    noise of the same dimension. Labels are the symbols themselves.

    Args:
        channel (JointTable): square channel with equal marginals
        embed (EmbeddingSpec): embeds the signal layer
        n_utts (int): utterance count
        frames_per_utt (int): T per utterance, > shift
        shift (int): the lag between dependent frames
        seed (int): the sampling seed
        num_layers (int): layers 1..num_layers are written
        signal_layer (int): the layer carrying the symbols
        noise_scale (float): standard deviation of the noise layers
        single_split (str): tag every record with this split instead of
            a half fit/eval division

    Returns:
        (SyntheticCorpus): exact_mi_bits is the shift-pair MI of the channel
    """
    if not 1 <= signal_layer <= num_layers:
        raise OracleError(f'signal_layer must lie in [1, {num_layers}], got {signal_layer}')
    if frames_per_utt <= shift:
        raise OracleError(f'frames_per_utt ({frames_per_utt}) must exceed shift ({shift})')
    splits = _splits(n_utts, single_split)
    chunks = _chunks(n_utts, frames_per_utt)
    # each utterance is its own stream, so pairs never straddle utterances
    symbols = np.concatenate([
        sample_lagged_symbols(channel, frames_per_utt, shift, seed=seed * n_utts + i)
        for i in range(n_utts)
    ])
    total = n_utts * frames_per_utt
    layers = {}
    for layer in range(1, num_layers + 1):
        if layer == signal_layer:
            layers[layer] = embed.embed(symbols, seed, STREAM_NOISE_A)
        else:
            layers[layer] = noise_scale * gaussian_noise(seed, STREAM_LAYER_BASE + layer, (total, embed.dim))
    utterances = tuple(
        SyntheticUtterance(
            utt_id=_utt_id(i),
            split=splits[i],
            features={(layer, VIEW_PLAIN): values[chunk] for layer, values in layers.items()},
            labels=FrameLabels(symbols[chunk], channel.shape[0])
        )
        for i, chunk in enumerate(chunks)
    )
    metadata = {'kind': 'layered_lagged', 'seed': seed, 'shift': shift, 'signal_layer': signal_layer}
    return SyntheticCorpus(utterances, exact_mi_bits(channel), metadata)


def export_corpus(corpus, out_dir, frame_period_ms=DEFAULT_FRAME_PERIOD_MS):
    """
    Writes every dump as <out_dir>/<utt_id>/L<layer>_<view>.fmat, labels as
    <out_dir>/<utt_id>.lab and the manifest as <out_dir>/manifest.json.

    Returns:
        (str): the manifest path
    """
    records = []
    for utt in corpus.utterances:
        feature_paths = {}
        for (layer, view), values in sorted(utt.features.items()):
            path = os.path.join(out_dir, utt.utt_id, f'L{layer}_{view}.fmat')
            store_feature_matrix(values, path)
            feature_paths[(layer, view)] = os.path.abspath(path)
        label_path = None
        if utt.labels is not None:
            label_path = os.path.abspath(os.path.join(out_dir, f'{utt.utt_id}.lab'))
            store_labels(utt.labels, label_path)
        records.append(UtteranceRecord(
            utt_id=utt.utt_id,
            split=utt.split,
            feature_paths=feature_paths,
            label_path=label_path,
            frame_period_ms=frame_period_ms
        ))
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    store_manifest(DatasetManifest(tuple(records), os.path.abspath(out_dir)), manifest_path)
    LOGGER.info(f'exported {len(records)} synthetic utterances to {manifest_path}')
    return manifest_path
