import numpy as np
from miprobe.views import ViewPairing, ViewError
from miprobe.common import log

LOGGER = log.get_logger()
# 60 ms at a 20 ms frame period
DEFAULT_SHIFT_FRAMES = 3


def time_shift_pairing(T, shift_frames=DEFAULT_SHIFT_FRAMES):
    """
    Pairs each past frame t (view a) with the future frame t + shift
    (view b).

    Args:
        T (int): frames in the utterance, >= 1
        shift_frames (int): the time shift, >= 0

    Returns:
        (ViewPairing): the T - shift pairs (t, t + shift)

    Raises:
        (ViewError): for invalid arguments or when T <= shift
    """
    if T < 1:
        raise ViewError(f'T must be >= 1, got {T}')
    if shift_frames < 0:
        raise ViewError(f'shift_frames must be >= 0, got {shift_frames}')
    if T <= shift_frames:
        raise ViewError(f'no pairable frames: T={T} with shift {shift_frames}')
    index_a = np.arange(T - shift_frames)
    return ViewPairing(index_a, index_a + shift_frames, T)
