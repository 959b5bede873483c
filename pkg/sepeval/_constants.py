"""Names and default parameters."""

from typing import Iterator

# transform defaults
stft_window_size = 4096
stft_hop_size = 1024
stft_window = "hann"

# oracle defaults
irm_alpha = 2.0
mwf_iterations = 2
# diagonal loading for the per-bin C_x inverse, relative to max(1, tr(C_x) / I)
mwf_regularization = 1e-10

# evaluation defaults
filter_len = 512
eval_window_seconds = 1.0
eval_hop_seconds = 1.0
# relative diagonal loading of the Gram matrix, in units of trace / size
gram_loading = 1e-12
# error energies below this fraction of the window energy count as exactly zero
zero_energy_rtol = 1e-14

significance_threshold = 0.05
schema_version = 1

"""
The iterators below yield names only.

Stem order is fixed so that reference sets and report rows
come out in the same order on every run.
"""


def stem_iter() -> Iterator[str]:
    yield from ["vocals", "drums", "bass", "other"]


def accompaniment_stem_iter() -> Iterator[str]:
    yield from ["drums", "bass", "other"]


def target_iter() -> Iterator[str]:
    yield from ["vocals", "drums", "bass", "other", "accompaniment"]


def track_file_iter() -> Iterator[str]:
    yield from ["mixture", "drums", "bass", "other", "vocals"]


def split_iter() -> Iterator[str]:
    yield from ["train", "test"]


def metric_iter() -> Iterator[str]:
    yield from ["SDR", "ISR", "SIR", "SAR"]
