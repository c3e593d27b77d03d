from .basic import aggregate, read_external_scores, snr_db
from .estoi import estoi
from .report import HIGHER_IS_BETTER, KNOWN_METRICS, MetricReport, MetricValue, read_results_csv
from .srmr import modulation_energies, srmr
from .wer import TranscriptPair, edit_ops, normalize, read_transcripts, wer

__all__ = [
    "HIGHER_IS_BETTER",
    "KNOWN_METRICS",
    "MetricReport",
    "MetricValue",
    "TranscriptPair",
    "aggregate",
    "edit_ops",
    "estoi",
    "modulation_energies",
    "normalize",
    "read_external_scores",
    "read_results_csv",
    "read_transcripts",
    "snr_db",
    "srmr",
    "wer",
]
