"""Multi-channel speaker diarization with filter-and-sum spatial embeddings."""

from .annotation import Annotation, Region
from .array import ArrayGeometry, DirectionGrid, default_geometry, steering, steering_matrix
from .diarization import (ClusterLabels, NMESpectralClustering, SegmentList, assign_primary_labels,
                          cosine_similarity_matrix, late_fuse, nme_sc, uniform_segments)
from .exceptions import BeamdiarError, DataError, NumericalError
from .fsb import (DesiredResponse, FilterAndSumBeamformer, FilterBank, apply_filter_and_sum, design_bank,
                  design_filter, spatial_response)
from .fusion import fuse, fuse_campaign
from .osd import (AfsbConfig, AfsbTransformer, AfsbWeights, OverlapDetector, afsb_forward, assign_second_speaker,
                  decode_overlaps, detect_overlap, detection_metrics, load_external_overlaps)
from .pipeline import run_pipeline
from .scoring import compute_der, emit_rttm, parse_rttm
from .signal import MultiChannelAudio, load_wav, write_wav
from .simulator import SceneSpec, Source, render
from .svector import SVector, SVectorExtractor, extract_svector

__version__ = "0.1.0"
