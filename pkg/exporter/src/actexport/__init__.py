"""Export per-layer CNN activations as .actv tensors plus a dataset manifest."""

__version__ = "0.1.0"

from .export import ExportError, ExportSpec, export_activations, write_actv
from .models import REGISTRY, UnknownModelError, available_nodes, get_model_entry
from .tune import TuneReport, fine_tune
