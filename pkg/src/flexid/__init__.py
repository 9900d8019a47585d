"""Dual-stream identity injection on a toy flow-matching sampler.

Two streams carry a reference identity into generation: a semantic
projector adds identity tokens residually to the prompt context, and a
visual anchor injects identity keys/values through decoupled
cross-attention.  A context-aware gate modulates both stream weights
per step from the prompt's edit intent and the sampling time.
"""

from .anchor import (AnchorProjection, IdentityReference, VisualIdentityEmbedding,
                     anchor_projection, build_identity_embedding, decoupled_cross_attention)
from .checkpoint import load_checkpoint, save_checkpoint, train_key
from .config import RunConfig, load_run_config, load_sweep_grid
from .csvio import export_csv, schedule_csv, trace_csv
from .errors import (ConfigError, ContractError, DictionaryParseError, DimensionError,
                     FlexIDError, IdentityLookupError, TrainingDivergedError, ValidationError)
from .gating import (GatingConfig, ScheduleSample, adjustment_factors, full_schedule,
                     static_schedule, temporal_weights, weights_at)
from .intent import (EditDictionary, IntentResult, Prompt, default_dictionary_path,
                     detect_intent, load_dictionary, normalize_prompt)
from .metrics import attr_adherence, id_similarity
from .model import ArchConfig, TrainedStack, forward_velocity, init_params
from .optim import AdamState, adam_step
from .pipeline import GenerationTrace, LatentSample, euler_sample, flexid_generate
from .projector import (ContextEmbedding, SemanticIdentityDelta, VisualFeatures,
                        extract_visual_features, project, residual_inject)
from .rng import RngStream
from .sweep import EvalReport, RunRecord, report_csv, resolve_reference, run_sweep
from .tensor import (Tape, Tensor, backward, matmul, scaled_dot_attention, softmax_rows)
from .training import TrainConfig, train
from .world import (SyntheticWorld, WorldConfig, attribute_from_prompt, clean_appearance,
                    make_world, sample_dataset)

__version__ = "0.1.0"
