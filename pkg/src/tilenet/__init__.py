"""tilenet: framed-tile image-class specs compiled into exact network weights.

The pipeline: declare image classes as framed tiles grouped into
features (`model`), evaluate the piecewise-linear detector scores that
characterize membership (`scores`), compile networks whose outputs equal
those scores (`compiler`), generate label-verified synthetic datasets
(`datagen`), and check every claim numerically (`verify`).
"""

from .errors import DimensionError, FileFormatError, GenerationError, SpecError
from .tensor import (
    ImageMatrix,
    ConvFilter,
    ConvLayer,
    DenseLayer,
    Network,
    relu,
    softmax,
    conv2d_valid,
    conv_layer_forward,
    flatten,
    unflatten,
    dense_forward,
    network_forward,
    forward_batch,
    classify,
    classify_batch,
)
from .model import (
    FramedTile,
    Feature,
    ImageSpec,
    ImageClassSpec,
    NOT_IN_ANY_CLASS,
    AMBIGUOUS,
    support,
    tile_distance,
    tile_distance_map,
    contains_tile,
    contains_feature,
    contains_image,
    feature_presence,
    class_membership,
    complexity,
    load_spec,
    save_spec,
    spec_from_data,
    spec_to_data,
    spec_digest,
)
from .scores import (
    region_index,
    tile_score,
    feature_score,
    image_score,
    image_score_sum,
)
from .compiler import (
    CompiledArtifact,
    ParamReport,
    compile_tile_network,
    compile_feature_network,
    compile_min_network,
    compile_classifier,
    compile_shallow_classifier,
    param_report,
    network_counts,
    classifier_bounds,
)
from .datagen import (
    GenConfig,
    Dataset,
    gen_background,
    paste_tile,
    gen_sample,
    gen_dataset,
    ingest_tiles,
    save_dataset,
    load_dataset,
    export_pgm,
)
from .weights import save_weights, load_weights
from .rng import SplitMix64, derive_seed
from .verify import run_verification, CheckResult

__version__ = "0.1.0"
