"""meshpose: render-and-compare 3D pose estimation with neural mesh templates
trained from foundation-feature pseudo-correspondences."""

from .errors import (
    BadDimensionsError,
    BadMagicError,
    DataError,
    DegenerateProjectionError,
    FormatError,
    MeshposeError,
    TruncatedFileError,
    ValidationError,
)
from .geometry import (
    Camera,
    Mesh,
    Pose,
    VisibilityRecord,
    canonicalize_pose,
    cuboid,
    geodesic_distance,
    mesh_from_text,
    mesh_to_text,
    mirror_pairs,
    pose_to_rotation,
    project_vertices,
    rasterize_visibility,
    read_mesh,
    rotation_to_angles,
    write_mesh,
)
from .featureio import (
    CorpusManifest,
    FeatureMap,
    ForegroundMask,
    ManifestEntry,
    activation_mask,
    normalize_cells,
    read_feature_map,
    read_manifest,
    read_mask,
    write_feature_map,
    write_manifest,
    write_mask,
)
from .correspondence import (
    CorrespondenceSet,
    ViewBank,
    build_view_bank,
    generate,
    match_raw,
    read_correspondences,
    refine,
    vote_pose,
    write_correspondences,
)
from .rendercompare import (
    NeuralMesh,
    OptimOptions,
    PoseEstimate,
    PoseGrid,
    SoftAssignConfig,
    TrainConfig,
    contrastive_step,
    init_candidates,
    nll,
    nll_gradient,
    nll_smooth,
    optimize_pose,
    read_checkpoint,
    read_pose_estimates,
    train,
    write_checkpoint,
    write_pose_estimates,
)
from .metrics import (
    PckReport,
    PoseEvalReport,
    median_error,
    pck,
    pck_from_counts,
    pose_accuracy,
    pose_eval,
)
from .synth import (
    DEFAULT_CAMERA,
    MirrorSpec,
    SceneGenerator,
    SynthConfig,
    generate_corpus,
    paint_vertex_map,
    render_feature_map,
    sample_pose,
)

__version__ = "0.1.0"
