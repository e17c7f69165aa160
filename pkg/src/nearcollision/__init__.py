"""Desk-scale monocular time-to-near-collision forecasting toolkit.

Pipeline: synthetic egocentric scene simulation -> LIDAR/camera
annotation -> analytic baselines and a from-scratch multi-stream
convolutional regressor -> evaluation reports.
"""

from .errors import (
    CheckpointError,
    ConfigurationError,
    FitError,
    InsufficientHistoryError,
    NearCollisionError,
    NumericalError,
    ReportError,
    ShapeError,
    TrainingError,
)
from .geometry import (
    BBox,
    CameraModel,
    PixelRange,
    Point3,
    bbox_median_range,
    camera_from_dict,
    camera_to_dict,
    load_camera,
    project_cloud,
    project_point,
)
from .scenesim import (
    Frame,
    SceneLog,
    SimConfig,
    load_scene,
    save_scene,
    simulate_scene,
)
from .annotate import (
    Dataset,
    WindowSample,
    build_dataset,
    extract_windows,
    flip_augment,
    label_frames,
    load_dataset_manifest,
    save_dataset_manifest,
    time_to_near_collision,
    weighted_sampler,
)
from .baselines import (
    ConstantPredictor,
    TtcPrediction,
    constant_baseline_fit,
    cv_predict,
    fit_velocity,
    naive_vertical_classify,
    naive_vertical_multiclass,
    time_to_radius,
    tracks_from_scene,
)
from .neural import (
    GradCheckReport,
    Hyperparams,
    Network,
    NetworkConfig,
    build_network,
    grad_check,
    load_network,
    predict_batch,
    save_network,
    train,
)
from .evaluation import (
    ClassificationScores,
    ConfusionMatrix,
    IntervalReport,
    MethodComparison,
    RegressionMetrics,
    ReportTable,
    SweepResult,
    classification_metrics,
    compare_methods,
    emit_report,
    generate_scenes,
    holdout_split,
    interval_report,
    parse_report,
    regression_metrics,
    sweep_temporal_windows,
    train_multistream,
)

__version__ = "0.1.0"
