"""RoI-normalized 6D object pose parameterization, attention block, loss and metrics."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    DegenerateInputError,
    GenerationError,
    ParseError,
    ProjectionError,
    RangeError,
    RoiPoseError,
    SingularConfigurationError,
    ValidationError,
)
from .geometry import (
    CameraIntrinsics,
    Pose,
    Quaternion,
    Rect2D,
    bbox2d_of,
    matrix_to_quat,
    project_points,
    quat_to_matrix,
    rodrigues_between,
    transform_points,
)
from .roi import (
    NormalizedBox,
    NormalizedPose,
    VirtualRoICamera,
    build_virtual_camera,
    identity_area,
    infinite_homography,
    normalize_bbox,
    normalize_pose,
    recover_bbox,
    recover_pose,
    roi_axis,
    virtual_intrinsics,
)
from .attention import FeatureMap, NonLocalParams, nonlocal_bruteforce, nonlocal_forward, nonlocal_grad_check
from .loss import LossMode, RefineConfig, RefineReport, coord_loss, coord_loss_grad, refine_pose, smooth_l1
from .metrics import ModelPoints, add, add_s, auc_threshold
from .synth import SceneInstance, SynthConfig, load_model, sample_scene
