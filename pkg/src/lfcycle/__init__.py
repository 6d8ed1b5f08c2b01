"""Self-supervised light field view synthesis with a cycle-consistent
separable-kernel interpolator, in plain numpy."""

from .lightfield import (AngularAxis, LightField, ViewTriplet, angular_crop, dense_angular_size, extract_epi,
                         extract_triplets, subsample)
from .interp import ArchConfig, InterpolatorModel, apply_separable, interpolate, predict_kernels
from .losses import (FeatureExtractor, LossWeights, cycle_loss, cycle_reconstruct, perceptual_loss,
                     reconstruction_loss, supervised_loss, total_objective)
from .metrics import EvalReport, evaluate, psnr, ssim
from .reconstruct import ReconstructionPlan, multistep_reconstruct, reconstruct, upsample_axis
from .synth import SceneSpec, TranslationOracle, gen_planar_lf, gen_two_layer_lf, translation_oracle
from .trainer import PretrainConfig, TrainConfig, TrainReport, disparity_screen, finetune, pretrain_baseline

__version__ = "0.1.0"
